#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "tmvnlab/gaussprob.hpp"
#include "tmvnlab/matrices.hpp"

namespace tmvnlab {

// Membership in the correlation region where the slab-mass bound chain
// closes: rho_min <= rho_max and rho_min / (2 (1 - rho_min)) >= rho_max.
// Both arguments must lie strictly inside (0, 1).
bool in_region_Q(double rho_min, double rho_max);

// Midpoint of the interval of exponents alpha for which the polynomial
// decay rate (1 - alpha) / rho_max - 2 (1 - rho_min) / rho_min stays
// positive. Throws when the interval is empty, which happens exactly on
// and outside the boundary of the region above.
double default_lemma2_alpha(double rho_min, double rho_max);

// Upper bound on P(0 <= X_1 < delta, X_2 >= 0, ..., X_d >= 0) for
// equicorrelated X with correlation rho, free parameter alpha in (0, 1):
//   delta {2 (1-alpha) rbar log(d-1)}^(-1/2) (d-1)^(-(1-alpha)/rho) + exp(-d^alpha)
// with rbar = (1-rho)/rho. At d = 2 the log factor vanishes and the bound
// is +infinity.
double lemma2_upper(int d, double rho, double delta, double alpha);

// Lower bound on P(X >= a 1_d) for the same family: with
// t = a rho^(-1/2) + (2 rbar log d)^(1/2), returns the Mills ratio bound
// t/(t^2+1) phi(t). a = 0 gives
// (2 rbar log d)^(1/2) / (2 rbar log d + 1) d^(-rbar) / (2 pi)^(1/2).
double lemma2_lower(int d, double rho, double a);

struct BoundChainReport {
  ProbEstimate alpha_hat;     // measured slab mass of the full banded matrix
  double R = 0.0;             // block ratio: strip over the product of two block orthants
  double R_prime = 0.0;       // equicorrelated comparison ratio (quadrature)
  double final_term1 = 0.0;   // C delta (log K)^(1/2) K^(-((1-alpha)/rho_max - 2 rbar_min))
  double final_term2 = 0.0;   // 4 rbar_min exp(-(K-1)^alpha) K^(2 rbar_min) log K
  double alpha_used = 0.0;
  bool in_Q = false;
  double rho_min = 0.0;
  double rho_max = 0.0;
  int N = 0;
  int K = 0;
  // smallest K in [2, 512] where final_term1 + final_term2 >= R_prime
  // under this report's (rho_min, rho_max, delta, alpha); 0 when no such
  // K was observed or when the region condition fails
  int k0_estimate = 0;
};

// Evaluates every link of the slab-mass bound chain on one banded matrix:
// the measured mass, the two-block ratio R, its equicorrelated bound R',
// and the closed-form two-term bound with C = 5 rbar_min / {(1-alpha) rbar_max}^(1/2).
// Requires N >= 2K+1 so the two leading K-blocks exist.
BoundChainReport theorem1_chain(const CorrelationBand& sigma, double delta, double alpha,
                                std::int64_t n_samples, std::uint64_t seed);

struct SlepianReport {
  double p_x = 0.0;
  double se_x = 0.0;
  double p_y = 0.0;
  double se_y = 0.0;
  double margin_se = 0.0;     // (p_y - p_x) over the combined standard error
  bool hypothesis_ok = false; // equal diagonals and x <= y elementwise off the diagonal
  bool holds = false;         // margin_se >= -4
};

// Monte Carlo check of the comparison inequality
//   P(l1 <= X_1 <= u1, X_2 >= t_2, ..., X_d >= t_d)
//     <= P(l1 <= Y_1 <= u1, Y_2 >= t_2, ..., Y_d >= t_d)
// for centered Gaussians with cov(X) below cov(Y) entrywise off the
// diagonal. upper1 = +infinity degenerates to the classical all-orthant
// comparison. Hypothesis violations are flagged in the report, not thrown;
// dimension is capped at 10 where MC margins stay informative.
SlepianReport slepian_check(const Eigen::MatrixXd& sigma_x, const Eigen::MatrixXd& sigma_y,
                            double lower1, double upper1, const Eigen::VectorXd& thresholds,
                            std::int64_t n_mc, std::uint64_t seed);

}  // namespace tmvnlab
