#pragma once

#include <Eigen/Core>
#include <string>

namespace tmvnlab {

// Exchangeable correlation model (1-rho) I + rho 1 1^T. Smallest
// eigenvalue is 1-rho, so the matrix is positive definite on rho in (0,1).
struct CompoundSymmetry {
  int d = 0;
  double rho = 0.0;

  Eigen::MatrixXd materialize() const;
};

CompoundSymmetry compound_symmetry(int d, double rho);

// Banded nonnegative correlation matrix: unit diagonal, symmetric,
// entries(i,j) = 0 whenever |i-j| >= K, all off-diagonal entries >= 0,
// positive definite. Construction validates all of this (definiteness by
// attempted Cholesky) and throws std::invalid_argument on violation.
class CorrelationBand {
 public:
  CorrelationBand(int N, int K, const Eigen::MatrixXd& entries);

  int N() const { return N_; }
  int K() const { return K_; }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  int N_;
  int K_;
  Eigen::MatrixXd entries_;
};

struct BandStats {
  double rho_min = 0.0;  // smallest nonzero correlation strictly inside the band
  double rho_max = 0.0;  // largest off-diagonal correlation
};

// rho_min scans positions with 1 <= |i-j| <= K-1 only: positions at or
// beyond lag K are forced to zero by the band constraint and would make
// any minimum over them vacuous. Zero entries inside the band are skipped
// for the same reason. Throws if every off-diagonal entry is zero.
BandStats band_stats(const CorrelationBand& sigma);

// Keeps the three diagonal blocks over index ranges [0,K), [K,2K),
// [2K,N) and zeroes everything between blocks. Requires N >= 2K+1.
Eigen::MatrixXd block_independent_approx(const CorrelationBand& sigma);

// Largest singular value by power iteration on A^T A; relative tolerance
// 1e-10, iteration cap 10000. Deterministic start vector.
double operator_norm(const Eigen::MatrixXd& a);

struct NeumannApprox {
  int degree = 0;
  double gamma = 0.0;
  double kappa = 0.0;        // (M-m)/(M+m) for eigen-range [m, M]
  double m_min = 0.0;        // smallest eigenvalue of the input
  double error_bound = 0.0;  // kappa^(n+1)/m, bounds ||A^-1 - B_n||
  int bandwidth = 0;         // exact bandwidth of the returned matrix
  Eigen::MatrixXd matrix;
};

// Truncated Neumann series for the inverse: B_n = gamma sum_{j<=n} (I - gamma A)^j
// with gamma = 2/(M+m). Keeps bandedness: the output is (n*k)-banded when A
// is k-banded. Throws if A is not symmetric positive definite.
NeumannApprox neumann_inverse_approx(const Eigen::MatrixXd& a, int n);

struct BandedPosteriorReport {
  int r = 0;           // prior truncation bandwidth
  int n1 = 0;          // Neumann degree for the truncated prior inverse
  int m1 = 0;          // Neumann degree for the final inverse
  int bandwidth = 0;   // achieved bandwidth of the output
  double gap = 0.0;    // measured ||(Omega^-1 + Phi^T Phi)^-1 - Sigma'||
  double kappa_prior = 0.0;
  double kappa_post = 0.0;
  double lambda0 = 0.0;  // fitted off-diagonal decay |Omega_ij| <= lambda0 * alpha^|i-j|
  double alpha = 0.0;
};

struct BandedPosterior {
  Eigen::MatrixXd matrix;
  BandedPosteriorReport report;
};

// Banded SPD stand-in for the posterior covariance (Omega^-1 + Phi^T Phi)^-1,
// built in three stages: band-truncate Omega at r = 2*ceil(log(1/eps)),
// Neumann-invert to degree n0, add Phi^T Phi, Neumann-invert again to
// degree n0. Output bandwidth is at most max(n0^2 r, n0 q) for q-banded
// Phi^T Phi. Throws if Omega's off-diagonal tail does not decay (not
// approximately bandable) or if truncation destroys positive definiteness.
BandedPosterior banded_posterior_approx(const Eigen::MatrixXd& omega,
                                        const Eigen::MatrixXd& phi,
                                        double eps, int n0);

}  // namespace tmvnlab
