#pragma once

#include <Eigen/Core>

namespace tmvnlab {

// Equally spaced knots u_j = j/(N-1) on [0, 1], spacing delta = 1/(N-1).
struct BasisGrid {
  explicit BasisGrid(int n_knots);  // requires n_knots >= 2
  int N;
  double delta;
  double knot(int j) const;  // u_j; throws when j is outside 0..N-1
};

// Triangular bump (1 - |x|) on [-1, 1], zero elsewhere. Centering and
// scaling to knot j is h((x - u_j) / delta).
double hat(double x);

// Running integral of the knot-j bump: psi_j(x) = int_0^x h_j. Closed-form
// piecewise quadratic, no quadrature at runtime. Nondecreasing in x, zero
// at the origin, saturates at delta (half that for the two edge knots)
// once x clears the bump's support.
double psi(int j, double x, const BasisGrid& grid);

// Twice-integrated bump: phi_j(x) = int_0^x int_0^t h_j(u) du dt, equal to
// int_0^x (x - u) h_j(u) du after swapping the integration order. Closed-
// form piecewise cubic with phi_j'' = h_j wherever the second derivative
// exists.
double phi_basis(int j, double x, const BasisGrid& grid);

// n x N matrix with entry (i, j) = psi_j(x_i); the regression design for
// fits that are nondecreasing exactly when every coefficient is >= 0.
// Covariates must lie in [0, 1].
Eigen::MatrixXd design_monotone(const Eigen::VectorXd& xs, const BasisGrid& grid);

// Matern kernel parameters, restricted to the compact supports of the
// hyperpriors: nu in [0.5, 1], ell in [0.1, 1]. The left edge nu = 1/2 is
// the exponential kernel and anchors the distance-scaling convention.
struct MaternParams {
  double nu;
  double ell;
  void validate() const;
};

// Stationary Matern correlation at distance r >= 0:
//   k(r) = 2^(1-nu) / Gamma(nu) * s^nu * K_nu(s),  s = sqrt(2 nu) r / ell,
// with k(0) = 1 and k(r) = exp(-r / ell) at nu = 1/2.
double matern(double r, const MaternParams& p);

// Length-scale at which the correlation between the two extreme knots,
// k(1), equals target. Bisection over the support [0.1, 1]; throws when
// the target is not attainable there. k(1) is increasing in ell.
double ell_for_corr_at_one(double nu, double target);

struct PriorCovariance {
  Eigen::MatrixXd matrix;
  double jitter = 0.0;  // total diagonal boost needed for the factorization
};

// N x N kernel matrix k(u_j - u_j') over the knot grid. Verified positive
// definite at construction: on factorization failure a diagonal jitter of
// 1e-10 is added and escalated tenfold up to 1e-6 before giving up.
PriorCovariance prior_covariance(const BasisGrid& grid, const MaternParams& p);

enum class FitKind { monotone, convex };

// Pointwise values of the fitted function. The monotone form takes the N
// psi coefficients, f = xi0 + sum_j theta_j psi_j; the convex form takes
// N + 1 coefficients with the linear one first, f = xi0 + theta_0 x +
// sum_j theta_{j+1} phi_j. Either fit is nondecreasing (respectively
// convex nondecreasing) exactly when theta >= 0 elementwise.
Eigen::VectorXd evaluate_fit(double xi0, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& xs, const BasisGrid& grid,
                             FitKind kind);

}  // namespace tmvnlab
