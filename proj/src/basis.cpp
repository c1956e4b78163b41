#include "tmvnlab/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>

namespace tmvnlab {

BasisGrid::BasisGrid(int n_knots) {
  if (n_knots < 2) throw std::invalid_argument("BasisGrid: need at least two knots");
  N = n_knots;
  delta = 1.0 / (n_knots - 1);
}

double BasisGrid::knot(int j) const {
  if (j < 0 || j >= N) throw std::out_of_range("BasisGrid: knot index out of range");
  return double(j) / (N - 1);
}

double hat(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 1.0 - a : 0.0;
}

// Both integrals below split the bump at its apex: a rising edge
// (t - a)/delta on [a, m] and a falling edge (b - t)/delta on [m, b] with
// a = u_j - delta, m = u_j, b = u_j + delta, each clipped to the
// integration window [0, x].

double psi(int j, double x, const BasisGrid& grid) {
  const double d = grid.delta;
  const double m = grid.knot(j);
  double acc = 0.0;
  {
    const double a = m - d;
    const double lo = std::max(a, 0.0), hi = std::min(m, x);
    if (hi > lo) acc += ((hi - a) * (hi - a) - (lo - a) * (lo - a)) / (2 * d);
  }
  {
    const double b = m + d;
    const double lo = std::max(m, 0.0), hi = std::min(b, x);
    if (hi > lo) acc += ((b - lo) * (b - lo) - (b - hi) * (b - hi)) / (2 * d);
  }
  return acc;
}

double phi_basis(int j, double x, const BasisGrid& grid) {
  const double d = grid.delta;
  const double m = grid.knot(j);
  double acc = 0.0;
  {
    // int (x - u)(u - a)/d du, antiderivative ((x-a) v^2/2 - v^3/3)/d in v = u - a
    const double a = m - d;
    const double lo = std::max(a, 0.0), hi = std::min(m, x);
    if (hi > lo) {
      const double vl = lo - a, vh = hi - a;
      acc += ((x - a) * (vh * vh - vl * vl) / 2 - (vh * vh * vh - vl * vl * vl) / 3) / d;
    }
  }
  {
    // int (x - u)(b - u)/d du, antiderivative ((x-b) w^2/2 + w^3/3)/d in w = b - u
    const double b = m + d;
    const double lo = std::max(m, 0.0), hi = std::min(b, x);
    if (hi > lo) {
      const double wl = b - hi, wh = b - lo;
      acc += ((x - b) * (wh * wh - wl * wl) / 2 + (wh * wh * wh - wl * wl * wl) / 3) / d;
    }
  }
  return acc;
}

Eigen::MatrixXd design_monotone(const Eigen::VectorXd& xs, const BasisGrid& grid) {
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    if (!(xs[i] >= 0.0 && xs[i] <= 1.0))
      throw std::invalid_argument("design_monotone: covariates must lie in [0, 1]");
  Eigen::MatrixXd m(xs.size(), grid.N);
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    for (int j = 0; j < grid.N; ++j) m(i, j) = psi(j, xs[i], grid);
  return m;
}

void MaternParams::validate() const {
  if (!(nu >= 0.5 && nu <= 1.0))
    throw std::invalid_argument("MaternParams: smoothness must lie in [0.5, 1]");
  if (!(ell >= 0.1 && ell <= 1.0))
    throw std::invalid_argument("MaternParams: length-scale must lie in [0.1, 1]");
}

double matern(double r, const MaternParams& p) {
  p.validate();
  if (!(r >= 0.0)) throw std::invalid_argument("matern: distance must be nonnegative");
  if (r == 0.0) return 1.0;
  const double s = std::sqrt(2.0 * p.nu) * r / p.ell;
  return std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu) * std::pow(s, p.nu) *
         std::cyl_bessel_k(p.nu, s);
}

double ell_for_corr_at_one(double nu, double target) {
  const double k_lo = matern(1.0, MaternParams{nu, 0.1});
  const double k_hi = matern(1.0, MaternParams{nu, 1.0});
  if (!(target > k_lo && target < k_hi))
    throw std::domain_error(
        "ell_for_corr_at_one: target correlation not attainable on the length-scale support");
  double a = 0.1, b = 1.0;
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double mid = 0.5 * (a + b);
    (matern(1.0, MaternParams{nu, mid}) < target ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

PriorCovariance prior_covariance(const BasisGrid& grid, const MaternParams& p) {
  p.validate();
  const int n = grid.N;
  // lag i-j spans the same distance everywhere on the grid, so one kernel
  // evaluation per lag fills the whole Toeplitz matrix
  Eigen::VectorXd by_lag(n);
  by_lag[0] = 1.0;
  for (int k = 1; k < n; ++k) by_lag[k] = matern(grid.knot(k), p);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = by_lag[i - j];
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd c = m;
    if (jitter > 0.0) c.diagonal().array() += jitter;
    if (Eigen::LLT<Eigen::MatrixXd>(c).info() == Eigen::Success)
      return PriorCovariance{std::move(c), jitter};
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
  }
  throw std::runtime_error(
      "prior_covariance: matrix not positive definite even after maximal jitter");
}

Eigen::VectorXd evaluate_fit(double xi0, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& xs, const BasisGrid& grid,
                             FitKind kind) {
  const int n = grid.N;
  if (kind == FitKind::monotone) {
    if (theta.size() != n)
      throw std::invalid_argument("evaluate_fit: the monotone form needs N coefficients");
  } else if (theta.size() != n + 1) {
    throw std::invalid_argument(
        "evaluate_fit: the convex form needs N + 1 coefficients, the linear one first");
  }
  Eigen::VectorXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    double acc = xi0;
    if (kind == FitKind::monotone) {
      for (int j = 0; j < n; ++j) acc += theta[j] * psi(j, x, grid);
    } else {
      acc += theta[0] * x;
      for (int j = 0; j < n; ++j) acc += theta[j + 1] * phi_basis(j, x, grid);
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace tmvnlab
