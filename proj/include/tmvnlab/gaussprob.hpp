#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace tmvnlab {

enum class ProbMethod { sov_mc, cs_quadrature, closed_form };

const char* to_string(ProbMethod m);

struct ProbEstimate {
  double value = 0.0;
  double std_error = 0.0;
  ProbMethod method = ProbMethod::closed_form;
  std::int64_t n_samples = 0;
  // Per-batch product estimates when method == sov_mc (16 entries, mean
  // equals value). Lets callers correlate two estimates computed under a
  // shared seed batch by batch. Empty for deterministic methods.
  std::vector<double> batch_values;
};

// Axis-aligned region {x : lower <= x <= upper}; entries may be infinite.
struct Rectangle {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Rectangle orthant(int d, double a = 0.0);
  void validate() const;  // throws on length mismatch or empty sides
};

// P(lower <= X <= upper) for X ~ N(0, sigma). The covariance is split into
// connected components of its nonzero pattern; singleton components are
// evaluated in closed form, larger ones by separation of variables along a
// reordered Cholesky with exponentially tilted proposals and a shifted
// rank-1 lattice rule, 16 batches for the standard error. The result is a
// deterministic function of (sigma, rect, n_samples, seed) regardless of
// thread count.
ProbEstimate rect_prob_sov(const Eigen::MatrixXd& sigma, const Rectangle& rect,
                           std::int64_t n_samples, std::uint64_t seed);

// P(X >= a 1_d) for X ~ N(0, (1-rho) I + rho 1 1^T) by adaptive quadrature
// over the shared factor w:  integral phi(w) Q((a - sqrt(rho) w)/sqrt(1-rho))^d dw.
// Deterministic to absolute tolerance 1e-10.
ProbEstimate cs_orthant_prob(int d, double rho, double a);

// P(0 <= X_1 <= delta, X_2 >= 0, ..., X_d >= 0) under the same
// compound-symmetry law, via the same shared-factor reduction.
ProbEstimate cs_strip_prob(int d, double rho, double delta);

// (x/(x^2+1) phi(x), phi(x)/x): the two-sided Mills bracket of 1 - Phi(x).
std::pair<double, double> mills_bounds(double x);

// (c1 sqrt(2 log N), sqrt(2 log N)) bracketing E[max of N iid standard
// normals]; only the upper end is a theorem, c1 is an empirical default.
std::pair<double, double> max_gaussian_bounds(int n, double c1 = 0.23);

}  // namespace tmvnlab
