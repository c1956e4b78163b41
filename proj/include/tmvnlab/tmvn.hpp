#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>

#include "tmvnlab/gaussprob.hpp"
#include "tmvnlab/matrices.hpp"
#include "tmvnlab/stats.hpp"

namespace tmvnlab {

// Multivariate normal N(location, scale) truncated to the nonnegative
// orthant. The normalizing mass P(N(location, scale) >= 0) is estimated
// once at construction and cached along with its standard error; every
// density evaluation reuses it.
class TruncatedMVN {
 public:
  TruncatedMVN(Eigen::VectorXd location, Eigen::MatrixXd scale,
               std::int64_t norm_samples = 1 << 16,
               std::uint64_t seed = 0x6f727468616e74ULL);

  int dim() const { return int(location_.size()); }
  const Eigen::VectorXd& location() const { return location_; }
  const Eigen::MatrixXd& scale() const { return scale_; }
  const ProbEstimate& normalizer() const { return m_c_; }
  std::uint64_t seed() const { return seed_; }

  // log of the truncated density; -inf outside the orthant.
  double log_density(const Eigen::VectorXd& theta) const;

 private:
  Eigen::VectorXd location_;
  Eigen::MatrixXd scale_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  ProbEstimate m_c_;
  std::uint64_t seed_;
};

struct MarginalQuery {
  int k = 1;
  Eigen::VectorXd point;

  void validate(int n) const;  // requires 1 <= k <= n-1, point >= 0 of length k
};

struct GibbsResult {
  Eigen::MatrixXd draws;            // n_draws rows, one coordinate per column
  Eigen::VectorXd lag1_autocorr;    // per-coordinate mixing diagnostic
};

// Coordinate-wise Gibbs sweep; every full conditional is a univariate
// normal truncated to [0, inf). Starts at elementwise max(location, 0.01).
GibbsResult gibbs_sample(const TruncatedMVN& t, int n_draws, int burn_in = 1000,
                         int thin = 1, std::uint64_t seed = 1);

// Exact draw from N(mu, sigma^2) conditioned to [lo, inf): inverse cdf
// while the region keeps mass >= 1e-10, exponential rejection deeper out.
double sample_univ_truncnorm(double mu, double sigma, double lo, Rng& rng);

struct DensityEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Low-dimensional marginal density of the first k coordinates at q.point,
// for a zero-location truncated normal: the Gaussian factor in the first
// block times the orthant-shifted mass of the conditional remainder, all
// over the cached normalizer. Standard error combines both MC sources.
DensityEstimate marginal_density_est(const TruncatedMVN& t, const MarginalQuery& q);
double marginal_density(const TruncatedMVN& t, const MarginalQuery& q);

// Argmax over [0, 10] of the first univariate marginal, by golden-section
// search. With any positive correlation in the first row the mode is
// strictly interior and the result is checked to be positive.
double univariate_marginal_mode(const TruncatedMVN& t);

// alpha: mass the truncated law places on the slab {theta_1 <= delta},
// i.e. P(0 <= Z_1 <= delta, rest >= 0) / P(Z >= 0). The two rectangle
// estimates share one seed so their batches are positively coupled, and
// the ratio error comes from the batch-pair linearization. Throws when the
// denominator estimate is smaller than 10 of its standard errors.
ProbEstimate alpha_mass(const Eigen::MatrixXd& sigma, double delta,
                        std::int64_t n_samples, std::uint64_t seed);
ProbEstimate alpha_mass(const CorrelationBand& sigma, double delta,
                        std::int64_t n_samples, std::uint64_t seed);
// Compound symmetry admits the deterministic quadrature ratio instead.
ProbEstimate alpha_mass(const CompoundSymmetry& sigma, double delta);

// beta: corner analog, P(theta_1 <= delta, ..., theta_k <= delta) under
// the truncated law. k = 1 reduces to alpha_mass on the same code path.
ProbEstimate corner_mass(const Eigen::MatrixXd& sigma, int k, double delta,
                         std::int64_t n_samples, std::uint64_t seed);

}  // namespace tmvnlab
