#include "tmvnlab/tmvn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tmvnlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

// Ratio of two rectangle probabilities under one covariance, estimated
// with a shared seed. Batchwise, r_b = (n_b - ratio * d_b) / dbar has mean
// zero and its spread gives the delta-method error of the ratio, with the
// num/den coupling priced in automatically.
ProbEstimate ratio_estimate(const Eigen::MatrixXd& sigma, const Rectangle& num_rect,
                            const Rectangle& den_rect, std::int64_t n_samples,
                            std::uint64_t seed, const char* who) {
  ProbEstimate num = rect_prob_sov(sigma, num_rect, n_samples, seed);
  ProbEstimate den = rect_prob_sov(sigma, den_rect, n_samples, seed);

  ProbEstimate out;
  if (num.method == ProbMethod::closed_form && den.method == ProbMethod::closed_form) {
    if (den.value <= 0.0) throw std::runtime_error(std::string(who) + ": zero denominator");
    out.value = num.value / den.value;
    out.method = ProbMethod::closed_form;
    return out;
  }

  if (den.method == ProbMethod::sov_mc && den.value < 10.0 * den.std_error)
    throw std::runtime_error(std::string(who) +
                             ": denominator estimate is unreliable (below 10 standard errors)");
  if (den.value <= 0.0) throw std::runtime_error(std::string(who) + ": zero denominator");

  const int b = int(num.method == ProbMethod::sov_mc ? num.batch_values.size()
                                                     : den.batch_values.size());
  out.value = num.value / den.value;
  out.method = ProbMethod::sov_mc;
  out.n_samples = std::max(num.n_samples, den.n_samples);
  double ss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double nb = num.method == ProbMethod::sov_mc ? num.batch_values[size_t(i)] : num.value;
    const double db = den.method == ProbMethod::sov_mc ? den.batch_values[size_t(i)] : den.value;
    const double r = (nb - out.value * db) / den.value;
    ss += r * r;
  }
  out.std_error = std::sqrt(ss / (double(b) * double(b - 1)));
  return out;
}

}  // namespace

TruncatedMVN::TruncatedMVN(Eigen::VectorXd location, Eigen::MatrixXd scale,
                           std::int64_t norm_samples, std::uint64_t seed)
    : location_(std::move(location)), scale_(std::move(scale)), seed_(seed) {
  const int n = int(location_.size());
  if (n < 1 || scale_.rows() != n || scale_.cols() != n)
    throw std::invalid_argument("TruncatedMVN: location/scale size mismatch");
  llt_.compute(scale_);
  if (llt_.info() != Eigen::Success)
    throw std::invalid_argument("TruncatedMVN: scale must be positive definite");
  log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();

  Rectangle region;
  region.lower = -location_;
  region.upper = Eigen::VectorXd::Constant(n, kInf);
  m_c_ = rect_prob_sov(scale_, region, norm_samples, seed_);
  if (!(m_c_.value > 0.0))
    throw std::runtime_error("TruncatedMVN: normalizing mass estimated as zero");
}

double TruncatedMVN::log_density(const Eigen::VectorXd& theta) const {
  if (theta.size() != location_.size())
    throw std::invalid_argument("log_density: dimension mismatch");
  if ((theta.array() < 0.0).any()) return -kInf;
  Eigen::VectorXd centered = theta - location_;
  const double quad = centered.dot(llt_.solve(centered));
  return -0.5 * (dim() * kLog2Pi + log_det_ + quad) - std::log(m_c_.value);
}

void MarginalQuery::validate(int n) const {
  if (k < 1 || k >= n) throw std::invalid_argument("MarginalQuery: need 1 <= k <= N-1");
  if (point.size() != k) throw std::invalid_argument("MarginalQuery: point length must be k");
  if ((point.array() < 0.0).any())
    throw std::invalid_argument("MarginalQuery: point must be elementwise nonnegative");
}

double sample_univ_truncnorm(double mu, double sigma, double lo, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_univ_truncnorm: sigma must be positive");
  if (lo == -kInf) return mu + sigma * rng.normal();
  const double alpha = (lo - mu) / sigma;
  if (norm_sf(alpha) >= 1e-10) {
    return mu + sigma * tn_inverse(rng.uniform(), alpha, kInf);
  }
  // exponential rejection for the far tail
  const double lam = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
  for (;;) {
    const double z = alpha + rng.exponential(lam);
    const double gap = z - lam;
    if (rng.uniform() <= std::exp(-0.5 * gap * gap)) return mu + sigma * z;
  }
}

GibbsResult gibbs_sample(const TruncatedMVN& t, int n_draws, int burn_in, int thin,
                         std::uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("gibbs_sample: need n_draws >= 1");
  if (burn_in < 0 || thin < 1) throw std::invalid_argument("gibbs_sample: bad burn_in/thin");
  const int n = t.dim();
  const Eigen::MatrixXd prec = t.scale().llt().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd& gamma = t.location();

  Eigen::VectorXd theta = gamma.cwiseMax(0.01);
  Rng rng(mix_seed(seed, 0x9bb5));
  GibbsResult out;
  out.draws.resize(n_draws, n);

  const long total = long(burn_in) + long(n_draws) * thin;
  long kept = 0;
  for (long it = 0; it < total; ++it) {
    for (int i = 0; i < n; ++i) {
      const double var = 1.0 / prec(i, i);
      double dot = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) dot += prec(i, j) * (theta[j] - gamma[j]);
      const double mean = gamma[i] - var * dot;
      theta[i] = sample_univ_truncnorm(mean, std::sqrt(var), 0.0, rng);
    }
    if (it >= burn_in && (it - burn_in) % thin == 0) {
      out.draws.row(kept) = theta.transpose();
      ++kept;
    }
  }

  out.lag1_autocorr.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto col = out.draws.col(j);
    const double mean = col.mean();
    double num = 0.0, denom = 0.0;
    for (int r = 0; r < n_draws; ++r) {
      const double c = col[r] - mean;
      denom += c * c;
      if (r + 1 < n_draws) num += c * (col[r + 1] - mean);
    }
    out.lag1_autocorr[j] = denom > 0.0 ? num / denom : 0.0;
  }
  return out;
}

DensityEstimate marginal_density_est(const TruncatedMVN& t, const MarginalQuery& q) {
  const int n = t.dim();
  q.validate(n);
  if (t.location().cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("marginal_density: defined for zero location");
  const int k = q.k, m = n - k;

  const Eigen::MatrixXd a = t.scale().topLeftCorner(k, k);
  const Eigen::MatrixXd b = t.scale().bottomLeftCorner(m, k);
  const Eigen::MatrixXd d = t.scale().bottomRightCorner(m, m);

  Eigen::LLT<Eigen::MatrixXd> llt_a(a);
  if (llt_a.info() != Eigen::Success)
    throw std::invalid_argument("marginal_density: leading block is singular");
  const double log_det_a = 2.0 * llt_a.matrixL().toDenseMatrix().diagonal().array().log().sum();

  const Eigen::VectorXd a_inv_theta = llt_a.solve(q.point);
  const double quad = q.point.dot(a_inv_theta);
  // conditional covariance of the remainder given the first block
  const Eigen::MatrixXd cond = d - b * llt_a.solve(b.transpose());

  Rectangle region;
  region.lower = Eigen::VectorXd::Constant(m, -kInf);
  region.upper = b * a_inv_theta;
  ProbEstimate tail = rect_prob_sov(cond, region, std::max<std::int64_t>(t.normalizer().n_samples, 1000),
                                    mix_seed(t.seed(), 2));

  const double gauss = std::exp(-0.5 * (k * kLog2Pi + log_det_a + quad));
  DensityEstimate out;
  out.value = gauss * tail.value / t.normalizer().value;
  double rel2 = 0.0;
  if (tail.value > 0.0) rel2 += (tail.std_error / tail.value) * (tail.std_error / tail.value);
  if (t.normalizer().value > 0.0) {
    const double r = t.normalizer().std_error / t.normalizer().value;
    rel2 += r * r;
  }
  out.std_error = out.value * std::sqrt(rel2);
  return out;
}

double marginal_density(const TruncatedMVN& t, const MarginalQuery& q) {
  return marginal_density_est(t, q).value;
}

double univariate_marginal_mode(const TruncatedMVN& t) {
  auto f = [&](double x) {
    MarginalQuery q;
    q.k = 1;
    q.point = Eigen::VectorXd::Constant(1, x);
    return marginal_density(t, q);
  };
  double lo = 0.0, hi = 10.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 90 && hi - lo > 1e-7; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = f(d);
    }
  }
  const double mode = 0.5 * (lo + hi);
  if (!(std::isfinite(mode))) throw std::runtime_error("univariate_marginal_mode: search failed");

  bool any_positive = false;
  for (int j = 1; j < t.dim(); ++j)
    if (t.scale()(0, j) > 0.0) any_positive = true;
  if (any_positive && !(mode > 0.0))
    throw std::runtime_error("univariate_marginal_mode: expected a strictly positive mode");
  return mode;
}

ProbEstimate alpha_mass(const Eigen::MatrixXd& sigma, double delta,
                        std::int64_t n_samples, std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("alpha_mass: delta must be positive");
  const int n = int(sigma.rows());
  Rectangle num = Rectangle::orthant(n);
  num.upper[0] = delta;
  return ratio_estimate(sigma, num, Rectangle::orthant(n), n_samples, seed, "alpha_mass");
}

ProbEstimate alpha_mass(const CorrelationBand& sigma, double delta,
                        std::int64_t n_samples, std::uint64_t seed) {
  return alpha_mass(sigma.entries(), delta, n_samples, seed);
}

ProbEstimate alpha_mass(const CompoundSymmetry& sigma, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("alpha_mass: delta must be positive");
  if (sigma.d == 1) {
    ProbEstimate out;
    out.value = 2.0 * (norm_cdf(delta) - 0.5);
    out.method = ProbMethod::closed_form;
    return out;
  }
  ProbEstimate num = cs_strip_prob(sigma.d, sigma.rho, delta);
  ProbEstimate den = cs_orthant_prob(sigma.d, sigma.rho, 0.0);
  ProbEstimate out;
  out.value = num.value / den.value;
  out.method = ProbMethod::cs_quadrature;
  out.n_samples = num.n_samples + den.n_samples;
  return out;
}

ProbEstimate corner_mass(const Eigen::MatrixXd& sigma, int k, double delta,
                         std::int64_t n_samples, std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("corner_mass: delta must be positive");
  const int n = int(sigma.rows());
  if (k < 1 || k > n) throw std::invalid_argument("corner_mass: need 1 <= k <= N");
  Rectangle num = Rectangle::orthant(n);
  for (int i = 0; i < k; ++i) num.upper[i] = delta;
  return ratio_estimate(sigma, num, Rectangle::orthant(n), n_samples, seed, "corner_mass");
}

}  // namespace tmvnlab
