#include "tmvnlab/massshift.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tmvnlab/stats.hpp"
#include "tmvnlab/tmvn.hpp"

namespace tmvnlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rho_bar(double rho) { return (1.0 - rho) / rho; }

void check_unit_interval(double x, const char* name) {
  if (!(x > 0.0 && x < 1.0))
    throw std::invalid_argument(std::string(name) + " must lie strictly inside (0, 1)");
}

// deterministic part of the chain: the equicorrelated ratio and the
// closed-form bound as functions of K alone
double r_prime_at(int k, double rho_min, double rho_max, double delta) {
  const double num = cs_strip_prob(k, rho_max, delta).value;
  const double den = cs_orthant_prob(k, rho_min, 0.0).value;
  return num / (den * den);
}

void final_terms_at(int k, double rho_min, double rho_max, double delta, double alpha,
                    double* term1, double* term2) {
  const double rb_min = rho_bar(rho_min);
  const double rb_max = rho_bar(rho_max);
  const double c = 5.0 * rb_min / std::sqrt((1.0 - alpha) * rb_max);
  const double rate = (1.0 - alpha) / rho_max - 2.0 * rb_min;
  *term1 = c * delta * std::sqrt(std::log(double(k))) * std::pow(double(k), -rate);
  *term2 = 4.0 * rb_min * std::exp(-std::pow(double(k - 1), alpha)) *
           std::pow(double(k), 2.0 * rb_min) * std::log(double(k));
}

}  // namespace

bool in_region_Q(double rho_min, double rho_max) {
  check_unit_interval(rho_min, "rho_min");
  check_unit_interval(rho_max, "rho_max");
  return rho_min <= rho_max && rho_min / (2.0 * (1.0 - rho_min)) >= rho_max;
}

double default_lemma2_alpha(double rho_min, double rho_max) {
  check_unit_interval(rho_min, "rho_min");
  check_unit_interval(rho_max, "rho_max");
  const double ceiling = 1.0 - 2.0 * rho_bar(rho_min) * rho_max;
  if (!(ceiling > 0.0))
    throw std::invalid_argument(
        "default_lemma2_alpha: no positive decay rate is attainable for these correlations");
  return 0.5 * ceiling;
}

double lemma2_upper(int d, double rho, double delta, double alpha) {
  if (d < 2) throw std::invalid_argument("lemma2_upper: need d >= 2");
  check_unit_interval(rho, "rho");
  check_unit_interval(alpha, "alpha");
  if (!(delta > 0.0)) throw std::invalid_argument("lemma2_upper: delta must be positive");
  if (d == 2) return kInf;  // log(d-1) vanishes
  const double rb = rho_bar(rho);
  const double logd1 = std::log(double(d - 1));
  const double poly = delta / std::sqrt(2.0 * (1.0 - alpha) * rb * logd1) *
                      std::pow(double(d - 1), -(1.0 - alpha) / rho);
  return poly + std::exp(-std::pow(double(d), alpha));
}

double lemma2_lower(int d, double rho, double a) {
  if (d < 2) throw std::invalid_argument("lemma2_lower: need d >= 2");
  check_unit_interval(rho, "rho");
  if (!(a >= 0.0)) throw std::invalid_argument("lemma2_lower: need a >= 0");
  const double t = a / std::sqrt(rho) + std::sqrt(2.0 * rho_bar(rho) * std::log(double(d)));
  // Mills ratio lower bound Q(t) >= t/(t^2+1) phi(t); the density factor
  // keeps this below the true orthant mass across the whole (d, rho, a)
  // range, which an unnormalized exponential would overshoot near rho = 0.9
  return t / (t * t + 1.0) * norm_pdf(t);
}

BoundChainReport theorem1_chain(const CorrelationBand& sigma, double delta, double alpha,
                                std::int64_t n_samples, std::uint64_t seed) {
  const int n = sigma.N();
  const int k = sigma.K();
  if (n < 2 * k + 1)
    throw std::invalid_argument("theorem1_chain: need N >= 2K+1 for the two leading blocks");
  if (!(delta > 0.0)) throw std::invalid_argument("theorem1_chain: delta must be positive");
  check_unit_interval(alpha, "alpha");

  BoundChainReport rep;
  rep.N = n;
  rep.K = k;
  rep.alpha_used = alpha;
  const BandStats bs = band_stats(sigma);
  rep.rho_min = bs.rho_min;
  rep.rho_max = bs.rho_max;
  rep.in_Q = in_region_Q(bs.rho_min, bs.rho_max);

  rep.alpha_hat = alpha_mass(sigma, delta, n_samples, seed);

  // two-block ratio: strip and orthant on the leading block share a seed
  const Eigen::MatrixXd& e = sigma.entries();
  const Eigen::MatrixXd block1 = e.topLeftCorner(k, k);
  const Eigen::MatrixXd block2 = e.block(k, k, k, k);
  Rectangle strip = Rectangle::orthant(k);
  strip.upper[0] = delta;
  const double num = rect_prob_sov(block1, strip, n_samples, mix_seed(seed, 11)).value;
  const double den1 = rect_prob_sov(block1, Rectangle::orthant(k), n_samples, mix_seed(seed, 11)).value;
  const double den2 = rect_prob_sov(block2, Rectangle::orthant(k), n_samples, mix_seed(seed, 12)).value;
  rep.R = num / (den1 * den2);

  rep.R_prime = r_prime_at(k, bs.rho_min, bs.rho_max, delta);
  final_terms_at(k, bs.rho_min, bs.rho_max, delta, alpha, &rep.final_term1, &rep.final_term2);

  rep.k0_estimate = 0;
  if (rep.in_Q) {
    for (int kk = 2; kk <= 512; ++kk) {
      double t1, t2;
      final_terms_at(kk, bs.rho_min, bs.rho_max, delta, alpha, &t1, &t2);
      if (t1 + t2 >= r_prime_at(kk, bs.rho_min, bs.rho_max, delta)) {
        rep.k0_estimate = kk;
        break;
      }
    }
  }
  return rep;
}

SlepianReport slepian_check(const Eigen::MatrixXd& sigma_x, const Eigen::MatrixXd& sigma_y,
                            double lower1, double upper1, const Eigen::VectorXd& thresholds,
                            std::int64_t n_mc, std::uint64_t seed) {
  const int d = int(sigma_x.rows());
  if (sigma_x.cols() != d || sigma_y.rows() != d || sigma_y.cols() != d)
    throw std::invalid_argument("slepian_check: matrices must be square and equally sized");
  if (d < 2 || d > 10)
    throw std::invalid_argument("slepian_check: dimension must lie in [2, 10]");
  if (thresholds.size() != d - 1)
    throw std::invalid_argument("slepian_check: need one threshold per trailing coordinate");
  if (!(lower1 >= 0.0 && lower1 < upper1))
    throw std::invalid_argument("slepian_check: need 0 <= lower1 < upper1");
  if (n_mc < 1000) throw std::invalid_argument("slepian_check: need n_mc >= 1000");

  SlepianReport rep;
  rep.hypothesis_ok = true;
  for (int i = 0; i < d && rep.hypothesis_ok; ++i) {
    if (std::abs(sigma_x(i, i) - sigma_y(i, i)) > 1e-12) rep.hypothesis_ok = false;
    for (int j = 0; j < d && rep.hypothesis_ok; ++j)
      if (i != j && sigma_x(i, j) > sigma_y(i, j) + 1e-12) rep.hypothesis_ok = false;
  }

  auto estimate = [&](const Eigen::MatrixXd& s, std::uint64_t stream, double* p, double* se) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("slepian_check: covariance must be positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    Rng rng(mix_seed(seed, stream));
    Eigen::VectorXd z(d);
    std::int64_t hits = 0;
    for (std::int64_t it = 0; it < n_mc; ++it) {
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      const Eigen::VectorXd x = l * z;
      bool in = x[0] >= lower1 && x[0] <= upper1;
      for (int i = 1; i < d && in; ++i) in = x[i] >= thresholds[i - 1];
      hits += in;
    }
    *p = double(hits) / double(n_mc);
    *se = std::sqrt(*p * (1.0 - *p) / double(n_mc));
  };
  estimate(sigma_x, 1, &rep.p_x, &rep.se_x);
  estimate(sigma_y, 2, &rep.p_y, &rep.se_y);

  const double combined = std::sqrt(rep.se_x * rep.se_x + rep.se_y * rep.se_y);
  rep.margin_se = (rep.p_y - rep.p_x) / std::max(combined, 1e-300);
  rep.holds = rep.margin_se >= -4.0;
  return rep;
}

}  // namespace tmvnlab
