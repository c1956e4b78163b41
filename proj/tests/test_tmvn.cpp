#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "tmvnlab/gaussprob.hpp"
#include "tmvnlab/matrices.hpp"
#include "tmvnlab/quadrature.hpp"
#include "tmvnlab/stats.hpp"
#include "tmvnlab/tmvn.hpp"

using namespace tmvnlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd cs_matrix(int d, double rho) { return CompoundSymmetry{d, rho}.materialize(); }

// P(X >= 0) for X ~ N(m, S) in two dimensions, by conditioning the second
// coordinate on the first and integrating the remaining normal cdf. Shares
// no code with the lattice estimator beyond the scalar cdf.
double bvn_orthant_oracle(const Eigen::Vector2d& m, const Eigen::Matrix2d& s) {
  const double s1 = std::sqrt(s(0, 0));
  const double c = s(0, 1) / s1;
  const double tau = std::sqrt(s(1, 1) - c * c);
  const double lo = -m[0] / s1;
  auto f = [&](double z) {
    return norm_pdf(z) * norm_sf((-m[1] - c * z) / tau);
  };
  QuadResult r = integrate(f, lo, lo + 40.0, 1e-12, 1e-10, 4000);
  return r.value;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("tmvn: one dimensional case is the half normal") {
  TruncatedMVN t(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(t.normalizer().method == ProbMethod::closed_form);
  CHECK(t.normalizer().value == 0.5);

  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK(t.log_density(x) == doctest::Approx(std::log(2.0 * norm_pdf(0.0))).epsilon(1e-14));
  x << 1.3;
  CHECK(t.log_density(x) == doctest::Approx(std::log(2.0 * norm_pdf(1.3))).epsilon(1e-14));
  x << -0.1;
  CHECK(t.log_density(x) == -kInf);
}

TEST_CASE("tmvn: diagonal scale with shifted location factorizes") {
  Eigen::VectorXd gamma(2);
  gamma << 0.5, -0.2;
  Eigen::MatrixXd sigma = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  TruncatedMVN t(gamma, sigma);

  // independent coordinates: the normalizer is a product of scalar tails
  const double mc = norm_sf(-0.5) * norm_sf(0.2 / 2.0);
  CHECK(t.normalizer().method == ProbMethod::closed_form);
  CHECK(t.normalizer().value == doctest::Approx(mc).epsilon(1e-14));

  Eigen::VectorXd x(2);
  x << 0.7, 1.1;
  const double direct = std::log(norm_pdf(0.7 - 0.5)) + std::log(norm_pdf((1.1 + 0.2) / 2.0) / 2.0) -
                        std::log(mc);
  CHECK(t.log_density(x) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("tmvn: constructor and query validation") {
  CHECK_THROWS_AS(TruncatedMVN(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(3, 3)),
                  std::invalid_argument);
  Eigen::MatrixXd bad = cs_matrix(2, 0.5);
  bad(0, 1) = bad(1, 0) = 1.2;  // not positive definite
  CHECK_THROWS_AS(TruncatedMVN(Eigen::VectorXd::Zero(2), bad), std::invalid_argument);

  TruncatedMVN t(Eigen::VectorXd::Zero(3), cs_matrix(3, 0.5));
  CHECK_THROWS_AS(t.log_density(Eigen::VectorXd::Zero(2)), std::invalid_argument);

  MarginalQuery q;
  q.k = 0;
  q.point = Eigen::VectorXd::Zero(0);
  CHECK_THROWS_AS(q.validate(3), std::invalid_argument);
  q.k = 3;
  q.point = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(q.validate(3), std::invalid_argument);
  q.k = 2;
  q.point = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(q.validate(3), std::invalid_argument);
  q.point = Eigen::Vector2d(-0.1, 0.2);
  CHECK_THROWS_AS(q.validate(3), std::invalid_argument);

  Eigen::VectorXd gamma(3);
  gamma << 0.1, 0.0, 0.0;
  TruncatedMVN shifted(gamma, cs_matrix(3, 0.5));
  MarginalQuery ok;
  ok.k = 1;
  ok.point = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(marginal_density(shifted, ok), std::invalid_argument);
}

TEST_CASE("tmvn: univariate truncated sampler, unconstrained path is standard normal") {
  Rng rng(31);
  const int n = 100000;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(sample_univ_truncnorm(0.0, 1.0, -kInf, rng));
  std::sort(draws.begin(), draws.end());
  double d_stat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = norm_cdf(draws[size_t(i)]);
    d_stat = std::max(d_stat, std::max(std::abs(u - double(i) / n), std::abs(u - double(i + 1) / n)));
  }
  CHECK(d_stat < 1.949 / std::sqrt(double(n)));  // 0.001 level
}

TEST_CASE("tmvn: univariate truncated sampler agrees with truncated moments on both paths") {
  // survival mass at 6.3 sits just above the inverse cdf cutoff, 6.5 just below
  for (double alpha : {0.8, 6.3, 6.5}) {
    Rng rng(mix_seed(7, std::uint64_t(alpha * 10)));
    const int n = 20000;
    double sum = 0.0, min_draw = kInf;
    for (int i = 0; i < n; ++i) {
      const double z = sample_univ_truncnorm(0.0, 1.0, alpha, rng);
      sum += z;
      min_draw = std::min(min_draw, z);
    }
    const TnMoments m = tn_moments(alpha, kInf);
    CHECK(min_draw >= alpha);
    CHECK(std::abs(sum / n - m.c) < 4.0 * std::sqrt(m.v / n));
  }
  Rng rng(3);
  CHECK_THROWS_AS(sample_univ_truncnorm(0.0, 0.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("tmvn: far tail sampler matches the frozen moments at a = 8") {
  Rng rng(99);
  const int n = 20000;
  double sum = 0.0;
  bool all_above = true;
  for (int i = 0; i < n; ++i) {
    const double z = sample_univ_truncnorm(0.0, 1.0, 8.0, rng);
    all_above = all_above && z >= 8.0;
    sum += z;
  }
  CHECK(all_above);
  CHECK(std::abs(sum / n - 8.121368112236112680654) < 4.0 * std::sqrt(0.01432488344334091 / n));
}

TEST_CASE("tmvn: gibbs on the half normal gives iid draws with the right mean") {
  TruncatedMVN t(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  GibbsResult g = gibbs_sample(t, 20000, 500, 1, 11);
  REQUIRE(g.draws.rows() == 20000);
  REQUIRE(g.draws.cols() == 1);
  CHECK(g.draws.minCoeff() >= 0.0);
  const double mean = g.draws.col(0).mean();
  const double sd = std::sqrt(1.0 - 2.0 / M_PI);
  CHECK(std::abs(mean - std::sqrt(2.0 / M_PI)) < 4.0 * sd / std::sqrt(20000.0));
  // nothing to condition on in one dimension, so no serial dependence
  CHECK(std::abs(g.lag1_autocorr[0]) < 4.0 / std::sqrt(20000.0));

  CHECK_THROWS_AS(gibbs_sample(t, 0), std::invalid_argument);
  CHECK_THROWS_AS(gibbs_sample(t, 10, -1), std::invalid_argument);
  CHECK_THROWS_AS(gibbs_sample(t, 10, 5, 0), std::invalid_argument);
}

TEST_CASE("tmvn: gibbs slab frequency matches the quadrature mass ratio") {
  TruncatedMVN t(Eigen::VectorXd::Zero(2), cs_matrix(2, 0.5));
  GibbsResult g = gibbs_sample(t, 40000, 2000, 1, 5);
  const double freq = (g.draws.col(0).array() <= 0.5).cast<double>().mean();
  const double target = alpha_mass(CompoundSymmetry{2, 0.5}, 0.5).value;
  CHECK(std::abs(freq - target) < 0.02);
  // positive correlation shows up in the chain
  TruncatedMVN tight(Eigen::VectorXd::Zero(2), cs_matrix(2, 0.9));
  GibbsResult g2 = gibbs_sample(tight, 5000, 1000, 1, 6);
  CHECK(g2.lag1_autocorr.maxCoeff() > 0.05);
}

TEST_CASE("tmvn: gibbs keeps independent coordinates uncorrelated") {
  TruncatedMVN t(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  GibbsResult g = gibbs_sample(t, 20000, 1000, 1, 17);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const auto xa = g.draws.col(a).array() - g.draws.col(a).mean();
      const auto xb = g.draws.col(b).array() - g.draws.col(b).mean();
      const double r = (xa * xb).sum() / std::sqrt((xa * xa).sum() * (xb * xb).sum());
      CHECK(std::abs(r) < 4.0 / std::sqrt(20000.0));
    }
}

TEST_CASE("tmvn: gibbs rectangle frequencies agree with the lattice estimator") {
  const int n_dim = 4;
  Eigen::MatrixXd sigma = cs_matrix(n_dim, 0.4);
  TruncatedMVN t(Eigen::VectorXd::Zero(n_dim), sigma, 1 << 16, 21);
  const int n_draws = 40000;
  GibbsResult g = gibbs_sample(t, n_draws, 2000, 1, 22);

  Rng rng(0xabcd);
  for (int rep = 0; rep < 10; ++rep) {
    Rectangle r;
    r.lower.resize(n_dim);
    r.upper.resize(n_dim);
    for (int i = 0; i < n_dim; ++i) {
      r.lower[i] = 0.8 * rng.uniform();
      r.upper[i] = r.lower[i] + 0.3 + 1.7 * rng.uniform();
    }
    ProbEstimate inside = rect_prob_sov(sigma, r, 1 << 16, mix_seed(100, rep));
    const double p_sov = inside.value / t.normalizer().value;

    double hits = 0.0;
    for (int d = 0; d < n_draws; ++d) {
      bool in = true;
      for (int i = 0; i < n_dim; ++i)
        in = in && g.draws(d, i) >= r.lower[i] && g.draws(d, i) <= r.upper[i];
      hits += in;
    }
    const double p_gibbs = hits / n_draws;
    const double se_iid = std::sqrt(std::max(p_sov * (1.0 - p_sov), 1e-6) / n_draws);
    const double se_mc = inside.std_error / t.normalizer().value +
                         p_sov * t.normalizer().std_error / t.normalizer().value;
    CHECK(std::abs(p_gibbs - p_sov) < 8.0 * se_iid + 6.0 * se_mc + 0.004);
  }
}

TEST_CASE("tmvn: two dimensional marginal matches the closed form") {
  const double rho = 0.5;
  TruncatedMVN t(Eigen::VectorXd::Zero(2), cs_matrix(2, rho), 1 << 20);
  const double mc = 0.25 + std::asin(rho) / (2.0 * M_PI);
  CHECK(std::abs(t.normalizer().value - mc) < 1e-6);

  MarginalQuery q;
  q.k = 1;
  q.point = Eigen::VectorXd::Zero(1);
  CHECK(std::abs(marginal_density(t, q) - 0.5984134206021490) < 1e-6);

  const double s = std::sqrt(1.0 - rho * rho);
  for (double x : {0.0, 0.2, 0.5, 1.0, 1.7, 2.5}) {
    q.point[0] = x;
    const double closed = norm_pdf(x) * norm_cdf(rho * x / s) / mc;
    CHECK(std::abs(marginal_density(t, q) - closed) < 1e-6);
  }
}

TEST_CASE("tmvn: diagonal marginal is the half normal and carries no noise") {
  TruncatedMVN t(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  MarginalQuery q;
  q.k = 1;
  q.point = Eigen::VectorXd::Constant(1, 0.8);
  DensityEstimate est = marginal_density_est(t, q);
  CHECK(est.value == doctest::Approx(2.0 * norm_pdf(0.8)).epsilon(1e-13));
  CHECK(est.std_error == 0.0);

  // two leading coordinates at once
  q.k = 2;
  q.point = Eigen::Vector2d(0.3, 1.1);
  CHECK(marginal_density(t, q) ==
        doctest::Approx(4.0 * norm_pdf(0.3) * norm_pdf(1.1)).epsilon(1e-13));
}

TEST_CASE("tmvn: marginal integrates to one") {
  TruncatedMVN t(Eigen::VectorXd::Zero(3), cs_matrix(3, 0.6), 1 << 14, 77);
  MarginalQuery q;
  q.k = 1;
  q.point = Eigen::VectorXd::Zero(1);
  auto f = [&](double x) {
    MarginalQuery qq = q;
    qq.point[0] = x;
    return marginal_density(t, qq);
  };
  const double total = simpson(f, 0.0, 12.0, 160);
  CHECK(std::abs(total - 1.0) < 1e-3);
}

TEST_CASE("tmvn: marginal agrees with a conditional quadrature oracle") {
  Rng rng(0x5eed);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    Eigen::MatrixXd raw = a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd d = raw.diagonal().array().rsqrt();
    Eigen::MatrixXd sigma = d.asDiagonal() * raw * d.asDiagonal();
    sigma = 0.5 * (sigma + sigma.transpose());

    TruncatedMVN t(Eigen::VectorXd::Zero(3), sigma, 1 << 16, mix_seed(40, rep));
    const Eigen::Matrix2d cond = sigma.bottomRightCorner(2, 2) -
                                 sigma.bottomLeftCorner(2, 1) * sigma.topRightCorner(1, 2);
    MarginalQuery q;
    q.k = 1;
    q.point = Eigen::VectorXd::Zero(1);
    for (int gp = 0; gp < 10; ++gp) {
      const double x = 0.2 * (gp + 1);
      q.point[0] = x;
      const Eigen::Vector2d mean = sigma.bottomLeftCorner(2, 1) * x;
      const double oracle =
          norm_pdf(x) * bvn_orthant_oracle(mean, cond) / t.normalizer().value;
      const double got = marginal_density(t, q);
      CHECK(std::abs(got - oracle) < 1e-3 * oracle + 1e-9);
    }
  }
}

TEST_CASE("tmvn: marginal mode sits at zero without correlation, moves right with it") {
  TruncatedMVN flat(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK(univariate_marginal_mode(flat) < 1e-3);

  double prev = 0.0;
  for (double rho : {0.3, 0.45, 0.6}) {
    TruncatedMVN t(Eigen::VectorXd::Zero(3), cs_matrix(3, rho), 1 << 14, 55);
    const double mode = univariate_marginal_mode(t);
    CHECK(mode > prev);
    prev = mode;
  }
  // near perfect correlation the marginal flattens back toward a half
  // normal, so the mode is no longer monotone in rho; it stays interior
  TruncatedMVN tight(Eigen::VectorXd::Zero(3), cs_matrix(3, 0.9), 1 << 14, 55);
  CHECK(univariate_marginal_mode(tight) > 0.3);
}

TEST_CASE("tmvn: marginal mode moves away from the origin as dimension grows") {
  double prev = 0.0;
  for (int n : {2, 4, 8}) {
    TruncatedMVN t(Eigen::VectorXd::Zero(n), cs_matrix(n, 0.6), 1 << 14, 55);
    const double mode = univariate_marginal_mode(t);
    CHECK(mode > prev + 0.1);
    prev = mode;
  }
}

TEST_CASE("tmvn: density near the origin decays as dimension grows") {
  MarginalQuery q;
  q.k = 1;
  q.point = Eigen::VectorXd::Zero(1);
  TruncatedMVN t2(Eigen::VectorXd::Zero(2), cs_matrix(2, 0.6), 1 << 16, 60);
  TruncatedMVN t8(Eigen::VectorXd::Zero(8), cs_matrix(8, 0.6), 1 << 16, 61);
  DensityEstimate f2 = marginal_density_est(t2, q);
  DensityEstimate f8 = marginal_density_est(t8, q);
  CHECK(f8.value < f2.value - 4.0 * (f2.std_error + f8.std_error));
}

TEST_CASE("tmvn: slab mass closed forms on diagonal scale") {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  const double delta = 0.7;
  ProbEstimate a = alpha_mass(eye, delta, 1 << 12, 1);
  CHECK(a.method == ProbMethod::closed_form);
  const double expect = 2.0 * norm_cdf(delta) - 1.0;
  CHECK(a.value == doctest::Approx(expect).epsilon(1e-14));
  for (int k : {2, 3}) {
    ProbEstimate b = corner_mass(eye, k, delta, 1 << 12, 1);
    CHECK(b.value == doctest::Approx(std::pow(expect, k)).epsilon(1e-13));
  }
}

TEST_CASE("tmvn: slab mass via lattice agrees with the quadrature ratio") {
  for (double rho : {0.3, 0.6}) {
    ProbEstimate mc = alpha_mass(cs_matrix(4, rho), 0.3, 1 << 16, 9);
    ProbEstimate quad = alpha_mass(CompoundSymmetry{4, rho}, 0.3);
    CHECK(quad.method == ProbMethod::cs_quadrature);
    CHECK(std::abs(mc.value - quad.value) < 4.0 * mc.std_error + 1e-9);
  }
}

TEST_CASE("tmvn: slab mass validation and one dimensional reduction") {
  CHECK_THROWS_AS(alpha_mass(cs_matrix(3, 0.5), 0.0, 1 << 12, 1), std::invalid_argument);
  CHECK_THROWS_AS(corner_mass(cs_matrix(3, 0.5), 0, 0.3, 1 << 12, 1), std::invalid_argument);
  CHECK_THROWS_AS(corner_mass(cs_matrix(3, 0.5), 4, 0.3, 1 << 12, 1), std::invalid_argument);
  ProbEstimate one = alpha_mass(CompoundSymmetry{1, 0.5}, 0.4);
  CHECK(one.value == doctest::Approx(2.0 * norm_cdf(0.4) - 1.0).epsilon(1e-14));
}

TEST_CASE("tmvn: corner mass nests inside the slab mass") {
  Eigen::MatrixXd sigma = cs_matrix(3, 0.5);
  ProbEstimate a = alpha_mass(sigma, 0.4, 1 << 15, 14);
  ProbEstimate b1 = corner_mass(sigma, 1, 0.4, 1 << 15, 14);
  CHECK(a.value == b1.value);  // identical rectangles, identical seed
  ProbEstimate b2 = corner_mass(sigma, 2, 0.4, 1 << 15, 14);
  ProbEstimate b3 = corner_mass(sigma, 3, 0.4, 1 << 15, 14);
  CHECK(b2.value <= a.value + 4.0 * (a.std_error + b2.std_error));
  CHECK(b3.value <= b2.value + 4.0 * (b2.std_error + b3.std_error));
}

TEST_CASE("tmvn: slab mass shrinks along the band ladder") {
  // independent equicorrelated blocks reduce the ratio to a single block,
  // so the lattice estimate must match the quadrature value for one block
  const int n_dim = 10, block = 5;
  Eigen::MatrixXd two_blocks = Eigen::MatrixXd::Zero(n_dim, n_dim);
  two_blocks.topLeftCorner(block, block) = cs_matrix(block, 0.6);
  two_blocks.bottomRightCorner(block, block) = cs_matrix(block, 0.6);
  ProbEstimate mc = alpha_mass(two_blocks, 0.25, 1 << 16, 33);
  ProbEstimate quad = alpha_mass(CompoundSymmetry{block, 0.6}, 0.25);
  CHECK(std::abs(mc.value - quad.value) < 4.0 * mc.std_error + 1e-9);

  double prev = 1.0;
  for (int k : {2, 5, 10, 20}) {
    const double a = alpha_mass(CompoundSymmetry{k, 0.6}, 0.25).value;
    CHECK(a < prev);
    prev = a;
  }
}
