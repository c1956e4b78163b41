#include "doctest.h"
#include "tmvnlab/matrices.hpp"
#include "tmvnlab/stats.hpp"

#include <Eigen/Dense>
#include <cmath>

using namespace tmvnlab;

namespace {

// Constant-rho band matrix, zero beyond lag K-1. Only PD for narrow bands
// or small N; callers pick feasible shapes.
Eigen::MatrixXd constant_band(int n, int k, double rho) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (i - j <= k - 1) m(i, j) = m(j, i) = rho;
  return m;
}

Eigen::MatrixXd random_spd(Rng& rng, int d) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::MatrixXd a = g * g.transpose();
  a += 0.1 * double(d) * Eigen::MatrixXd::Identity(d, d);
  return a;
}

}  // namespace

TEST_CASE("compound symmetry materializes exactly") {
  auto cs = compound_symmetry(3, 0.5);
  Eigen::MatrixXd m = cs.materialize();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == (i == j ? 1.0 : 0.5));

  CHECK(compound_symmetry(1, 0.3).materialize()(0, 0) == 1.0);

  CHECK_THROWS(compound_symmetry(3, 0.0));
  CHECK_THROWS(compound_symmetry(3, 1.0));
  CHECK_THROWS(compound_symmetry(3, -0.2));
  CHECK_THROWS(compound_symmetry(0, 0.5));
}

TEST_CASE("compound symmetry eigenvalues are 1+(d-1)rho and 1-rho") {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(compound_symmetry(2, 0.9).materialize());
  CHECK(std::fabs(es.eigenvalues()(0) - 0.1) < 1e-12);
  CHECK(std::fabs(es.eigenvalues()(1) - 1.9) < 1e-12);

  for (int d : {2, 5, 17}) {
    for (double rho : {0.05, 0.6, 0.95}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(compound_symmetry(d, rho).materialize());
      CHECK(std::fabs(e2.eigenvalues()(d - 1) - (1.0 + (d - 1) * rho)) < 1e-12);
      for (int i = 0; i + 1 < d; ++i) CHECK(std::fabs(e2.eigenvalues()(i) - (1.0 - rho)) < 1e-12);
    }
  }
}

TEST_CASE("correlation band validates its invariants at construction") {
  CHECK_NOTHROW(CorrelationBand(6, 2, constant_band(6, 2, 0.45)));

  // beyond-band entry
  Eigen::MatrixXd bad = constant_band(6, 2, 0.45);
  bad(0, 5) = bad(5, 0) = 0.1;
  CHECK_THROWS(CorrelationBand(6, 2, bad));

  // negative entry
  bad = constant_band(6, 2, 0.45);
  bad(1, 0) = bad(0, 1) = -0.2;
  CHECK_THROWS(CorrelationBand(6, 2, bad));

  // asymmetry
  bad = constant_band(6, 2, 0.45);
  bad(1, 0) = 0.3;
  CHECK_THROWS(CorrelationBand(6, 2, bad));

  // non unit diagonal
  bad = constant_band(6, 2, 0.45);
  bad(2, 2) = 1.5;
  CHECK_THROWS(CorrelationBand(6, 2, bad));

  // PD failure: constant 0.6 across a wide band is indefinite at this shape
  CHECK_THROWS(CorrelationBand(20, 10, constant_band(20, 10, 0.6)));

  // K out of range
  CHECK_THROWS(CorrelationBand(6, 1, Eigen::MatrixXd::Identity(6, 6)));
  CHECK_THROWS(CorrelationBand(6, 6, Eigen::MatrixXd::Identity(6, 6)));
}

TEST_CASE("band stats take min over nonzero in-band entries, max overall") {
  CorrelationBand cb(4, 2, constant_band(4, 2, 0.6));
  auto st = band_stats(cb);
  CHECK(st.rho_min == 0.6);
  CHECK(st.rho_max == 0.6);

  // alternating in-band entries 0.5 and 0.7
  Eigen::MatrixXd alt = Eigen::MatrixXd::Identity(3, 3);
  alt(1, 0) = alt(0, 1) = 0.5;
  alt(2, 1) = alt(1, 2) = 0.7;
  auto sa = band_stats(CorrelationBand(3, 2, alt));
  CHECK(sa.rho_min == 0.5);
  CHECK(sa.rho_max == 0.7);

  // a zero inside the band is skipped by rho_min, not counted as 0
  Eigen::MatrixXd gap = Eigen::MatrixXd::Identity(7, 7);
  gap(1, 0) = gap(0, 1) = 0.4;
  gap(6, 5) = gap(5, 6) = 0.2;
  CorrelationBand cg(7, 3, gap);
  auto sg = band_stats(cg);
  CHECK(sg.rho_min == 0.2);
  CHECK(sg.rho_max == 0.4);

  CHECK_THROWS(band_stats(CorrelationBand(6, 2, Eigen::MatrixXd::Identity(6, 6))));
}

TEST_CASE("block independent approximation keeps three blocks and zeroes the rest") {
  const int n = 18, k = 3;
  Eigen::MatrixXd base = Eigen::MatrixXd::Identity(n, n);
  Rng rng(31);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (i - j <= k - 1) base(i, j) = base(j, i) = 0.1 + 0.1 * rng.uniform();
  CorrelationBand cb(n, k, base);
  Eigen::MatrixXd tilde = block_independent_approx(cb);

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto blk = [&](int t) { return t < k ? 0 : (t < 2 * k ? 1 : 2); };
      if (blk(i) == blk(j)) {
        CHECK(tilde(i, j) == base(i, j));
      } else {
        CHECK(tilde(i, j) == 0.0);
      }
      CHECK(tilde(i, j) <= base(i, j) + 0.0);
    }

  // symmetric positive semidefinite
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tilde);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);

  // fixed point: already block-diagonal input is returned unchanged
  CorrelationBand fixed(n, k, tilde);
  CHECK(block_independent_approx(fixed) == tilde);

  CHECK_THROWS(block_independent_approx(CorrelationBand(6, 3, Eigen::MatrixXd::Identity(6, 6))));
}

TEST_CASE("operator norm matches the dense spectral norm") {
  Rng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    int d = 2 + int(rng.uniform() * 12);
    Eigen::MatrixXd a = random_spd(rng, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    CHECK(std::fabs(operator_norm(a) - es.eigenvalues().maxCoeff()) <
          1e-8 * es.eigenvalues().maxCoeff());
  }
  CHECK(operator_norm(Eigen::MatrixXd::Zero(4, 4)) == 0.0);
}

TEST_CASE("neumann inverse identity and diagonal cases") {
  auto id = neumann_inverse_approx(Eigen::MatrixXd::Identity(5, 5), 3);
  CHECK(id.kappa == 0.0);
  CHECK(id.matrix == Eigen::MatrixXd::Identity(5, 5));
  CHECK(id.bandwidth == 0);

  Eigen::MatrixXd d2 = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  auto b0 = neumann_inverse_approx(d2, 0);
  CHECK(std::fabs(b0.gamma - 2.0 / 3.0) < 1e-10);
  CHECK(std::fabs(b0.kappa - 1.0 / 3.0) < 1e-10);
  CHECK(std::fabs(b0.error_bound - 1.0 / 3.0) < 1e-9);
  CHECK(std::fabs(b0.matrix(0, 0) - 2.0 / 3.0) < 1e-10);
  CHECK(std::fabs(b0.matrix(1, 1) - 2.0 / 3.0) < 1e-10);
  // actual gap ||diag(1, 1/2) - (2/3) I|| attains the bound here
  Eigen::MatrixXd gap = Eigen::Vector2d(1.0, 0.5).asDiagonal();
  gap -= b0.matrix;
  CHECK(std::fabs(operator_norm(gap) - 1.0 / 3.0) < 1e-9);

  CHECK_THROWS(neumann_inverse_approx(-Eigen::MatrixXd::Identity(3, 3), 2));
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.5;
  CHECK_THROWS(neumann_inverse_approx(asym, 2));
}

TEST_CASE("neumann error bound holds across random SPD inputs") {
  // The bound kappa^(n+1)/m is attained exactly at the smallest eigenvalue,
  // so the comparison needs slack for the power-iteration estimate of the
  // eigen-range used to build gamma. A wrong construction overshoots by
  // orders of magnitude, not by 1e-4.
  Rng rng(20260816);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 2 + int(rng.uniform() * 29.0);
    Eigen::MatrixXd a = random_spd(rng, d);
    int n = int(rng.uniform() * 11.0);
    auto ap = neumann_inverse_approx(a, n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const double m = es.eigenvalues().minCoeff();
    const double big = es.eigenvalues().maxCoeff();
    const double kappa = (big - m) / (big + m);
    CHECK(std::fabs(ap.kappa - kappa) < 1e-6 * kappa + 1e-10);

    Eigen::MatrixXd diff = a.inverse() - ap.matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(0.5 * (diff + diff.transpose()));
    const double measured = eg.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(measured <= ap.error_bound * (1.0 + 2e-4) + 1e-12);
  }
}

TEST_CASE("neumann output is banded for banded input") {
  // tridiagonal SPD input: bandwidth of B_n at most n+... degree n keeps n*k
  const int n = 12;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i + 1, i) = a(i, i + 1) = 0.3;
  for (int deg : {0, 1, 2, 3, 5}) {
    auto ap = neumann_inverse_approx(a, deg);
    CHECK(ap.bandwidth <= deg * 1);
  }
}

TEST_CASE("neumann gap decreases geometrically at rate about kappa") {
  Rng rng(5150);
  Eigen::MatrixXd a = random_spd(rng, 10);
  Eigen::MatrixXd exact = a.inverse();
  double prev = -1.0;
  double kappa = 0.0;
  std::vector<double> gaps;
  for (int n = 0; n <= 8; ++n) {
    auto ap = neumann_inverse_approx(a, n);
    kappa = ap.kappa;
    gaps.push_back(operator_norm(exact - ap.matrix));
  }
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
    CHECK(gaps[i + 1] < gaps[i]);
    // ratio tracks kappa within a factor of two
    CHECK(gaps[i + 1] / gaps[i] < std::min(1.0, 2.0 * kappa));
  }
  (void)prev;
}

TEST_CASE("banded posterior approximation identity case") {
  auto bp = banded_posterior_approx(Eigen::MatrixXd::Identity(8, 8), Eigen::MatrixXd(), 0.01, 2);
  CHECK(bp.matrix == Eigen::MatrixXd::Identity(8, 8));
  CHECK(bp.report.gap < 1e-14);
  CHECK(bp.report.bandwidth == 0);
}

TEST_CASE("banded posterior approximation improves with degree and respects bandwidth") {
  const int n = 40;
  // exponentially decaying SPD prior
  Eigen::MatrixXd omega(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) omega(i, j) = std::pow(0.55, std::abs(i - j));

  // banded design: local averaging rows
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(60, n);
  Rng rng(11);
  for (int r = 0; r < 60; ++r) {
    int c = int(rng.uniform() * (n - 2));
    phi(r, c) = 0.7;
    phi(r, c + 1) = 0.4;
    phi(r, c + 2) = 0.2;
  }
  Eigen::MatrixXd ptp = phi.transpose() * phi;
  int q = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (ptp(i, j) != 0.0) q = std::max(q, i - j);

  double prev = 1e300;
  for (int n0 : {1, 2, 3, 4}) {
    auto bp = banded_posterior_approx(omega, phi, 0.01, n0);
    CHECK(bp.report.gap <= prev + 1e-10);
    prev = bp.report.gap;
    CHECK(bp.report.bandwidth <= std::max(n0 * n0 * bp.report.r, n0 * q));
  }

  // flat covariance never decays, so the bandable precondition fails
  Eigen::MatrixXd flat = compound_symmetry(10, 0.5).materialize();
  CHECK_THROWS(banded_posterior_approx(flat, Eigen::MatrixXd(), 0.01, 2));
}
