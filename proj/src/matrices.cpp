#include "tmvnlab/matrices.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tmvnlab/stats.hpp"

namespace tmvnlab {

namespace {

bool is_spd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

int exact_bandwidth(const Eigen::MatrixXd& a) {
  int bw = 0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < i; ++j)
      if (a(i, j) != 0.0 && i - j > bw) bw = i - j;
  return bw;
}

Eigen::MatrixXd band_truncate(const Eigen::MatrixXd& a, int r) {
  Eigen::MatrixXd out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (std::abs(i - j) > r) out(i, j) = 0.0;
  return out;
}

}  // namespace

Eigen::MatrixXd CompoundSymmetry::materialize() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d, d, rho);
  m.diagonal().setOnes();
  return m;
}

CompoundSymmetry compound_symmetry(int d, double rho) {
  if (d < 1) throw std::invalid_argument("compound_symmetry: d must be >= 1");
  if (!(rho > 0.0) || !(rho < 1.0))
    throw std::invalid_argument("compound_symmetry: rho must lie in (0,1)");
  return CompoundSymmetry{d, rho};
}

CorrelationBand::CorrelationBand(int N, int K, const Eigen::MatrixXd& entries)
    : N_(N), K_(K), entries_(entries) {
  if (N < 1) throw std::invalid_argument("CorrelationBand: N must be positive");
  if (K < 2 || K > N - 1)
    throw std::invalid_argument("CorrelationBand: need 2 <= K <= N-1");
  if (entries.rows() != N || entries.cols() != N)
    throw std::invalid_argument("CorrelationBand: entries must be N x N");
  for (int i = 0; i < N; ++i) {
    if (entries(i, i) != 1.0)
      throw std::invalid_argument("CorrelationBand: diagonal must be 1");
    for (int j = 0; j < i; ++j) {
      if (entries(i, j) != entries(j, i))
        throw std::invalid_argument("CorrelationBand: entries must be symmetric");
      if (i - j >= K && entries(i, j) != 0.0)
        throw std::invalid_argument("CorrelationBand: entries beyond lag K-1 must be 0");
      if (entries(i, j) < 0.0)
        throw std::invalid_argument("CorrelationBand: off-diagonal entries must be >= 0");
    }
  }
  if (!is_spd(entries_))
    throw std::invalid_argument("CorrelationBand: matrix is not positive definite");
}

BandStats band_stats(const CorrelationBand& sigma) {
  const Eigen::MatrixXd& s = sigma.entries();
  const int n = sigma.N(), k = sigma.K();
  BandStats st;
  st.rho_min = 2.0;
  st.rho_max = 0.0;
  bool any_nonzero = false;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      const double v = s(i, j);
      if (v > st.rho_max) st.rho_max = v;
      if (i - j <= k - 1 && v > 0.0) {
        any_nonzero = true;
        if (v < st.rho_min) st.rho_min = v;
      }
    }
  if (!any_nonzero)
    throw std::invalid_argument("band_stats: all off-diagonal entries are zero");
  return st;
}

Eigen::MatrixXd block_independent_approx(const CorrelationBand& sigma) {
  const int n = sigma.N(), k = sigma.K();
  if (n < 2 * k + 1)
    throw std::invalid_argument("block_independent_approx: need N >= 2K+1");
  const Eigen::MatrixXd& s = sigma.entries();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  out.topLeftCorner(k, k) = s.topLeftCorner(k, k);
  out.block(k, k, k, k) = s.block(k, k, k, k);
  out.bottomRightCorner(n - 2 * k, n - 2 * k) = s.bottomRightCorner(n - 2 * k, n - 2 * k);
  return out;
}

double operator_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Rng rng(0x5eed0a11);
  Eigen::VectorXd v(a.cols());
  for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    est = std::sqrt(nw);
    // ||Bv - ||Bv|| v|| small certifies ||Bv|| is within that residual of a
    // true eigenvalue of B = A^T A; near-degenerate top clusters pass this
    // quickly too, unlike a step-change test.
    if ((w - nw * v).norm() <= 1e-10 * nw) return est;
    v = w / nw;
  }
  return est;
}

NeumannApprox neumann_inverse_approx(const Eigen::MatrixXd& a, int n) {
  if (a.rows() != a.cols() || !a.isApprox(a.transpose(), 1e-12) || !is_spd(a))
    throw std::invalid_argument("neumann_inverse_approx: input must be symmetric positive definite");
  if (n < 0) throw std::invalid_argument("neumann_inverse_approx: degree must be >= 0");

  const int d = int(a.rows());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const double big = operator_norm(a);
  // Smallest eigenvalue via the shifted spectrum: big*I - A has norm big - m.
  const double small = big - operator_norm(big * eye - a);
  if (!(small > 0.0))
    throw std::invalid_argument("neumann_inverse_approx: input must be positive definite");

  NeumannApprox out;
  out.degree = n;
  out.gamma = 2.0 / (big + small);
  out.kappa = (big - small) / (big + small);
  out.m_min = small;
  out.error_bound = std::pow(out.kappa, n + 1) / small;

  // Horner form of gamma * sum_j (I - gamma A)^j keeps only one running
  // product in memory.
  const Eigen::MatrixXd t = eye - out.gamma * a;
  Eigen::MatrixXd s = eye;
  for (int j = 0; j < n; ++j) s = eye + (t * s).eval();
  out.matrix = out.gamma * s;
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.bandwidth = exact_bandwidth(out.matrix);
  return out;
}

BandedPosterior banded_posterior_approx(const Eigen::MatrixXd& omega,
                                        const Eigen::MatrixXd& phi,
                                        double eps, int n0) {
  const int n = int(omega.rows());
  if (omega.cols() != n) throw std::invalid_argument("banded_posterior_approx: omega must be square");
  if (phi.size() != 0 && phi.cols() != n)
    throw std::invalid_argument("banded_posterior_approx: phi column count must match omega");
  if (!(eps > 0.0) || eps >= 1.0)
    throw std::invalid_argument("banded_posterior_approx: eps must lie in (0,1)");
  if (n0 < 1) throw std::invalid_argument("banded_posterior_approx: n0 must be positive");
  if (!is_spd(omega))
    throw std::invalid_argument("banded_posterior_approx: omega must be positive definite");

  // Tail-decay check: fit log max_{|i-j|=lag} |omega_ij| against lag. A
  // fitted ratio >= 1 means the off-diagonal mass never decays and no
  // band truncation can be faithful.
  double lambda0 = 0.0, alpha = 0.0;
  {
    std::vector<double> lag, logv;
    for (int d1 = 1; d1 < n; ++d1) {
      double mx = 0.0;
      for (int i = 0; i + d1 < n; ++i) mx = std::max(mx, std::abs(omega(i + d1, i)));
      if (mx > 0.0) {
        lag.push_back(double(d1));
        logv.push_back(std::log(mx));
      }
    }
    if (lag.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lag.size(); ++i) {
        sx += lag[i];
        sy += logv[i];
        sxx += lag[i] * lag[i];
        sxy += lag[i] * logv[i];
      }
      const double m = lag.size();
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      const double icept = (sy - slope * sx) / m;
      alpha = std::exp(slope);
      lambda0 = std::exp(icept);
      if (alpha >= 1.0)
        throw std::invalid_argument(
            "banded_posterior_approx: omega off-diagonal does not decay, not bandable");
    } else if (lag.size() == 1) {
      lambda0 = std::exp(logv[0]);
      alpha = 0.5;
    }
  }

  BandedPosterior out;
  out.report.r = std::min(n - 1, 2 * int(std::ceil(std::log(1.0 / eps))));
  out.report.n1 = n0;
  out.report.m1 = n0;
  out.report.lambda0 = lambda0;
  out.report.alpha = alpha;

  Eigen::MatrixXd omega_r = band_truncate(omega, out.report.r);
  if (!is_spd(omega_r))
    throw std::invalid_argument(
        "banded_posterior_approx: truncation destroys positive definiteness at this eps");

  NeumannApprox inv1 = neumann_inverse_approx(omega_r, out.report.n1);
  out.report.kappa_prior = inv1.kappa;

  Eigen::MatrixXd precision = inv1.matrix;
  if (phi.size() != 0) precision += phi.transpose() * phi;

  NeumannApprox inv2 = neumann_inverse_approx(precision, out.report.m1);
  out.report.kappa_post = inv2.kappa;

  out.matrix = inv2.matrix;
  out.report.bandwidth = inv2.bandwidth;

  // Dense oracle for the reported gap.
  Eigen::MatrixXd exact_prec = omega.llt().solve(Eigen::MatrixXd::Identity(n, n));
  if (phi.size() != 0) exact_prec += phi.transpose() * phi;
  Eigen::MatrixXd exact = exact_prec.llt().solve(Eigen::MatrixXd::Identity(n, n));
  out.report.gap = operator_norm(exact - out.matrix);
  return out;
}

}  // namespace tmvnlab
