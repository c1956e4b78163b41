#include "tmvnlab/gaussprob.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tmvnlab/quadrature.hpp"
#include "tmvnlab/stats.hpp"

namespace tmvnlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBatches = 16;

int thread_budget() {
  if (const char* env = std::getenv("TMVNLAB_THREADS")) {
    int t = std::atoi(env);
    if (t >= 1) return std::min(t, kBatches);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return std::clamp(int(hw == 0 ? 1 : hw), 1, kBatches);
}

std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  if (count <= 0) return primes;
  int limit = std::max(64, int(double(count) * (std::log(double(count) + 2.0) + 3.0)));
  for (;;) {
    std::vector<bool> composite(limit + 1, false);
    primes.clear();
    for (int p = 2; p <= limit && int(primes.size()) < count; ++p) {
      if (composite[p]) continue;
      primes.push_back(p);
      for (long long q = (long long)p * p; q <= limit; q += p) composite[size_t(q)] = true;
    }
    if (int(primes.size()) >= count) return primes;
    limit *= 2;
  }
}

// Connected components of the nonzero pattern, smallest member first.
std::vector<std::vector<int>> components_of(const Eigen::MatrixXd& sigma) {
  const int d = int(sigma.rows());
  std::vector<int> parent(d);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < i; ++j)
      if (sigma(i, j) != 0.0) {
        int a = find(i), b = find(j);
        if (a != b) parent[a] = b;
      }
  std::vector<std::vector<int>> groups(d);
  for (int i = 0; i < d; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

struct SovPlan {
  Eigen::MatrixXd m;         // strictly lower part of the unit-diagonal Cholesky
  Eigen::VectorXd abar;      // lower bounds scaled by the Cholesky diagonal
  Eigen::VectorXd bbar;      // upper bounds scaled likewise
  Eigen::VectorXd mu;        // exponential tilt, solved at the saddlepoint
};

// Greedy variable ordering by smallest expected conditional interval
// probability, fused with the Cholesky factorization.
SovPlan plan_component(Eigen::MatrixXd s, Eigen::VectorXd a, Eigen::VectorXd b) {
  const int d = int(s.rows());
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(d);

  for (int t = 0; t < d; ++t) {
    int best = -1;
    double best_p = 2.0, best_s = 0.0, best_la = 0.0, best_ub = 0.0;
    for (int i = t; i < d; ++i) {
      double s2 = s(i, i) - chol.row(i).head(t).squaredNorm();
      if (!(s2 > 1e-14 * s(i, i))) continue;
      const double sd = std::sqrt(s2);
      const double shift = chol.row(i).head(t).dot(y.head(t));
      const double la = (a[i] - shift) / sd;
      const double ub = (b[i] - shift) / sd;
      const double p = interval_prob(la, ub);
      if (p < best_p) {
        best_p = p;
        best = i;
        best_s = sd;
        best_la = la;
        best_ub = ub;
      }
    }
    if (best < 0) throw std::runtime_error("rect_prob_sov: Cholesky failure (covariance not positive definite)");
    if (best != t) {
      s.row(t).swap(s.row(best));
      s.col(t).swap(s.col(best));
      chol.row(t).swap(chol.row(best));
      std::swap(a[t], a[best]);
      std::swap(b[t], b[best]);
    }
    chol(t, t) = best_s;
    for (int i = t + 1; i < d; ++i)
      chol(i, t) = (s(i, t) - chol.row(i).head(t).dot(chol.row(t).head(t))) / best_s;
    y[t] = tn_moments(best_la, best_ub).c;
  }

  SovPlan plan;
  plan.m = Eigen::MatrixXd::Zero(d, d);
  plan.abar.resize(d);
  plan.bbar.resize(d);
  for (int t = 0; t < d; ++t) {
    plan.m.row(t).head(t) = chol.row(t).head(t) / chol(t, t);
    plan.abar[t] = a[t] / chol(t, t);
    plan.bbar[t] = b[t] / chol(t, t);
  }
  plan.mu = Eigen::VectorXd::Zero(d);
  return plan;
}

// Saddlepoint of the tilted importance-sampling weight: damped Newton on
// the joint system  x = mu + c(x, mu),  mu = M^T c(x, mu),  where c is the
// truncated-normal mean of each conditional factor. Failure falls back to
// the untilted sampler (correct, just higher variance).
void solve_tilt(SovPlan& plan) {
  const int d = int(plan.m.rows());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d), mu = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd c(d), v(d), f(2 * d);

  auto residual = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& mm,
                      Eigen::VectorXd& cc, Eigen::VectorXd& vv, Eigen::VectorXd& ff) {
    for (int t = 0; t < d; ++t) {
      const double w = plan.m.row(t).head(t).dot(xx.head(t));
      auto tm = tn_moments(plan.abar[t] - w - mm[t], plan.bbar[t] - w - mm[t]);
      cc[t] = tm.c;
      vv[t] = tm.v;
    }
    ff.head(d) = xx - mm - cc;
    ff.tail(d) = mm - plan.m.transpose() * cc;
    return ff.norm();
  };

  double fn = residual(x, mu, c, v, f);
  for (int it = 0; it < 200 && fn > 1e-10; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    Eigen::MatrixXd scaled = (v.array() - 1.0).matrix().asDiagonal() * plan.m;
    jac.topLeftCorner(d, d) = Eigen::MatrixXd::Identity(d, d) - scaled;
    jac.topRightCorner(d, d).diagonal() = -v;
    jac.bottomLeftCorner(d, d) = -plan.m.transpose() * scaled;
    jac.bottomRightCorner(d, d) =
        Eigen::MatrixXd::Identity(d, d) -
        plan.m.transpose() * (v.array() - 1.0).matrix().asDiagonal();

    Eigen::VectorXd step = jac.partialPivLu().solve(-f);
    if (!step.allFinite()) break;

    double tau = 1.0;
    bool accepted = false;
    Eigen::VectorXd xt(d), mt(d), ct(d), vt(d), ft(2 * d);
    for (int h = 0; h < 40; ++h) {
      xt = x + tau * step.head(d);
      mt = mu + tau * step.tail(d);
      const double fn2 = residual(xt, mt, ct, vt, ft);
      if (std::isfinite(fn2) && fn2 < fn) {
        x = xt;
        mu = mt;
        c = ct;
        v = vt;
        f = ft;
        fn = fn2;
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;
  }
  if (fn <= 1e-6 && mu.allFinite()) plan.mu = mu;
}

// One shifted-lattice batch of the tilted separation-of-variables
// estimator. frac(k sqrt(p_j)) coordinates advance incrementally so no
// precision is lost to large k.
double run_batch(const SovPlan& plan, const std::vector<int>& primes,
                 std::int64_t n_points, std::uint64_t batch_seed) {
  const int d = int(plan.m.rows());
  const int dim = std::max(1, d - 1);
  Rng rng(batch_seed);
  std::vector<double> shift(dim), step(dim), coord(dim);
  for (int j = 0; j < dim; ++j) {
    shift[j] = rng.uniform();
    double r = std::sqrt(double(primes[j]));
    step[j] = r - std::floor(r);
    coord[j] = shift[j];
  }

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
  double max_logw = -kInf;
  std::vector<double> logw(static_cast<std::size_t>(n_points), 0.0);
  for (std::int64_t k = 0; k < n_points; ++k) {
    for (int j = 0; j < dim; ++j) {
      coord[j] += step[j];
      if (coord[j] >= 1.0) coord[j] -= 1.0;
    }
    double lw = 0.0;
    for (int t = 0; t < d; ++t) {
      const double w = plan.m.row(t).head(t).dot(xi.head(t));
      const double lo = plan.abar[t] - w - plan.mu[t];
      const double hi = plan.bbar[t] - w - plan.mu[t];
      const double lnz = ln_interval_prob(lo, hi);
      lw += 0.5 * plan.mu[t] * plan.mu[t] + lnz;
      if (t + 1 < d) {
        double u = coord[t];
        const double draw = plan.mu[t] + tn_inverse(u, lo, hi);
        xi[t] = draw;
        lw -= plan.mu[t] * draw;
      }
      if (lnz == -kInf) {  // dead point: weight is zero however it continues
        lw = -kInf;
        for (int r = t; r + 1 < d; ++r) xi[r] = 0.0;
        break;
      }
    }
    logw[size_t(k)] = lw;
    if (lw > max_logw) max_logw = lw;
  }

  if (max_logw == -kInf) return 0.0;
  double acc = 0.0;
  for (double lw : logw) acc += std::exp(lw - max_logw);
  return std::exp(max_logw) * (acc / double(n_points));
}

struct ComponentEstimate {
  bool stochastic = false;
  double value = 0.0;
  std::array<double, kBatches> batch{};
};

ComponentEstimate estimate_component(const Eigen::MatrixXd& s, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b, std::int64_t n_samples,
                                     std::uint64_t comp_seed) {
  ComponentEstimate out;
  const int d = int(s.rows());
  if (d == 1) {
    out.value = interval_prob(a[0] / std::sqrt(s(0, 0)), b[0] / std::sqrt(s(0, 0)));
    return out;
  }
  bool unconstrained = true;
  for (int i = 0; i < d; ++i)
    if (a[i] != -kInf || b[i] != kInf) unconstrained = false;
  if (unconstrained) {
    out.value = 1.0;
    return out;
  }

  SovPlan plan = plan_component(s, a, b);
  solve_tilt(plan);

  const std::int64_t per_batch = (n_samples + kBatches - 1) / kBatches;
  static const std::vector<int> primes = first_primes(512);
  if (d - 1 > int(primes.size()))
    throw std::invalid_argument("rect_prob_sov: dimension beyond lattice table");

  Rng base(comp_seed);
  std::array<std::uint64_t, kBatches> seeds{};
  for (int bidx = 0; bidx < kBatches; ++bidx) seeds[size_t(bidx)] = base.derive(bidx).seed();

  const int threads = thread_budget();
  if (threads <= 1) {
    for (int bidx = 0; bidx < kBatches; ++bidx)
      out.batch[size_t(bidx)] = run_batch(plan, primes, per_batch, seeds[size_t(bidx)]);
  } else {
    std::vector<std::thread> pool;
    for (int tid = 0; tid < threads; ++tid)
      pool.emplace_back([&, tid] {
        for (int bidx = tid; bidx < kBatches; bidx += threads)
          out.batch[size_t(bidx)] = run_batch(plan, primes, per_batch, seeds[size_t(bidx)]);
      });
    for (auto& th : pool) th.join();
  }

  out.stochastic = true;
  out.value = std::accumulate(out.batch.begin(), out.batch.end(), 0.0) / kBatches;
  return out;
}

}  // namespace

const char* to_string(ProbMethod m) {
  switch (m) {
    case ProbMethod::sov_mc: return "sov_mc";
    case ProbMethod::cs_quadrature: return "cs_quadrature";
    case ProbMethod::closed_form: return "closed_form";
  }
  return "unknown";
}

Rectangle Rectangle::orthant(int d, double a) {
  Rectangle r;
  r.lower = Eigen::VectorXd::Constant(d, a);
  r.upper = Eigen::VectorXd::Constant(d, kInf);
  return r;
}

void Rectangle::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("Rectangle: sides must be nonempty and of equal length");
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || !(lower[i] < upper[i]))
      throw std::invalid_argument("Rectangle: need lower < upper in every coordinate");
  }
}

ProbEstimate rect_prob_sov(const Eigen::MatrixXd& sigma, const Rectangle& rect,
                           std::int64_t n_samples, std::uint64_t seed) {
  rect.validate();
  const int d = int(sigma.rows());
  if (sigma.cols() != d || rect.lower.size() != d)
    throw std::invalid_argument("rect_prob_sov: dimension mismatch");
  if (n_samples < 1000)
    throw std::invalid_argument("rect_prob_sov: need n_samples >= 1000");

  auto comps = components_of(sigma);
  std::vector<ComponentEstimate> parts;
  parts.reserve(comps.size());
  const std::int64_t per_batch = (n_samples + kBatches - 1) / kBatches;
  bool any_stochastic = false;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    const auto& idx = comps[ci];
    const int m = int(idx.size());
    Eigen::MatrixXd s(m, m);
    Eigen::VectorXd a(m), b(m);
    for (int i = 0; i < m; ++i) {
      a[i] = rect.lower[idx[size_t(i)]];
      b[i] = rect.upper[idx[size_t(i)]];
      for (int j = 0; j < m; ++j) s(i, j) = sigma(idx[size_t(i)], idx[size_t(j)]);
    }
    parts.push_back(estimate_component(s, a, b, n_samples, mix_seed(seed, 1000 + ci)));
    any_stochastic = any_stochastic || parts.back().stochastic;
  }

  ProbEstimate est;
  if (!any_stochastic) {
    est.method = ProbMethod::closed_form;
    est.value = 1.0;
    for (const auto& p : parts) est.value *= p.value;
    return est;
  }

  est.method = ProbMethod::sov_mc;
  est.n_samples = per_batch * kBatches;
  est.batch_values.assign(kBatches, 1.0);
  for (const auto& p : parts)
    for (int bidx = 0; bidx < kBatches; ++bidx)
      est.batch_values[size_t(bidx)] *= p.stochastic ? p.batch[size_t(bidx)] : p.value;

  // Independent components: the product of per-component batch means is the
  // per-batch estimate, and the spread of those products gives the error.
  const double mean = std::accumulate(est.batch_values.begin(), est.batch_values.end(), 0.0) / kBatches;
  double ss = 0.0;
  for (double v : est.batch_values) ss += (v - mean) * (v - mean);
  est.value = mean;
  est.std_error = std::sqrt(ss / (double(kBatches) * double(kBatches - 1)));
  return est;
}

namespace {

ProbEstimate cs_quadrature_run(const std::function<double(double)>& f, double w_max,
                               const char* who) {
  QuadResult r = integrate(f, -w_max, w_max, 1e-13, 1e-11, 6000);
  if (r.value > 0.0 && r.error > 1e-10 * r.value) {
    // polish to relative accuracy when the value is tiny
    QuadResult r2 = integrate(f, -w_max, w_max, std::max(5e-300, 1e-11 * r.value), 1e-11, 8000);
    if (r2.converged || r2.error < r.error) r = r2;
  }
  if (!r.converged && r.error > std::max(1e-10, 1e-9 * std::abs(r.value)))
    throw std::runtime_error(std::string(who) + ": quadrature did not converge, achieved error " +
                             std::to_string(r.error));
  ProbEstimate est;
  est.value = std::clamp(r.value, 0.0, 1.0);
  est.method = ProbMethod::cs_quadrature;
  est.n_samples = r.evaluations;
  return est;
}

}  // namespace

ProbEstimate cs_orthant_prob(int d, double rho, double a) {
  if (d < 1) throw std::invalid_argument("cs_orthant_prob: d must be >= 1");
  if (!(rho > 0.0) || !(rho < 1.0))
    throw std::invalid_argument("cs_orthant_prob: rho must lie in (0,1)");
  if (!(a >= 0.0)) throw std::invalid_argument("cs_orthant_prob: a must be >= 0");
  const double sr = std::sqrt(rho), sq = std::sqrt(1.0 - rho);
  const double w_max = 8.0 + std::sqrt(2.0 * std::log(double(std::max(d, 2))));
  auto f = [=](double w) {
    return norm_pdf(w) * std::exp(double(d) * norm_ln_sf((a - sr * w) / sq));
  };
  return cs_quadrature_run(f, w_max, "cs_orthant_prob");
}

ProbEstimate cs_strip_prob(int d, double rho, double delta) {
  if (d < 2) throw std::invalid_argument("cs_strip_prob: d must be >= 2");
  if (!(rho > 0.0) || !(rho < 1.0))
    throw std::invalid_argument("cs_strip_prob: rho must lie in (0,1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("cs_strip_prob: delta must be >= 0");
  const double sr = std::sqrt(rho), sq = std::sqrt(1.0 - rho);
  const double w_max = 8.0 + std::sqrt(2.0 * std::log(double(d)));
  auto f = [=](double w) {
    const double lo = -sr * w / sq;
    const double strip = interval_prob(lo, (delta - sr * w) / sq);
    if (strip == 0.0) return 0.0;
    return norm_pdf(w) * strip * std::exp(double(d - 1) * norm_ln_sf(lo));
  };
  return cs_quadrature_run(f, w_max, "cs_strip_prob");
}

std::pair<double, double> mills_bounds(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("mills_bounds: x must be positive");
  const double pdf = norm_pdf(x);
  return {x / (x * x + 1.0) * pdf, pdf / x};
}

std::pair<double, double> max_gaussian_bounds(int n, double c1) {
  if (n < 2) throw std::invalid_argument("max_gaussian_bounds: need N >= 2");
  const double upper = std::sqrt(2.0 * std::log(double(n)));
  return {c1 * upper, upper};
}

}  // namespace tmvnlab
