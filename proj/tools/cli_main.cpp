// Experiment drivers over the tmvnlab library. Four subcommands:
//
//   marginal        slab-mass ladders with marginal density curves
//   bounds          slab-mass bound chain, bracket sweep and region map
//   fit             monotone regression on a CSV or a built-in truth
//   posterior-band  posterior scale matrices and banded approximations
//
// Every run writes manifest.json holding the resolved configuration and a
// result summary; outputs are a pure function of that configuration, so
// `rerun --manifest` reproduces the bytes. Sub-experiments execute in
// parallel on seeds derived from --seed, TMVNLAB_THREADS caps the worker
// count, and all writes go through temp-file + rename.
//
// Exit codes: 0 success, 2 invalid configuration or data, 3 numerics.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "band_families.hpp"
#include "tmvnlab/basis.hpp"
#include "tmvnlab/csvio.hpp"
#include "tmvnlab/gaussprob.hpp"
#include "tmvnlab/massshift.hpp"
#include "tmvnlab/matrices.hpp"
#include "tmvnlab/regress.hpp"
#include "tmvnlab/stats.hpp"
#include "tmvnlab/tmvn.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace tmvnlab;

constexpr const char* kArtifactVersion = "1.0.0";

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string format = "csv";
};

int thread_cap() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("TMVNLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && (unsigned long)v < hw)
      hw = unsigned(v);
  }
  return int(hw);
}

// Runs job(0..n-1), at most thread_cap() at a time. Each job is a pure
// function of its index, so scheduling cannot change any result.
void parallel_for_jobs(int n, const std::function<void(int)>& job) {
  const int workers = std::min(n, thread_cap());
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Table artifact honoring --format; returns the path written.
std::string write_table(const GlobalOpts& g, const std::string& stem,
                        const std::vector<std::string>& columns,
                        const Eigen::MatrixXd& rows) {
  if (g.format == "json") {
    const std::string path = g.out_dir + "/" + stem + ".json";
    json j;
    j["columns"] = columns;
    json data = json::array();
    for (int i = 0; i < rows.rows(); ++i) {
      json row = json::array();
      for (int c = 0; c < rows.cols(); ++c) row.push_back(rows(i, c));
      data.push_back(std::move(row));
    }
    j["rows"] = std::move(data);
    atomic_write_text(path, j.dump(2) + "\n");
    return path;
  }
  const std::string path = g.out_dir + "/" + stem + ".csv";
  write_table_csv(path, columns, rows);
  return path;
}

std::string write_matrix(const GlobalOpts& g, const std::string& stem,
                         const Eigen::MatrixXd& m) {
  if (g.format == "json") {
    const std::string path = g.out_dir + "/" + stem + ".json";
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    json data = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      data.push_back(std::move(row));
    }
    j["data"] = std::move(data);
    atomic_write_text(path, j.dump(2) + "\n");
    return path;
  }
  const std::string path = g.out_dir + "/" + stem + ".csv";
  write_matrix_csv(path, m);
  return path;
}

json prob_json(const ProbEstimate& p) {
  return json{{"value", p.value},
              {"std_error", p.std_error},
              {"method", to_string(p.method)},
              {"n_samples", p.n_samples}};
}

void note(const std::string& path) { std::cout << "wrote " << path << "\n"; }

// The manifest is written last so a crashed run never leaves one behind.
// out_dir stays out of it: reruns may target any directory.
void write_manifest(const GlobalOpts& g, const std::string& command,
                    json config, json summary) {
  config["seed"] = g.seed;
  config["format"] = g.format;
  json m;
  m["artifact_version"] = kArtifactVersion;
  m["command"] = command;
  m["config"] = std::move(config);
  m["summary"] = std::move(summary);
  const std::string path = g.out_dir + "/manifest.json";
  atomic_write_text(path, m.dump(2) + "\n");
  note(path);
}

// ---------------------------------------------------------------- marginal

struct MarginalOpts {
  std::string ladder = "K";  // K | N | joint | all
  bool diagonal = false;     // identity-scale control instead of the band
  double delta = 0.25;
  std::int64_t samples = 1 << 16;
  double theta_max = 3.0;
  int grid_points = 41;
};

struct LadderMember {
  std::string tag;  // file-name stem and summary key prefix
  std::string ladder;
  int K = 0;  // 0 marks the identity control
  int N = 0;
  std::uint64_t stream = 0;  // fixed per member, independent of selection
};

std::vector<LadderMember> marginal_members(const MarginalOpts& o) {
  std::vector<LadderMember> m;
  const auto add = [&](const std::string& ladder, int K, int N, std::uint64_t s) {
    std::string tag = ladder + "_K" + std::to_string(K) + "_N" + std::to_string(N);
    if (K == 0) tag = "diag_N" + std::to_string(N);
    m.push_back({tag, ladder, K, N, s});
  };
  if (o.diagonal) {
    add("diag", 0, 10, 400);
    add("diag", 0, 50, 401);
    add("diag", 0, 100, 402);
    return m;
  }
  if (o.ladder == "K" || o.ladder == "all") {
    add("kladder", 2, 100, 100);
    add("kladder", 5, 100, 101);
    add("kladder", 20, 100, 102);
  }
  if (o.ladder == "N" || o.ladder == "all") {
    add("nladder", 5, 10, 200);
    add("nladder", 5, 50, 201);
    add("nladder", 5, 100, 202);
  }
  if (o.ladder == "joint" || o.ladder == "all") {
    add("joint", 5, 25, 300);
    add("joint", 20, 100, 301);
    add("joint", 50, 250, 302);
  }
  return m;
}

void run_marginal(const GlobalOpts& g, const MarginalOpts& o) {
  const std::vector<LadderMember> members = marginal_members(o);
  const Eigen::VectorXd grid =
      Eigen::VectorXd::LinSpaced(o.grid_points, 0.0, o.theta_max);

  struct Out {
    Eigen::MatrixXd curve;
    ProbEstimate alpha;
  };
  std::vector<Out> outs(members.size());

  parallel_for_jobs(int(members.size()), [&](int i) {
    const LadderMember& mem = members[i];
    const std::uint64_t seed_m = mix_seed(g.seed, mem.stream);
    const Eigen::MatrixXd sigma =
        mem.K == 0 ? Eigen::MatrixXd::Identity(mem.N, mem.N)
                   : grid_matern_band(mem.N, mem.K).entries();
    const TruncatedMVN t(Eigen::VectorXd::Zero(mem.N), sigma, o.samples, seed_m);
    Eigen::MatrixXd curve(o.grid_points, 3);
    for (int p = 0; p < o.grid_points; ++p) {
      MarginalQuery q;
      q.k = 1;
      q.point = Eigen::VectorXd::Constant(1, grid[p]);
      const DensityEstimate d = marginal_density_est(t, q);
      curve(p, 0) = grid[p];
      curve(p, 1) = d.value;
      curve(p, 2) = d.std_error;
    }
    outs[i] = {std::move(curve),
               alpha_mass(sigma, o.delta, o.samples, mix_seed(seed_m, 1))};
  });

  json ladders = json::object();
  std::string cur_ladder;
  Eigen::MatrixXd alpha_rows;
  int row = 0;
  const auto flush_alpha_table = [&]() {
    if (cur_ladder.empty()) return;
    note(write_table(g, "alpha_" + cur_ladder, {"K", "N", "alpha", "se"},
                     alpha_rows.topRows(row)));
    // strict decrease along the ladder, the run's headline claim
    bool mono = true;
    for (int r = 1; r < row; ++r)
      mono = mono && alpha_rows(r, 2) < alpha_rows(r - 1, 2);
    ladders[cur_ladder]["alpha_strictly_decreasing"] = mono;
  };
  for (std::size_t i = 0; i < members.size(); ++i) {
    const LadderMember& mem = members[i];
    note(write_table(g, mem.tag, {"theta", "density", "se"}, outs[i].curve));
    if (mem.ladder != cur_ladder) {
      flush_alpha_table();
      cur_ladder = mem.ladder;
      alpha_rows.resize(members.size(), 4);
      row = 0;
    }
    alpha_rows.row(row++) << mem.K, mem.N, outs[i].alpha.value, outs[i].alpha.std_error;
    ladders[mem.ladder]["members"].push_back(
        json{{"K", mem.K},
             {"N", mem.N},
             {"curve", mem.tag},
             {"alpha", prob_json(outs[i].alpha)}});
  }
  flush_alpha_table();

  json summary;
  summary["ladders"] = std::move(ladders);
  if (o.diagonal) {
    // under an identity scale the first-coordinate marginal cannot depend
    // on the dimension, so the control curves must agree bitwise
    bool identical = true;
    double spread = 0.0;
    for (std::size_t i = 1; i < outs.size(); ++i) {
      identical = identical && outs[i].curve == outs[0].curve;
      spread = std::max(spread,
                        std::abs(outs[i].alpha.value - outs[0].alpha.value));
    }
    summary["control_curves_identical"] = identical;
    summary["control_alpha_spread"] = spread;
  }

  json config{{"ladder", o.ladder},       {"diagonal", o.diagonal},
              {"delta", o.delta},         {"samples", o.samples},
              {"theta_max", o.theta_max}, {"grid_points", o.grid_points}};
  write_manifest(g, "marginal", std::move(config), std::move(summary));
}

// ------------------------------------------------------------------ bounds

struct BoundsOpts {
  int N = 205;
  int K = 20;
  double rho = 0.6;
  double delta = 0.1;
  double alpha = -1.0;  // < 0 resolves to the region rate, else 0.5
  std::int64_t samples = 1 << 18;
  int region_grid = 200;
};

void run_bounds(const GlobalOpts& g, const BoundsOpts& o) {
  double alpha = o.alpha;
  if (alpha < 0.0) {
    try {
      alpha = default_lemma2_alpha(o.rho, o.rho);
    } catch (const std::invalid_argument&) {
      alpha = 0.5;  // outside the region the default rate is undefined
    }
  }

  const CorrelationBand band = block_chain(o.N, o.K, o.rho);
  BoundChainReport rep;
  Eigen::MatrixXd sweep(4 * 3 * 2 * 2, 9);
  Eigen::MatrixXd mask(o.region_grid * o.region_grid, 3);

  parallel_for_jobs(3, [&](int job) {
    if (job == 0) {
      rep = theorem1_chain(band, o.delta, alpha, o.samples, mix_seed(g.seed, 1));
    } else if (job == 1) {
      // bracket sweep: the closed-form pair encloses the quadrature pair,
      // lower <= orthant and strip <= upper, with the nesting strip <= orthant
      int r = 0;
      for (int d : {4, 16, 64, 256})
        for (double rho : {0.55, 0.7, 0.9})
          for (double delta : {0.05, 0.25})
            for (double a : {0.0, 0.5}) {
              const double orthant = cs_orthant_prob(d, rho, a).value;
              const double strip = cs_strip_prob(d, rho, delta).value;
              const double lower = lemma2_lower(d, rho, a);
              const double upper = lemma2_upper(d, rho, delta, 0.5);
              const bool inside =
                  lower <= orthant && strip <= upper && strip <= orthant;
              sweep.row(r++) << double(d), rho, delta, a, orthant, strip,
                  lower, upper, inside ? 1.0 : 0.0;
            }
    } else {
      // membership map of the (rho_min, rho_max) region on an open grid
      int r = 0;
      for (int i = 0; i < o.region_grid; ++i)
        for (int j = 0; j < o.region_grid; ++j) {
          const double u = (i + 0.5) / o.region_grid;
          const double v = (j + 0.5) / o.region_grid;
          mask.row(r++) << u, v, in_region_Q(u, v) ? 1.0 : 0.0;
        }
    }
  });

  const bool ordering = rep.alpha_hat.value <= rep.R && rep.R <= rep.R_prime;
  json chain{{"N", rep.N},
             {"K", rep.K},
             {"rho", o.rho},
             {"delta", o.delta},
             {"alpha_used", rep.alpha_used},
             {"alpha_hat", prob_json(rep.alpha_hat)},
             {"R", rep.R},
             {"R_prime", rep.R_prime},
             {"final_term1", rep.final_term1},
             {"final_term2", rep.final_term2},
             {"in_Q", rep.in_Q},
             {"rho_min", rep.rho_min},
             {"rho_max", rep.rho_max},
             {"k0_estimate", rep.k0_estimate},
             {"ordering_alpha_le_R_le_Rprime", ordering},
             {"Rprime_le_closed_form", rep.R_prime <=
                                           rep.final_term1 + rep.final_term2}};
  const std::string chain_path = g.out_dir + "/bound_chain.json";
  atomic_write_text(chain_path, chain.dump(2) + "\n");
  note(chain_path);

  note(write_table(g, "lemma2_sweep",
                   {"d", "rho", "delta", "a", "orthant", "strip", "lower",
                    "upper", "inside"},
                   sweep_full));
  note(write_table(g, "region_q", {"rho_min", "rho_max", "in_q"}, mask));

  int violations = 0;
  for (int r = 0; r < sweep_full.rows(); ++r)
    if (sweep_full(r, 8) == 0.0) ++violations;

  json summary{{"in_Q", rep.in_Q},
               {"ordering_alpha_le_R_le_Rprime", ordering},
               {"sweep_violations", violations}};
  json config{{"N", o.N},         {"K", o.K},
              {"rho", o.rho},     {"delta", o.delta},
              {"alpha", o.alpha}, {"samples", o.samples},
              {"region_grid", o.region_grid}};
  write_manifest(g, "bounds", std::move(config), std::move(summary));
}

// --------------------------------------------------------------------- fit

struct FitOpts {
  std::string data_path;
  std::string truth;  // f1 | f2; exactly one of data/truth must be set
  std::string variant = "global_local";
  std::string preset;
  int n = 200;
  int train = -1;  // < 0 resolves to 60% of n
  std::vector<int> knots = {50};
  double sigma = 0.5;
  int draws = 5000;
  int burn = 2000;
  int thin = 2;
};

FitVariant parse_variant(const std::string& v) {
  if (v == "tn_fixed") return FitVariant::tn_fixed;
  if (v == "tn_hyper") return FitVariant::tn_hyper;
  if (v == "global") return FitVariant::global;
  if (v == "global_local") return FitVariant::global_local;
  throw std::invalid_argument("fit: unknown variant " + v);
}

const char* variant_label(FitVariant v) {
  switch (v) {
    case FitVariant::tn_fixed: return "tn_fixed";
    case FitVariant::tn_hyper: return "tn_hyper";
    case FitVariant::global: return "global";
    case FitVariant::global_local: return "global_local";
  }
  return "?";
}

// Two numeric comma-separated columns; one optional header line. Anything
// else is a data error, reported before any sampling starts.
RegressionData load_xy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("fit: cannot open " + path);
  std::vector<double> xs, ys;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    bool ok = comma != std::string::npos &&
              line.find(',', comma + 1) == std::string::npos;
    double x = 0.0, y = 0.0;
    if (ok) {
      try {
        std::size_t used = 0;
        x = std::stod(line.substr(0, comma), &used);
        ok = used == comma;
        if (ok) {
          const std::string rest = line.substr(comma + 1);
          y = std::stod(rest, &used);
          ok = used == rest.size();
        }
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (lineno == 1) continue;  // header
      throw std::invalid_argument("fit: malformed csv line " +
                                  std::to_string(lineno) + " in " + path);
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  RegressionData d;
  d.xs = Eigen::Map<Eigen::VectorXd>(xs.data(), long(xs.size()));
  d.ys = Eigen::Map<Eigen::VectorXd>(ys.data(), long(ys.size()));
  d.validate();
  return d;
}

void run_fit(const GlobalOpts& g, const FitOpts& o) {
  if (o.data_path.empty() == o.truth.empty())
    throw std::invalid_argument("fit: pass exactly one of --data and --truth");

  RegressionData data;
  if (!o.data_path.empty()) {
    data = load_xy_csv(o.data_path);
  } else {
    const TruthFn fn = o.truth == "f1" ? TruthFn::f1 : TruthFn::f2;
    data = simulate_truth(fn, o.n, o.sigma, mix_seed(g.seed, 7));
  }
  const int n = int(data.xs.size());
  int train = o.train < 0 ? (n * 3) / 5 : o.train;
  if (train < 10 || train > n)
    throw std::invalid_argument("fit: train split must lie in [10, n]");

  RegressionData train_data{data.xs.head(train), data.ys.head(train)};
  RegressionData test_data;
  if (train < n) {
    test_data.xs = data.xs.tail(n - train);
    test_data.ys = data.ys.tail(n - train);
  }

  std::vector<FitVariant> variants;
  if (o.variant == "all")
    variants = {FitVariant::tn_fixed, FitVariant::tn_hyper, FitVariant::global,
                FitVariant::global_local};
  else
    variants = {parse_variant(o.variant)};

  struct Combo {
    int knots_idx;
    FitVariant variant;
  };
  std::vector<Combo> combos;
  for (std::size_t ki = 0; ki < o.knots.size(); ++ki)
    for (FitVariant v : variants) combos.push_back({int(ki), v});

  std::vector<ShrinkageChain> chains(combos.size());
  parallel_for_jobs(int(combos.size()), [&](int i) {
    FitConfig cfg;
    cfg.n_knots = o.knots[combos[i].knots_idx];
    cfg.variant = combos[i].variant;
    cfg.n_draws = o.draws;
    cfg.burn_in = o.burn;
    cfg.thin = o.thin;
    cfg.seed = mix_seed(
        g.seed, 1000 + 16 * std::uint64_t(combos[i].knots_idx) +
                    std::uint64_t(combos[i].variant));
    chains[i] = fit(train_data, cfg);
  });

  json fits = json::array();
  Eigen::MatrixXd mspe_rows(combos.size(), 3);
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const ShrinkageChain& ch = chains[i];
    const std::string label = variant_label(combos[i].variant);
    const std::string dir = g.out_dir + "/fit_" + label + "_N" +
                            std::to_string(ch.config.n_knots);
    save_chain(ch, dir);
    note(dir + "/");

    double noise_sd = 0.0;
    for (const ShrinkageState& s : ch.states) noise_sd += std::sqrt(s.sigma2);
    noise_sd /= double(ch.states.size());

    json f{{"variant", label},
           {"variant_id", int(combos[i].variant)},
           {"n_knots", ch.config.n_knots},
           {"dir", "fit_" + label + "_N" + std::to_string(ch.config.n_knots)},
           {"accept_rate_nu", ch.accept_rate_nu},
           {"accept_rate_ell", ch.accept_rate_ell},
           {"rss_floor_hits", ch.rss_floor_hits},
           {"noise_sd_mean", noise_sd}};
    mspe_rows(long(i), 0) = double(int(combos[i].variant));
    mspe_rows(long(i), 1) = double(ch.config.n_knots);
    if (test_data.xs.size() > 0) {
      const double m = mspe(ch, test_data);
      f["mspe"] = m;
      mspe_rows(long(i), 2) = m;
    } else {
      mspe_rows(long(i), 2) = std::numeric_limits<double>::quiet_NaN();
    }
    fits.push_back(std::move(f));
  }
  if (test_data.xs.size() > 0)
    note(write_table(g, "mspe_table", {"variant_id", "n_knots", "mspe"},
                     mspe_rows));

  json summary{{"n", n},
               {"train", train},
               {"test", n - train},
               {"fits", std::move(fits)}};
  json config{{"data", o.data_path}, {"truth", o.truth},
              {"variant", o.variant}, {"preset", o.preset},
              {"n", o.n},            {"train", o.train},
              {"knots", o.knots},    {"sigma", o.sigma},
              {"draws", o.draws},    {"burn", o.burn},
              {"thin", o.thin}};
  write_manifest(g, "fit", std::move(config), std::move(summary));
}

// ---------------------------------------------------------- posterior-band

struct BandOpts {
  std::vector<int> Ns = {50, 250, 500};
  int n = 500;
  std::vector<int> n0s = {100, 1000, 4000};
  double eps = 1e-11;
  double nu = 0.75;
  double corr_at_one = 0.05;
  bool phi_zero = false;
  bool band_all = false;  // approximation ladder on every N, not just the smallest
};

void run_posterior_band(const GlobalOpts& g, const BandOpts& o) {
  const MaternParams p{o.nu, ell_for_corr_at_one(o.nu, o.corr_at_one)};

  // one covariate draw shared across all N so the matrices are comparable
  Eigen::VectorXd xs(o.n);
  {
    Rng rng(mix_seed(g.seed, 501));
    for (int i = 0; i < o.n; ++i) xs[i] = rng.uniform();
  }

  int n_min = o.Ns[0];
  for (int N : o.Ns) n_min = std::min(n_min, N);

  struct Out {
    Eigen::MatrixXd sigma;
    std::vector<BandedPosteriorReport> band;
  };
  std::vector<Out> outs(o.Ns.size());

  parallel_for_jobs(int(o.Ns.size()), [&](int i) {
    const int N = o.Ns[std::size_t(i)];
    const BasisGrid grid(N);
    const Eigen::MatrixXd omega = prior_covariance(grid, p).matrix;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(o.n, N);
    if (!o.phi_zero)
      for (int r = 0; r < o.n; ++r)
        for (int j = 0; j < N; ++j) phi(r, j) = phi_basis(j, xs[r], grid);

    Out& out = outs[std::size_t(i)];
    if (o.phi_zero) {
      out.sigma = omega;  // degenerate design: the posterior is the prior
    } else {
      out.sigma =
          conjugate_posterior(omega, phi, Eigen::VectorXd::Zero(o.n)).second;
    }
    if (o.band_all || N == n_min)
      for (int n0 : o.n0s)
        out.band.push_back(banded_posterior_approx(omega, phi, o.eps, n0).report);
  });

  json per_n = json::array();
  for (std::size_t i = 0; i < o.Ns.size(); ++i) {
    const int N = o.Ns[i];
    const std::string stem = "sigma_N" + std::to_string(N);
    note(write_matrix(g, stem, outs[i].sigma));
    json e{{"N", N}, {"file", stem}};
    if (!outs[i].band.empty()) {
      json ladder = json::array();
      bool mono = true;
      for (std::size_t k = 0; k < outs[i].band.size(); ++k) {
        const BandedPosteriorReport& r = outs[i].band[k];
        ladder.push_back(json{{"n0", o.n0s[k]},
                              {"gap", r.gap},
                              {"r", r.r},
                              {"bandwidth", r.bandwidth},
                              {"kappa_post", r.kappa_post}});
        if (k > 0) mono = mono && r.gap <= outs[i].band[k - 1].gap;
      }
      e["band"] = std::move(ladder);
      e["gap_monotone_nonincreasing"] = mono;
    }
    per_n.push_back(std::move(e));
  }

  json summary{{"degenerate_phi", o.phi_zero}, {"matrices", std::move(per_n)}};
  json config{{"N", o.Ns},
              {"n", o.n},
              {"n0", o.n0s},
              {"eps", o.eps},
              {"nu", o.nu},
              {"corr_at_one", o.corr_at_one},
              {"phi_zero", o.phi_zero},
              {"band_all", o.band_all}};
  write_manifest(g, "posterior-band", std::move(config), std::move(summary));
}

// ------------------------------------------------------------------- rerun

// Loads a manifest written by any of the four commands and replays it.
// Only the output directory is taken from the command line; seed, format
// and every command knob come from the manifest.
void run_from_manifest(GlobalOpts g, const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::invalid_argument("rerun: cannot open " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("rerun: bad manifest: ") + e.what());
  }
  if (!m.contains("command") || !m.contains("config"))
    throw std::invalid_argument("rerun: manifest lacks command/config");
  const json& c = m["config"];
  g.seed = c.at("seed").get<std::uint64_t>();
  g.format = c.at("format").get<std::string>();

  const std::string command = m["command"].get<std::string>();
  if (command == "marginal") {
    MarginalOpts o;
    o.ladder = c.at("ladder").get<std::string>();
    o.diagonal = c.at("diagonal").get<bool>();
    o.delta = c.at("delta").get<double>();
    o.samples = c.at("samples").get<std::int64_t>();
    o.theta_max = c.at("theta_max").get<double>();
    o.grid_points = c.at("grid_points").get<int>();
    run_marginal(g, o);
  } else if (command == "bounds") {
    BoundsOpts o;
    o.N = c.at("N").get<int>();
    o.K = c.at("K").get<int>();
    o.rho = c.at("rho").get<double>();
    o.delta = c.at("delta").get<double>();
    o.alpha = c.at("alpha").get<double>();
    o.samples = c.at("samples").get<std::int64_t>();
    o.region_grid = c.at("region_grid").get<int>();
    run_bounds(g, o);
  } else if (command == "fit") {
    FitOpts o;
    o.data_path = c.at("data").get<std::string>();
    o.truth = c.at("truth").get<std::string>();
    o.variant = c.at("variant").get<std::string>();
    o.preset = c.at("preset").get<std::string>();
    o.n = c.at("n").get<int>();
    o.train = c.at("train").get<int>();
    o.knots = c.at("knots").get<std::vector<int>>();
    o.sigma = c.at("sigma").get<double>();
    o.draws = c.at("draws").get<int>();
    o.burn = c.at("burn").get<int>();
    o.thin = c.at("thin").get<int>();
    run_fit(g, o);
  } else if (command == "posterior-band") {
    BandOpts o;
    o.Ns = c.at("N").get<std::vector<int>>();
    o.n = c.at("n").get<int>();
    o.n0s = c.at("n0").get<std::vector<int>>();
    o.eps = c.at("eps").get<double>();
    o.nu = c.at("nu").get<double>();
    o.corr_at_one = c.at("corr_at_one").get<double>();
    o.phi_zero = c.at("phi_zero").get<bool>();
    o.band_all = c.at("band_all").get<bool>();
    run_posterior_band(g, o);
  } else {
    throw std::invalid_argument("rerun: unknown command " + command);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orthant-truncated normal mass shifting: experiment drivers"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed,
                 "top-level seed; sub-experiments derive their own")
      ->capture_default_str();
  app.add_option("--out", g.out_dir, "output directory, created if missing")
      ->capture_default_str();
  app.add_option("--format", g.format, "table artifact format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  MarginalOpts mo;
  CLI::App* cm = app.add_subcommand(
      "marginal", "slab-mass ladders with marginal density curves");
  cm->add_option("--ladder", mo.ladder, "which ladder family to run")
      ->check(CLI::IsMember({"K", "N", "joint", "all"}))
      ->capture_default_str();
  cm->add_flag("--diagonal", mo.diagonal,
               "identity-scale control: curves must not depend on N");
  cm->add_option("--delta", mo.delta, "slab half-width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cm->add_option("--samples", mo.samples, "MC samples per estimate")
      ->check(CLI::Range(std::int64_t(256), std::int64_t(1) << 26))
      ->capture_default_str();
  cm->add_option("--theta-max", mo.theta_max, "curve grid upper end")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cm->add_option("--grid-points", mo.grid_points, "curve grid size")
      ->check(CLI::Range(2, 2001))
      ->capture_default_str();

  BoundsOpts bo;
  CLI::App* cb = app.add_subcommand(
      "bounds", "slab-mass bound chain, bracket sweep and region map");
  cb->add_option("--N", bo.N, "matrix dimension")
      ->check(CLI::Range(5, 4096))
      ->capture_default_str();
  cb->add_option("--K", bo.K, "band width")
      ->check(CLI::Range(2, 1024))
      ->capture_default_str();
  cb->add_option("--rho", bo.rho, "in-band correlation")
      ->check(CLI::Range(0.0, 0.95))
      ->capture_default_str();
  cb->add_option("--delta", bo.delta, "slab half-width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cb->add_option("--alpha", bo.alpha,
                 "chain rate; negative resolves to the region default");
  cb->add_option("--samples", bo.samples, "MC samples for the measured mass")
      ->check(CLI::Range(std::int64_t(256), std::int64_t(1) << 26))
      ->capture_default_str();
  cb->add_option("--region-grid", bo.region_grid, "membership map resolution")
      ->check(CLI::Range(2, 2000))
      ->capture_default_str();

  FitOpts fo;
  CLI::App* cf = app.add_subcommand(
      "fit", "monotone regression on a CSV or a built-in truth");
  CLI::Option* of_data =
      cf->add_option("--data", fo.data_path, "two-column x,y CSV");
  cf->add_option("--truth", fo.truth, "built-in benchmark function")
      ->check(CLI::IsMember({"f1", "f2"}))
      ->excludes(of_data);
  cf->add_option("--variant", fo.variant, "prior ladder member, or all")
      ->check(CLI::IsMember(
          {"tn_fixed", "tn_hyper", "global", "global_local", "all"}))
      ->capture_default_str();
  cf->add_option("--preset", fo.preset, "named configuration bundle")
      ->check(CLI::IsMember({"paper-sec4"}));
  CLI::Option* of_n = cf->add_option("--n", fo.n, "simulated sample size")
                          ->check(CLI::Range(10, 100000))
                          ->capture_default_str();
  CLI::Option* of_train =
      cf->add_option("--train", fo.train,
                     "training rows (head of the data); rest is test");
  CLI::Option* of_knots = cf->add_option("--knots", fo.knots, "grid sizes")
                              ->delimiter(',')
                              ->check(CLI::Range(2, 2000))
                              ->capture_default_str();
  CLI::Option* of_sigma = cf->add_option("--sigma", fo.sigma, "noise sd")
                              ->check(CLI::PositiveNumber)
                              ->capture_default_str();
  cf->add_option("--draws", fo.draws, "stored states")
      ->check(CLI::Range(1, 1000000))
      ->capture_default_str();
  cf->add_option("--burn", fo.burn, "burn-in sweeps")
      ->check(CLI::Range(0, 1000000))
      ->capture_default_str();
  cf->add_option("--thin", fo.thin, "thinning stride")
      ->check(CLI::Range(1, 10000))
      ->capture_default_str();

  BandOpts po;
  CLI::App* cp = app.add_subcommand(
      "posterior-band", "posterior scale matrices and banded approximations");
  cp->add_option("--N", po.Ns, "grid sizes")
      ->delimiter(',')
      ->check(CLI::Range(2, 2000))
      ->capture_default_str();
  cp->add_option("--n", po.n, "design rows")
      ->check(CLI::Range(10, 100000))
      ->capture_default_str();
  cp->add_option("--n0", po.n0s, "approximation degrees")
      ->delimiter(',')
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  cp->add_option("--eps", po.eps, "prior truncation tolerance")
      ->check(CLI::Range(1e-15, 0.5))
      ->capture_default_str();
  cp->add_option("--nu", po.nu, "kernel smoothness")
      ->capture_default_str();
  cp->add_option("--corr-at-one", po.corr_at_one,
                 "kernel correlation at unit distance, pins the length scale")
      ->check(CLI::Range(1e-6, 0.999))
      ->capture_default_str();
  cp->add_flag("--phi-zero", po.phi_zero,
               "degenerate design: emit the prior covariance unchanged");
  cp->add_flag("--band-all", po.band_all,
               "approximation ladder on every N, not just the smallest");

  std::string manifest_path;
  CLI::App* cr =
      app.add_subcommand("rerun", "replay a manifest written by any command");
  cr->add_option("--manifest", manifest_path, "path to manifest.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!fo.preset.empty()) {  // preset fills what the user left untouched
      if (!of_n->count()) fo.n = 500;
      if (!of_train->count()) fo.train = 300;
      if (!of_knots->count()) fo.knots = {150};
      if (!of_sigma->count()) fo.sigma = 0.5;
    }
    std::filesystem::create_directories(g.out_dir);
    if (cm->parsed()) run_marginal(g, mo);
    if (cb->parsed()) run_bounds(g, bo);
    if (cf->parsed()) run_fit(g, fo);
    if (cp->parsed()) run_posterior_band(g, po);
    if (cr->parsed()) run_from_manifest(g, manifest_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
