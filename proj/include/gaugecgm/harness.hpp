#pragma once

#include <algorithm>
#include <cstdio>
#include <future>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gaugecgm/config.hpp"
#include "gaugecgm/oracle.hpp"
#include "gaugecgm/rng.hpp"
#include "gaugecgm/solver.hpp"

namespace gaugecgm {

// Synthetic sensing problems, experiment execution and CSV emission.

inline constexpr const char* kCsvHeader =
    "iter,objective,residual,sigma,atom_id,xi,screen_threshold,survivor_count,f1,"
    "support_size,status";

struct SensingProblem {
  Matrix A;
  Vector b;
  Vector x0;
  std::set<int> true_support;  // signed-basis atom ids of the ground truth
  double eta = 0.0;
  std::uint64_t seed = 0;
};

/// A_ij ~ N(0, 1/n) i.i.d.; x0 has `sparsity` nonzeros ~ N(0,1) at distinct
/// random positions; b_i ~ N((A x0)_i, eta) with eta read as the variance.
/// Deterministic given the seed.
inline SensingProblem gen_sensing(int m, int n, int sparsity, double eta,
                                  std::uint64_t seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("gen_sensing: need m, n >= 1");
  if (sparsity < 1 || sparsity > n) {
    throw std::invalid_argument("gen_sensing: need 0 < sparsity <= n");
  }
  Rng rng(seed);
  SensingProblem p;
  p.eta = eta;
  p.seed = seed;
  p.A = Matrix(m, n);
  const double col_sd = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) p.A(i, j) = col_sd * rng.normal();
  }
  p.x0 = Vector::Zero(n);
  std::vector<int> order(n);
  for (int j = 0; j < n; ++j) order[j] = j;
  for (int j = n - 1; j > 0; --j) {
    std::swap(order[j], order[rng.index(static_cast<std::uint64_t>(j + 1))]);
  }
  for (int k = 0; k < sparsity; ++k) {
    double v = rng.normal();
    if (v == 0.0) v = 1.0;
    p.x0[order[k]] = v;
    p.true_support.insert(v > 0.0 ? order[k] : n + order[k]);
  }
  const Vector mean = p.A * p.x0;
  p.b = mean;
  const double noise_sd = std::sqrt(std::max(eta, 0.0));
  if (noise_sd > 0.0) {
    for (int i = 0; i < m; ++i) p.b[i] += noise_sd * rng.normal();
  }
  return p;
}

struct CsvRow {
  long iter = 0;
  double objective = 0.0, residual = 0.0, sigma = 0.0;
  long atom_id = -1;
  double xi = 0.0, screen_threshold = 0.0;
  long survivor_count = 0;
  double f1 = 0.0;
  long support_size = 0;
  std::string status = "ok";
};

struct ExperimentSummary {
  double final_f1 = 0.0;
  long final_support_size = 0;
  long iters_to_stable_screen = -1;
  std::string status = "ok";
};

struct ExperimentResult {
  std::vector<CsvRow> rows;  // one per recorded iteration, summary row last
  ExperimentSummary summary;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::set<int> thresholded_support(const CoeffMap& coeffs) {
  double top = 0.0;
  for (const auto& [id, c] : coeffs) top = std::max(top, c);
  std::set<int> s;
  for (const auto& [id, c] : coeffs) {
    if (c > 1e-6 * top) s.insert(id);
  }
  return s;
}

}  // namespace detail

inline void write_csv(const ExperimentResult& result, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const CsvRow& r : result.rows) {
    os << r.iter << ',' << detail::fmt_double(r.objective) << ','
       << detail::fmt_double(r.residual) << ',' << detail::fmt_double(r.sigma) << ','
       << r.atom_id << ',' << detail::fmt_double(r.xi) << ','
       << detail::fmt_double(r.screen_threshold) << ',' << r.survivor_count << ','
       << detail::fmt_double(r.f1) << ',' << r.support_size << ',' << r.status << '\n';
  }
}

/// Builds the pieces named by the config. Recognized keys are documented in
/// the README; gauge.kind drives which of the four atom families is used and
/// problem.* / loss.* choose between a generated sensing instance and
/// matrices loaded from text files.
struct ProblemSetup {
  AtomSet gauge;
  QuadraticLoss loss;
  PhiPenalty phi;
  GammaPenalty gamma;
  SolverConfig solver;
  std::set<int> true_support;

  ProblemSetup(AtomSet g, QuadraticLoss l, PhiPenalty p, GammaPenalty gm)
      : gauge(std::move(g)), loss(std::move(l)), phi(p), gamma(gm) {}
};

inline PhiPenalty build_phi(const Config& cfg) {
  const std::string kind = get_string(cfg, "phi.kind", "monomial");
  const double lambda = get_double(cfg, "lambda", 1.0);
  if (kind == "monomial") {
    return PhiPenalty::monomial(get_double(cfg, "phi.alpha", 2.0), lambda);
  }
  if (kind == "log_barrier") {
    return PhiPenalty::log_barrier(get_double(cfg, "phi.C", 1.0),
                                   get_double(cfg, "phi.beta", 1.0), lambda);
  }
  throw std::invalid_argument("phi.kind must be monomial or log_barrier");
}

inline GammaPenalty build_gamma(const Config& cfg) {
  const std::string kind = get_string(cfg, "gamma.kind", "identity");
  const double theta = get_double(cfg, "gamma.theta", 1.0);
  const double lambda = get_double(cfg, "gamma.lambda", 1.0);
  const double q = get_double(cfg, "gamma.q", 0.5);
  const double xi_bar = get_double(cfg, "gamma.xi_bar", 1.0);
  if (kind == "identity") return GammaPenalty::identity();
  if (kind == "lsp") return GammaPenalty::lsp(theta, xi_bar);
  if (kind == "scad") return GammaPenalty::scad(theta, lambda, xi_bar);
  if (kind == "mcp") return GammaPenalty::mcp(theta, lambda, xi_bar);
  if (kind == "fractional") return GammaPenalty::fractional(q, theta, xi_bar);
  throw std::invalid_argument("gamma.kind must be identity/lsp/scad/mcp/fractional");
}

inline AtomSet build_gauge(const Config& cfg, int dim) {
  const std::string kind = get_string(cfg, "gauge.kind", "signed_basis");
  if (kind == "signed_basis") return AtomSet::signed_basis(dim);
  if (kind == "mapped_basis") {
    return AtomSet::mapped_basis(load_matrix(get_string(cfg, "gauge.map")));
  }
  if (kind == "latent_group") {
    return AtomSet::latent_group(dim, parse_groups(get_string(cfg, "gauge.groups")));
  }
  if (kind == "total_variation") return AtomSet::total_variation(dim);
  throw std::invalid_argument(
      "gauge.kind must be signed_basis/mapped_basis/latent_group/total_variation");
}

inline ProblemSetup build_setup(const Config& cfg) {
  Matrix A;
  Vector b;
  double scale = 0.0;
  std::optional<Vector> ground_truth;
  if (has_key(cfg, "loss.A")) {
    A = load_matrix(get_string(cfg, "loss.A"));
    b = load_vector(get_string(cfg, "loss.b"));
    scale = get_double(cfg, "loss.scale", 0.5);
  } else {
    const int m = static_cast<int>(get_long(cfg, "problem.m", 100));
    const int n = static_cast<int>(get_long(cfg, "problem.n", 100));
    const int sparsity = static_cast<int>(get_long(cfg, "problem.sparsity", 5));
    const double eta = get_double(cfg, "problem.eta", 100.0);
    const auto seed = static_cast<std::uint64_t>(get_long(cfg, "problem.seed", 1));
    SensingProblem p = gen_sensing(m, n, sparsity, eta, seed);
    A = std::move(p.A);
    b = std::move(p.b);
    scale = 1.0 / (2.0 * m);
    ground_truth = std::move(p.x0);
  }
  const int dim = static_cast<int>(A.cols());
  ProblemSetup setup(build_gauge(cfg, dim), QuadraticLoss(std::move(A), std::move(b), scale),
                     build_phi(cfg), build_gamma(cfg));
  if (ground_truth) {
    // Ground-truth support in atom ids of the configured gauge.
    try {
      for (const auto& [id, c] : setup.gauge.decompose(*ground_truth).coeffs) {
        if (c > 1e-9) setup.true_support.insert(id);
      }
    } catch (const std::exception&) {
      // e.g. latent groups that do not cover the planted spikes
    }
  }

  SolverConfig& sc = setup.solver;
  sc.max_iter = static_cast<int>(get_long(cfg, "solver.max_iter", 1000));
  sc.phi = setup.phi;
  sc.gamma = setup.gamma;
  sc.epsilon0 = get_double(cfg, "solver.eps0", 0.0);
  const std::string screen = get_string(cfg, "solver.screen",
                                        setup.gamma.is_identity() ? "safe" : "heuristic");
  if (screen == "off") {
    sc.screen_mode = ScreenMode::Off;
  } else if (screen == "safe") {
    sc.screen_mode = ScreenMode::Safe;
  } else if (screen == "heuristic") {
    sc.screen_mode = ScreenMode::Heuristic;
  } else {
    throw std::invalid_argument("solver.screen must be off/safe/heuristic");
  }
  return setup;
}

/// Runs one experiment cell: one CSV row per iteration, then a summary row
/// (final f1 and support size; its `iter` column holds the first iteration
/// after which the cumulative screen set never changed again, -1 if screening
/// was off). Solver errors land in the status column instead of propagating.
inline ExperimentResult run_experiment(const Config& cfg) {
  ExperimentResult out;
  try {
    ProblemSetup setup = build_setup(cfg);
    setup.solver.record_history = false;
    const bool screening = setup.solver.screen_mode != ScreenMode::Off;

    std::set<int> prev_cumulative;
    long stable_from = 1;
    setup.solver.on_iteration = [&](const SolverState& st, const IterationRecord& rec,
                                    const ScreenSet& screen_set) {
      const std::set<int> estimated = screening
                                          ? screen_set.cumulative
                                          : detail::thresholded_support(st.coeffs);
      CsvRow row;
      row.iter = rec.t;
      row.objective = rec.objective;
      row.residual = rec.residual;
      row.sigma = rec.sigma;
      row.atom_id = rec.atom_id;
      row.xi = rec.xi;
      row.screen_threshold = rec.screen_threshold;
      row.survivor_count = rec.survivor_count;
      row.f1 = f1_score(estimated, setup.true_support);
      row.support_size = static_cast<long>(estimated.size());
      out.rows.push_back(row);
      if (screening && screen_set.cumulative != prev_cumulative) {
        stable_from = rec.t;
        prev_cumulative = screen_set.cumulative;
      }
    };

    const RunResult run_out = run(setup.solver, setup.gauge, setup.loss);
    const std::set<int> estimated = screening
                                        ? run_out.screen.cumulative
                                        : detail::thresholded_support(run_out.state.coeffs);
    out.summary.final_f1 = f1_score(estimated, setup.true_support);
    out.summary.final_support_size = static_cast<long>(estimated.size());
    out.summary.iters_to_stable_screen = screening ? stable_from : -1;

    CsvRow summary;
    summary.iter = out.summary.iters_to_stable_screen;
    summary.f1 = out.summary.final_f1;
    summary.support_size = out.summary.final_support_size;
    summary.status = "summary";
    out.rows.push_back(summary);
  } catch (const std::exception& err) {
    CsvRow fail;
    fail.status = std::string("error: ") + err.what();
    std::replace(fail.status.begin(), fail.status.end(), ',', ';');
    out.rows.push_back(fail);
    out.summary.status = fail.status;
  }
  return out;
}

struct SweepCell {
  Config config;
  std::string label;  // "key=value_key=value"
  ExperimentResult result;
};

/// Expands the grid (cartesian product, file order) over the base config and
/// runs the cells concurrently; cell failures are recorded in their summary
/// status and never abort the sweep.
inline std::vector<SweepCell> sweep(
    const Config& base,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid) {
  std::vector<SweepCell> cells;
  std::vector<std::size_t> index(grid.size(), 0);
  while (true) {
    SweepCell cell;
    cell.config = base;
    std::string label;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      cell.config[grid[k].first] = grid[k].second[index[k]];
      if (!label.empty()) label += "_";
      label += grid[k].first + "=" + grid[k].second[index[k]];
    }
    cell.label = label;
    cells.push_back(std::move(cell));
    std::size_t k = 0;
    for (; k < grid.size(); ++k) {
      if (++index[k] < grid[k].second.size()) break;
      index[k] = 0;
    }
    if (k == grid.size()) break;
  }

  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(cells.size())));
  std::vector<std::future<void>> futures;
  std::size_t next = 0;
  std::mutex next_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        std::size_t mine;
        {
          std::lock_guard<std::mutex> lock(next_mutex);
          if (next >= cells.size()) return;
          mine = next++;
        }
        cells[mine].result = run_experiment(cells[mine].config);
      }
    }));
  }
  for (auto& f : futures) f.get();
  return cells;
}

/// Aggregated sweep CSV: one summary line per cell, prefixed by its label.
inline void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& os) {
  os << "cell," << kCsvHeader << '\n';
  for (const SweepCell& cell : cells) {
    const CsvRow* summary = nullptr;
    for (const CsvRow& r : cell.result.rows) {
      if (r.status == "summary") summary = &r;
    }
    CsvRow fallback;
    if (summary == nullptr) {
      fallback.status = cell.result.summary.status;
      summary = &fallback;
    }
    os << cell.label << ',' << summary->iter << ',' << detail::fmt_double(summary->objective)
       << ',' << detail::fmt_double(summary->residual) << ','
       << detail::fmt_double(summary->sigma) << ',' << summary->atom_id << ','
       << detail::fmt_double(summary->xi) << ',' << detail::fmt_double(summary->screen_threshold)
       << ',' << summary->survivor_count << ',' << detail::fmt_double(summary->f1) << ','
       << summary->support_size << ',' << summary->status << '\n';
  }
}

}  // namespace gaugecgm
