#pragma once

// Seed batches, threshold calibration, experiment configs and report files.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/io.hpp"
#include "wclab/lab.hpp"
#include "wclab/operator.hpp"

namespace wclab {

/// Worker count: WCLAB_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
inline int thread_budget() {
  if (const char* env = std::getenv("WCLAB_THREADS")) {
    try {
      int v = detail::parse_int(detail::trim(env), "WCLAB_THREADS");
      if (v >= 1) return v;
    } catch (const ParseError&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception in index order is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp<long long>(threads, 1, static_cast<long long>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// One run per seed from the reference start; reports come back in seed order.
inline std::vector<ExperimentReport> run_seeds(const TwoStateProblem& problem, const std::vector<std::uint64_t>& seeds,
                                               const RunOptions& options,
                                               double relative_noise = default_relative_noise,
                                               int threads = thread_budget()) {
  std::vector<ExperimentReport> reports(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    TwoStateProblem p = problem.with_seed(seeds[i]);
    reports[i] = alternating_projection_run(p, reference_init(p, seeds[i], relative_noise), options);
  });
  return reports;
}

inline void apply_thresholds(ExperimentReport& report, double theta, const DichotomyThresholds& t) {
  report.thresholds = t;
  report.verdict = classify_run(report.objective.back(), report.fraction.back(), theta, t);
}

// ---------------------------------------------------------------------------
// calibration

/// Curl on 2x2 matrices with lambda - mu = e1 (x) e1 and theta = 1/2.
inline TwoStateProblem compatible_reference(int n) {
  Vector lambda = Vector::Zero(4), mu = Vector::Zero(4);
  lambda(0) = 1.0;
  return TwoStateProblem(catalog_curl(2, 2), lambda, mu, 0.5, PeriodicGrid(2, n));
}

/// Divergence on 2x2 matrices with lambda = I, mu = -I and theta = 1/2.
inline TwoStateProblem incompatible_reference(int n) {
  Vector id(4);
  id << 1.0, 0.0, 0.0, 1.0;
  return TwoStateProblem(catalog_div(2, 2), id, -id, 0.5, PeriodicGrid(2, n));
}

struct CalibrationOptions {
  int n = 63;
  int iterations = 500;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double relative_noise = default_relative_noise;
  double delta = 0.1;
  double floor_factor = 10.0;       // epsilon_low = factor * max compatible objective
  double separation_factor = 100.0;  // required clearance of the incompatible family
  int threads = thread_budget();
};

struct Calibration {
  DichotomyThresholds thresholds;
  double compatible_max = 0.0;
  double incompatible_min = 0.0;
  bool separated = false;  // incompatible_min >= separation_factor * epsilon_low
  std::vector<ExperimentReport> compatible;
  std::vector<ExperimentReport> incompatible;
};

/// Runs both reference families, fixes epsilon_low from the compatible one
/// and classifies every run with the resulting thresholds.
inline Calibration calibrate_thresholds(const CalibrationOptions& o = {}) {
  Calibration c;
  RunOptions ro;
  ro.iterations = o.iterations;
  auto comp = compatible_reference(o.n);
  auto inc = incompatible_reference(o.n);
  // both families share one worker pool
  std::vector<ExperimentReport> all(2 * o.seeds.size());
  parallel_for(all.size(), o.threads, [&](std::size_t i) {
    const auto& base = i < o.seeds.size() ? comp : inc;
    const auto seed = o.seeds[i % o.seeds.size()];
    TwoStateProblem p = base.with_seed(seed);
    all[i] = alternating_projection_run(p, reference_init(p, seed, o.relative_noise), ro);
  });
  c.compatible.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(o.seeds.size()));
  c.incompatible.assign(all.begin() + static_cast<std::ptrdiff_t>(o.seeds.size()), all.end());
  c.incompatible_min = std::numeric_limits<double>::infinity();
  for (const auto& r : c.compatible) c.compatible_max = std::max(c.compatible_max, r.objective.back());
  for (const auto& r : c.incompatible) c.incompatible_min = std::min(c.incompatible_min, r.objective.back());
  c.thresholds.epsilon_low = o.floor_factor * c.compatible_max;
  c.thresholds.delta = o.delta;
  c.separated = c.incompatible_min >= o.separation_factor * c.thresholds.epsilon_low;
  for (auto& r : c.compatible) apply_thresholds(r, comp.theta(), c.thresholds);
  for (auto& r : c.incompatible) apply_thresholds(r, inc.theta(), c.thresholds);
  return c;
}

// ---------------------------------------------------------------------------
// reports

inline std::string report_csv(const ExperimentReport& r) {
  std::string out = "iter,objective,fraction,residual,dist_lambda,dist_mu\n";
  for (std::size_t i = 0; i < r.length(); ++i) {
    out += std::to_string(i);
    for (double v : {r.objective[i], r.fraction[i], r.residual[i], r.dist_lambda[i], r.dist_mu[i]}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::string summary_line(const ExperimentReport& r) {
  std::ostringstream os;
  os << "seed=" << r.seed << " verdict=" << to_string(r.verdict)
     << " objective=" << detail::format_double(r.objective.back())
     << " fraction=" << detail::format_double(r.fraction.back())
     << " residual=" << detail::format_double(r.residual.back())
     << " epsilon_low=" << detail::format_double(r.thresholds.epsilon_low)
     << " delta=" << detail::format_double(r.thresholds.delta) << (r.trivial_init ? " trivial_init=true" : "");
  return os.str();
}

// ---------------------------------------------------------------------------
// experiment config
//
//   # comment
//   operator = curl:2x2          (catalog selector, or a path to an operator file)
//   lambda = 1, 0, 0, 0
//   mu = 0, 0, 0, 0
//   theta = 0.5
//   N = 63
//   iterations = 500
//   seeds = 0-9                  (list and ranges: 0,3,5-7)
//   epsilon_low = 1e-12          (optional; calibrated when absent)
//   delta = 0.1
//   noise = 0.2                  (relative amplitude of the start perturbation)
//   output = out/curl            (relative paths resolve against the config file)

struct ExperimentConfig {
  std::string operator_source;
  std::optional<DifferentialOperator> op;
  Vector lambda, mu;
  double theta = 0.5;
  int n = 63;
  int iterations = 500;
  std::vector<std::uint64_t> seeds{0};
  std::optional<double> epsilon_low;
  double delta = 0.1;
  double noise = default_relative_noise;
  std::filesystem::path output;
};

namespace detail {

inline Vector parse_decimal_list(std::string_view s, const std::string& where) {
  std::string text = squeeze_separators(trim(s));
  std::vector<std::string> parts;
  for (auto& p : split(text, ',')) {
    std::istringstream ws(p);
    std::string tok;
    while (ws >> tok) parts.push_back(tok);
    if (p.find_first_not_of(" \t") == std::string::npos) throw ParseError(where + ": empty list entry");
  }
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(parts[i], where);
  if (v.size() == 0) throw ParseError(where + ": empty list");
  return v;
}

inline std::vector<std::uint64_t> parse_seed_list(std::string_view s, const std::string& where) {
  std::vector<std::uint64_t> seeds;
  auto parse_u64 = [&](std::string_view t) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || p != t.data() + t.size()) {
      throw ParseError(where + ": bad seed '" + std::string(t) + "'");
    }
    return v;
  };
  for (const auto& raw : split(squeeze_separators(trim(s)), ',')) {
    std::string part = trim(raw);
    auto dash = part.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(part));
      continue;
    }
    auto lo = parse_u64(trim(part.substr(0, dash)));
    auto hi = parse_u64(trim(part.substr(dash + 1)));
    if (hi < lo || hi - lo > 100000) throw ParseError(where + ": bad seed range '" + part + "'");
    for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
  }
  return seeds;
}

}  // namespace detail

inline DifferentialOperator load_operator(const std::string& source, const std::filesystem::path& base = {}) {
  if (source.find(':') != std::string::npos && !std::filesystem::exists(base / source)) return catalog(source);
  return parse_operator(read_file(base / source));
}

inline ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base = {}) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  std::map<std::string, std::string> kv;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    static const std::vector<std::string> known{"operator", "lambda", "mu", "theta", "N", "iterations",
                                                "seeds", "epsilon_low", "delta", "noise", "output"};
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ParseError(where + ": unknown key '" + key + "'");
    if (kv.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    if (value.empty()) throw ParseError(where + ": empty value for '" + key + "'");
    kv[key] = value;
  }
  for (const char* req : {"operator", "lambda", "mu", "output"}) {
    if (!kv.count(req)) throw ParseError(std::string("config: missing key '") + req + "'");
  }
  c.operator_source = kv["operator"];
  c.op = load_operator(c.operator_source, base);
  c.lambda = detail::parse_decimal_list(kv["lambda"], "config lambda");
  c.mu = detail::parse_decimal_list(kv["mu"], "config mu");
  if (kv.count("theta")) c.theta = detail::parse_double(kv["theta"], "config theta");
  if (kv.count("N")) c.n = detail::parse_int(kv["N"], "config N");
  if (kv.count("iterations")) c.iterations = detail::parse_int(kv["iterations"], "config iterations");
  if (kv.count("seeds")) c.seeds = detail::parse_seed_list(kv["seeds"], "config seeds");
  if (kv.count("epsilon_low")) c.epsilon_low = detail::parse_double(kv["epsilon_low"], "config epsilon_low");
  if (kv.count("delta")) c.delta = detail::parse_double(kv["delta"], "config delta");
  if (kv.count("noise")) c.noise = detail::parse_double(kv["noise"], "config noise");
  c.output = base / kv["output"];
  if (c.iterations < 1) throw ParseError("config: iterations must be >= 1");
  if (c.seeds.empty()) throw ParseError("config: no seeds");
  if (c.epsilon_low && *c.epsilon_low < 0.0) throw ParseError("config: epsilon_low must be >= 0");
  if (c.delta < 0.0 || c.delta >= 0.5) throw ParseError("config: delta must lie in [0, 0.5)");
  if (c.noise < 0.0) throw ParseError("config: noise must be >= 0");
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path), path.parent_path());
}

/// Echo of the resolved config in the key = value format.
inline std::string render_config(const ExperimentConfig& c, const DichotomyThresholds& t) {
  auto list = [](const Vector& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::format_double(v(i));
    return s;
  };
  std::ostringstream os;
  os << "operator = " << c.operator_source << '\n'
     << "lambda = " << list(c.lambda) << '\n'
     << "mu = " << list(c.mu) << '\n'
     << "theta = " << detail::format_double(c.theta) << '\n'
     << "N = " << c.n << '\n'
     << "iterations = " << c.iterations << '\n'
     << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << '\n'
     << "epsilon_low = " << detail::format_double(t.epsilon_low) << '\n'
     << "delta = " << detail::format_double(t.delta) << '\n'
     << "noise = " << detail::format_double(c.noise) << '\n';
  return os.str();
}

struct ExperimentOutcome {
  DichotomyThresholds thresholds;
  std::optional<Calibration> calibration;
  std::vector<ExperimentReport> reports;
};

/// Runs every seed of the config, writes run_<seed>.csv per run and
/// summary.txt into the output directory, all atomically.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, int threads = thread_budget()) {
  TwoStateProblem problem(*c.op, c.lambda, c.mu, c.theta, PeriodicGrid(c.op->dim(), c.n));
  ExperimentOutcome out;
  if (c.epsilon_low) {
    out.thresholds = {*c.epsilon_low, c.delta};
  } else {
    CalibrationOptions co;
    co.delta = c.delta;
    co.threads = threads;
    out.calibration = calibrate_thresholds(co);
    out.thresholds = out.calibration->thresholds;
  }
  RunOptions ro;
  ro.iterations = c.iterations;
  ro.thresholds = out.thresholds;
  out.reports = run_seeds(problem, c.seeds, ro, c.noise, threads);

  std::filesystem::create_directories(c.output);
  std::string summary = render_config(c, out.thresholds);
  summary += "compatible = " + std::string(problem.compatible() ? "true" : "false") + '\n';
  if (out.calibration) {
    summary += "calibration compatible_max = " + detail::format_double(out.calibration->compatible_max) + '\n';
    summary += "calibration incompatible_min = " + detail::format_double(out.calibration->incompatible_min) + '\n';
    summary += std::string("calibration separated = ") + (out.calibration->separated ? "true" : "false") + '\n';
  }
  for (const auto& r : out.reports) {
    write_file_atomic(c.output / ("run_" + std::to_string(r.seed) + ".csv"), report_csv(r));
    summary += summary_line(r) + '\n';
  }
  write_file_atomic(c.output / "summary.txt", summary);
  return out;
}

}  // namespace wclab
