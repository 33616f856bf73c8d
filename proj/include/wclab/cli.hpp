#pragma once

// Command-line front end. run_cli returns the process exit code:
//   0 success (verdicts and non-membership are data, not failures)
//   2 parse, config or usage error
//   3 dimension mismatch
//   4 numeric abort

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/experiment.hpp"
#include "wclab/io.hpp"
#include "wclab/lab.hpp"
#include "wclab/operator.hpp"
#include "wclab/spectral.hpp"
#include "wclab/wavecone.hpp"

namespace wclab::cli {

enum ExitCode : int { ok = 0, usage = 2, dimension = 3, numeric = 4, internal = 1 };

namespace detail {

struct OperatorSource {
  std::string catalog;
  std::string file;

  void attach(CLI::App& app) {
    auto* c = app.add_option("--catalog", catalog, "built-in operator, e.g. curl:2x2, div:3x3, curlcurl:2");
    auto* f = app.add_option("--operator", file, "operator description file");
    c->excludes(f);
    f->excludes(c);
  }

  DifferentialOperator load() const {
    if (!catalog.empty()) return wclab::catalog(catalog);
    if (!file.empty()) return parse_operator(read_file(file));
    throw ParseError("one of --catalog or --operator is required");
  }
};

inline std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + wclab::detail::format_double(v(i));
  return s;
}

inline std::vector<int> int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& part : wclab::detail::split(wclab::detail::squeeze_separators(wclab::detail::trim(s)), ',')) {
    out.push_back(wclab::detail::parse_int(wclab::detail::trim(part), what));
  }
  return out;
}

}  // namespace detail

inline int cmd_wavecone(const DifferentialOperator& op, const std::string& v_text, double tol, std::ostream& out) {
  Vector v = wclab::detail::parse_decimal_list(v_text, "--v");
  auto m = in_wave_cone(op, v, tol);
  out << "operator: " << (op.name().empty() ? "(unnamed)" : op.name()) << " d=" << op.dim()
      << " ell=" << op.channels() << " n=" << op.equations() << " k=" << op.order() << '\n';
  out << "threshold: " << wclab::detail::format_double(m.threshold) << '\n';
  if (!m.member) out << "ellipticity: " << wclab::detail::format_double(ellipticity_constant(op, v, tol)) << '\n';
  out << "gap=" << wclab::detail::format_double(m.search.gap) << " member=" << (m.member ? "true" : "false")
      << " xi=" << detail::join(m.search.argmin_xi) << '\n';
  return ok;
}

inline int cmd_experiment(const std::filesystem::path& config, std::ostream& out) {
  auto cfg = load_experiment_config(config);
  auto result = run_experiment(cfg);
  if (result.calibration) {
    out << "calibrated epsilon_low=" << wclab::detail::format_double(result.thresholds.epsilon_low)
        << " separated=" << (result.calibration->separated ? "true" : "false") << '\n';
  }
  for (const auto& r : result.reports) out << summary_line(r) << '\n';
  out << "wrote " << cfg.output.string() << '\n';
  return ok;
}

inline int cmd_probe(const DifferentialOperator& op, int n, const std::string& q_text, const std::string& m_text,
                     bool dealias, bool constant_phi, std::ostream& out) {
  PeriodicGrid grid(op.dim(), n);
  FrequencyKernelCache cache(op, grid);
  std::vector<int> q = q_text.empty() ? std::vector<int>(static_cast<std::size_t>(op.dim()), 0)
                                      : detail::int_list(q_text, "--q");
  if (q_text.empty()) q[0] = 1;
  PeriodicField phi = smooth_cutoff(grid);
  if (constant_phi) {
    phi = PeriodicField(grid, 1);
    phi.shift(Vector::Ones(1));
  }
  auto probe = commutator_order_probe(cache, phi, q, detail::int_list(m_text, "--M"), dealias);
  out << "M,commutator_norm,operator_norm\n";
  for (std::size_t i = 0; i < probe.frequencies.size(); ++i) {
    out << probe.frequencies[i] << ',' << wclab::detail::format_double(probe.commutator_norms[i]) << ','
        << wclab::detail::format_double(probe.operator_norms[i]) << '\n';
  }
  out << "commutator_slope=" << wclab::detail::format_double(probe.commutator_slope)
      << " operator_slope=" << wclab::detail::format_double(probe.operator_slope)
      << " degenerate=" << (probe.degenerate ? "true" : "false") << '\n';
  return ok;
}

inline int cmd_project(const DifferentialOperator& op, const std::filesystem::path& in_path,
                       const std::filesystem::path& out_path, const std::string& csv_path, std::ostream& out) {
  PeriodicField f = load_field(in_path);
  if (f.grid().dim() != op.dim()) throw DimensionError("field dimension differs from operator dimension");
  FrequencyKernelCache cache(op, f.grid());
  SpectralDiagnostics diag;
  PeriodicField p = afree_project(cache, f, &diag);
  save_field(out_path, p);
  if (!csv_path.empty()) write_file_atomic(csv_path, field_csv(p));
  out << "residual_before=" << wclab::detail::format_double(residual_negative_norm(cache, f))
      << " residual_after=" << wclab::detail::format_double(residual_negative_norm(cache, p))
      << " imag_residue=" << wclab::detail::format_double(diag.imag_residue) << '\n';
  return ok;
}

inline int cmd_catalog(const std::string& show, std::ostream& out) {
  if (!show.empty()) {
    out << render_operator(catalog(show));
    return ok;
  }
  out << "curl:MxD      row-wise curl of M x D matrix fields (first order)\n"
      << "div:MxD       row-wise divergence of M x D matrix fields (first order)\n"
      << "curlcurl:2    Saint-Venant compatibility on symmetric 2x2 fields (second order)\n"
      << "curlcurl:3    Saint-Venant compatibility on symmetric 3x3 fields (second order)\n";
  return ok;
}

/// Parses argv and dispatches; never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Wave-cone and two-state rigidity lab"};
  app.require_subcommand(1);

  auto* wave = app.add_subcommand("wavecone", "distance of a state from the wave cone");
  detail::OperatorSource wave_op;
  wave_op.attach(*wave);
  std::string v_text;
  double tol = default_membership_tol;
  wave->add_option("--v", v_text, "state, comma separated")->required();
  wave->add_option("--tol", tol, "relative membership tolerance")->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("experiment", "run a two-state experiment config");
  std::string config;
  exp->add_option("config,--config", config, "experiment config file")->required();

  auto* probe = app.add_subcommand("probe-commutator", "order of [A, phi] against A");
  detail::OperatorSource probe_op;
  probe_op.attach(*probe);
  int probe_n = 127;
  std::string q_text, m_text = "2,4,8";
  bool dealias = false, constant_phi = false;
  probe->add_option("--N", probe_n, "samples per axis (odd)");
  probe->add_option("--q", q_text, "probe direction, integers (default e1)");
  probe->add_option("--M", m_text, "frequency multipliers");
  probe->add_flag("--dealias", dealias, "pad products by 3/2");
  probe->add_flag("--constant-phi", constant_phi, "use phi = 1");

  auto* proj = app.add_subcommand("project", "project a field dump onto A-free fields");
  detail::OperatorSource proj_op;
  proj_op.attach(*proj);
  std::string in_path, out_path, csv_path;
  proj->add_option("--in", in_path, "input field dump")->required();
  proj->add_option("--out", out_path, "output field dump")->required();
  proj->add_option("--csv", csv_path, "also write the projected field as CSV");

  auto* cat = app.add_subcommand("catalog", "list built-in operators");
  std::string show;
  cat->add_option("--show", show, "print one operator in the text format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return usage;
  }

  try {
    if (*wave) return cmd_wavecone(wave_op.load(), v_text, tol, out);
    if (*exp) return cmd_experiment(config, out);
    if (*probe) return cmd_probe(probe_op.load(), probe_n, q_text, m_text, dealias, constant_phi, out);
    if (*proj) return cmd_project(proj_op.load(), in_path, out_path, csv_path, out);
    if (*cat) return cmd_catalog(show, out);
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return dimension;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return numeric;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return usage;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return internal;
  }
  return usage;
}

}  // namespace wclab::cli
