#pragma once

// Two-state rigidity experiments on the torus.
//
// A run alternates the pointwise snap onto {lambda, mu} with the orthogonal
// projection onto the affine set {A v = r, mean v = theta lambda + (1 - theta) mu}.
// Both maps are nearest-point maps in L^2, so the RMS distance between
// consecutive iterates never increases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/field.hpp"
#include "wclab/operator.hpp"
#include "wclab/spectral.hpp"
#include "wclab/wavecone.hpp"

namespace wclab {

enum class Verdict { rigid_collapse, rigid_obstructed, laminate_found, inconclusive, hypotheses_violated };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::rigid_collapse: return "rigid-collapse";
    case Verdict::rigid_obstructed: return "rigid-obstructed";
    case Verdict::laminate_found: return "laminate-found";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::hypotheses_violated: return "hypotheses-violated";
  }
  return "?";
}

class TwoStateProblem {
 public:
  TwoStateProblem(DifferentialOperator op, Vector lambda, Vector mu, double theta, PeriodicGrid grid,
                  std::uint64_t seed = 0)
      : lambda_(std::move(lambda)), mu_(std::move(mu)), theta_(theta), grid_(grid), seed_(seed) {
    if (lambda_.size() != op.channels() || mu_.size() != op.channels()) {
      throw DimensionError("state length differs from operator channels");
    }
    if ((lambda_ - mu_).norm() == 0.0) throw DomainError("states must differ");
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("target volume fraction must lie in (0, 1)");
    const int n = grid_.samples_per_axis();
    int count = 0;
    for (int i = 0; i < n; ++i) count += static_cast<double>(i) < theta * n ? 1 : 0;
    grid_theta_ = static_cast<double>(count) / n;
    membership_ = in_wave_cone(op, lambda_ - mu_);
    cache_ = std::make_shared<const FrequencyKernelCache>(std::move(op), grid_);
  }

  const DifferentialOperator& op() const { return cache_->op(); }
  const Vector& lambda() const { return lambda_; }
  const Vector& mu() const { return mu_; }
  double theta() const { return theta_; }
  // The duty cycle an axis laminate of fraction theta actually has on this
  // grid. An odd grid cannot hold a two-valued field of mean exactly
  // theta lambda + (1 - theta) mu when theta N is not an integer, so the
  // prescribed mean uses this value.
  double grid_theta() const { return grid_theta_; }
  const PeriodicGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  const FrequencyKernelCache& cache() const { return *cache_; }
  std::shared_ptr<const FrequencyKernelCache> shared_cache() const { return cache_; }

  // lambda - mu lies in the wave cone of the principal part.
  bool compatible() const { return membership_.member; }
  const MembershipResult& membership() const { return membership_; }
  double state_gap() const { return (lambda_ - mu_).norm(); }
  Vector target_mean() const { return grid_theta_ * lambda_ + (1.0 - grid_theta_) * mu_; }

  TwoStateProblem with_seed(std::uint64_t seed) const {
    TwoStateProblem p = *this;
    p.seed_ = seed;
    return p;
  }

 private:
  Vector lambda_;
  Vector mu_;
  double theta_;
  double grid_theta_ = 0.0;
  PeriodicGrid grid_;
  std::uint64_t seed_;
  MembershipResult membership_;
  std::shared_ptr<const FrequencyKernelCache> cache_;
};

struct DichotomyThresholds {
  double epsilon_low = 0.0;  // objective floor separating exact solutions
  double delta = 0.1;        // volume-fraction window around theta
};

struct ExperimentReport {
  // Row 0 describes the initial field, row i >= 1 the field after i iterations.
  std::vector<double> objective;
  std::vector<double> fraction;
  std::vector<double> residual;
  std::vector<double> dist_lambda;
  std::vector<double> dist_mu;
  std::vector<double> iterate_gap;  // RMS distance between snap and projection
  Verdict verdict = Verdict::inconclusive;
  bool trivial_init = false;
  DichotomyThresholds thresholds;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;

  std::size_t length() const { return objective.size(); }
};

/// Fraction of samples nearer to lambda than to mu (ties count as lambda).
inline double lambda_fraction(const PeriodicField& f, const Vector& lambda, const Vector& mu) {
  std::size_t count = 0;
  for (std::size_t p = 0; p < f.points(); ++p) {
    auto v = f.sample(p);
    if ((v - lambda).norm() <= (v - mu).norm()) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(f.points());
}

/// Experiment objective, the mean distance to {lambda, mu}.
inline double two_state_objective(const PeriodicField& f, const Vector& lambda, const Vector& mu) {
  return dist_to_states(f, lambda, mu);
}

/// Replaces every sample by the nearer of lambda and mu (ties go to lambda).
inline PeriodicField snap_to_states(const PeriodicField& f, const Vector& lambda, const Vector& mu) {
  PeriodicField out(f.grid(), f.channels());
  for (std::size_t p = 0; p < f.points(); ++p) {
    auto v = f.sample(p);
    out.set_sample(p, (v - lambda).norm() <= (v - mu).norm() ? lambda : mu);
  }
  return out;
}

inline Verdict classify_run(double objective, double fraction, double theta, const DichotomyThresholds& t) {
  const bool near_theta = std::abs(fraction - theta) <= t.delta;
  if (objective <= t.epsilon_low && near_theta) return Verdict::laminate_found;
  if (fraction <= t.delta || fraction >= 1.0 - t.delta) return Verdict::rigid_collapse;
  if (objective > t.epsilon_low) return Verdict::rigid_obstructed;
  return Verdict::inconclusive;
}

/// Seeded Gaussian noise projected onto A-free fields, with the fluctuation
/// rescaled to L^2 norm `amplitude` and the mean set to the target mean.
inline PeriodicField generate_afree_noise(const TwoStateProblem& problem, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) throw DomainError("noise amplitude must be non-negative");
  const auto& grid = problem.grid();
  const int ell = problem.op().channels();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PeriodicField noise(grid, ell);
  for (auto& v : noise.mutable_values()) v = normal(rng);
  PeriodicField f = afree_project(problem.cache(), noise);
  f.shift(-f.mean());
  const double norm = l2_norm(f);
  if (norm > 0.0) f *= amplitude / norm;
  f.shift(problem.target_mean());
  return f;
}

/// Start perturbation relative to |lambda - mu|. At 0.1 the first snap erases
/// it, so every seed follows one trajectory; from 0.3 on compatible runs can
/// stall away from the laminate.
inline constexpr double default_relative_noise = 0.2;

/// Reference starting point shared by every experiment: the e1 laminate of
/// (lambda, mu, theta) projected onto the A-free fields with the target mean,
/// plus seeded A-free noise whose fluctuation has L^2 norm
/// `relative_noise * |lambda - mu|`. For a compatible pair whose jump is
/// annihilated along e1 the projection leaves the laminate untouched.
inline PeriodicField reference_init(const TwoStateProblem& problem, std::uint64_t seed,
                                    double relative_noise = default_relative_noise) {
  const auto& grid = problem.grid();
  std::vector<int> q(static_cast<std::size_t>(grid.dim()), 0);
  q[0] = 1;
  PeriodicField lam = laminate_field(grid, problem.lambda(), problem.mu(), q, problem.theta());
  PeriodicField v = afree_project(problem.cache(), lam);
  v.shift(problem.target_mean() - v.mean());
  PeriodicField noise = generate_afree_noise(problem, relative_noise * problem.state_gap(), seed);
  noise.shift(-noise.mean());
  return v + noise;
}

// ---------------------------------------------------------------------------
// forcing

/// r = sum_beta d^beta f^beta, with |beta| = k and every f^beta carrying n
/// channels.
using Forcing = std::map<MultiIndex, PeriodicField>;

inline PeriodicField::Spectrum forcing_spectrum(const FrequencyKernelCache& cache, const Forcing& forcing) {
  const auto& grid = cache.grid();
  const int n = cache.op().equations();
  const int k = cache.op().order();
  PeriodicField::Spectrum r(grid.points() * static_cast<std::size_t>(n));
  const Complex ik = std::pow(Complex(0.0, 2.0 * std::numbers::pi), k);
  for (const auto& [beta, f] : forcing) {
    if (beta.dim() != grid.dim()) throw DimensionError("forcing multi-index has wrong length");
    if (beta.order() != k) throw DomainError("forcing multi-indices need |beta| = k");
    if (!(f.grid() == grid) || f.channels() != n) throw DimensionError("forcing field must have n channels on the problem grid");
    const auto& spec = f.spectrum();
    const Matrix& freqs = grid.frequencies();
    for (std::size_t p = 0; p < grid.points(); ++p) {
      const Complex factor = ik * beta.monomial<double>(freqs.col(static_cast<Eigen::Index>(p)));
      for (int c = 0; c < n; ++c) {
        const std::size_t i = p * static_cast<std::size_t>(n) + static_cast<std::size_t>(c);
        r[i] += factor * spec[i];
      }
    }
  }
  return r;
}

inline double forcing_l1(const Forcing& forcing) {
  double s = 0.0;
  for (const auto& [beta, f] : forcing) s += l1_norm(f);
  return s;
}

/// Minimum-norm per-frequency solution c of A c = r. Throws when some
/// frequency of r leaves the range of the symbol.
inline PeriodicField::Spectrum minimum_norm_correction(const FrequencyKernelCache& cache,
                                                       const PeriodicField::Spectrum& r) {
  const auto& grid = cache.grid();
  const int n = cache.op().equations();
  const int ell = cache.op().channels();
  PeriodicField::Spectrum c(grid.points() * static_cast<std::size_t>(ell));
  for (std::size_t p = 0; p < grid.points(); ++p) {
    CVector rhs = Eigen::Map<const CVector>(r.data() + p * static_cast<std::size_t>(n), n);
    const double rn = rhs.norm();
    if (rn == 0.0) continue;
    const CMatrix& s = cache.symbol(p);
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(s);
    cod.setThreshold(kernel_rank_threshold);
    CVector x = cod.solve(rhs);
    const double miss = (s * x - rhs).norm();
    if (miss > 1e-8 * rn) {
      Vector m = grid.frequency(p);
      std::ostringstream os;
      os << "forcing is not in the range of the symbol at frequency (" << m.transpose() << "), relative miss "
         << miss / rn;
      throw DomainError(os.str());
    }
    std::copy(x.data(), x.data() + ell, c.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(ell)));
  }
  return c;
}

// ---------------------------------------------------------------------------
// alternating projection

struct RunOptions {
  int iterations = 500;
  DichotomyThresholds thresholds;
};

namespace detail {

inline void require_finite(const PeriodicField& f, int iteration) {
  for (double v : f.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite sample at iteration " + std::to_string(iteration));
  }
}

inline void record(ExperimentReport& report, const TwoStateProblem& problem, const PeriodicField& v,
                   double residual) {
  report.objective.push_back(two_state_objective(v, problem.lambda(), problem.mu()));
  report.fraction.push_back(lambda_fraction(v, problem.lambda(), problem.mu()));
  report.residual.push_back(residual);
  report.dist_lambda.push_back(l1_distance_to(v, problem.lambda()));
  report.dist_mu.push_back(l1_distance_to(v, problem.mu()));
}

inline bool is_constant_state(const PeriodicField& f, const Vector& s) {
  const double tol = 1e-14 * std::max(1.0, s.norm());
  for (std::size_t p = 0; p < f.points(); ++p) {
    if ((f.sample(p) - s).norm() > tol) return false;
  }
  return true;
}

// Projection onto {A v = r, mean v = target}; `correction` is the
// minimum-norm solution of A c = r (empty for r = 0).
inline PeriodicField affine_project(const TwoStateProblem& problem, const PeriodicField& s,
                                    const PeriodicField::Spectrum* correction) {
  PeriodicField v = afree_project(problem.cache(), s);
  if (correction) {
    const auto ell = static_cast<std::size_t>(s.channels());
    PeriodicField::Spectrum spec = v.spectrum();
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (i >= ell) spec[i] += (*correction)[i];  // slot 0 carries no forcing
    }
    v = PeriodicField::from_spectrum(v.grid(), v.channels(), spec);
  }
  v.shift(problem.target_mean() - v.mean());
  return v;
}

inline double forced_residual(const TwoStateProblem& problem, const PeriodicField& v,
                              const PeriodicField::Spectrum* forcing) {
  if (!forcing) return residual_negative_norm(problem.cache(), v);
  const auto& cache = problem.cache();
  const auto& grid = v.grid();
  const int n = cache.op().equations();
  const double k = cache.op().order();
  const auto& norms2 = grid.frequency_norms2();
  double total = 0.0;
  for (std::size_t p = 0; p < grid.points(); ++p) {
    CVector r = cache.symbol(p) * v.coefficient(p) -
                Eigen::Map<const CVector>(forcing->data() + p * static_cast<std::size_t>(n), n);
    double e = r.squaredNorm();
    if (e != 0.0) total += sobolev_weight(norms2[p], -k) * e;
  }
  return std::sqrt(total);
}

inline ExperimentReport run_projection(const TwoStateProblem& problem, const PeriodicField& init,
                                       const RunOptions& options, const PeriodicField::Spectrum* forcing,
                                       PeriodicField* final_field = nullptr) {
  // a zero right-hand side takes the unforced path bit for bit
  if (forcing && std::all_of(forcing->begin(), forcing->end(), [](Complex c) { return c == Complex(0.0); })) {
    forcing = nullptr;
  }
  if (!(init.grid() == problem.grid()) || init.channels() != problem.op().channels()) {
    throw DimensionError("initial field does not match the problem grid and channels");
  }
  if (options.iterations < 1) throw DomainError("iterations must be >= 1");
  require_finite(init, 0);
  std::optional<PeriodicField::Spectrum> correction;
  if (forcing) correction = minimum_norm_correction(problem.cache(), *forcing);

  ExperimentReport report;
  report.seed = problem.seed();
  report.thresholds = options.thresholds;
  report.trivial_init = is_constant_state(init, problem.lambda()) || is_constant_state(init, problem.mu());
  record(report, problem, init, forced_residual(problem, init, forcing));
  report.iterate_gap.push_back(std::sqrt(
      [&] {
        auto d = distance_field(init, problem.lambda(), problem.mu());
        double s = 0.0;
        for (double x : d.values()) s += x * x;
        return s / static_cast<double>(d.points());
      }()));

  PeriodicField v = init;
  for (int it = 1; it <= options.iterations; ++it) {
    PeriodicField s = snap_to_states(v, problem.lambda(), problem.mu());
    v = affine_project(problem, s, correction ? &*correction : nullptr);
    require_finite(v, it);
    record(report, problem, v, forced_residual(problem, v, forcing));
    report.iterate_gap.push_back(l2_norm(v - s));
  }
  if (final_field) *final_field = v;
  report.verdict =
      classify_run(report.objective.back(), report.fraction.back(), problem.theta(), options.thresholds);
  return report;
}

}  // namespace detail

/// Alternating projection between {v in {lambda, mu}} and the A-free fields
/// with the target mean.
inline ExperimentReport alternating_projection_run(const TwoStateProblem& problem, const PeriodicField& init,
                                                   const RunOptions& options) {
  return detail::run_projection(problem, init, options, nullptr);
}

/// Same, with the constraint A v = sum_beta d^beta f^beta.
inline ExperimentReport forced_projection_run(const TwoStateProblem& problem, const PeriodicField& init,
                                              const Forcing& forcing, const RunOptions& options) {
  auto r = forcing_spectrum(problem.cache(), forcing);
  return detail::run_projection(problem, init, options, &r);
}

// ---------------------------------------------------------------------------
// sequences

struct SequenceOptions {
  double growth_slope = 0.25;   // max log-log growth of the L^1 norms
  double vanish_ratio = 0.2;    // last <= ratio * max counts as tending to 0
  double vanish_abs = 1e-10;    // ... as does last <= abs * scale
  std::vector<double> thresholds;  // equi-integrability thresholds (default: 2 max|state| * 2^i)
};

enum class CollapseState { none, lambda, mu };

struct SequenceReport {
  std::vector<double> l1_norms;
  std::vector<double> residuals;
  std::vector<double> dist_to_states;
  std::vector<double> dist_lambda;
  std::vector<double> dist_mu;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> equiintegrability;
  bool equiintegrable = true;
  bool l1_bounded = true;
  bool constraint_holds = true;
  bool dist_vanishes = true;
  bool hypotheses_hold = true;
  Verdict verdict = Verdict::inconclusive;
  CollapseState collapse = CollapseState::none;
};

namespace detail {

inline bool tends_to_zero(const std::vector<double>& x, double ratio, double abs_tol) {
  if (x.empty()) return true;
  const double mx = *std::max_element(x.begin(), x.end());
  return x.back() <= abs_tol || x.back() <= ratio * mx;
}

inline double growth_slope(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  std::vector<int> j(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    j[i] = static_cast<int>(i + 1);
    y[i] = std::max(x[i], 1e-300);
  }
  return log_log_slope(j, y);
}

}  // namespace detail

/// Evaluates the hypotheses and the conclusion of approximate rigidity along
/// a supplied sequence. `residuals` overrides the A-free residuals (used
/// for forced constraints).
inline SequenceReport approximate_sequence_check(const TwoStateProblem& problem,
                                                 const std::vector<PeriodicField>& sequence,
                                                 const SequenceOptions& options = {},
                                                 const std::vector<double>* residuals = nullptr) {
  if (sequence.empty()) throw DomainError("empty sequence");
  SequenceReport r;
  for (const auto& v : sequence) {
    if (!(v.grid() == problem.grid()) || v.channels() != problem.op().channels()) {
      throw DimensionError("sequence element does not match the problem grid and channels");
    }
    r.l1_norms.push_back(l1_norm(v));
    r.dist_to_states.push_back(dist_to_states(v, problem.lambda(), problem.mu()));
    r.dist_lambda.push_back(l1_distance_to(v, problem.lambda()));
    r.dist_mu.push_back(l1_distance_to(v, problem.mu()));
    if (!residuals) r.residuals.push_back(residual_negative_norm(problem.cache(), v));
  }
  if (residuals) r.residuals = *residuals;

  const double state_scale = std::max(problem.lambda().norm(), problem.mu().norm());
  r.thresholds = options.thresholds;
  if (r.thresholds.empty()) {
    const double base = 2.0 * std::max(state_scale, 1e-300);
    for (int i = 0; i < 6; ++i) r.thresholds.push_back(base * std::pow(2.0, i));
  }
  r.equiintegrability = equiintegrability_profile(sequence, r.thresholds);
  r.equiintegrable = equiintegrability_check(sequence, r.thresholds).equiintegrable;

  const double scale = std::max({1.0, state_scale, *std::max_element(r.l1_norms.begin(), r.l1_norms.end())});
  r.l1_bounded = detail::growth_slope(r.l1_norms) <= options.growth_slope;
  r.constraint_holds = r.residuals.back() <= options.vanish_abs * scale ||
                       detail::tends_to_zero(r.residuals, options.vanish_ratio, options.vanish_abs * scale);
  r.dist_vanishes = detail::tends_to_zero(r.dist_to_states, options.vanish_ratio, options.vanish_abs * scale);
  r.hypotheses_hold = r.l1_bounded && r.constraint_holds && r.dist_vanishes;

  if (!r.hypotheses_hold) {
    r.verdict = Verdict::hypotheses_violated;
  } else if (detail::tends_to_zero(r.dist_lambda, options.vanish_ratio, options.vanish_abs * scale)) {
    r.verdict = Verdict::rigid_collapse;
    r.collapse = CollapseState::lambda;
  } else if (detail::tends_to_zero(r.dist_mu, options.vanish_ratio, options.vanish_abs * scale)) {
    r.verdict = Verdict::rigid_collapse;
    r.collapse = CollapseState::mu;
  } else {
    // both pure-state distances stay away from zero: a genuine microstructure
    r.verdict = Verdict::laminate_found;
  }
  return r;
}

// ---------------------------------------------------------------------------
// vanishing right-hand sides

struct ForcedExperimentReport {
  std::vector<double> forcing_l1;
  std::vector<ExperimentReport> runs;
  SequenceReport sequence;
  bool forcing_vanishes = true;
  Verdict verdict = Verdict::inconclusive;
};

/// For every forcing f_j runs the forced alternating projection from the
/// reference start (seed = problem seed + j), then checks the sequence of
/// final fields. A forcing that does not tend to zero violates the hypotheses.
inline ForcedExperimentReport vanishing_rhs_experiment(const TwoStateProblem& problem,
                                                       const std::vector<Forcing>& forcings,
                                                       const RunOptions& options, double relative_noise = default_relative_noise,
                                                       const SequenceOptions& seq_options = {}) {
  if (forcings.empty()) throw DomainError("no forcing fields supplied");
  ForcedExperimentReport out;
  std::vector<PeriodicField> finals;
  std::vector<double> residuals;
  for (std::size_t j = 0; j < forcings.size(); ++j) {
    out.forcing_l1.push_back(forcing_l1(forcings[j]));
    auto r = forcing_spectrum(problem.cache(), forcings[j]);
    TwoStateProblem pj = problem.with_seed(problem.seed() + j);
    auto init = reference_init(pj, pj.seed(), relative_noise);
    PeriodicField v = init;
    ExperimentReport run = detail::run_projection(pj, init, options, &r, &v);
    residuals.push_back(run.residual.back());
    finals.push_back(std::move(v));
    out.runs.push_back(std::move(run));
  }
  const double fscale = std::max(1e-300, *std::max_element(out.forcing_l1.begin(), out.forcing_l1.end()));
  out.forcing_vanishes = out.forcing_l1.back() <= seq_options.vanish_abs * fscale ||
                         detail::tends_to_zero(out.forcing_l1, seq_options.vanish_ratio, 0.0) ||
                         out.forcing_l1.back() == 0.0;
  out.sequence = approximate_sequence_check(problem, finals, seq_options, &residuals);

  if (!out.forcing_vanishes) {
    out.verdict = Verdict::hypotheses_violated;
    return out;
  }
  bool all_rigid = true, all_collapse = true, all_laminate = true;
  for (const auto& run : out.runs) {
    all_rigid = all_rigid && (run.verdict == Verdict::rigid_collapse || run.verdict == Verdict::rigid_obstructed);
    all_collapse = all_collapse && run.verdict == Verdict::rigid_collapse;
    all_laminate = all_laminate && run.verdict == Verdict::laminate_found;
  }
  if (all_collapse) out.verdict = Verdict::rigid_collapse;
  else if (all_rigid) out.verdict = Verdict::rigid_obstructed;
  else if (all_laminate) out.verdict = Verdict::laminate_found;
  else out.verdict = Verdict::inconclusive;
  return out;
}

}  // namespace wclab
