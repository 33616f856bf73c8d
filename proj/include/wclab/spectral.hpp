#pragma once

// Differential operators and Fourier multipliers on periodic fields.
//
// With a(m) = A^k(m) lambda, A^k the principal symbol including (2 pi i)^k,
// the multipliers are
//
//   T  f = F^-1[ fhat / (1 + |a|^2) ]                           (any channels)
//   T1 z = F^-1[ conj(a) . A^k zhat / (1 + |a|^2) ]              (ell -> 1)
//   T2 u = F^-1[ conj(a) . F[[A, phi] u] / (1 + |a|^2) ]         (ell -> 1)
//   T3 w = T w                                                   (1 -> 1)
//   T4 v = F^-1[ conj(a) . F[A^{<k} v] / (1 + |a|^2) ]           (ell -> 1)
//   T5 f = F^-1[ (2 pi i)^k m^beta conj(a) . fhat / (1 + |a|^2) ] (n -> 1)
//
// where `.` is the Hermitian product over the n equations.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/field.hpp"
#include "wclab/operator.hpp"

namespace wclab {

inline constexpr double kernel_rank_threshold = 1e-10;

/// Per-frequency symbols and kernel projectors of one operator on one grid.
/// Immutable after construction.
class FrequencyKernelCache {
 public:
  FrequencyKernelCache(DifferentialOperator op, PeriodicGrid grid)
      : op_(std::move(op)), grid_(grid), homogeneous_(op_.homogeneous()) {
    if (op_.dim() != grid_.dim()) throw DimensionError("operator and grid dimensions differ");
    const std::size_t slots = grid_.points();
    symbol_.resize(slots);
    if (!homogeneous_) principal_.resize(slots);
    projector_.resize(slots);
    rank_.resize(slots);
    const int ell = op_.channels();
    for (std::size_t p = 0; p < slots; ++p) {
      const Vector m = grid_.frequency(p);
      symbol_[p] = full_symbol(op_, m);
      if (!homogeneous_) principal_[p] = full_symbol(op_, m, SymbolPart::principal);
    }
    for (std::size_t p = 0; p < slots; ++p) {
      const std::size_t partner = grid_.conjugate_slot(p);
      if (partner < p) {
        projector_[p] = projector_[partner].conjugate();
        rank_[p] = rank_[partner];
        continue;
      }
      const CMatrix& s = symbol_[p];
      if (s.cwiseAbs().maxCoeff() == 0.0) {
        projector_[p] = CMatrix::Identity(ell, ell);
        rank_[p] = 0;
        continue;
      }
      Eigen::JacobiSVD<CMatrix> svd(s, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      const double cut = kernel_rank_threshold * std::max(sv(0), 1e-300);
      int rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) >= cut) ++rank;
      }
      const CMatrix kernel = svd.matrixV().rightCols(ell - rank);
      CMatrix proj = kernel * kernel.adjoint();
      proj = 0.5 * (proj + proj.adjoint()).eval();
      if (partner == p) proj = proj.real().cast<Complex>();
      projector_[p] = std::move(proj);
      rank_[p] = rank;
    }
  }

  const DifferentialOperator& op() const { return op_; }
  const PeriodicGrid& grid() const { return grid_; }
  bool homogeneous() const { return homogeneous_; }

  const CMatrix& symbol(std::size_t slot) const { return symbol_[slot]; }
  const CMatrix& principal_symbol(std::size_t slot) const { return homogeneous_ ? symbol_[slot] : principal_[slot]; }
  const CMatrix& projector(std::size_t slot) const { return projector_[slot]; }
  int rank(std::size_t slot) const { return rank_[slot]; }

  /// Real kernel element Re(P(m) seed); zero when the kernel is trivial or
  /// contains no real direction along seed.
  Vector kernel_vector(std::size_t slot, const Vector& seed) const {
    return (projector_[slot] * seed.cast<Complex>()).real();
  }

  /// a(m) = A^k(m) lambda for every slot.
  std::vector<CVector> state_symbol(const Vector& lambda) const {
    if (lambda.size() != op_.channels()) throw DimensionError("state length differs from operator channels");
    std::vector<CVector> a(grid_.points());
    const CVector l = lambda.cast<Complex>();
    for (std::size_t p = 0; p < a.size(); ++p) a[p] = principal_symbol(p) * l;
    return a;
  }

 private:
  DifferentialOperator op_;
  PeriodicGrid grid_;
  bool homogeneous_;
  std::vector<CMatrix> symbol_;
  std::vector<CMatrix> principal_;
  std::vector<CMatrix> projector_;
  std::vector<int> rank_;
};

struct SpectralDiagnostics {
  double imag_residue = 0.0;
};

namespace detail {

inline void check_field(const FrequencyKernelCache& cache, const PeriodicField& f, int channels, const char* what) {
  if (!(f.grid() == cache.grid())) throw DimensionError(std::string(what) + ": field grid differs from operator cache grid");
  if (f.channels() != channels) {
    throw DimensionError(std::string(what) + ": field has " + std::to_string(f.channels()) + " channels, expected " +
                         std::to_string(channels));
  }
}

}  // namespace detail

/// Writes `fn(slot, in, out)` for every frequency slot, where `in` maps the
/// input coefficients and `out` the `out_channels` output coefficients, then
/// transforms back.
template <typename Fn>
PeriodicField apply_multiplier(const PeriodicField& f, int out_channels, Fn&& fn, SpectralDiagnostics* diag = nullptr) {
  const auto& grid = f.grid();
  const auto& spec = f.spectrum();
  const auto in_c = static_cast<std::size_t>(f.channels());
  const auto out_c = static_cast<std::size_t>(out_channels);
  PeriodicField::Spectrum out(grid.points() * out_c);
  for (std::size_t p = 0; p < grid.points(); ++p) {
    Eigen::Map<const CVector> in(spec.data() + p * in_c, f.channels());
    Eigen::Map<CVector> o(out.data() + p * out_c, out_channels);
    fn(p, in, o);
  }
  auto syn = synthesize(grid, out_channels, out);
  if (diag) diag->imag_residue = syn.imag_residue;
  return std::move(syn.field);
}

using CoeffIn = Eigen::Map<const CVector>;
using CoeffOut = Eigen::Map<CVector>;

/// w = A v, spectrum what(m) = full_symbol(m) vhat(m).
inline PeriodicField apply_operator(const FrequencyKernelCache& cache, const PeriodicField& f,
                                    SpectralDiagnostics* diag = nullptr) {
  detail::check_field(cache, f, cache.op().channels(), "apply_operator");
  return apply_multiplier(
      f, cache.op().equations(), [&](std::size_t p, const CoeffIn& c, CoeffOut o) { o.noalias() = cache.symbol(p) * c; },
      diag);
}

inline PeriodicField apply_operator(const DifferentialOperator& op, const PeriodicField& f) {
  return apply_operator(FrequencyKernelCache(op, f.grid()), f);
}

/// Only the orders selected by `part` (principal or lower) of the operator.
inline PeriodicField apply_operator_part(const FrequencyKernelCache& cache, const PeriodicField& f, SymbolPart part) {
  detail::check_field(cache, f, cache.op().channels(), "apply_operator_part");
  return apply_multiplier(f, cache.op().equations(), [&](std::size_t p, const CoeffIn& c, CoeffOut o) {
    switch (part) {
      case SymbolPart::all: o.noalias() = cache.symbol(p) * c; break;
      case SymbolPart::principal: o.noalias() = cache.principal_symbol(p) * c; break;
      case SymbolPart::lower: o.noalias() = (cache.symbol(p) - cache.principal_symbol(p)) * c; break;
    }
  });
}

/// Discrete H^{-k} norm of A v.
inline double residual_negative_norm(const FrequencyKernelCache& cache, const PeriodicField& f) {
  detail::check_field(cache, f, cache.op().channels(), "residual_negative_norm");
  const auto& grid = f.grid();
  const auto& norms2 = grid.frequency_norms2();
  const double k = cache.op().order();
  double total = 0.0;
  for (std::size_t p = 0; p < grid.points(); ++p) {
    double e = (cache.symbol(p) * f.coefficient(p)).squaredNorm();
    if (e == 0.0) continue;
    total += sobolev_weight(norms2[p], -k) * e;
  }
  return std::sqrt(total);
}

inline double residual_negative_norm(const DifferentialOperator& op, const PeriodicField& f) {
  return residual_negative_norm(FrequencyKernelCache(op, f.grid()), f);
}

/// Orthogonal projection onto A-free fields, frequency by frequency. For a
/// homogeneous operator the mean is copied untouched; otherwise the m = 0
/// coefficient is projected onto ker A(0) as well.
inline PeriodicField afree_project(const FrequencyKernelCache& cache, const PeriodicField& f,
                                   SpectralDiagnostics* diag = nullptr) {
  detail::check_field(cache, f, cache.op().channels(), "afree_project");
  const bool keep_mean = cache.homogeneous();
  return apply_multiplier(
      f, f.channels(),
      [&](std::size_t p, const CoeffIn& c, CoeffOut o) {
        if (p == 0 && keep_mean) o = c;
        else o.noalias() = cache.projector(p) * c;
      },
      diag);
}

inline PeriodicField afree_project(const DifferentialOperator& op, const PeriodicField& f) {
  return afree_project(FrequencyKernelCache(op, f.grid()), f);
}

/// T: divide every channel by 1 + |a(m)|^2.
inline PeriodicField multiplier_T(const FrequencyKernelCache& cache, const Vector& lambda, const PeriodicField& f,
                                  SpectralDiagnostics* diag = nullptr) {
  if (!(f.grid() == cache.grid())) throw DimensionError("multiplier_T: grid mismatch");
  auto a = cache.state_symbol(lambda);
  return apply_multiplier(
      f, f.channels(), [&](std::size_t p, const CoeffIn& c, CoeffOut o) { o = c / (1.0 + a[p].squaredNorm()); }, diag);
}

/// T3 is T restricted to scalar fields.
inline PeriodicField multiplier_T3(const FrequencyKernelCache& cache, const Vector& lambda, const PeriodicField& w,
                                   SpectralDiagnostics* diag = nullptr) {
  detail::check_field(cache, w, 1, "multiplier_T3");
  return multiplier_T(cache, lambda, w, diag);
}

/// g (n channels) -> F^-1[ conj(a) . ghat / (1 + |a|^2) ].
inline PeriodicField state_symbol_multiplier(const FrequencyKernelCache& cache, const Vector& lambda,
                                             const PeriodicField& g, SpectralDiagnostics* diag = nullptr) {
  detail::check_field(cache, g, cache.op().equations(), "state_symbol_multiplier");
  auto a = cache.state_symbol(lambda);
  return apply_multiplier(
      g, 1,
      [&](std::size_t p, const CoeffIn& c, CoeffOut o) {
        o(0) = a[p].dot(c) / (1.0 + a[p].squaredNorm());  // Eigen's dot conjugates the left operand
      },
      diag);
}

inline PeriodicField multiplier_T1(const FrequencyKernelCache& cache, const Vector& lambda, const PeriodicField& z,
                                   SpectralDiagnostics* diag = nullptr) {
  detail::check_field(cache, z, cache.op().channels(), "multiplier_T1");
  auto a = cache.state_symbol(lambda);
  return apply_multiplier(
      z, 1,
      [&](std::size_t p, const CoeffIn& c, CoeffOut o) {
        o(0) = a[p].dot(cache.principal_symbol(p) * c) / (1.0 + a[p].squaredNorm());
      },
      diag);
}

/// sup_m of the operator norm of conj(a)^T A^k(m) / (1 + |a|^2), the L^2
/// bound of T1 on this grid.
inline double multiplier_T1_bound(const FrequencyKernelCache& cache, const Vector& lambda) {
  auto a = cache.state_symbol(lambda);
  double bound = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    CVector row = cache.principal_symbol(p).adjoint() * a[p];
    bound = std::max(bound, row.norm() / (1.0 + a[p].squaredNorm()));
  }
  return bound;
}

/// T5 for one multi-index beta with |beta| = k; f has n channels.
inline PeriodicField multiplier_T5(const FrequencyKernelCache& cache, const Vector& lambda, const MultiIndex& beta,
                                   const PeriodicField& f, SpectralDiagnostics* diag = nullptr) {
  const int k = cache.op().order();
  if (beta.dim() != cache.op().dim()) throw DimensionError("multiplier_T5: beta has wrong length");
  if (beta.order() != k) throw DomainError("multiplier_T5 needs |beta| = k");
  detail::check_field(cache, f, cache.op().equations(), "multiplier_T5");
  auto a = cache.state_symbol(lambda);
  const Complex ik = std::pow(Complex(0.0, 2.0 * std::numbers::pi), k);
  const Matrix& freqs = cache.grid().frequencies();
  return apply_multiplier(
      f, 1,
      [&](std::size_t p, const CoeffIn& c, CoeffOut o) {
        const double mono = beta.monomial<double>(freqs.col(static_cast<Eigen::Index>(p)));
        o(0) = ik * mono * a[p].dot(c) / (1.0 + a[p].squaredNorm());
      },
      diag);
}

// ---------------------------------------------------------------------------
// products and commutators

/// Smallest odd sample count >= 3N/2, used by the dealiased product.
inline int padded_samples(int n) {
  int m = (3 * n + 1) / 2;
  return m % 2 == 0 ? m + 1 : m;
}

namespace detail {

// Copies coefficients between grids of the same dimension, dropping
// frequencies the target cannot hold.
inline PeriodicField::Spectrum resample_spectrum(const PeriodicGrid& from, const PeriodicGrid& to, int channels,
                                                 const PeriodicField::Spectrum& spec) {
  PeriodicField::Spectrum out(to.points() * static_cast<std::size_t>(channels));
  const int limit = std::min(from.max_frequency(), to.max_frequency());
  for (std::size_t p = 0; p < from.points(); ++p) {
    Vector m = from.frequency(p);
    if (m.cwiseAbs().maxCoeff() > limit) continue;
    std::vector<int> idx(static_cast<std::size_t>(from.dim()));
    for (int a = 0; a < from.dim(); ++a) idx[static_cast<std::size_t>(a)] = static_cast<int>(m[a]);
    std::size_t q = to.linear(idx);
    for (int c = 0; c < channels; ++c) {
      out[q * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] =
          spec[p * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
    }
  }
  return out;
}

}  // namespace detail

/// phi (scalar) times every channel of f, in sample space. With `dealias`
/// the product is formed on a 3/2 zero-padded grid and truncated back.
inline PeriodicField multiply(const PeriodicField& phi, const PeriodicField& f, bool dealias = false) {
  if (phi.channels() != 1) throw DimensionError("multiply: phi must be scalar");
  if (!(phi.grid() == f.grid())) throw DimensionError("multiply: grid mismatch");
  auto product = [](const PeriodicField& s, const PeriodicField& g) {
    PeriodicField out = g;
    auto v = out.mutable_values();
    const auto c = static_cast<std::size_t>(g.channels());
    for (std::size_t p = 0; p < g.points(); ++p)
      for (std::size_t k = 0; k < c; ++k) v[p * c + k] *= s(p, 0);
    return out;
  };
  if (!dealias) return product(phi, f);
  const PeriodicGrid fine(f.grid().dim(), padded_samples(f.grid().samples_per_axis()));
  auto up = [&](const PeriodicField& g) {
    return PeriodicField::from_spectrum(fine, g.channels(),
                                        detail::resample_spectrum(g.grid(), fine, g.channels(), g.spectrum()));
  };
  PeriodicField prod = product(up(phi), up(f));
  return PeriodicField::from_spectrum(f.grid(), f.channels(),
                                      detail::resample_spectrum(fine, f.grid(), f.channels(), prod.spectrum()));
}

/// [A, phi] f = A(phi f) - phi A(f).
inline PeriodicField commutator(const FrequencyKernelCache& cache, const PeriodicField& phi, const PeriodicField& f,
                                bool dealias = false) {
  if (!(phi.grid() == f.grid()) || !(f.grid() == cache.grid())) throw DimensionError("commutator: grid mismatch");
  detail::check_field(cache, f, cache.op().channels(), "commutator");
  PeriodicField lhs = apply_operator(cache, multiply(phi, f, dealias));
  PeriodicField rhs = multiply(phi, apply_operator(cache, f), dealias);
  return lhs - rhs;
}

inline PeriodicField multiplier_T2(const FrequencyKernelCache& cache, const Vector& lambda, const PeriodicField& phi,
                                   const PeriodicField& u, SpectralDiagnostics* diag = nullptr) {
  return state_symbol_multiplier(cache, lambda, commutator(cache, phi, u), diag);
}

/// Lower-order contribution of a non-homogeneous operator, routed through the
/// same multiplier as T1 (phi = 1 on the torus).
inline PeriodicField multiplier_T4(const FrequencyKernelCache& cache, const Vector& lambda, const PeriodicField& v,
                                   SpectralDiagnostics* diag = nullptr) {
  return state_symbol_multiplier(cache, lambda, apply_operator_part(cache, v, SymbolPart::lower), diag);
}

struct CommutatorProbe {
  std::vector<int> frequencies;
  std::vector<double> commutator_norms;
  std::vector<double> operator_norms;
  double commutator_slope = 0.0;
  double operator_slope = 0.0;
  bool degenerate = false;  // commutator vanishes (e.g. constant phi)
};

namespace detail {

inline double log_log_slope(const std::vector<int>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(static_cast<double>(x[i]));
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = std::log(static_cast<double>(x[i])) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace detail

/// Regresses log |[A, phi] f_M|_2 and log |A f_M|_2 against log M for the
/// oscillations f_M = v0 cos(2 pi M q.x), v0 the top right-singular vector of
/// the principal symbol at q.
inline CommutatorProbe commutator_order_probe(const FrequencyKernelCache& cache, const PeriodicField& phi,
                                              const std::vector<int>& q, const std::vector<int>& frequencies,
                                              bool dealias = false) {
  const auto& grid = cache.grid();
  if (frequencies.size() < 3) throw DomainError("commutator probe needs at least three frequencies");
  if (static_cast<int>(q.size()) != grid.dim()) throw DimensionError("probe direction has wrong length");
  int qmax = 0;
  for (int c : q) qmax = std::max(qmax, std::abs(c));
  if (qmax == 0) throw DomainError("probe direction q = 0");
  for (int m : frequencies) {
    if (m < 1) throw DomainError("probe frequencies must be positive");
    if (m * qmax > grid.max_frequency()) {
      throw DomainError("probe frequency " + std::to_string(m) + " exceeds grid resolution (max " +
                        std::to_string(grid.max_frequency()) + ")");
    }
  }
  Vector qv(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) qv[a] = q[static_cast<std::size_t>(a)];
  Eigen::JacobiSVD<Matrix> svd(principal_symbol(cache.op(), qv), Eigen::ComputeFullV);
  if (svd.singularValues()(0) == 0.0) throw DomainError("principal symbol vanishes along the probe direction");
  const Vector v0 = svd.matrixV().col(0);

  CommutatorProbe probe;
  probe.frequencies = frequencies;
  for (int m : frequencies) {
    PeriodicField f(grid, cache.op().channels());
    for (std::size_t p = 0; p < grid.points(); ++p) {
      f.set_sample(p, v0 * std::cos(2.0 * std::numbers::pi * m * qv.dot(grid.coordinates(p))));
    }
    probe.commutator_norms.push_back(l2_norm(commutator(cache, phi, f, dealias)));
    probe.operator_norms.push_back(l2_norm(apply_operator(cache, f)));
  }
  const double op_scale = *std::max_element(probe.operator_norms.begin(), probe.operator_norms.end());
  const double comm_scale = *std::max_element(probe.commutator_norms.begin(), probe.commutator_norms.end());
  probe.operator_slope = detail::log_log_slope(frequencies, probe.operator_norms);
  if (comm_scale <= 1e-12 * op_scale) {
    probe.degenerate = true;
    probe.commutator_slope = std::numeric_limits<double>::quiet_NaN();
  } else {
    probe.commutator_slope = detail::log_log_slope(frequencies, probe.commutator_norms);
  }
  return probe;
}

/// Default smooth cutoff used by the probe CLI: 1 + cos(2 pi x1)/2 + sin(2 pi x2)/4.
inline PeriodicField smooth_cutoff(const PeriodicGrid& grid) {
  PeriodicField phi(grid, 1);
  for (std::size_t p = 0; p < grid.points(); ++p) {
    Vector x = grid.coordinates(p);
    double v = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * x[0]);
    if (grid.dim() > 1) v += 0.25 * std::sin(2.0 * std::numbers::pi * x[1]);
    phi.set(p, 0, v);
  }
  return phi;
}

}  // namespace wclab
