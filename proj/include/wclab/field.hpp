#pragma once

// Periodic grids on the torus [0,1)^d and real multi-channel fields with a
// lazily computed discrete spectrum
//
//   vhat(m) = N^{-d} sum_x v(x) exp(-2 pi i m.x),   m in {-(N-1)/2..(N-1)/2}^d.
//
// Integrals are means over samples (the torus has measure one), so
// mean |v|^2 = sum_m |vhat(m)|^2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/fft.hpp"
#include "wclab/operator.hpp"

namespace wclab {

class PeriodicGrid {
 public:
  PeriodicGrid(int d, int n) : d_(d), n_(n) {
    if (d < 1) throw DimensionError("grid dimension must be >= 1");
    if (n < 3 || n % 2 == 0) throw DimensionError("samples per axis must be odd and >= 3, got " + std::to_string(n));
    points_ = 1;
    for (int i = 0; i < d; ++i) points_ *= static_cast<std::size_t>(n);
  }

  int dim() const { return d_; }
  int samples_per_axis() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  std::size_t points() const { return points_; }
  int max_frequency() const { return (n_ - 1) / 2; }

  // Row-major multi-index of a linear sample (or frequency-slot) index.
  std::vector<int> index(std::size_t p) const {
    std::vector<int> idx(static_cast<std::size_t>(d_));
    for (int a = d_ - 1; a >= 0; --a) {
      idx[static_cast<std::size_t>(a)] = static_cast<int>(p % static_cast<std::size_t>(n_));
      p /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  std::size_t linear(const std::vector<int>& idx) const {
    std::size_t p = 0;
    for (int a = 0; a < d_; ++a) {
      int i = ((idx[static_cast<std::size_t>(a)] % n_) + n_) % n_;
      p = p * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
    }
    return p;
  }

  Vector coordinates(std::size_t p) const {
    auto idx = index(p);
    Vector x(d_);
    for (int a = 0; a < d_; ++a) x[a] = static_cast<double>(idx[static_cast<std::size_t>(a)]) / n_;
    return x;
  }

  // Integer frequency stored in slot p of a spectrum.
  Vector frequency(std::size_t p) const {
    auto idx = index(p);
    Vector m(d_);
    for (int a = 0; a < d_; ++a) {
      int i = idx[static_cast<std::size_t>(a)];
      m[a] = i <= max_frequency() ? i : i - n_;
    }
    return m;
  }

  // Columns are the integer frequencies of all slots; shared per (d, N).
  const Matrix& frequencies() const;
  // |m|^2 per slot.
  const std::vector<double>& frequency_norms2() const;

  // Slot holding frequency -m.
  std::size_t conjugate_slot(std::size_t p) const {
    auto idx = index(p);
    for (auto& i : idx) i = -i;
    return linear(idx);
  }

  bool operator==(const PeriodicGrid& o) const { return d_ == o.d_ && n_ == o.n_; }

 private:
  int d_;
  int n_;
  std::size_t points_ = 0;
};

namespace detail {

struct FrequencyTable {
  Matrix freqs;
  std::vector<double> norms2;
};

inline const FrequencyTable& frequency_table(const PeriodicGrid& grid) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<FrequencyTable>> tables;
  std::lock_guard lock(mutex);
  auto& slot = tables[{grid.dim(), grid.samples_per_axis()}];
  if (!slot) {
    auto t = std::make_unique<FrequencyTable>();
    t->freqs.resize(grid.dim(), static_cast<Eigen::Index>(grid.points()));
    t->norms2.resize(grid.points());
    for (std::size_t p = 0; p < grid.points(); ++p) {
      t->freqs.col(static_cast<Eigen::Index>(p)) = grid.frequency(p);
      t->norms2[p] = t->freqs.col(static_cast<Eigen::Index>(p)).squaredNorm();
    }
    slot = std::move(t);
  }
  return *slot;
}

}  // namespace detail

inline const Matrix& PeriodicGrid::frequencies() const { return detail::frequency_table(*this).freqs; }
inline const std::vector<double>& PeriodicGrid::frequency_norms2() const { return detail::frequency_table(*this).norms2; }

class PeriodicField {
 public:
  using Spectrum = std::vector<Complex>;

  PeriodicField(PeriodicGrid grid, int channels)
      : grid_(grid), channels_(channels), values_(grid.points() * static_cast<std::size_t>(check_channels(channels))) {}

  PeriodicField(PeriodicGrid grid, int channels, std::vector<double> values)
      : grid_(grid), channels_(check_channels(channels)), values_(std::move(values)) {
    if (values_.size() != grid_.points() * static_cast<std::size_t>(channels_)) {
      throw DimensionError("field value count does not match grid points x channels");
    }
  }

  static PeriodicField constant(PeriodicGrid grid, const Vector& value) {
    PeriodicField f(grid, static_cast<int>(value.size()));
    for (std::size_t p = 0; p < grid.points(); ++p)
      for (int c = 0; c < f.channels_; ++c) f.values_[p * static_cast<std::size_t>(f.channels_) + static_cast<std::size_t>(c)] = value[c];
    return f;
  }

  // Real part of the inverse transform; see synthesize() for the residue.
  static PeriodicField from_spectrum(PeriodicGrid grid, int channels, const Spectrum& spectrum);

  const PeriodicGrid& grid() const { return grid_; }
  int channels() const { return channels_; }
  std::size_t points() const { return grid_.points(); }

  std::span<const double> values() const { return values_; }
  // Any write access drops the cached spectrum.
  std::span<double> mutable_values() {
    spectrum_.reset();
    return values_;
  }

  double operator()(std::size_t p, int c) const { return values_[p * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)]; }
  void set(std::size_t p, int c, double v) {
    spectrum_.reset();
    values_[p * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)] = v;
  }

  Eigen::Map<const Vector> sample(std::size_t p) const {
    return Eigen::Map<const Vector>(values_.data() + p * static_cast<std::size_t>(channels_), channels_);
  }
  void set_sample(std::size_t p, const Eigen::Ref<const Vector>& v) {
    spectrum_.reset();
    Eigen::Map<Vector>(values_.data() + p * static_cast<std::size_t>(channels_), channels_) = v;
  }

  double norm_at(std::size_t p) const { return sample(p).norm(); }

  Vector mean() const {
    Vector m = Vector::Zero(channels_);
    for (std::size_t p = 0; p < points(); ++p) m += sample(p);
    return m / static_cast<double>(points());
  }

  // Coefficients vhat(m) for every slot, interleaved by channel.
  const Spectrum& spectrum() const {
    if (!spectrum_) {
      Spectrum in(values_.begin(), values_.end());
      auto out = std::make_shared<Spectrum>();
      fft::transform(grid_.dim(), grid_.samples_per_axis(), channels_, fft::Direction::forward, in, *out);
      const double scale = 1.0 / static_cast<double>(points());
      for (auto& z : *out) z *= scale;
      spectrum_ = std::move(out);
    }
    return *spectrum_;
  }

  Eigen::Map<const CVector> coefficient(std::size_t slot) const {
    const auto& s = spectrum();
    return Eigen::Map<const CVector>(s.data() + slot * static_cast<std::size_t>(channels_), channels_);
  }

  PeriodicField& operator+=(const PeriodicField& o) {
    check_compatible(o);
    spectrum_.reset();
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  PeriodicField& operator-=(const PeriodicField& o) {
    check_compatible(o);
    spectrum_.reset();
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  PeriodicField& operator*=(double s) {
    spectrum_.reset();
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
  friend PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
  friend PeriodicField operator*(double s, PeriodicField a) { return a *= s; }

  // Adds `shift` to every sample.
  PeriodicField& shift(const Vector& shift) {
    if (shift.size() != channels_) throw DimensionError("shift length differs from channel count");
    spectrum_.reset();
    for (std::size_t p = 0; p < points(); ++p)
      for (int c = 0; c < channels_; ++c) values_[p * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)] += shift[c];
    return *this;
  }

  void check_compatible(const PeriodicField& o) const {
    if (!(grid_ == o.grid_)) throw DimensionError("fields live on different grids");
    if (channels_ != o.channels_) throw DimensionError("fields have different channel counts");
  }

 private:
  static int check_channels(int c) {
    if (c < 1) throw DimensionError("field needs at least one channel");
    return c;
  }

  PeriodicGrid grid_;
  int channels_;
  std::vector<double> values_;
  mutable std::shared_ptr<const Spectrum> spectrum_;
};

// Inverse transform of a spectrum plus the discarded imaginary part, measured
// as max |Im v| / max(|v|, tiny).
struct SpectralSynthesis {
  PeriodicField field;
  double imag_residue = 0.0;
};

inline SpectralSynthesis synthesize(PeriodicGrid grid, int channels, const PeriodicField::Spectrum& spectrum) {
  if (spectrum.size() != grid.points() * static_cast<std::size_t>(channels)) {
    throw DimensionError("spectrum size does not match grid points x channels");
  }
  PeriodicField::Spectrum out;
  fft::transform(grid.dim(), grid.samples_per_axis(), channels, fft::Direction::backward, spectrum, out);
  std::vector<double> re(out.size());
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    re[i] = out[i].real();
    max_re = std::max(max_re, std::abs(out[i].real()));
    max_im = std::max(max_im, std::abs(out[i].imag()));
  }
  return {PeriodicField(grid, channels, std::move(re)), max_im / std::max(max_re, 1e-300)};
}

inline PeriodicField PeriodicField::from_spectrum(PeriodicGrid grid, int channels, const Spectrum& spectrum) {
  return synthesize(grid, channels, spectrum).field;
}

// ---------------------------------------------------------------------------
// constructors

/// Two-state laminate lambda h(x.q) + mu (1 - h(x.q)) where h is the
/// 1-periodic square wave of duty cycle theta repeated `period_count` times.
/// A sample belongs to {h = 1} iff (period_count * q.i mod N) < theta N, i.e.
/// the half-open intervals are snapped to grid points toward -infinity.
inline PeriodicField laminate_field(PeriodicGrid grid, const Vector& lambda, const Vector& mu,
                                    const std::vector<int>& q, double theta, int period_count = 1) {
  if (lambda.size() != mu.size()) throw DimensionError("states have different lengths");
  if (static_cast<int>(q.size()) != grid.dim()) throw DimensionError("laminate direction has wrong length");
  if (std::all_of(q.begin(), q.end(), [](int c) { return c == 0; })) throw DomainError("laminate direction q = 0");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("duty cycle must lie in (0, 1)");
  if (period_count < 1) throw DomainError("period count must be positive");
  const long long n = grid.samples_per_axis();
  const double cut = theta * static_cast<double>(n);
  PeriodicField f(grid, static_cast<int>(lambda.size()));
  for (std::size_t p = 0; p < grid.points(); ++p) {
    auto idx = grid.index(p);
    long long phase = 0;
    for (int a = 0; a < grid.dim(); ++a) phase += static_cast<long long>(q[static_cast<std::size_t>(a)]) * idx[static_cast<std::size_t>(a)];
    phase = ((phase * period_count) % n + n) % n;
    f.set_sample(p, static_cast<double>(phase) < cut ? lambda : mu);
  }
  return f;
}

// ---------------------------------------------------------------------------
// norms and diagnostics

inline std::vector<double> pointwise_norms(const PeriodicField& f) {
  std::vector<double> r(f.points());
  for (std::size_t p = 0; p < f.points(); ++p) r[p] = f.norm_at(p);
  return r;
}

inline double l1_norm(const PeriodicField& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.points(); ++p) s += f.norm_at(p);
  return s / static_cast<double>(f.points());
}

inline double l2_norm(const PeriodicField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s / static_cast<double>(f.points()));
}

inline double linf_norm(const PeriodicField& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.points(); ++p) s = std::max(s, f.norm_at(p));
  return s;
}

namespace detail {
inline void check_state(const PeriodicField& f, const Vector& s) {
  if (s.size() != f.channels()) throw DimensionError("state length differs from field channel count");
}
}  // namespace detail

/// Pointwise min(|v - lambda|, |v - mu|) as a scalar field.
inline PeriodicField distance_field(const PeriodicField& f, const Vector& lambda, const Vector& mu) {
  detail::check_state(f, lambda);
  detail::check_state(f, mu);
  PeriodicField d(f.grid(), 1);
  auto out = d.mutable_values();
  for (std::size_t p = 0; p < f.points(); ++p) {
    auto v = f.sample(p);
    out[p] = std::min((v - lambda).norm(), (v - mu).norm());
  }
  return d;
}

/// Mean over samples of min(|v - lambda|, |v - mu|).
inline double dist_to_states(const PeriodicField& f, const Vector& lambda, const Vector& mu) {
  return l1_norm(distance_field(f, lambda, mu));
}

/// Mean over samples of |v - state|.
inline double l1_distance_to(const PeriodicField& f, const Vector& state) {
  detail::check_state(f, state);
  double s = 0.0;
  for (std::size_t p = 0; p < f.points(); ++p) s += (f.sample(p) - state).norm();
  return s / static_cast<double>(f.points());
}

/// sup_t t |{|f| > t}|, attained (as a limit) at sample values:
/// max_i |x|_(i) (count - i) / count over ascending pointwise norms.
inline double weak_l1_quasinorm(const PeriodicField& f) {
  auto norms = pointwise_norms(f);
  std::sort(norms.begin(), norms.end());
  const double count = static_cast<double>(norms.size());
  double best = 0.0;
  for (std::size_t i = 0; i < norms.size(); ++i) best = std::max(best, norms[i] * (count - static_cast<double>(i)) / count);
  return best;
}

inline double sobolev_weight(double m_norm2, double s) {
  return std::pow(1.0 + 4.0 * std::numbers::pi * std::numbers::pi * m_norm2, s);
}

/// (sum_m (1 + 4 pi^2 |m|^2)^s |vhat(m)|^2)^{1/2}
inline double sobolev_norm(const PeriodicField& f, double s) {
  const auto& spec = f.spectrum();
  const auto& grid = f.grid();
  const auto& norms2 = grid.frequency_norms2();
  double total = 0.0;
  for (std::size_t slot = 0; slot < grid.points(); ++slot) {
    double e = 0.0;
    for (int c = 0; c < f.channels(); ++c) e += std::norm(spec[slot * static_cast<std::size_t>(f.channels()) + static_cast<std::size_t>(c)]);
    if (e == 0.0) continue;
    total += sobolev_weight(norms2[slot], s) * e;
  }
  return std::sqrt(total);
}

/// Entry (j, t) = integral of |v_j| over {|v_j| > t}.
inline std::vector<std::vector<double>> equiintegrability_profile(const std::vector<PeriodicField>& fields,
                                                                  const std::vector<double>& thresholds) {
  std::vector<std::vector<double>> profile;
  for (const auto& f : fields) {
    if (!fields.empty()) fields.front().check_compatible(f);
    auto norms = pointwise_norms(f);
    std::vector<double> row;
    for (double t : thresholds) {
      double s = 0.0;
      for (double v : norms) {
        if (v > t) s += v;
      }
      row.push_back(s / static_cast<double>(norms.size()));
    }
    profile.push_back(std::move(row));
  }
  return profile;
}

struct EquiIntegrability {
  std::vector<double> tail;  // sup_j of the profile, per threshold
  bool equiintegrable = true;
};

/// Flags a family as equi-integrable when the uniform tail sup_j int_{|v_j|>t}
/// |v_j| at the largest threshold has dropped to at most `decay` times its
/// value at the smallest threshold (or is zero).
inline EquiIntegrability equiintegrability_check(const std::vector<PeriodicField>& fields,
                                                 const std::vector<double>& thresholds, double decay = 0.1) {
  if (thresholds.empty()) throw DomainError("equi-integrability check needs thresholds");
  auto profile = equiintegrability_profile(fields, thresholds);
  EquiIntegrability r;
  r.tail.assign(thresholds.size(), 0.0);
  for (const auto& row : profile)
    for (std::size_t t = 0; t < row.size(); ++t) r.tail[t] = std::max(r.tail[t], row[t]);
  r.equiintegrable = r.tail.back() == 0.0 || r.tail.back() <= decay * r.tail.front();
  return r;
}

/// Mean over samples of min(|v|, 1).
inline double convergence_in_measure_metric(const PeriodicField& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.points(); ++p) s += std::min(f.norm_at(p), 1.0);
  return s / static_cast<double>(f.points());
}

struct SandwichViolations {
  std::size_t inner = 0;  // dist > 2t but |v| <= t
  std::size_t outer = 0;  // |v| > t but dist <= t/2
};

/// Per-sample check of {dist > 2t} in {|v| > t} in {dist > t/2}, valid for
/// t >= 2 max(|lambda|, |mu|).
inline SandwichViolations level_set_sandwich(const PeriodicField& f, const Vector& lambda, const Vector& mu, double t) {
  if (t < 2.0 * std::max(lambda.norm(), mu.norm())) throw DomainError("threshold below 2 max(|lambda|, |mu|)");
  auto dist = distance_field(f, lambda, mu);
  SandwichViolations v;
  for (std::size_t p = 0; p < f.points(); ++p) {
    double n = f.norm_at(p);
    double dd = dist(p, 0);
    if (dd > 2.0 * t && !(n > t)) ++v.inner;
    if (n > t && !(dd > t / 2.0)) ++v.outer;
  }
  return v;
}

}  // namespace wclab
