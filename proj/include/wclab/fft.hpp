#pragma once

// Thin FFTW wrapper for interleaved multi-channel data on N^d grids.
// Plans are built once per (d, N, channels, direction) under a mutex and
// executed through the new-array interface, which is thread safe.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

namespace wclab::fft {

using Complex = std::complex<double>;

enum class Direction { forward, backward };

namespace detail {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline fftw_plan plan_for(int d, int n, int channels, Direction dir) {
  using Key = std::tuple<int, int, int, int>;
  static std::mutex mutex;
  static std::map<Key, Plan> plans;
  std::lock_guard lock(mutex);
  Key key{d, n, channels, dir == Direction::forward ? 0 : 1};
  auto it = plans.find(key);
  if (it != plans.end()) return it->second.get();
  std::vector<int> dims(static_cast<std::size_t>(d), n);
  std::size_t total = static_cast<std::size_t>(channels);
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(n);
  std::vector<Complex> scratch(total);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_many_dft(d, dims.data(), channels, buf, nullptr, channels, 1, buf, nullptr, channels, 1,
                                   dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(key, Plan(p));
  return p;
}

}  // namespace detail

// Unnormalized transform of `channels` interleaved signals (sample-major).
inline void transform(int d, int n, int channels, Direction dir, const std::vector<Complex>& in,
                      std::vector<Complex>& out) {
  out.resize(in.size());
  std::vector<Complex> input = in;  // FFTW may clobber its input
  fftw_execute_dft(detail::plan_for(d, n, channels, dir), reinterpret_cast<fftw_complex*>(input.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace wclab::fft
