#pragma once

// Field dumps.
//
// Binary layout (all little-endian):
//   "WCLF" | u16 version | u32 d | u32 N | u32 ell | f64 values[N^d * ell]
// with values in sample-major order (sample index row-major over the grid,
// channel fastest).
//
// CSV: header `i0,...,i{d-1},c0,...,c{ell-1}`, one row per sample, LF endings.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/field.hpp"

namespace wclab {

inline constexpr std::array<char, 4> field_magic{'W', 'C', 'L', 'F'};
inline constexpr std::uint16_t field_format_version = 1;

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw ParseError("field dump truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace detail

inline std::string encode_field(const PeriodicField& f) {
  std::string out(field_magic.begin(), field_magic.end());
  detail::put_le<std::uint16_t>(out, field_format_version);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid().dim()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid().samples_per_axis()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.channels()));
  for (double v : f.values()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline PeriodicField decode_field(const std::string& bytes) {
  if (bytes.size() < 4 || !std::equal(field_magic.begin(), field_magic.end(), bytes.begin())) {
    throw ParseError("not a field dump (bad magic)");
  }
  std::size_t pos = 4;
  auto version = detail::get_le<std::uint16_t>(bytes, pos);
  if (version != field_format_version) throw ParseError("unsupported field dump version " + std::to_string(version));
  auto d = detail::get_le<std::uint32_t>(bytes, pos);
  auto n = detail::get_le<std::uint32_t>(bytes, pos);
  auto ell = detail::get_le<std::uint32_t>(bytes, pos);
  if (d < 1 || d > 8 || n > 100000 || ell < 1 || ell > 4096) throw ParseError("implausible field dump header");
  PeriodicGrid grid(static_cast<int>(d), static_cast<int>(n));
  const std::size_t count = grid.points() * ell;
  if (bytes.size() != pos + 8 * count) throw ParseError("field dump size does not match its header");
  std::vector<double> values(count);
  for (auto& v : values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos));
  return PeriodicField(grid, static_cast<int>(ell), std::move(values));
}

inline std::string field_csv(const PeriodicField& f) {
  std::ostringstream os;
  const int d = f.grid().dim();
  for (int a = 0; a < d; ++a) os << (a ? "," : "") << 'i' << a;
  for (int c = 0; c < f.channels(); ++c) os << ",c" << c;
  os << '\n';
  for (std::size_t p = 0; p < f.points(); ++p) {
    auto idx = f.grid().index(p);
    for (int a = 0; a < d; ++a) os << (a ? "," : "") << idx[static_cast<std::size_t>(a)];
    for (int c = 0; c < f.channels(); ++c) os << ',' << detail::format_double(f(p, c));
    os << '\n';
  }
  return os.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_field(const std::filesystem::path& path, const PeriodicField& f) {
  write_file_atomic(path, encode_field(f));
}

inline PeriodicField load_field(const std::filesystem::path& path) { return decode_field(read_file(path)); }

}  // namespace wclab
