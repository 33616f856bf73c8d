#pragma once

// Constant-coefficient linear differential operators
//
//   A v = sum_alpha A_alpha d^alpha v,   A_alpha in R^{n x ell},
//
// acting on ell-channel fields over R^d, together with their symbols and a
// small catalog (curl, div, curl curl). Matrix-valued fields use a row-major
// channel layout: v_{ij} lives in channel i * cols + j. Symmetric d x d
// fields store the upper triangle row by row, e.g. (S11, S12, S22) in 2D.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wclab/error.hpp"

namespace wclab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DimensionError("multi-index needs d >= 1 entries");
    for (int e : entries_) {
      if (e < 0) throw DomainError("multi-index entries must be non-negative");
    }
  }

  static MultiIndex unit(int d, int axis) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e.at(static_cast<std::size_t>(axis)) = 1;
    return MultiIndex(std::move(e));
  }

  int dim() const { return static_cast<int>(entries_.size()); }
  int order() const {
    int s = 0;
    for (int e : entries_) s += e;
    return s;
  }
  int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& entries() const { return entries_; }

  MultiIndex operator+(const MultiIndex& other) const {
    if (other.dim() != dim()) throw DimensionError("multi-index dimension mismatch");
    std::vector<int> e = entries_;
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.entries_[i];
    return MultiIndex(std::move(e));
  }

  // xi^alpha for real or complex xi.
  template <typename Scalar, typename Vec>
  Scalar monomial(const Vec& xi) const {
    Scalar r{1};
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      for (int p = 0; p < entries_[i]; ++p) r *= static_cast<Scalar>(xi[static_cast<Eigen::Index>(i)]);
    }
    return r;
  }

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> entries_;
};

// Which orders of an operator contribute to a symbol.
enum class SymbolPart { all, principal, lower };

class DifferentialOperator {
 public:
  using Terms = std::map<MultiIndex, Matrix>;

  // Validates shapes and drops all-zero coefficient matrices. When
  // `declared_order` is given it must match the highest surviving order.
  DifferentialOperator(int d, int ell, int n, Terms terms, std::string name = {},
                       std::optional<int> declared_order = std::nullopt)
      : d_(d), ell_(ell), n_(n), name_(std::move(name)) {
    if (d < 1 || ell < 1 || n < 1) throw DimensionError("operator needs d, ell, n >= 1");
    for (auto& [alpha, a] : terms) {
      if (alpha.dim() != d) throw DimensionError("multi-index length differs from d");
      if (a.rows() != n || a.cols() != ell) {
        std::ostringstream os;
        os << "coefficient matrix shape " << a.rows() << "x" << a.cols() << " differs from n x ell = " << n
           << "x" << ell;
        throw DimensionError(os.str());
      }
      if (!a.allFinite()) throw ParseError("non-finite coefficient");
      if (a.cwiseAbs().maxCoeff() == 0.0) continue;
      terms_.emplace(alpha, std::move(a));
    }
    if (terms_.empty()) throw ParseError("operator has no nonzero terms");
    int kmax = 0;
    for (const auto& [alpha, a] : terms_) kmax = std::max(kmax, alpha.order());
    if (declared_order) {
      if (kmax > *declared_order) throw ParseError("term order exceeds declared order k");
      if (kmax < *declared_order) throw ParseError("no term of the declared top order k");
    }
    k_ = kmax;
  }

  int dim() const { return d_; }
  int channels() const { return ell_; }
  int equations() const { return n_; }
  int order() const { return k_; }
  const std::string& name() const { return name_; }
  const Terms& terms() const { return terms_; }

  bool homogeneous() const {
    return std::all_of(terms_.begin(), terms_.end(), [this](const auto& t) { return t.first.order() == k_; });
  }

 private:
  int d_;
  int ell_;
  int n_;
  int k_ = 0;
  std::string name_;
  Terms terms_;
};

namespace detail {

inline void check_length(const DifferentialOperator& op, Eigen::Index len) {
  if (len != op.dim()) {
    std::ostringstream os;
    os << "frequency vector has length " << len << ", operator dimension is " << op.dim();
    throw DimensionError(os.str());
  }
}

inline bool part_includes(SymbolPart part, int order, int k) {
  switch (part) {
    case SymbolPart::all: return true;
    case SymbolPart::principal: return order == k;
    case SymbolPart::lower: return order < k;
  }
  return false;
}

}  // namespace detail

/// Real principal symbol sum_{|alpha| = k} A_alpha xi^alpha, without the
/// (2 pi i)^k factor.
inline Matrix principal_symbol(const DifferentialOperator& op, const Vector& xi) {
  detail::check_length(op, xi.size());
  Matrix s = Matrix::Zero(op.equations(), op.channels());
  for (const auto& [alpha, a] : op.terms()) {
    if (alpha.order() != op.order()) continue;
    s += alpha.monomial<double>(xi) * a;
  }
  return s;
}

/// sum (2 pi i)^{|alpha|} A_alpha m^alpha over the selected orders.
inline CMatrix full_symbol(const DifferentialOperator& op, const Vector& m, SymbolPart part = SymbolPart::all) {
  detail::check_length(op, m.size());
  CMatrix s = CMatrix::Zero(op.equations(), op.channels());
  for (const auto& [alpha, a] : op.terms()) {
    if (!detail::part_includes(part, alpha.order(), op.order())) continue;
    const double r = std::pow(2.0 * std::numbers::pi, alpha.order()) * alpha.monomial<double>(m);
    // exact powers of i keep conjugate symmetry bit-exact
    Complex factor;
    switch (alpha.order() % 4) {
      case 0: factor = Complex(r, 0.0); break;
      case 1: factor = Complex(0.0, r); break;
      case 2: factor = Complex(-r, 0.0); break;
      default: factor = Complex(0.0, -r); break;
    }
    s += factor * a.cast<Complex>();
  }
  return s;
}

// ---------------------------------------------------------------------------
// catalog

/// Index of S_{ij} (any order of i, j) in the upper-triangular row-major
/// layout of a symmetric d x d field.
inline int symmetric_channel(int d, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * d - i * (i - 1) / 2 + (j - i);
}

/// Row-wise curl of an m x d matrix field: for every row i and axis pair
/// p < q the equation d_q v_{ip} - d_p v_{iq} = 0.
inline DifferentialOperator catalog_curl(int m, int d) {
  if (m < 1 || d < 2) throw DimensionError("curl needs m >= 1 and d >= 2");
  const int pairs = d * (d - 1) / 2;
  const int n = m * pairs;
  const int ell = m * d;
  DifferentialOperator::Terms terms;
  for (int axis = 0; axis < d; ++axis) terms[MultiIndex::unit(d, axis)] = Matrix::Zero(n, ell);
  int row = 0;
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q, ++row) {
        terms[MultiIndex::unit(d, q)](row, i * d + p) += 1.0;
        terms[MultiIndex::unit(d, p)](row, i * d + q) -= 1.0;
      }
    }
  }
  return DifferentialOperator(d, ell, n, std::move(terms), "curl");
}

/// Row-wise divergence of an m x d matrix field.
inline DifferentialOperator catalog_div(int m, int d) {
  if (m < 1 || d < 1) throw DimensionError("div needs m, d >= 1");
  DifferentialOperator::Terms terms;
  for (int axis = 0; axis < d; ++axis) {
    Matrix a = Matrix::Zero(m, m * d);
    for (int i = 0; i < m; ++i) a(i, i * d + axis) = 1.0;
    terms[MultiIndex::unit(d, axis)] = a;
  }
  return DifferentialOperator(d, m * d, m, std::move(terms), "div");
}

/// Saint-Venant incompatibility curl (curl S)^T on symmetric d x d fields,
/// d in {2, 3}. In 2D this is d22 S11 - 2 d12 S12 + d11 S22; in 3D the six
/// upper-triangular components of eps_{ikl} eps_{jmn} d_k d_m S_{ln}.
inline DifferentialOperator catalog_curlcurl(int d) {
  if (d != 2 && d != 3) throw DimensionError("curlcurl is available for d = 2 and d = 3 only");
  const int ell = d * (d + 1) / 2;
  DifferentialOperator::Terms terms;
  auto add = [&](int row, int n, int k, int m, int channel, double c) {
    MultiIndex alpha = MultiIndex::unit(d, k) + MultiIndex::unit(d, m);
    auto it = terms.find(alpha);
    if (it == terms.end()) it = terms.emplace(alpha, Matrix::Zero(n, ell)).first;
    it->second(row, channel) += c;
  };
  if (d == 2) {
    // eps_{kl} eps_{mn} d_k d_m S_{ln}
    auto eps = [](int a, int b) { return a == b ? 0.0 : (a < b ? 1.0 : -1.0); };
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l)
        for (int m = 0; m < 2; ++m)
          for (int n = 0; n < 2; ++n) {
            double c = eps(k, l) * eps(m, n);
            if (c != 0.0) add(0, 1, k, m, symmetric_channel(2, l, n), c);
          }
    return DifferentialOperator(2, ell, 1, std::move(terms), "curlcurl");
  }
  auto eps3 = [](int a, int b, int c) -> double {
    if (a == b || b == c || a == c) return 0.0;
    return ((a + 1) % 3 == b) ? 1.0 : -1.0;
  };
  int row = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j, ++row) {
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n) {
              double c = eps3(i, k, l) * eps3(j, m, n);
              if (c != 0.0) add(row, 6, k, m, symmetric_channel(3, l, n), c);
            }
    }
  }
  return DifferentialOperator(3, ell, 6, std::move(terms), "curlcurl");
}

/// Catalog lookup by textual selector: `curl:MxD`, `div:MxD`, `curlcurl:D`.
inline DifferentialOperator catalog(std::string_view selector) {
  auto colon = selector.find(':');
  if (colon == std::string_view::npos) throw ParseError("catalog selector needs the form name:dims");
  std::string_view name = selector.substr(0, colon);
  std::string_view dims = selector.substr(colon + 1);
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad catalog dimension '" + std::string(s) + "'");
    return v;
  };
  if (name == "curl" || name == "div") {
    auto x = dims.find('x');
    if (x == std::string_view::npos) throw ParseError(std::string(name) + " needs dims MxD");
    int m = parse_int(dims.substr(0, x));
    int d = parse_int(dims.substr(x + 1));
    return name == "curl" ? catalog_curl(m, d) : catalog_div(m, d);
  }
  if (name == "curlcurl") return catalog_curlcurl(parse_int(dims));
  throw ParseError("unknown catalog operator '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// text format

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Removes whitespace adjacent to '=', ',' and ';'.
inline std::string squeeze_separators(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == ' ' || c == '\t') {
      std::size_t j = i;
      while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
      bool before_sep = j < s.size() && (s[j] == '=' || s[j] == ',' || s[j] == ';');
      bool after_sep = !out.empty() && (out.back() == '=' || out.back() == ',' || out.back() == ';');
      if (!before_sep && !after_sep) out.push_back(' ');
      i = j - 1;
      continue;
    }
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e || s.empty()) throw ParseError(where + ": bad number '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw ParseError(where + ": non-finite number");
  return v;
}

inline int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    throw ParseError(where + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses the line-oriented operator format:
///
///   op d=<int> ell=<int> n=<int> [k=<int>] [name=<label>]
///   term alpha=<a1,...,ad> matrix=<row;row;...>
///
/// `#` starts a comment; whitespace around `=`, `,` and `;` is ignored.
inline DifferentialOperator parse_operator(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  std::optional<int> d, ell, n, k;
  std::string name;
  bool header = false;
  DifferentialOperator::Terms terms;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string where = "line " + std::to_string(line_no);
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::string line = detail::squeeze_separators(detail::trim(raw));
    if (line.empty()) continue;
    std::istringstream tokens(line);
    std::string keyword;
    tokens >> keyword;
    std::map<std::string, std::string> kv;
    for (std::string tok; tokens >> tok;) {
      auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError(where + ": expected key=value, got '" + tok + "'");
      if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) {
        throw ParseError(where + ": duplicate key '" + tok.substr(0, eq) + "'");
      }
    }
    if (keyword == "op") {
      if (header) throw ParseError(where + ": duplicate op line");
      header = true;
      for (const auto& [key, value] : kv) {
        if (key == "d") d = detail::parse_int(value, where);
        else if (key == "ell") ell = detail::parse_int(value, where);
        else if (key == "n") n = detail::parse_int(value, where);
        else if (key == "k") k = detail::parse_int(value, where);
        else if (key == "name") name = value;
        else throw ParseError(where + ": unknown op key '" + key + "'");
      }
      if (!d || !ell || !n) throw ParseError(where + ": op line needs d, ell and n");
      if (*d < 1 || *ell < 1 || *n < 1) throw ParseError(where + ": d, ell, n must be positive");
      continue;
    }
    if (keyword != "term") throw ParseError(where + ": unknown line keyword '" + keyword + "'");
    if (!header) throw ParseError(where + ": term before op line");
    if (kv.size() != 2 || !kv.count("alpha") || !kv.count("matrix")) {
      throw ParseError(where + ": term needs exactly alpha= and matrix=");
    }
    std::vector<int> entries;
    for (const auto& e : detail::split(kv["alpha"], ',')) entries.push_back(detail::parse_int(e, where));
    if (static_cast<int>(entries.size()) != *d) throw ParseError(where + ": alpha has wrong length");
    for (int e : entries) {
      if (e < 0) throw ParseError(where + ": negative multi-index entry");
    }
    auto rows = detail::split(kv["matrix"], ';');
    std::vector<std::vector<double>> values;
    for (const auto& r : rows) {
      std::vector<double> row;
      for (const auto& c : detail::split(r, ',')) row.push_back(detail::parse_double(c, where));
      values.push_back(std::move(row));
    }
    if (static_cast<int>(values.size()) != *n) {
      throw DimensionError(where + ": matrix has " + std::to_string(values.size()) + " rows, expected n = " +
                           std::to_string(*n));
    }
    Matrix a(*n, *ell);
    for (int i = 0; i < *n; ++i) {
      if (static_cast<int>(values[i].size()) != *ell) {
        throw DimensionError(where + ": matrix row " + std::to_string(i) + " has " +
                             std::to_string(values[i].size()) + " entries, expected ell = " + std::to_string(*ell));
      }
      for (int j = 0; j < *ell; ++j) a(i, j) = values[i][j];
    }
    MultiIndex alpha(std::move(entries));
    if (terms.count(alpha)) throw ParseError(where + ": duplicate term for the same alpha");
    terms.emplace(std::move(alpha), std::move(a));
  }
  if (!header) throw ParseError("missing op line");
  if (terms.empty()) throw ParseError("empty term list");
  return DifferentialOperator(*d, *ell, *n, std::move(terms), name, k);
}

/// Canonical text form: terms in lexicographic alpha order, 17 significant
/// digits. parse_operator(render_operator(op)) reproduces op bit for bit.
inline std::string render_operator(const DifferentialOperator& op) {
  std::ostringstream os;
  os << "op d=" << op.dim() << " ell=" << op.channels() << " n=" << op.equations();
  if (!op.name().empty()) os << " name=" << op.name();
  os << "\n";
  for (const auto& [alpha, a] : op.terms()) {
    os << "term alpha=";
    for (int i = 0; i < alpha.dim(); ++i) os << (i ? "," : "") << alpha[i];
    os << " matrix=";
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      if (r) os << ';';
      for (Eigen::Index c = 0; c < a.cols(); ++c) os << (c ? "," : "") << detail::format_double(a(r, c));
    }
    os << "\n";
  }
  return os.str();
}

/// Equal shapes and bit-identical coefficients; names are ignored.
inline bool same_coefficients(const DifferentialOperator& a, const DifferentialOperator& b) {
  if (a.dim() != b.dim() || a.channels() != b.channels() || a.equations() != b.equations() ||
      a.order() != b.order() || a.terms().size() != b.terms().size()) {
    return false;
  }
  auto ia = a.terms().begin();
  auto ib = b.terms().begin();
  for (; ia != a.terms().end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    if ((ia->second.array() != ib->second.array()).any()) return false;
  }
  return true;
}

inline bool operator==(const DifferentialOperator& a, const DifferentialOperator& b) {
  return a.name() == b.name() && same_coefficients(a, b);
}

}  // namespace wclab
