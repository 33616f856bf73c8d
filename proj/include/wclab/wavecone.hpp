#pragma once

// Wave-cone membership by minimizing |A(xi) v| over the unit sphere.
//
// The search is deterministic: a fixed coarse lattice on one hemisphere
// (|A(-xi) v| = |A(xi) v| for the principal symbol), then Nelder-Mead polish
// on a tangent-plane chart around the best few lattice points.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "wclab/error.hpp"
#include "wclab/operator.hpp"

namespace wclab {

struct SphereSearchResult {
  double gap = 0.0;
  Vector argmin_xi;
  int grid_points = 0;
  int refinement_iterations = 0;
  double certified_resolution = 0.0;
};

struct SphereSearchOptions {
  int simplex_iterations = 200;
  double simplex_diameter = 1e-12;
  int polish_starts = 4;
};

namespace detail {

inline std::vector<double> halton_primes() { return {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53}; }

inline double radical_inverse(long long i, double base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<long long>(base));
    i /= static_cast<long long>(base);
  }
  return r;
}

// Upper-hemisphere direction: first nonzero coordinate positive.
inline void to_hemisphere(Vector& xi) {
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (xi[i] != 0.0) {
      if (xi[i] < 0.0) xi = -xi;
      return;
    }
  }
}

struct SphereLattice {
  std::vector<Vector> points;
  double spacing = 0.0;
};

inline SphereLattice hemisphere_lattice(int d) {
  SphereLattice lat;
  if (d == 1) {
    lat.points.push_back(Vector::Ones(1));
    lat.spacing = 0.0;
    return lat;
  }
  if (d == 2) {
    const int count = 4096;
    for (int i = 0; i < count; ++i) {
      double t = std::numbers::pi * i / count;
      Vector xi(2);
      xi << std::cos(t), std::sin(t);
      lat.points.push_back(xi);
    }
    lat.spacing = std::numbers::pi / count;
    return lat;
  }
  if (d == 3) {
    // Fibonacci lattice restricted to z > 0
    const int count = 8192;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = (i + 0.5) / count;
      double r = std::sqrt(1.0 - z * z);
      double phi = golden * i;
      Vector xi(3);
      xi << r * std::cos(phi), r * std::sin(phi), z;
      lat.points.push_back(xi);
    }
    lat.spacing = std::sqrt(2.0 * std::numbers::pi / count);
    return lat;
  }
  // Halton points accepted inside the unit ball project to uniform directions.
  const auto primes = halton_primes();
  if (d > static_cast<int>(primes.size())) throw DimensionError("sphere search supports d <= 16");
  const int count = 1 << 13;
  for (long long i = 1; static_cast<int>(lat.points.size()) < count; ++i) {
    Vector x(d);
    for (int a = 0; a < d; ++a) x[a] = 2.0 * radical_inverse(i, primes[static_cast<std::size_t>(a)]) - 1.0;
    double r = x.norm();
    if (r > 1.0 || r < 1e-3) continue;
    x /= r;
    to_hemisphere(x);
    lat.points.push_back(x);
  }
  // equal-area cell diameter on a hemisphere of S^{d-1}
  const double area = std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
  lat.spacing = std::pow(area / count, 1.0 / (d - 1));
  return lat;
}

inline const SphereLattice& cached_lattice(int d) {
  // lattices for the dimensions used in practice are built once
  static const std::vector<SphereLattice> table = [] {
    std::vector<SphereLattice> t;
    for (int dd = 1; dd <= 4; ++dd) t.push_back(hemisphere_lattice(dd));
    return t;
  }();
  if (d >= 1 && d <= 4) return table[static_cast<std::size_t>(d - 1)];
  thread_local SphereLattice other;
  thread_local int other_d = 0;
  if (other_d != d) {
    other = hemisphere_lattice(d);
    other_d = d;
  }
  return other;
}

// Orthonormal basis of the tangent space at the unit vector xi (d x (d-1)).
inline Matrix tangent_basis(const Vector& xi) {
  const Eigen::Index d = xi.size();
  Eigen::HouseholderQR<Matrix> qr(xi);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - 1);
}

// Nelder-Mead on R^dim; returns iterations used.
template <typename F>
int nelder_mead(F&& f, std::vector<Vector>& simplex, std::vector<double>& values, int max_iter, double min_diameter) {
  const std::size_t np = simplex.size();
  const Eigen::Index dim = simplex[0].size();
  std::vector<std::size_t> order(np);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double diameter = 0.0;
    for (std::size_t i = 1; i < np; ++i) {
      diameter = std::max(diameter, (simplex[order[i]] - simplex[order[0]]).norm());
    }
    if (diameter < min_diameter) break;
    const std::size_t worst = order[np - 1];
    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i + 1 < np; ++i) centroid += simplex[order[i]];
    centroid /= static_cast<double>(np - 1);
    const double best = values[order[0]];
    const double second_worst = values[order[np - 2]];
    const double worst_value = values[worst];

    Vector xr = centroid + (centroid - simplex[worst]);
    double fr = f(xr);
    if (fr < best) {
      Vector xe = centroid + 2.0 * (centroid - simplex[worst]);
      double fe = f(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < second_worst) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    Vector xc = fr < worst_value ? Vector(centroid + 0.5 * (xr - centroid))
                                 : Vector(centroid + 0.5 * (simplex[worst] - centroid));
    double fc = f(xc);
    if (fc < std::min(fr, worst_value)) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    const Vector& xb = simplex[order[0]];
    for (std::size_t i = 1; i < np; ++i) {
      std::size_t j = order[i];
      simplex[j] = xb + 0.5 * (simplex[j] - xb);
      values[j] = f(simplex[j]);
    }
  }
  return iter;
}

inline Vector checked_state(const DifferentialOperator& op, const Vector& v) {
  if (v.size() != op.channels()) {
    std::ostringstream os;
    os << "state vector has length " << v.size() << ", operator acts on " << op.channels() << " channels";
    throw DimensionError(os.str());
  }
  if (!v.allFinite()) throw DomainError("state vector is not finite");
  if (v.norm() == 0.0) throw DomainError("zero state vector (equal states)");
  return v;
}

}  // namespace detail

/// Minimizes |principal_symbol(op, xi) v|_2 over |xi| = 1.
inline SphereSearchResult symbol_gap(const DifferentialOperator& op, const Vector& v,
                                     const SphereSearchOptions& options = {}) {
  detail::checked_state(op, v);
  const int d = op.dim();
  const auto& lattice = detail::cached_lattice(d);

  auto objective = [&](const Vector& xi) { return (principal_symbol(op, xi) * v).norm(); };

  std::vector<double> values(lattice.points.size());
  for (std::size_t i = 0; i < lattice.points.size(); ++i) values[i] = objective(lattice.points[i]);

  SphereSearchResult result;
  result.grid_points = static_cast<int>(lattice.points.size());
  result.certified_resolution = lattice.spacing;

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  result.argmin_xi = lattice.points[order[0]];
  result.gap = values[order[0]];
  if (d == 1) return result;

  // Starting points: best lattice points that are pairwise separated.
  std::vector<std::size_t> starts;
  const double separation = std::cos(3.0 * lattice.spacing);
  for (std::size_t idx : order) {
    if (static_cast<int>(starts.size()) >= options.polish_starts) break;
    bool far = std::all_of(starts.begin(), starts.end(), [&](std::size_t s) {
      return std::abs(lattice.points[s].dot(lattice.points[idx])) < separation;
    });
    if (far) starts.push_back(idx);
  }

  for (std::size_t s : starts) {
    Vector center = lattice.points[s];
    double step = lattice.spacing;
    // second pass restarts with a small simplex at the first pass optimum
    for (int pass = 0; pass < 2; ++pass) {
      const Matrix basis = detail::tangent_basis(center);
      auto chart = [&](const Vector& y) -> Vector {
        Vector xi = center + basis * y;
        return xi / xi.norm();
      };
      auto f = [&](const Vector& y) { return objective(chart(y)); };
      std::vector<Vector> simplex;
      std::vector<double> fv;
      simplex.push_back(Vector::Zero(d - 1));
      for (int i = 0; i < d - 1; ++i) simplex.push_back(step * Vector::Unit(d - 1, i));
      for (const auto& y : simplex) fv.push_back(f(y));
      result.refinement_iterations +=
          detail::nelder_mead(f, simplex, fv, options.simplex_iterations, options.simplex_diameter);
      std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
      center = chart(simplex[best]);
      step = std::max(1e-3 * step, 1e-9);
    }
    center /= center.norm();
    double g = objective(center);
    if (g < result.gap) {
      result.gap = g;
      result.argmin_xi = center;
    }
  }
  detail::to_hemisphere(result.argmin_xi);
  result.gap = objective(result.argmin_xi);
  return result;
}

/// Largest operator norm of the principal symbol over the coarse lattice.
inline double symbol_scale(const DifferentialOperator& op) {
  const auto& lattice = detail::cached_lattice(op.dim());
  double scale = 0.0;
  for (const auto& xi : lattice.points) {
    Eigen::JacobiSVD<Matrix> svd(principal_symbol(op, xi));
    scale = std::max(scale, svd.singularValues()(0));
  }
  return scale;
}

struct MembershipResult {
  bool member = false;
  double threshold = 0.0;
  SphereSearchResult search;
};

inline constexpr double default_membership_tol = 1e-6;

/// v is in the wave cone iff gap <= tol * |v| * symbol_scale(op).
inline MembershipResult in_wave_cone(const DifferentialOperator& op, const Vector& v,
                                     double tol = default_membership_tol) {
  if (!(tol > 0.0)) throw DomainError("membership tolerance must be positive");
  MembershipResult r;
  r.search = symbol_gap(op, v);
  r.threshold = tol * v.norm() * symbol_scale(op);
  r.member = r.search.gap <= r.threshold;
  return r;
}

/// The constant c with |(2 pi i)^k A(xi) lambda| >= c |xi|^k.
inline double ellipticity_constant(const DifferentialOperator& op, const Vector& lambda,
                                   double tol = default_membership_tol) {
  auto m = in_wave_cone(op, lambda, tol);
  if (m.member) throw DomainError("state difference lies in wave cone");
  return std::pow(2.0 * std::numbers::pi, op.order()) * m.search.gap;
}

}  // namespace wclab
