#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "support.hpp"
#include "wclab/field.hpp"
#include "wclab/spectral.hpp"

using namespace wclab;
using wclab::testing::random_vector;

namespace {

PeriodicField random_field(PeriodicGrid g, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  PeriodicField f(g, channels);
  for (auto& v : f.mutable_values()) v = n(rng);
  return f;
}

double max_abs_diff(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(Grid, RejectsEvenOrSmall) {
  EXPECT_THROW(PeriodicGrid(2, 4), DimensionError);
  EXPECT_THROW(PeriodicGrid(2, 1), DimensionError);
  EXPECT_THROW(PeriodicGrid(0, 5), DimensionError);
  EXPECT_EQ(PeriodicGrid(3, 5).points(), 125u);
}

TEST(Grid, IndexLinearRoundTrip) {
  PeriodicGrid g(3, 5);
  for (std::size_t p = 0; p < g.points(); ++p) EXPECT_EQ(g.linear(g.index(p)), p);
  EXPECT_EQ(g.linear({-1, 0, 0}), g.linear({4, 0, 0}));
}

TEST(Grid, FrequenciesAndConjugates) {
  PeriodicGrid g(2, 7);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector m = g.frequency(p);
    EXPECT_LE(m.cwiseAbs().maxCoeff(), g.max_frequency());
    EXPECT_EQ(g.frequency(g.conjugate_slot(p)), -m);
    EXPECT_EQ(Vector(g.frequencies().col(static_cast<Eigen::Index>(p))), m);
    EXPECT_EQ(g.frequency_norms2()[p], m.squaredNorm());
  }
  EXPECT_EQ(g.conjugate_slot(0), 0u);
}

TEST(Field, TransformRoundTrip) {
  for (auto [d, n] : {std::pair{1, 9}, std::pair{2, 15}, std::pair{3, 7}}) {
    PeriodicGrid g(d, n);
    auto f = random_field(g, 3, 1);
    auto back = PeriodicField::from_spectrum(g, 3, f.spectrum());
    EXPECT_LE(max_abs_diff(f, back), 1e-12 * linf_norm(f));
  }
}

TEST(Field, PlancherelAndHermitian) {
  PeriodicGrid g(2, 15);
  auto f = random_field(g, 2, 2);
  double spec2 = 0.0;
  for (auto z : f.spectrum()) spec2 += std::norm(z);
  EXPECT_NEAR(std::sqrt(spec2), l2_norm(f), 1e-12 * l2_norm(f));
  for (std::size_t p = 0; p < g.points(); ++p) {
    CVector a = f.coefficient(p);
    CVector b = f.coefficient(g.conjugate_slot(p));
    EXPECT_LE((a - b.conjugate()).norm(), 1e-12);
  }
}

TEST(Field, PureModeCoefficient) {
  PeriodicGrid g(2, 9);
  PeriodicField f(g, 1);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector x = g.coordinates(p);
    f.set(p, 0, std::cos(2 * std::numbers::pi * (2 * x(0) - x(1))));
  }
  const std::size_t slot = g.linear({2, -1});
  EXPECT_NEAR(f.coefficient(slot)(0).real(), 0.5, 1e-14);
  EXPECT_NEAR(f.coefficient(g.conjugate_slot(slot))(0).real(), 0.5, 1e-14);
  EXPECT_NEAR(std::abs(f.coefficient(0)(0)), 0.0, 1e-14);
}

TEST(Field, MutationInvalidatesSpectrum) {
  PeriodicGrid g(2, 5);
  PeriodicField f(g, 1);
  EXPECT_EQ(f.coefficient(0)(0), Complex(0.0));
  f.set(3, 0, 25.0);
  EXPECT_NEAR(f.coefficient(0)(0).real(), 1.0, 1e-15);
  f.mutable_values()[3] = 50.0;
  EXPECT_NEAR(f.coefficient(0)(0).real(), 2.0, 1e-15);
  f.shift(vec({1.0}));
  EXPECT_NEAR(f.coefficient(0)(0).real(), 3.0, 1e-15);
  f *= 2.0;
  EXPECT_NEAR(f.coefficient(0)(0).real(), 6.0, 1e-15);
  f.set_sample(0, vec({25.0}));
  EXPECT_NEAR(f.mean()(0), f.coefficient(0)(0).real(), 1e-14);
}

TEST(Field, ShapeChecks) {
  PeriodicGrid g(2, 5);
  EXPECT_THROW(PeriodicField(g, 0), DimensionError);
  EXPECT_THROW(PeriodicField(g, 1, std::vector<double>(3)), DimensionError);
  PeriodicField a(g, 2), b(g, 3), c(PeriodicGrid(2, 7), 2);
  EXPECT_THROW(a += b, DimensionError);
  EXPECT_THROW(a -= c, DimensionError);
  EXPECT_THROW(a.shift(vec({1.0})), DimensionError);
  EXPECT_THROW(dist_to_states(a, vec({1}), vec({0, 0})), DimensionError);
}

TEST(Laminate, TwoValuedWithSnappedFraction) {
  PeriodicGrid g(2, 15);
  Vector l = vec({1, 2}), m = vec({-1, 0});
  auto f = laminate_field(g, l, m, {1, 2}, 0.4, 2);
  std::size_t count_l = 0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    bool is_l = f.sample(p) == l, is_m = f.sample(p) == m;
    EXPECT_TRUE(is_l || is_m);
    count_l += is_l;
  }
  EXPECT_NEAR(static_cast<double>(count_l) / g.points(), 0.4, 1.0 / 15);
  EXPECT_EQ(dist_to_states(f, l, m), 0.0);
}

TEST(Laminate, NearlyFullDutyCycle) {
  const int n = 15;
  PeriodicGrid g(2, n);
  Vector l = vec({1}), m = vec({0});
  auto f = laminate_field(g, l, m, {1, 0}, 1.0 - 1.0 / (2 * n));
  // every phase index lies below (N - 1/2), so at most one slab could be mu
  EXPECT_GE(f.mean()(0), 1.0 - 1.0 / n);
  EXPECT_EQ(dist_to_states(f, l, m), 0.0);
}

TEST(Laminate, EqualStatesGiveConstant) {
  PeriodicGrid g(2, 9);
  Vector l = vec({0.5, -2});
  auto f = laminate_field(g, l, l, {3, -1}, 0.3);
  EXPECT_EQ(max_abs_diff(f, PeriodicField::constant(g, l)), 0.0);
}

TEST(Laminate, RankOneCurlJumpIsExactlyCurlFree) {
  PeriodicGrid g(2, 63);
  FrequencyKernelCache cache(catalog_curl(2, 2), g);
  std::mt19937_64 rng(3);
  for (std::vector<int> q : {std::vector<int>{1, 0}, {0, 1}, {1, 1}, {1, -1}}) {
    Vector qv(2);
    qv << q[0], q[1];
    Vector a = random_vector(rng, 2);
    Matrix jump = a * qv.transpose() / qv.norm();
    Vector j = wclab::testing::flatten(jump);
    auto f = laminate_field(g, j, Vector::Zero(4), q, 0.5, 2);
    EXPECT_LE(residual_negative_norm(cache, f), 1e-10 * j.norm());
  }
}

TEST(Laminate, Errors) {
  PeriodicGrid g(2, 5);
  Vector l = vec({1}), m = vec({0});
  EXPECT_THROW(laminate_field(g, l, m, {0, 0}, 0.5), DomainError);
  EXPECT_THROW(laminate_field(g, l, m, {1, 0}, 0.0), DomainError);
  EXPECT_THROW(laminate_field(g, l, m, {1, 0}, 1.0), DomainError);
  EXPECT_THROW(laminate_field(g, l, m, {1}, 0.5), DimensionError);
  EXPECT_THROW(laminate_field(g, l, vec({0, 0}), {1, 0}, 0.5), DimensionError);
}

TEST(Norms, DistToStatesExamples) {
  PeriodicGrid g(2, 9);
  Vector l = vec({1, 0}), m = vec({-1, 2});
  EXPECT_NEAR(dist_to_states(PeriodicField::constant(g, 0.5 * (l + m)), l, m), 0.5 * (l - m).norm(), 1e-14);

  // lambda everywhere except a fraction at mu + e
  auto f = PeriodicField::constant(g, l);
  Vector e = vec({0.6, 0.8});
  std::size_t spiked = 0;
  for (std::size_t p = 0; p < g.points(); p += 7, ++spiked) f.set_sample(p, m + e);
  double brute = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector v = f.sample(p);
    brute += std::min((v - l).norm(), (v - m).norm());
  }
  brute /= g.points();
  EXPECT_NEAR(dist_to_states(f, l, m), brute, 1e-15);
  EXPECT_NEAR(brute, static_cast<double>(spiked) / g.points(), 1e-15);  // |e| = 1 is the nearer distance
}

TEST(Norms, L1L2Linf) {
  PeriodicGrid g(1, 5);
  PeriodicField f(g, 2, {3, 4, 0, 0, 0, 0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(l1_norm(f), 1.0);
  EXPECT_DOUBLE_EQ(l2_norm(f), std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(linf_norm(f), 5.0);
  EXPECT_DOUBLE_EQ(l1_distance_to(f, vec({0, 0})), 1.0);
}

TEST(Norms, WeakL1Examples) {
  PeriodicGrid g(2, 7);
  EXPECT_EQ(weak_l1_quasinorm(PeriodicField(g, 2)), 0.0);
  EXPECT_DOUBLE_EQ(weak_l1_quasinorm(PeriodicField::constant(g, vec({3, 4}))), 5.0);
  PeriodicField spike(g, 1);
  spike.set(10, 0, -49.0);
  EXPECT_DOUBLE_EQ(weak_l1_quasinorm(spike), 1.0);
}

TEST(Norms, WeakL1MatchesThresholdSweepAndChebyshev) {
  PeriodicGrid g(2, 9);
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto f = random_field(g, 2, s);
    auto norms = pointwise_norms(f);
    double brute = 0.0;
    for (double t : norms) {
      // sup over t' < t approaches t * |{|f| >= t}|
      double count = 0.0;
      for (double v : norms) count += v >= t;
      brute = std::max(brute, t * count / norms.size());
    }
    EXPECT_NEAR(weak_l1_quasinorm(f), brute, 1e-14);
    EXPECT_LE(weak_l1_quasinorm(f), l1_norm(f));
  }
}

TEST(Norms, SobolevExamples) {
  PeriodicGrid g(2, 15);
  EXPECT_NEAR(sobolev_norm(PeriodicField::constant(g, vec({3, -4})), 2.5), 5.0, 1e-13);
  auto f = random_field(g, 3, 4);
  EXPECT_NEAR(sobolev_norm(f, 0.0), l2_norm(f), 1e-12 * l2_norm(f));

  PeriodicField mode(g, 1);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector x = g.coordinates(p);
    mode.set(p, 0, std::sin(2 * std::numbers::pi * (3 * x(0) + x(1))));
  }
  for (double s : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(sobolev_norm(mode, s) * sobolev_norm(mode, -s), std::pow(l2_norm(mode), 2), 1e-12);
  }
}

TEST(Norms, ConvergenceInMeasureMetric) {
  PeriodicGrid g(2, 9);
  EXPECT_EQ(convergence_in_measure_metric(PeriodicField(g, 1)), 0.0);
  EXPECT_DOUBLE_EQ(convergence_in_measure_metric(PeriodicField::constant(g, vec({3, 4}))), 1.0);
  PeriodicField f(g, 1);
  std::size_t marked = 0;
  for (std::size_t p = 0; p < g.points(); p += 4, ++marked) f.set(p, 0, 0.5);
  EXPECT_NEAR(convergence_in_measure_metric(f), 0.5 * marked / g.points(), 1e-15);
}

TEST(EquiIntegrability, ProfileExamples) {
  PeriodicGrid g(2, 9);
  Vector l = vec({1, 0}), m = vec({0, -2});
  std::vector<PeriodicField> lams;
  for (int j = 1; j <= 4; ++j) lams.push_back(laminate_field(g, l, m, {1, j}, 0.5));
  const double t0 = 2 * std::max(l.norm(), m.norm());
  auto prof = equiintegrability_profile(lams, {t0, 2 * t0});
  for (const auto& row : prof)
    for (double x : row) EXPECT_EQ(x, 0.0);

  std::vector<PeriodicField> spikes;
  std::vector<double> ts{1.0, 2.0, 4.0, 8.0};
  for (int j = 1; j <= 64; j *= 2) {
    PeriodicField f(g, 1);
    f.set(0, 0, j);
    spikes.push_back(f);
  }
  auto sp = equiintegrability_profile(spikes, ts);
  for (const auto& row : sp)
    for (std::size_t t = 1; t < row.size(); ++t) EXPECT_LE(row[t], row[t - 1]);
  EXPECT_NEAR(sp.back()[3], 64.0 / g.points(), 1e-15);
  EXPECT_FALSE(equiintegrability_check(spikes, ts).equiintegrable);
  EXPECT_TRUE(equiintegrability_check(lams, {0.5, t0}).equiintegrable);
}

TEST(EquiIntegrability, ShapeMismatch) {
  std::vector<PeriodicField> fs{PeriodicField(PeriodicGrid(2, 5), 1), PeriodicField(PeriodicGrid(2, 7), 1)};
  EXPECT_THROW(equiintegrability_profile(fs, {1.0}), DimensionError);
}

TEST(Sandwich, HoldsPerSample) {
  PeriodicGrid g(2, 15);
  Vector l = vec({1, -1}), m = vec({0.5, 2});
  const double t0 = 2 * std::max(l.norm(), m.norm());
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto f = laminate_field(g, l, m, {1, static_cast<int>(s)}, 0.5);
    f += 4.0 * random_field(g, 2, s);
    for (double t : {t0, 1.5 * t0, 3 * t0}) {
      auto v = level_set_sandwich(f, l, m, t);
      EXPECT_EQ(v.inner, 0u);
      EXPECT_EQ(v.outer, 0u);
    }
  }
  EXPECT_THROW(level_set_sandwich(PeriodicField(g, 2), l, m, 0.5 * t0), DomainError);
}

TEST(Vitali, BoundedFamiliesAgree) {
  // v_j = laminate + r_j with |r_j| <= 1/j on a set of growing measure: both
  // the L1 distance and the in-measure metric of the distance field go to 0
  PeriodicGrid g(2, 15);
  Vector l = vec({1, 0}), m = vec({0, 1});
  std::vector<double> l1, meas;
  for (int j = 1; j <= 32; j *= 2) {
    auto f = laminate_field(g, l, m, {1, 0}, 0.5);
    f += (0.1 / j) * random_field(g, 2, static_cast<std::uint64_t>(j));
    l1.push_back(dist_to_states(f, l, m));
    meas.push_back(convergence_in_measure_metric(distance_field(f, l, m)));
  }
  for (std::size_t i = 1; i < l1.size(); ++i) {
    EXPECT_LT(l1[i], l1[i - 1]);
    EXPECT_LT(meas[i], meas[i - 1]);
  }
  EXPECT_LT(l1.back(), 0.05 * l1.front());
  EXPECT_LT(meas.back(), 0.05 * meas.front());
  // with values below 1 the two metrics coincide
  for (std::size_t i = 0; i < l1.size(); ++i) EXPECT_NEAR(l1[i], meas[i], 1e-15);
}
