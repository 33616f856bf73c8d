#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "support.hpp"
#include "wclab/operator.hpp"

using namespace wclab;
using wclab::testing::flatten;
using wclab::testing::random_vector;

namespace {

const char* kDivText = R"(# row-wise divergence of 2x2 matrix fields
op d=2 ell=4 n=2
term alpha=1,0 matrix=1,0,0,0; 0,0,1,0
term alpha = 0 , 1  matrix = 0,1,0,0 ; 0,0,0,1
)";

}  // namespace

TEST(MultiIndex, OrderIsSumOfEntries) {
  MultiIndex a({2, 0, 3});
  EXPECT_EQ(a.order(), 5);
  EXPECT_EQ(a.dim(), 3);
  EXPECT_EQ((a + MultiIndex::unit(3, 1)).entries(), (std::vector<int>{2, 1, 3}));
}

TEST(MultiIndex, RejectsNegativeAndEmpty) {
  EXPECT_THROW(MultiIndex({1, -1}), DomainError);
  EXPECT_THROW(MultiIndex(std::vector<int>{}), DimensionError);
  EXPECT_THROW(MultiIndex({1}) + MultiIndex({1, 0}), DimensionError);
}

TEST(MultiIndex, Monomial) {
  Vector xi(2);
  xi << 3.0, -2.0;
  EXPECT_DOUBLE_EQ(MultiIndex({2, 1}).monomial<double>(xi), -18.0);
  EXPECT_DOUBLE_EQ(MultiIndex({0, 0}).monomial<double>(xi), 1.0);
}

TEST(Parse, DivergenceExampleIsHomogeneous) {
  auto op = parse_operator(kDivText);
  EXPECT_EQ(op.dim(), 2);
  EXPECT_EQ(op.channels(), 4);
  EXPECT_EQ(op.equations(), 2);
  EXPECT_EQ(op.order(), 1);
  EXPECT_TRUE(op.homogeneous());
  EXPECT_TRUE(same_coefficients(op, catalog_div(2, 2)));
}

TEST(Parse, InconsistentRowCountsRejected) {
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nterm alpha=1,0 matrix=1,0,0,0\n"), DimensionError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nterm alpha=1,0 matrix=1,0,0,0;0,0,1\n"), DimensionError);
}

TEST(Parse, MalformedInputs) {
  EXPECT_THROW(parse_operator(""), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\n"), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4\nterm alpha=1,0 matrix=1,0,0,0;0,0,1,0\n"), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nterm alpha=1 matrix=1,0,0,0;0,0,1,0\n"), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nterm alpha=1,0 matrix=1,x,0,0;0,0,1,0\n"), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nbogus\n"), ParseError);
  EXPECT_THROW(parse_operator("op d=2 ell=4 n=2\nterm alpha=1,0 matrix=0,0,0,0;0,0,0,0\n"), ParseError);
}

TEST(Parse, DeclaredOrderMustMatch) {
  EXPECT_THROW(parse_operator("op d=1 ell=1 n=1 k=2\nterm alpha=1 matrix=1\n"), ParseError);
  auto op = parse_operator("op d=1 ell=1 n=1 k=1 name=ddx\nterm alpha=1 matrix=1\n");
  EXPECT_EQ(op.order(), 1);
  EXPECT_EQ(op.name(), "ddx");
}

TEST(Parse, CurlCurlExampleMatchesCatalog) {
  auto op = parse_operator(
      "op d=2 ell=3 n=1\n"
      "term alpha=0,2 matrix=1,0,0\n"
      "term alpha=1,1 matrix=0,-2,0\n"
      "term alpha=2,0 matrix=0,0,1\n");
  EXPECT_EQ(op.order(), 2);
  EXPECT_TRUE(same_coefficients(op, catalog_curlcurl(2)));
}

TEST(Render, RoundTripsCatalogBitExactly) {
  for (const auto& op : {catalog_curl(2, 2), catalog_curl(3, 3), catalog_div(2, 2), catalog_div(3, 3),
                         catalog_curlcurl(2), catalog_curlcurl(3)}) {
    auto text = render_operator(op);
    auto back = parse_operator(text);
    EXPECT_TRUE(back == op) << text;
    EXPECT_EQ(render_operator(back), text);
  }
}

TEST(Render, SeventeenDigitsRoundTrip) {
  DifferentialOperator::Terms t;
  t[MultiIndex({1})] = Matrix::Constant(1, 1, 0.1);
  t[MultiIndex({0})] = Matrix::Constant(1, 1, 1.0 / 3.0);
  DifferentialOperator op(1, 1, 1, t);
  auto back = parse_operator(render_operator(op));
  EXPECT_EQ(back.terms().at(MultiIndex({0}))(0, 0), 1.0 / 3.0);
  EXPECT_FALSE(back.homogeneous());
}

TEST(PrincipalSymbol, CurlHandExample) {
  Vector xi(2);
  xi << 0.0, 1.0;
  Matrix a_e1 = Matrix::Zero(2, 2);
  a_e1(0, 0) = 1.0;  // a = (1, 0), v = a (x) e1
  Vector out = principal_symbol(catalog_curl(2, 2), xi) * flatten(a_e1);
  EXPECT_DOUBLE_EQ(out(0), 1.0);
  EXPECT_DOUBLE_EQ(out(1), 0.0);
}

TEST(PrincipalSymbol, VanishesAtZero) {
  for (const auto& op : {catalog_curl(2, 2), catalog_div(3, 3), catalog_curlcurl(3)}) {
    EXPECT_EQ(principal_symbol(op, Vector::Zero(op.dim())).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(PrincipalSymbol, DimensionMismatch) {
  EXPECT_THROW(principal_symbol(catalog_curl(2, 2), Vector::Zero(3)), DimensionError);
  EXPECT_THROW(full_symbol(catalog_curl(2, 2), Vector::Zero(1)), DimensionError);
}

TEST(PrincipalSymbol, DegreeKHomogeneity) {
  std::mt19937_64 rng(7);
  for (const auto& op : {catalog_curl(2, 2), catalog_div(3, 3), catalog_curlcurl(2), catalog_curlcurl(3)}) {
    for (int i = 0; i < 100; ++i) {
      Vector xi = random_vector(rng, op.dim());
      Matrix base = principal_symbol(op, xi);
      for (double t : {0.5, 2.0, 3.0}) {
        Matrix scaled = principal_symbol(op, t * xi);
        Matrix expect = std::pow(t, op.order()) * base;
        EXPECT_LE((scaled - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
      }
    }
  }
}

TEST(PrincipalSymbol, LinearInState) {
  std::mt19937_64 rng(8);
  auto op = catalog_curlcurl(3);
  for (int i = 0; i < 50; ++i) {
    Matrix s = principal_symbol(op, random_vector(rng, 3));
    Vector v = random_vector(rng, 6), w = random_vector(rng, 6);
    double a = 1.7, b = -0.3;
    EXPECT_LE((s * (a * v + b * w) - (a * s * v + b * s * w)).norm(), 1e-12 * (1.0 + s.norm()));
  }
}

TEST(PrincipalSymbol, GradientsAreCurlFree) {
  std::mt19937_64 rng(9);
  for (int d : {2, 3}) {
    auto op = catalog_curl(3, d);
    for (int i = 0; i < 100; ++i) {
      Vector a = random_vector(rng, 3), q = random_vector(rng, d);
      Matrix grad = a * q.transpose();
      EXPECT_LE((principal_symbol(op, q) * flatten(grad)).norm(), 1e-12 * grad.norm() * q.norm());
    }
  }
}

TEST(PrincipalSymbol, CurlMatchesFiniteDifferencesOfPlaneWave) {
  // v(x) = B sin(2 pi q.x): A v = 2 pi cos(2 pi q.x) * principal_symbol(q) B.
  std::mt19937_64 rng(10);
  auto op = catalog_curl(2, 2);
  Vector q = random_vector(rng, 2);
  Matrix b = Matrix::Random(2, 2);
  Vector x = random_vector(rng, 2);
  const double h = 1e-5;
  auto v = [&](const Vector& y) { return Vector(flatten(b) * std::sin(2 * std::numbers::pi * q.dot(y))); };
  Vector av = Vector::Zero(2);
  for (const auto& [alpha, coeff] : op.terms()) {
    int axis = alpha[0] == 1 ? 0 : 1;
    Vector e = Vector::Zero(2);
    e(axis) = h;
    av += coeff * (v(x + e) - v(x - e)) / (2 * h);
  }
  Vector expect = 2 * std::numbers::pi * std::cos(2 * std::numbers::pi * q.dot(x)) * principal_symbol(op, q) * flatten(b);
  EXPECT_LE((av - expect).norm(), 1e-6 * (1.0 + expect.norm()));
}

TEST(FullSymbol, HomogeneousEqualsScaledPrincipal) {
  std::mt19937_64 rng(11);
  for (const auto& op : {catalog_curl(2, 2), catalog_curlcurl(2), catalog_curlcurl(3)}) {
    const Complex scale = std::pow(Complex(0.0, 2.0 * std::numbers::pi), op.order());
    for (int i = 0; i < 20; ++i) {
      Vector m = random_vector(rng, op.dim());
      CMatrix expect = scale * principal_symbol(op, m).cast<Complex>();
      EXPECT_LE((full_symbol(op, m) - expect).norm(), 1e-12 * (1.0 + expect.norm()));
    }
  }
}

TEST(FullSymbol, ZeroOrderTermOnly) {
  DifferentialOperator::Terms t;
  Matrix a0(2, 2);
  a0 << 1, 2, 3, 4;
  t[MultiIndex({0, 0})] = a0;
  DifferentialOperator op(2, 2, 2, t);
  Vector m(2);
  m << 5.0, -7.0;
  EXPECT_EQ(full_symbol(op, m), a0.cast<Complex>());
  EXPECT_EQ(op.order(), 0);
}

TEST(FullSymbol, ConjugateSymmetryIsExact) {
  DifferentialOperator::Terms t;
  t[MultiIndex({0, 0})] = Matrix::Constant(1, 2, 0.7);
  t[MultiIndex({1, 0})] = Matrix::Constant(1, 2, -1.3);
  t[MultiIndex({1, 2})] = Matrix::Constant(1, 2, 0.25);
  t[MultiIndex({2, 2})] = Matrix::Constant(1, 2, 2.0);
  DifferentialOperator op(2, 2, 1, t);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    Vector m = random_vector(rng, 2);
    EXPECT_EQ(full_symbol(op, -m), full_symbol(op, m).conjugate());
  }
}

TEST(FullSymbol, PartsAddUp) {
  DifferentialOperator::Terms t;
  t[MultiIndex({0, 1})] = Matrix::Constant(1, 1, 0.5);
  t[MultiIndex({2, 0})] = Matrix::Constant(1, 1, 1.0);
  DifferentialOperator op(2, 1, 1, t);
  Vector m(2);
  m << 1.0, 2.0;
  CMatrix sum = full_symbol(op, m, SymbolPart::principal) + full_symbol(op, m, SymbolPart::lower);
  EXPECT_LE((sum - full_symbol(op, m)).norm(), 1e-14 * full_symbol(op, m).norm());
}

TEST(Catalog, Shapes) {
  auto curl = catalog("curl:2x2");
  EXPECT_EQ(curl.order(), 1);
  EXPECT_EQ(curl.channels(), 4);
  EXPECT_EQ(curl.equations(), 2);
  auto div = catalog("div:2x2");
  EXPECT_EQ(div.channels(), 4);
  EXPECT_EQ(div.equations(), 2);
  auto cc = catalog("curlcurl:2");
  EXPECT_EQ(cc.order(), 2);
  EXPECT_EQ(cc.channels(), 3);
  EXPECT_EQ(cc.equations(), 1);
  auto cc3 = catalog("curlcurl:3");
  EXPECT_EQ(cc3.channels(), 6);
  EXPECT_EQ(cc3.equations(), 6);
  EXPECT_EQ(catalog("curl:3x3").equations(), 9);
}

TEST(Catalog, CurlRowsAreRowWise) {
  // row i: d2 v_{i1} - d1 v_{i2}
  auto op = catalog_curl(2, 2);
  const auto& d1 = op.terms().at(MultiIndex({1, 0}));
  const auto& d2 = op.terms().at(MultiIndex({0, 1}));
  Matrix e1(2, 4), e2(2, 4);
  e1 << 0, -1, 0, 0, 0, 0, 0, -1;
  e2 << 1, 0, 0, 0, 0, 0, 1, 0;
  EXPECT_EQ(d1, e1);
  EXPECT_EQ(d2, e2);
}

TEST(Catalog, UnsupportedDimensions) {
  EXPECT_THROW(catalog_curlcurl(4), DimensionError);
  EXPECT_THROW(catalog_curl(2, 1), DimensionError);
  EXPECT_THROW(catalog("grad:2x2"), ParseError);
  EXPECT_THROW(catalog("curl:2"), ParseError);
  EXPECT_THROW(catalog("curl"), ParseError);
}

TEST(Catalog, SymmetricChannelLayout) {
  EXPECT_EQ(symmetric_channel(2, 0, 0), 0);
  EXPECT_EQ(symmetric_channel(2, 1, 0), 1);
  EXPECT_EQ(symmetric_channel(2, 1, 1), 2);
  std::vector<int> expect{0, 1, 2, 3, 4, 5};
  std::vector<int> got{symmetric_channel(3, 0, 0), symmetric_channel(3, 0, 1), symmetric_channel(3, 0, 2),
                       symmetric_channel(3, 1, 1), symmetric_channel(3, 1, 2), symmetric_channel(3, 2, 2)};
  EXPECT_EQ(got, expect);
}

TEST(Catalog, CurlCurlAnnihilatesSymmetricGradients) {
  std::mt19937_64 rng(13);
  for (int d : {2, 3}) {
    auto op = catalog_curlcurl(d);
    for (int i = 0; i < 100; ++i) {
      Vector a = random_vector(rng, d), xi = random_vector(rng, d);
      Matrix s = 0.5 * (a * xi.transpose() + xi * a.transpose());
      Vector out = principal_symbol(op, xi) * wclab::testing::symmetric_channels(s);
      EXPECT_LE(out.norm(), 1e-12 * s.norm() * xi.squaredNorm());
    }
  }
}
