#include "doctest.h"

#include <cmath>
#include <vector>

#include "taildep/simulation.hpp"

using namespace taildep;

namespace {

SiteSet random_sites(std::size_t d, std::uint64_t seed) {
  return SiteSet::random(d, rng::Philox(seed));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c)
      m = std::max(m, std::abs(a(r, c) - b(r, c)));
  return m;
}

}  // namespace

TEST_CASE("covariance matrix shape and values") {
  const SiteSet s({{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.5}});
  const Matrix m = build_covariance(s, {1.0, 1.0});
  REQUIRE(m.rows() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m(i, i) == 1.0);
  CHECK(m(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(m(i, j) == m(j, i));
}

TEST_CASE("cholesky factor reconstructs the covariance") {
  const SiteSet s = random_sites(12, 4);
  for (double delta : {0.5, 1.0, 1.9}) {
    const Matrix m = build_covariance(s, {0.4, delta});
    const Matrix L = cholesky_factor(m);
    double err = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= std::min(i, j); ++k) acc += L(i, k) * L(j, k);
        err = std::max(err, std::abs(acc - m(i, j)));
      }
    CHECK(err < 1e-9);
  }
}

TEST_CASE("cholesky handles near-singular clusters via the nugget") {
  std::vector<Site> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({0.5 + 1e-8 * i, 0.5});
  const SiteSet s(std::move(pts));
  // delta=2 on a tight cluster drives the correlation matrix toward all-ones
  CHECK_NOTHROW(cholesky_factor(build_covariance(s, {0.5, 2.0})));
}

TEST_CASE("cholesky rejects an indefinite matrix") {
  Matrix bad(2, 2, 0.0);
  bad(0, 0) = 1.0;
  bad(1, 1) = 1.0;
  bad(0, 1) = 2.0;
  bad(1, 0) = 2.0;
  CHECK_THROWS_AS(cholesky_factor(bad), NumericalError);
}

TEST_CASE("gaussian field sampling basics") {
  const SiteSet s({{0.1, 0.1}, {0.9, 0.9}});
  const Matrix empty = sample_gaussian_field(s, {0.5, 1.0}, 0, rng::Philox(1));
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 2);

  const Matrix a = sample_gaussian_field(s, {0.5, 1.0}, 50, rng::Philox(7).child(3));
  const Matrix b = sample_gaussian_field(s, {0.5, 1.0}, 50, rng::Philox(7).child(3));
  CHECK(a == b);
}

TEST_CASE("gaussian field moments at reduced size") {
  const SiteSet one({{0.5, 0.5}});
  const std::size_t n = 100000;
  Matrix x = sample_gaussian_field(one, {0.5, 1.0}, n, rng::Philox(11));
  double sum = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    sum += x(r, 0);
    sq += x(r, 0) * x(r, 0);
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));

  // two sites placed so the model correlation is exactly 1/2
  const double h = std::log(2.0);
  const SiteSet two({{0.1, 0.2}, {0.1 + h, 0.2}});
  Matrix y = sample_gaussian_field(two, {1.0, 1.0}, n, rng::Philox(12));
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double u = y(r, 0), v = y(r, 1);
    s1 += u; s2 += v; s11 += u * u; s22 += v * v; s12 += u * v;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  const double corr = (s12 / n - m1 * m2) /
                      std::sqrt((s11 / n - m1 * m1) * (s22 / n - m2 * m2));
  CHECK(corr == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("inversion values and involution") {
  CHECK(invert_value(1.0) == doctest::Approx(2.1801).epsilon(1e-4));
  CHECK_THROWS_AS(invert_value(0.0), NumericalError);
  CHECK_THROWS_AS(invert_value(-3.0), NumericalError);

  // strictly decreasing with the expected tail limits
  double prev = invert_value(1e-3);
  CHECK(prev > 1e100);
  for (double x : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6}) {
    const double y = invert_value(x);
    CHECK(y < prev);
    prev = y;
  }
  // y ~ 1/log(x) in the upper tail, so the decay toward 0 is logarithmic
  CHECK(prev == doctest::Approx(1.0 / std::log(1e6)).epsilon(1e-3));

  rng::Philox g(21);
  double worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    // unit-Frechet-distributed probe values cover both tails
    const double x = -1.0 / std::log(g.uniform());
    const double back = invert_value(invert_value(x));
    worst = std::max(worst, std::abs(back - x) / x);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inversion maps a field sample entrywise") {
  const SiteSet s = random_sites(4, 5);
  ProcessSpec spec;
  spec.family = Family::Schlather;
  spec.params = {0.5, 1.0};
  const FieldSample x = simulate_max_stable(spec, s, 20, rng::Philox(3));
  const FieldSample y = invert_max_stable(x);
  REQUIRE(y.values.rows() == 20);
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(y.values(r, c) == invert_value(x.values(r, c)));
}

TEST_CASE("normal-to-frechet transform") {
  CHECK(frechet_from_normal(0.0) == doctest::Approx(1.4427).epsilon(1e-4));
  CHECK(frechet_from_normal(3.0) > frechet_from_normal(0.0));
  CHECK(frechet_from_normal(-3.0) < frechet_from_normal(0.0));
  CHECK(frechet_from_normal(-40.0) > 0.0);
  CHECK(std::isfinite(frechet_from_normal(40.0)));
}

TEST_CASE("max-stable families are deterministic and positive") {
  const SiteSet s = random_sites(6, 8);
  for (Family f : {Family::Smith, Family::Schlather, Family::BrownResnick, Family::ExtremalT}) {
    CAPTURE(family_name(f));
    ProcessSpec spec;
    spec.family = f;
    spec.params = {0.5, 1.0};
    const FieldSample a = simulate_max_stable(spec, s, 40, rng::Philox(17).child(2));
    const FieldSample b = simulate_max_stable(spec, s, 40, rng::Philox(17).child(2));
    CHECK(a.values == b.values);
    CHECK(a.capped == b.capped);
    for (std::size_t r = 0; r < a.values.rows(); ++r)
      for (std::size_t c = 0; c < a.values.cols(); ++c)
        CHECK(a.values(r, c) > 0.0);
  }
}

TEST_CASE("nearly coincident sites give comonotone log-values") {
  const SiteSet s({{0.5, 0.5}, {0.5 + 1e-6, 0.5}});
  ProcessSpec spec;
  spec.family = Family::BrownResnick;
  spec.params = {0.4, 0.7};
  const FieldSample x = simulate_max_stable(spec, s, 2000, rng::Philox(23));
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
  const std::size_t n = x.values.rows();
  for (std::size_t r = 0; r < n; ++r) {
    const double u = std::log(x.values(r, 0));
    const double v = std::log(x.values(r, 1));
    s1 += u; s2 += v; s11 += u * u; s22 += v * v; s12 += u * v;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  const double corr = (s12 / n - m1 * m2) /
                      std::sqrt((s11 / n - m1 * m1) * (s22 / n - m2 * m2));
  CHECK(corr > 0.99);
}

TEST_CASE("degenerate mixtures reduce to their surviving component") {
  const SiteSet s = random_sites(5, 31);
  ProcessSpec mix;
  mix.family = Family::MaxMixture;
  mix.ad_component = std::make_shared<ProcessSpec>();
  mix.ad_component->family = Family::BrownResnick;
  mix.ad_component->params = {0.5, 1.0};
  mix.ai_component = std::make_shared<ProcessSpec>();
  mix.ai_component->family = Family::InvSchlather;
  mix.ai_component->params = {0.6, 1.2};

  mix.a = 1.0;
  const FieldSample ad = simulate(*mix.ad_component, s, 30, rng::Philox(41).child(0));
  CHECK(simulate_max_mixture(mix, s, 30, rng::Philox(41)).values == ad.values);
  CHECK(mix.label() == DependenceClass::AD);

  mix.a = 0.0;
  const FieldSample ai = simulate(*mix.ai_component, s, 30, rng::Philox(41).child(1));
  CHECK(simulate_max_mixture(mix, s, 30, rng::Philox(41)).values == ai.values);
  CHECK(mix.label() == DependenceClass::AI);

  mix.a = 0.5;
  CHECK(mix.label() == DependenceClass::MIX);
  const FieldSample m = simulate_max_mixture(mix, s, 30, rng::Philox(41));
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(m.values(r, c) ==
            std::max(0.5 * ad.values(r, c), 0.5 * ai.values(r, c)));
}

TEST_CASE("mixture specs validate their component labels") {
  ProcessSpec mix;
  mix.family = Family::MaxMixture;
  mix.a = 0.4;
  CHECK_THROWS_AS(mix.validate(), ConfigError);
  mix.ad_component = std::make_shared<ProcessSpec>();
  mix.ad_component->family = Family::InvSmith;  // wrong class on purpose
  mix.ai_component = std::make_shared<ProcessSpec>();
  mix.ai_component->family = Family::ExtremeGaussian;
  CHECK_THROWS_AS(mix.validate(), ConfigError);
  mix.ad_component->family = Family::Smith;
  CHECK_NOTHROW(mix.validate());
}

TEST_CASE("family names round-trip") {
  for (Family f : {Family::Smith, Family::Schlather, Family::BrownResnick,
                   Family::ExtremalT, Family::InvSmith, Family::InvSchlather,
                   Family::InvBrownResnick, Family::InvExtremalT,
                   Family::ExtremeGaussian, Family::MaxMixture}) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  CHECK_THROWS_AS(family_from_name("Gumbel"), ConfigError);
  CHECK(family_is_inverted(Family::InvExtremalT));
  CHECK(inverted_base(Family::InvBrownResnick) == Family::BrownResnick);
  CHECK_THROWS_AS(inverted_base(Family::Smith), ConfigError);
}

TEST_CASE("dispatcher covers every family") {
  const SiteSet s = random_sites(4, 77);
  for (Family f : {Family::Smith, Family::Schlather, Family::BrownResnick,
                   Family::ExtremalT, Family::InvSmith, Family::InvSchlather,
                   Family::InvBrownResnick, Family::InvExtremalT,
                   Family::ExtremeGaussian}) {
    CAPTURE(family_name(f));
    ProcessSpec spec;
    spec.family = f;
    spec.params = {0.5, 1.0};
    const FieldSample x = simulate(spec, s, 10, rng::Philox(51));
    REQUIRE(x.values.rows() == 10);
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 4; ++c) CHECK(x.values(r, c) > 0.0);
  }
}

TEST_CASE("replication streams do not depend on neighboring replications") {
  // the first rows of a 5-rep and a 50-rep run coincide bitwise
  const SiteSet s = random_sites(3, 13);
  ProcessSpec spec;
  spec.family = Family::ExtremalT;
  spec.params = {0.7, 1.0};
  const FieldSample small = simulate_max_stable(spec, s, 5, rng::Philox(61));
  const FieldSample big = simulate_max_stable(spec, s, 50, rng::Philox(61));
  CHECK(max_abs_diff(small.values, Matrix(5, 3)) > 0.0);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(small.values(r, c) == big.values(r, c));
}
