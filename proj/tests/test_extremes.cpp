#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "taildep/extremes.hpp"
#include "taildep/rng.hpp"

using namespace taildep;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix column(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

}  // namespace

TEST_CASE("moving-average residuals") {
  SUBCASE("hand example with clipped ends") {
    const Matrix r = moving_average_residuals(column({1, 2, 3, 4, 5}), 3);
    const double want[] = {-0.5, 0.0, 0.0, 0.0, 0.5};
    for (std::size_t i = 0; i < 5; ++i) CHECK(r(i, 0) == doctest::Approx(want[i]));
  }
  SUBCASE("constant series vanishes") {
    const Matrix r = moving_average_residuals(column({4, 4, 4, 4}), 3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r(i, 0) == doctest::Approx(0.0));
  }
  SUBCASE("window one is the identity mean") {
    const Matrix r = moving_average_residuals(column({3, 1, 7}), 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r(i, 0) == 0.0);
  }
  SUBCASE("window validation") {
    CHECK_THROWS_AS(moving_average_residuals(column({1, 2, 3}), 4), ConfigError);
    CHECK_THROWS_AS(moving_average_residuals(column({1, 2, 3}), 5), ConfigError);
  }
  SUBCASE("missing entries stay missing") {
    const Matrix r = moving_average_residuals(column({1, kNaN, 3}), 3);
    CHECK(std::isfinite(r(0, 0)));
    CHECK(std::isnan(r(1, 0)));
  }
}

TEST_CASE("block maxima") {
  SUBCASE("hand example") {
    const Matrix b = block_maxima(column({3, 1, 4, 1, 5, 9}), 2);
    REQUIRE(b.rows() == 3);
    CHECK(b(0, 0) == 3);
    CHECK(b(1, 0) == 4);
    CHECK(b(2, 0) == 9);
  }
  SUBCASE("m=1 is the identity") {
    const Matrix x = column({2, 7, 1});
    CHECK(block_maxima(x, 1) == x);
  }
  SUBCASE("m=N collapses to one row") {
    const Matrix b = block_maxima(column({2, 7, 1}), 3);
    REQUIRE(b.rows() == 1);
    CHECK(b(0, 0) == 7);
  }
  SUBCASE("partial trailing block dropped") {
    const Matrix b = block_maxima(column({1, 2, 3, 4, 5}), 2);
    CHECK(b.rows() == 2);
  }
  SUBCASE("composition equals the product block size") {
    rng::Philox g(5);
    Matrix x(12, 2);
    for (std::size_t r = 0; r < 12; ++r)
      for (std::size_t c = 0; c < 2; ++c) x(r, c) = g.uniform();
    CHECK(block_maxima(block_maxima(x, 2), 3) == block_maxima(x, 6));
  }
  SUBCASE("missing values are skipped") {
    const Matrix b = block_maxima(column({kNaN, 2, kNaN, kNaN}), 2);
    CHECK(b(0, 0) == 2);
    CHECK(std::isnan(b(1, 0)));
  }
}

TEST_CASE("rank transform to unit Frechet") {
  SUBCASE("hand example N=3") {
    const Matrix f = rank_transform_frechet(column({10, 20, 30}));
    CHECK(f(0, 0) == doctest::Approx(0.7213).epsilon(1e-4));
    CHECK(f(1, 0) == doctest::Approx(1.4427).epsilon(1e-4));
    CHECK(f(2, 0) == doctest::Approx(3.4761).epsilon(1e-4));
  }
  SUBCASE("rank invariance under monotone maps") {
    const Matrix a = rank_transform_frechet(column({0.1, 0.9, 0.4, 0.7}));
    const Matrix b = rank_transform_frechet(column({1.0, 900.0, 16.0, 49.0}));
    CHECK(a == b);
  }
  SUBCASE("sorted input stays sorted") {
    const Matrix f = rank_transform_frechet(column({1, 2, 3, 4, 5, 6}));
    for (std::size_t i = 1; i < 6; ++i) CHECK(f(i, 0) > f(i - 1, 0));
  }
  SUBCASE("missing entries map to zero") {
    const Matrix f = rank_transform_frechet(column({5, kNaN, 1}));
    CHECK(f(1, 0) == 0.0);
    CHECK(f(0, 0) > f(2, 0));
  }
  SUBCASE("needs two rows") {
    CHECK_THROWS_AS(rank_transform_frechet(column({1})), ConfigError);
  }
}

TEST_CASE("uniform scores") {
  const Matrix s = uniform_scores(column({30, 10, 20, 40}));
  CHECK(s(0, 0) == doctest::Approx(0.75));
  CHECK(s(1, 0) == doctest::Approx(0.25));
  CHECK(s(2, 0) == doctest::Approx(0.5));
  CHECK(s(3, 0) == 1.0);  // the maximum gets exactly rank/N = 1

  const Matrix withgap = uniform_scores(column({3, kNaN, 1}));
  CHECK(withgap(0, 0) == 1.0);
  CHECK(std::isnan(withgap(1, 0)));
  CHECK(withgap(2, 0) == doctest::Approx(0.5));
}

TEST_CASE("empirical chi") {
  SUBCASE("hand example evaluating to zero") {
    const double us[] = {0.1, 0.2, 0.6, 0.8};
    const double ut[] = {0.15, 0.7, 0.3, 0.9};
    CHECK(empirical_chi(us, ut, 4, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("comonotone columns give exactly one") {
    const double us[] = {0.2, 0.4, 0.6, 0.8, 1.0};
    CHECK(empirical_chi(us, us, 5, 0.975) == 1.0);
    CHECK(empirical_chibar(us, us, 5, 0.975) == 1.0);
  }
  SUBCASE("threshold validation") {
    const double us[] = {0.5};
    CHECK_THROWS_AS(empirical_chi(us, us, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(empirical_chi(us, us, 1, 1.0), ConfigError);
  }
  SUBCASE("no usable rows is undefined") {
    const double us[] = {kNaN, kNaN};
    const double ut[] = {0.5, 0.5};
    bool undef = false;
    CHECK(empirical_chi(us, ut, 2, 0.9, nullptr, &undef) == 0.0);
    CHECK(undef);
  }
}

TEST_CASE("empirical chibar continuity correction") {
  // 1000 rows, 25 marginal exceedances, zero joint exceedances
  std::vector<double> us(1000), ut(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    us[i] = (i + 1) / 1000.0;
    ut[i] = 1.0 - i / 1000.0;
  }
  bool corrected = false;
  const double v = empirical_chibar(us.data(), ut.data(), 1000, 0.975, &corrected);
  CHECK(corrected);
  // 2 log(0.025) / log(0.001) - 1
  CHECK(v == doctest::Approx(0.068039).epsilon(1e-4));
}

TEST_CASE("independent pairs estimate near zero") {
  rng::Philox g(1234);
  const std::size_t n = 200000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = g.uniform();
    b[i] = g.uniform();
  }
  const Matrix sa = uniform_scores(column(a));
  const Matrix sb = uniform_scores(column(b));
  CHECK(std::abs(empirical_chi(sa.data(), sb.data(), n, 0.975)) < 0.05);
  CHECK(std::abs(empirical_chibar(sa.data(), sb.data(), n, 0.975)) < 0.05);
}

TEST_CASE("dependence tensor construction") {
  rng::Philox g(77);
  const std::size_t n = 400, d = 5;
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double shared = g.uniform();
    for (std::size_t c = 0; c < d; ++c) x(r, c) = shared + 0.3 * g.uniform();
  }
  const Matrix scores = uniform_scores(x);
  TensorQuality q;
  const DependenceTensor t = dependence_tensor(scores, 0.9, &q);
  REQUIRE(t.d == d);
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(t.chi(i, i) == 1.0);
    CHECK(t.chibar(i, i) == 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(t.chi(i, j) == t.chi(j, i));
      CHECK(t.chibar(i, j) == t.chibar(j, i));
      CHECK(t.chi(i, j) >= 0.0);
      CHECK(t.chi(i, j) <= 1.0);
      CHECK(t.chibar(i, j) >= -1.0);
      CHECK(t.chibar(i, j) <= 1.0);
    }
  }

  SUBCASE("duplicated columns give all-ones planes") {
    Matrix dup(n, 2);
    for (std::size_t r = 0; r < n; ++r) {
      dup(r, 0) = x(r, 0);
      dup(r, 1) = x(r, 0);
    }
    const DependenceTensor ones = dependence_tensor(uniform_scores(dup), 0.975);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(ones.chi(i, j) == 1.0);
        CHECK(ones.chibar(i, j) == 1.0);
      }
  }

  SUBCASE("single column rejected") {
    CHECK_THROWS_AS(dependence_tensor(Matrix(10, 1), 0.9), ConfigError);
  }
}

TEST_CASE("directional profile") {
  SUBCASE("bearing classes follow the north-zero convention") {
    // vertical pair: due north
    const SiteSet ns({{0.5, 0.2}, {0.5, 0.8}});
    rng::Philox g(9);
    Matrix x(100, 2);
    for (std::size_t r = 0; r < 100; ++r) {
      x(r, 0) = g.uniform();
      x(r, 1) = g.uniform();
    }
    const Matrix s = uniform_scores(x);
    auto pts = directional_tail_profile(s, ns, 0.9, 3);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].direction == 0);
    CHECK(pts[0].pairs == 1);

    const SiteSet ew({{0.2, 0.5}, {0.8, 0.5}});
    pts = directional_tail_profile(s, ew, 0.9, 3);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].direction == 2);

    const SiteSet nesw({{0.2, 0.2}, {0.8, 0.8}});
    pts = directional_tail_profile(s, nesw, 0.9, 3);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].direction == 1);

    const SiteSet senw({{0.2, 0.8}, {0.8, 0.2}});
    pts = directional_tail_profile(s, senw, 0.9, 3);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].direction == 3);
  }

  SUBCASE("single pair lands in the last bin") {
    const SiteSet two({{0.1, 0.1}, {0.9, 0.9}});
    Matrix x(50, 2);
    rng::Philox g(11);
    for (std::size_t r = 0; r < 50; ++r) {
      x(r, 0) = g.uniform();
      x(r, 1) = g.uniform();
    }
    const auto pts = directional_tail_profile(uniform_scores(x), two, 0.9, 4);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].pairs == 1);
    // the pair sits at the maximum distance, so the center of the last bin
    const double hmax = two.distance(0, 1);
    CHECK(pts[0].h == doctest::Approx(hmax * 7.0 / 8.0));
  }
}
