// Slow Monte Carlo checks of the simulators' distributional contracts. These
// run minutes, not seconds, and live in their own binary so the fast suite
// stays fast.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "taildep/extremes.hpp"
#include "taildep/rng.hpp"
#include "taildep/simulation.hpp"
#include "taildep/sites.hpp"

using namespace taildep;

namespace {

ProcessSpec simple(Family f, double sigma, double delta) {
  ProcessSpec p;
  p.family = f;
  p.params = CorrelationModel{sigma, delta};
  return p;
}

ProcessSpec mixture(double a, double sigma, double delta) {
  ProcessSpec p;
  p.family = Family::MaxMixture;
  p.params = CorrelationModel{sigma, delta};
  p.a = a;
  p.ad_component =
      std::make_shared<ProcessSpec>(simple(Family::Schlather, sigma, delta));
  p.ai_component =
      std::make_shared<ProcessSpec>(simple(Family::InvSchlather, sigma, delta));
  return p;
}

SiteSet line_sites(std::size_t d, double x0, double x1) {
  std::vector<Site> pts(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double f = d > 1 ? static_cast<double>(i) / (d - 1) : 0.0;
    pts[i] = {x0 + f * (x1 - x0), 0.5};
  }
  return SiteSet(std::move(pts));
}

double ks_to_unit_frechet(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::exp(-1.0 / v[i]);
    worst = std::max(worst, std::abs(f - static_cast<double>(i + 1) / n));
    worst = std::max(worst, std::abs(f - static_cast<double>(i) / n));
  }
  return worst;
}

std::vector<double> column(const Matrix& m, std::size_t c) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

double chi_pair(const Matrix& values, std::size_t i, std::size_t j, double u) {
  const Matrix s = uniform_scores(values);
  const std::vector<double> a = column(s, i), b = column(s, j);
  return empirical_chi(a.data(), b.data(), a.size(), u);
}

std::vector<double> ordinal_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k + 1);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = ordinal_ranks(a), rb = ordinal_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = ra[i] - mean, dy = rb[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("every family has unit Frechet margins at every site") {
  // Brown-Resnick needs a short-range layout: large anchored variogram values
  // push the spectral bound past the storm budget and bias the far tail.
  const SiteSet spread = line_sites(3, 0.2, 0.8);
  const SiteSet close = line_sites(3, 0.5, 0.75);
  const std::size_t n = 100000;

  struct Case {
    const char* name;
    ProcessSpec proc;
    const SiteSet* sites;
  };
  const Case cases[] = {
      {"smith", simple(Family::Smith, 0.5, 1.0), &spread},
      {"schlather", simple(Family::Schlather, 0.5, 1.0), &spread},
      {"brown-resnick", simple(Family::BrownResnick, 0.5, 1.0), &close},
      {"extremal-t", simple(Family::ExtremalT, 0.7, 1.0), &spread},
      {"inv-schlather", simple(Family::InvSchlather, 0.5, 1.0), &spread},
      {"inv-brown-resnick", simple(Family::InvBrownResnick, 0.5, 1.0), &close},
      {"extreme-gaussian", simple(Family::ExtremeGaussian, 0.5, 1.0), &spread},
      {"max-mixture", mixture(0.5, 0.5, 1.0), &spread},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    const FieldSample fs = simulate(c.proc, *c.sites, n, rng::Philox(902));
    REQUIRE(fs.values.rows() == n);
    for (std::size_t s = 0; s < c.sites->size(); ++s) {
      const std::vector<double> v = column(fs.values, s);
      for (double x : v) REQUIRE(x > 0.0);
      CHECK(ks_to_unit_frechet(v) < 0.01);
    }
  }
}

TEST_CASE("tail dependence separates the process classes") {
  const SiteSet pair = line_sites(2, 0.35, 0.65);
  const std::size_t n = 100000;

  const FieldSample ad = simulate(simple(Family::Schlather, 0.7, 1.0), pair, n,
                                  rng::Philox(31));
  const FieldSample ai = simulate(simple(Family::InvSchlather, 0.7, 1.0), pair, n,
                                  rng::Philox(32));
  const double chi_ad = chi_pair(ad.values, 0, 1, 0.975);
  const double chi_ai = chi_pair(ai.values, 0, 1, 0.975);
  CHECK(chi_ad > 0.3);
  CHECK(chi_ai < chi_ad - 0.2);

  // under asymptotic independence the chi estimate decays with the level
  const double chi_ai_far = chi_pair(ai.values, 0, 1, 0.995);
  CHECK(chi_ai_far < chi_ai);

  // an extreme-Gaussian field at moderate correlation is asymptotically
  // independent: chi at a deep level is near zero
  const FieldSample eg = simulate(simple(Family::ExtremeGaussian, 0.5, 1.0),
                                  line_sites(2, 0.35, 0.65), 1000000, rng::Philox(33));
  CHECK(chi_pair(eg.values, 0, 1, 0.999) < 0.1);
}

TEST_CASE("pairwise dependence decays with distance") {
  struct Case {
    const char* name;
    ProcessSpec proc;
    double span;
  };
  const Case cases[] = {
      {"smith", simple(Family::Smith, 0.5, 1.0), 1.0},
      {"schlather", simple(Family::Schlather, 0.5, 1.0), 1.0},
      {"extremal-t", simple(Family::ExtremalT, 0.7, 1.0), 0.6},
      {"brown-resnick", simple(Family::BrownResnick, 1.0, 1.0), 0.5},
  };
  const std::size_t n = 20000;
  for (const Case& c : cases) {
    CAPTURE(c.name);
    const SiteSet sites = line_sites(21, 0.0, c.span);
    const FieldSample fs = simulate(c.proc, sites, n, rng::Philox(77));
    const Matrix s = uniform_scores(fs.values);
    const std::vector<double> ref = column(s, 0);
    std::vector<double> chis, dists;
    for (std::size_t j = 1; j < sites.size(); ++j) {
      const std::vector<double> other = column(s, j);
      chis.push_back(empirical_chi(ref.data(), other.data(), n, 0.95));
      dists.push_back(sites.distance(0, j));
    }
    CHECK(spearman(chis, dists) < -0.9);
    CHECK(chis.front() > chis.back());
  }
}

TEST_CASE("extreme-Gaussian reciprocals behave like unit exponentials") {
  const FieldSample fs = simulate(simple(Family::ExtremeGaussian, 0.5, 1.0),
                                  line_sites(2, 0.2, 0.8), 1000000, rng::Philox(5));
  for (std::size_t s = 0; s < 2; ++s) {
    const std::vector<double> v = column(fs.values, s);
    double mean = 0.0;
    for (double x : v) mean += 1.0 / x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (1.0 / x - mean) * (1.0 / x - mean);
    var /= static_cast<double>(v.size() - 1);
    CHECK(std::abs(mean - 1.0) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
}

TEST_CASE("chi estimates are stable across simulation seeds") {
  const SiteSet pair = line_sites(2, 0.5, 0.7);
  const ProcessSpec proc = simple(Family::BrownResnick, 0.5, 1.0);
  const std::size_t n = 200000;
  const double a = chi_pair(simulate(proc, pair, n, rng::Philox(101)).values, 0, 1, 0.975);
  const double b = chi_pair(simulate(proc, pair, n, rng::Philox(202)).values, 0, 1, 0.975);
  CHECK(a > 0.2);
  CHECK(std::abs(a - b) < 0.03);
}

TEST_CASE("isotropic families look the same in every direction") {
  std::vector<Site> pts = {{0.2, 0.5}, {0.8, 0.5}, {0.5, 0.2}, {0.5, 0.8}};
  const SiteSet sites{std::move(pts)};
  const FieldSample fs = simulate(simple(Family::Schlather, 0.5, 1.0), sites, 100000,
                                  rng::Philox(88));
  const double chi_ew = chi_pair(fs.values, 0, 1, 0.975);
  const double chi_ns = chi_pair(fs.values, 2, 3, 0.975);
  CHECK(std::abs(chi_ew - chi_ns) < 0.05);
}

TEST_CASE("the mixing weight interpolates between the classes") {
  const SiteSet pair = line_sites(2, 0.35, 0.65);
  const std::size_t n = 100000;
  const double mostly_ad =
      chi_pair(simulate(mixture(0.9, 0.5, 1.0), pair, n, rng::Philox(61)).values, 0, 1,
               0.975);
  const double mostly_ai =
      chi_pair(simulate(mixture(0.1, 0.5, 1.0), pair, n, rng::Philox(62)).values, 0, 1,
               0.975);
  CHECK(mostly_ad > mostly_ai + 0.05);
}

TEST_CASE("the storm budget flag reports exhaustion honestly") {
  // friendly geometry: the spectral bound is tight and the budget suffices
  const FieldSample ok = simulate(simple(Family::Schlather, 0.5, 1.0),
                                  line_sites(3, 0.2, 0.8), 2000, rng::Philox(9));
  CHECK(ok.capped == 0);
  CHECK_FALSE(ok.approximate());

  // anchored variogram across a long span: the bound explodes and the cap hits
  const FieldSample capped = simulate(simple(Family::BrownResnick, 0.4, 0.7),
                                      line_sites(3, 0.0, 0.85), 2000, rng::Philox(9));
  CHECK(capped.capped > 0);
  CHECK(capped.approximate());
  for (std::size_t r = 0; r < capped.values.rows(); ++r)
    for (std::size_t c = 0; c < capped.values.cols(); ++c)
      CHECK(capped.values(r, c) > 0.0);
}
