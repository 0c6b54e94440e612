#include "taildep/simulation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>

namespace taildep {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Normalizer for the cubed-positive-part storm profile: 1/E[max(0,Z)^3].
const double kCubeNorm = std::sqrt(std::numbers::pi / 2.0);
// High-probability cap on a standard normal draw used in storm bounds.
constexpr double kNormalBound = 5.0;

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

void fill_normals(rng::Philox& g, std::vector<double>& z) {
  for (double& v : z) v = g.normal();
}

// out = L z for lower-triangular L
void lower_mul(const Matrix& L, const std::vector<double>& z, std::vector<double>& out) {
  const std::size_t d = L.rows();
  for (std::size_t i = 0; i < d; ++i) {
    const double* row = L.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
    out[i] = acc;
  }
}

}  // namespace

bool family_is_max_stable(Family f) {
  return f == Family::Smith || f == Family::Schlather || f == Family::BrownResnick ||
         f == Family::ExtremalT;
}

bool family_is_inverted(Family f) {
  return f == Family::InvSmith || f == Family::InvSchlather ||
         f == Family::InvBrownResnick || f == Family::InvExtremalT;
}

Family inverted_base(Family f) {
  switch (f) {
    case Family::InvSmith: return Family::Smith;
    case Family::InvSchlather: return Family::Schlather;
    case Family::InvBrownResnick: return Family::BrownResnick;
    case Family::InvExtremalT: return Family::ExtremalT;
    default: throw ConfigError("family is not an inverted family");
  }
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Smith: return "Smith";
    case Family::Schlather: return "Schlather";
    case Family::BrownResnick: return "BrownResnick";
    case Family::ExtremalT: return "ExtremalT";
    case Family::InvSmith: return "InvSmith";
    case Family::InvSchlather: return "InvSchlather";
    case Family::InvBrownResnick: return "InvBrownResnick";
    case Family::InvExtremalT: return "InvExtremalT";
    case Family::ExtremeGaussian: return "ExtremeGaussian";
    case Family::MaxMixture: return "MaxMixture";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  static const std::pair<const char*, Family> table[] = {
      {"Smith", Family::Smith},
      {"Schlather", Family::Schlather},
      {"BrownResnick", Family::BrownResnick},
      {"ExtremalT", Family::ExtremalT},
      {"InvSmith", Family::InvSmith},
      {"InvSchlather", Family::InvSchlather},
      {"InvBrownResnick", Family::InvBrownResnick},
      {"InvExtremalT", Family::InvExtremalT},
      {"ExtremeGaussian", Family::ExtremeGaussian},
      {"MaxMixture", Family::MaxMixture},
  };
  for (const auto& [n, f] : table)
    if (name == n) return f;
  throw ConfigError("unknown process family: " + name);
}

DependenceClass ProcessSpec::label() const {
  if (family_is_max_stable(family)) return DependenceClass::AD;
  if (family_is_inverted(family) || family == Family::ExtremeGaussian)
    return DependenceClass::AI;
  if (a <= 0.0) return DependenceClass::AI;
  if (a >= 1.0) return DependenceClass::AD;
  return DependenceClass::MIX;
}

void ProcessSpec::validate() const {
  if (family == Family::MaxMixture) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("mixture weight must lie in [0,1]");
    if (!ad_component || !ai_component)
      throw ConfigError("mixture needs both an AD and an AI component");
    if (ad_component->label() != DependenceClass::AD)
      throw ConfigError("mixture AD component does not carry an AD label");
    if (ai_component->label() != DependenceClass::AI)
      throw ConfigError("mixture AI component does not carry an AI label");
    ad_component->validate();
    ai_component->validate();
    return;
  }
  params.validate();
}

Matrix build_covariance(const SiteSet& sites, const CorrelationModel& model) {
  model.validate();
  const std::size_t d = sites.size();
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = model.rho(sites.distance(i, j));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

Matrix anchored_log_covariance(const SiteSet& sites, const CorrelationModel& model) {
  model.validate();
  const std::size_t d = sites.size();
  std::vector<double> g(d);
  for (std::size_t i = 0; i < d; ++i) g[i] = model.variogram(sites.distance(i, 0));
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double v = g[i] + g[j] - model.variogram(sites.distance(i, j));
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

Matrix cholesky_factor(const Matrix& cov) {
  const Eigen::MatrixXd base = to_eigen(cov);
  const auto n = base.rows();
  for (double nugget = kNuggetStart; nugget <= kNuggetMax * 1.0001; nugget *= 100.0) {
    Eigen::MatrixXd work = base;
    work.diagonal().array() += nugget;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      Matrix out(cov.rows(), cov.cols(), 0.0);
      const Eigen::MatrixXd L = llt.matrixL();
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c <= r; ++c) out(r, c) = L(r, c);
      return out;
    }
  }
  throw NumericalError("covariance factorization failed: degenerate site set");
}

Matrix sample_gaussian_field(const SiteSet& sites, const CorrelationModel& model,
                             std::size_t n, rng::Philox stream) {
  const std::size_t d = sites.size();
  const Matrix L = cholesky_factor(build_covariance(sites, model));
  Matrix out(n, d);
  std::vector<double> z(d), x(d);
  for (std::size_t r = 0; r < n; ++r) {
    rng::Philox g = stream.child(r);
    fill_normals(g, z);
    lower_mul(L, z, x);
    std::copy(x.begin(), x.end(), out.row(r));
  }
  return out;
}

namespace {

// One replication of the spectral max construction: keep spawning storms
// Z <- max(Z, xi * W) while the next Poisson weight xi could still beat the
// current minimum given sup W <= bound. Returns true when the storm budget
// ran out with the stopping criterion unmet.
template <typename SpawnW>
bool storm_replication(rng::Philox& g, std::size_t d, double bound, double* row,
                       SpawnW&& spawn) {
  for (std::size_t j = 0; j < d; ++j) row[j] = 0.0;
  double gamma = 0.0;
  double min_z = 0.0;
  int storms = 0;
  for (;;) {
    gamma += g.exponential();
    const double xi = 1.0 / gamma;
    if (min_z > 0.0 && xi * bound <= min_z) return false;
    if (storms == kStormCap) return true;
    ++storms;
    spawn(g, xi, row);
    min_z = row[0];
    for (std::size_t j = 1; j < d; ++j) min_z = std::min(min_z, row[j]);
  }
}

struct StormWindow {
  double x0, y0, wx, wy, area;
};

StormWindow smith_window(const SiteSet& sites, double sigma) {
  double lox = sites[0].x, hix = sites[0].x, loy = sites[0].y, hiy = sites[0].y;
  for (const Site& s : sites.sites()) {
    lox = std::min(lox, s.x);
    hix = std::max(hix, s.x);
    loy = std::min(loy, s.y);
    hiy = std::max(hiy, s.y);
  }
  const double pad = 4.0 * sigma;
  StormWindow w;
  w.x0 = lox - pad;
  w.y0 = loy - pad;
  w.wx = (hix - lox) + 2.0 * pad;
  w.wy = (hiy - loy) + 2.0 * pad;
  w.area = w.wx * w.wy;
  return w;
}

}  // namespace

FieldSample simulate_max_stable(const ProcessSpec& spec, const SiteSet& sites,
                                std::size_t n, rng::Philox stream) {
  if (!family_is_max_stable(spec.family))
    throw ConfigError("simulate_max_stable expects a max-stable family");
  spec.validate();
  const std::size_t d = sites.size();
  FieldSample sample;
  sample.values = Matrix(n, d);

  if (spec.family == Family::Smith) {
    const double sigma = spec.params.sigma;
    const StormWindow win = smith_window(sites, sigma);
    const double amp = win.area / (kTwoPi * sigma * sigma);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t r = 0; r < n; ++r) {
      rng::Philox g = stream.child(r);
      const bool hit = storm_replication(
          g, d, amp, sample.values.row(r), [&](rng::Philox& gg, double xi, double* row) {
            const double ux = win.x0 + gg.uniform() * win.wx;
            const double uy = win.y0 + gg.uniform() * win.wy;
            for (std::size_t j = 0; j < d; ++j) {
              const double dx = sites[j].x - ux;
              const double dy = sites[j].y - uy;
              const double w = amp * std::exp(-(dx * dx + dy * dy) * inv2s2);
              row[j] = std::max(row[j], xi * w);
            }
          });
      if (hit) ++sample.capped;
    }
    return sample;
  }

  const bool brown = spec.family == Family::BrownResnick;
  const Matrix L = cholesky_factor(brown ? anchored_log_covariance(sites, spec.params)
                                         : build_covariance(sites, spec.params));
  std::vector<double> gamma0(d, 0.0);
  double bound;
  if (brown) {
    bound = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      gamma0[j] = spec.params.variogram(sites.distance(j, 0));
      bound = std::max(bound,
                       std::exp(kNormalBound * std::sqrt(2.0 * gamma0[j]) - gamma0[j]));
    }
  } else if (spec.family == Family::Schlather) {
    bound = std::sqrt(kTwoPi) * kNormalBound;
  } else {
    bound = kCubeNorm * kNormalBound * kNormalBound * kNormalBound;
  }

  std::vector<double> z(d), eps(d);
  for (std::size_t r = 0; r < n; ++r) {
    rng::Philox g = stream.child(r);
    const bool hit = storm_replication(
        g, d, bound, sample.values.row(r), [&](rng::Philox& gg, double xi, double* row) {
          fill_normals(gg, z);
          lower_mul(L, z, eps);
          if (brown) {
            for (std::size_t j = 0; j < d; ++j)
              row[j] = std::max(row[j], xi * std::exp(eps[j] - gamma0[j]));
          } else if (spec.family == Family::Schlather) {
            for (std::size_t j = 0; j < d; ++j)
              if (eps[j] > 0.0)
                row[j] = std::max(row[j], xi * std::sqrt(kTwoPi) * eps[j]);
          } else {
            for (std::size_t j = 0; j < d; ++j)
              if (eps[j] > 0.0)
                row[j] = std::max(row[j], xi * kCubeNorm * eps[j] * eps[j] * eps[j]);
          }
        });
    if (hit) ++sample.capped;
  }
  return sample;
}

double invert_value(double x) {
  if (!(x > 0.0)) throw NumericalError("inversion requires strictly positive input");
  const double e = std::exp(-1.0 / x);
  // Two algebraically equal forms of log(1 - e), each accurate on its side.
  const double l = e > 0.5 ? std::log(-std::expm1(-1.0 / x)) : std::log1p(-e);
  return -1.0 / l;
}

FieldSample invert_max_stable(const FieldSample& x) {
  FieldSample out;
  out.values = Matrix(x.values.rows(), x.values.cols());
  out.capped = x.capped;
  const std::size_t total = x.values.rows() * x.values.cols();
  const double* src = x.values.data();
  double* dst = out.values.data();
  for (std::size_t i = 0; i < total; ++i) dst[i] = invert_value(src[i]);
  return out;
}

double frechet_from_normal(double z) {
  if (z < 0.0) {
    // lower tail: Phi(z) itself is small and accurately representable
    double p = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    if (p < DBL_MIN) p = DBL_MIN;
    return -1.0 / std::log(p);
  }
  // upper tail: go through the survival function to keep log(Phi) exact
  double q = 0.5 * std::erfc(z / std::numbers::sqrt2);
  if (q < DBL_MIN) q = DBL_MIN;
  return -1.0 / std::log1p(-q);
}

FieldSample simulate_extreme_gaussian(const SiteSet& sites, const CorrelationModel& model,
                                      std::size_t n, rng::Philox stream) {
  const std::size_t d = sites.size();
  const Matrix L = cholesky_factor(build_covariance(sites, model));
  FieldSample out;
  out.values = Matrix(n, d);
  std::vector<double> z(d), eps(d);
  for (std::size_t r = 0; r < n; ++r) {
    rng::Philox g = stream.child(r);
    fill_normals(g, z);
    lower_mul(L, z, eps);
    double* row = out.values.row(r);
    for (std::size_t j = 0; j < d; ++j) row[j] = frechet_from_normal(eps[j]);
  }
  return out;
}

FieldSample simulate_max_mixture(const ProcessSpec& spec, const SiteSet& sites,
                                 std::size_t n, rng::Philox stream) {
  if (spec.family != Family::MaxMixture)
    throw ConfigError("simulate_max_mixture expects a mixture spec");
  spec.validate();
  const FieldSample xs = simulate(*spec.ad_component, sites, n, stream.child(0));
  const FieldSample ys = simulate(*spec.ai_component, sites, n, stream.child(1));
  FieldSample out;
  out.values = Matrix(n, sites.size());
  out.capped = xs.capped + ys.capped;
  const std::size_t total = n * sites.size();
  const double* xv = xs.values.data();
  const double* yv = ys.values.data();
  double* ov = out.values.data();
  for (std::size_t i = 0; i < total; ++i)
    ov[i] = std::max(spec.a * xv[i], (1.0 - spec.a) * yv[i]);
  return out;
}

FieldSample simulate(const ProcessSpec& spec, const SiteSet& sites, std::size_t n,
                     rng::Philox stream) {
  if (spec.family == Family::MaxMixture) return simulate_max_mixture(spec, sites, n, stream);
  if (spec.family == Family::ExtremeGaussian)
    return simulate_extreme_gaussian(sites, spec.params, n, stream);
  if (family_is_inverted(spec.family)) {
    ProcessSpec base = spec;
    base.family = inverted_base(spec.family);
    return invert_max_stable(simulate_max_stable(base, sites, n, stream));
  }
  return simulate_max_stable(spec, sites, n, stream);
}

}  // namespace taildep
