#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "taildep/rng.hpp"
#include "taildep/sites.hpp"
#include "taildep/types.hpp"

namespace taildep {

enum class Family {
  Smith,
  Schlather,
  BrownResnick,
  ExtremalT,
  InvSmith,
  InvSchlather,
  InvBrownResnick,
  InvExtremalT,
  ExtremeGaussian,
  MaxMixture,
};

bool family_is_max_stable(Family f);
bool family_is_inverted(Family f);
Family inverted_base(Family f);
std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct ProcessSpec {
  Family family = Family::BrownResnick;
  CorrelationModel params;
  double a = 0.5;  // MaxMixture weight
  std::shared_ptr<ProcessSpec> ad_component;
  std::shared_ptr<ProcessSpec> ai_component;

  // Ground truth: max-stable families are AD, inverted families and
  // ExtremeGaussian are AI, a proper mixture (0 < a < 1) is MIX. Degenerate
  // mixtures collapse to the surviving component's class.
  DependenceClass label() const;
  void validate() const;
};

// Realizations at the sites, one row per temporal replication. Entries are
// strictly positive (unit Frechet scale) for every family.
struct FieldSample {
  Matrix values;
  std::size_t capped = 0;  // replications that exhausted the storm budget
  bool approximate() const { return capped > 0; }
};

inline constexpr int kStormCap = 1000;
inline constexpr double kNuggetStart = 1e-10;
inline constexpr double kNuggetMax = 1e-6;

// Pairwise powered-exponential correlation matrix, unit diagonal.
Matrix build_covariance(const SiteSet& sites, const CorrelationModel& model);

// Covariance of the intrinsically stationary log-storm field anchored at the
// first site: Cov(i,j) = g(i) + g(j) - gamma(dist ij) with g the variogram to
// the anchor. Singular at the anchor; the factorization nugget absorbs it.
Matrix anchored_log_covariance(const SiteSet& sites, const CorrelationModel& model);

// Lower Cholesky factor with diagonal nugget, escalated x100 from 1e-10 up to
// 1e-6 before giving up.
Matrix cholesky_factor(const Matrix& cov);

Matrix sample_gaussian_field(const SiteSet& sites, const CorrelationModel& model,
                             std::size_t n, rng::Philox stream);

FieldSample simulate_max_stable(const ProcessSpec& spec, const SiteSet& sites,
                                std::size_t n, rng::Philox stream);

double invert_value(double x);
FieldSample invert_max_stable(const FieldSample& x);

// -1/log(Phi(z)), evaluated through whichever normal tail keeps the log
// well-conditioned; Phi is clamped away from 0 and 1.
double frechet_from_normal(double z);

FieldSample simulate_extreme_gaussian(const SiteSet& sites, const CorrelationModel& model,
                                      std::size_t n, rng::Philox stream);

FieldSample simulate_max_mixture(const ProcessSpec& spec, const SiteSet& sites,
                                 std::size_t n, rng::Philox stream);

// Dispatcher over all families, including the inverted ones.
FieldSample simulate(const ProcessSpec& spec, const SiteSet& sites, std::size_t n,
                     rng::Philox stream);

}  // namespace taildep
