#pragma once

#include <cstdint>
#include <vector>

#include "taildep/rng.hpp"
#include "taildep/types.hpp"

namespace taildep {

struct Site {
  double x = 0.0;
  double y = 0.0;
};

// Ordered observation locations on the unit square. Order is significant:
// tensor rows and columns index it.
class SiteSet {
 public:
  explicit SiteSet(std::vector<Site> sites);

  static SiteSet random(std::size_t d, rng::Philox g);

  std::size_t size() const { return sites_.size(); }
  const Site& operator[](std::size_t i) const { return sites_[i]; }
  const std::vector<Site>& sites() const { return sites_; }

  double distance(std::size_t i, std::size_t j) const;

  // Stable fingerprint of the coordinate list, for manifests.
  std::uint64_t hash() const;

 private:
  std::vector<Site> sites_;
};

struct CorrelationModel {
  double sigma = 0.5;
  double delta = 1.0;

  void validate() const;

  // Powered-exponential correlation, 1 at h=0.
  double rho(double h) const;

  // Matching semivariogram (h/sigma)^delta.
  double variogram(double h) const;
};

}  // namespace taildep
