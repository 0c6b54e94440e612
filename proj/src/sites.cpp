#include "taildep/sites.hpp"

#include <cmath>
#include <cstring>

namespace taildep {

SiteSet::SiteSet(std::vector<Site> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw ConfigError("site set is empty");
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Site& s = sites_[i];
    if (!(s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 && s.y <= 1.0))
      throw ConfigError("site " + std::to_string(i) + " lies outside the unit square");
  }
  for (std::size_t i = 0; i < sites_.size(); ++i)
    for (std::size_t j = i + 1; j < sites_.size(); ++j)
      if (sites_[i].x == sites_[j].x && sites_[i].y == sites_[j].y)
        throw ConfigError("sites " + std::to_string(i) + " and " + std::to_string(j) +
                          " coincide");
}

SiteSet SiteSet::random(std::size_t d, rng::Philox g) {
  std::vector<Site> s(d);
  for (auto& p : s) {
    p.x = g.uniform();
    p.y = g.uniform();
  }
  return SiteSet(std::move(s));
}

double SiteSet::distance(std::size_t i, std::size_t j) const {
  const double dx = sites_[i].x - sites_[j].x;
  const double dy = sites_[i].y - sites_[j].y;
  return std::sqrt(dx * dx + dy * dy);
}

std::uint64_t SiteSet::hash() const {
  // FNV-1a over the raw coordinate bytes
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Site& s : sites_) {
    unsigned char buf[16];
    std::memcpy(buf, &s.x, 8);
    std::memcpy(buf + 8, &s.y, 8);
    for (unsigned char b : buf) {
      h ^= b;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

void CorrelationModel::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("correlation scale must be positive");
  if (!(delta > 0.0 && delta <= 2.0)) throw ConfigError("correlation smoothness must lie in (0,2]");
}

double CorrelationModel::rho(double h) const {
  return std::exp(-std::pow(h / sigma, delta));
}

double CorrelationModel::variogram(double h) const {
  return std::pow(h / sigma, delta);
}

}  // namespace taildep
