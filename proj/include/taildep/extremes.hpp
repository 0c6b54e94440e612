#pragma once

#include <cstddef>
#include <vector>

#include "taildep/sites.hpp"
#include "taildep/types.hpp"

namespace taildep {

inline constexpr double kDefaultThreshold = 0.975;
inline constexpr std::size_t kDefaultMovingAverageWindow = 11;

// Residuals against a centered per-column moving average; the window is
// clipped symmetrically at the series ends. Window must be odd and <= N.
Matrix moving_average_residuals(const Matrix& x, std::size_t window);

// Columnwise maxima over non-overlapping blocks of length m; a trailing
// partial block is dropped. NaN entries are ignored; an all-NaN block stays
// NaN.
Matrix block_maxima(const Matrix& x, std::size_t m);

// Empirical unit-Frechet margins: rank r of N maps to -1/log(r/(N+1)).
// Non-finite entries are treated as missing and map to 0, the zero-rank
// convention.
Matrix rank_transform_frechet(const Matrix& y);

// Empirical CDF scores rank/N per column, ranked among that column's finite
// entries (ties broken by first occurrence). Missing entries stay NaN and the
// rank denominator is the column's finite count.
Matrix uniform_scores(const Matrix& x);

// Upper/lower tail dependence estimates from two score columns. Rows where
// either side is NaN are skipped (pairwise-complete). A zero indicator count
// is lifted to 1 before the logs and reported through *corrected. Cells that
// cannot be estimated at all come back as 0 with *undefined set.
double empirical_chi(const double* us, const double* ut, std::size_t n, double u,
                     bool* corrected = nullptr, bool* undefined = nullptr);
double empirical_chibar(const double* us, const double* ut, std::size_t n, double u,
                        bool* corrected = nullptr, bool* undefined = nullptr);

struct DependenceTensor {
  std::size_t d = 0;
  double u = kDefaultThreshold;
  Matrix chi;
  Matrix chibar;
};

struct TensorQuality {
  std::size_t corrected_cells = 0;  // continuity correction applied
  std::size_t undefined_cells = 0;  // no usable rows; cell forced to 0
};

// Pairwise tensor over all unordered column pairs of a score matrix; both
// planes symmetric with unit diagonal.
DependenceTensor dependence_tensor(const Matrix& scores, double u,
                                   TensorQuality* quality = nullptr);

struct ProfilePoint {
  int direction = 0;     // 0 N-S, 1 NE-SW, 2 E-W, 3 SE-NW
  double h = 0.0;        // distance bin center
  double chi = 0.0;
  double chibar = 0.0;
  std::size_t pairs = 0;
};

// Pairwise estimates bucketed by bearing class and distance; bins without
// pairs are omitted. Bearing 0 points north and classes are pi/4 wide.
std::vector<ProfilePoint> directional_tail_profile(const Matrix& scores,
                                                   const SiteSet& sites, double u,
                                                   std::size_t n_bins);

}  // namespace taildep
