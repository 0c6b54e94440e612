#include "taildep/extremes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace taildep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp(double v, double lo, double hi) {
  if (!std::isfinite(v)) return lo > 0.0 ? lo : 0.0;
  return std::min(hi, std::max(lo, v));
}

// ranks 1..K among the finite entries of a strided column, first occurrence
// winning ties; returns 0 for missing entries
std::vector<std::size_t> column_ranks(const double* col, std::size_t n, std::size_t stride,
                                      std::size_t* finite_count) {
  std::vector<std::size_t> idx;
  idx.reserve(n);
  for (std::size_t r = 0; r < n; ++r)
    if (std::isfinite(col[r * stride])) idx.push_back(r);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return col[a * stride] < col[b * stride];
  });
  std::vector<std::size_t> ranks(n, 0);
  for (std::size_t k = 0; k < idx.size(); ++k) ranks[idx[k]] = k + 1;
  *finite_count = idx.size();
  return ranks;
}

}  // namespace

Matrix moving_average_residuals(const Matrix& x, std::size_t window) {
  const std::size_t n = x.rows(), d = x.cols();
  if (window < 1 || window % 2 == 0)
    throw ConfigError("moving-average window must be an odd positive integer");
  if (window > n) throw ConfigError("moving-average window exceeds the series length");
  const std::size_t k = (window - 1) / 2;
  Matrix out(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t lo = t >= k ? t - k : 0;
      const std::size_t hi = std::min(n - 1, t + k);
      double sum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t s = lo; s <= hi; ++s) {
        const double v = x(s, c);
        if (std::isfinite(v)) {
          sum += v;
          ++cnt;
        }
      }
      const double v = x(t, c);
      out(t, c) = (cnt == 0 || !std::isfinite(v)) ? kNaN : v - sum / cnt;
    }
  }
  return out;
}

Matrix block_maxima(const Matrix& x, std::size_t m) {
  if (m < 1) throw ConfigError("block length must be positive");
  const std::size_t blocks = x.rows() / m;
  const std::size_t d = x.cols();
  Matrix out(blocks, d);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t c = 0; c < d; ++c) {
      double best = kNaN;
      for (std::size_t r = b * m; r < (b + 1) * m; ++r) {
        const double v = x(r, c);
        if (std::isfinite(v) && !(v <= best)) best = v;
      }
      out(b, c) = best;
    }
  return out;
}

Matrix rank_transform_frechet(const Matrix& y) {
  if (y.rows() < 2) throw ConfigError("rank transform needs at least two rows");
  const std::size_t n = y.rows(), d = y.cols();
  Matrix out(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t finite = 0;
    const auto ranks = column_ranks(y.data() + c, n, d, &finite);
    for (std::size_t r = 0; r < n; ++r) {
      if (ranks[r] == 0) {
        out(r, c) = 0.0;  // missing entries take the zero-rank branch
      } else {
        out(r, c) = -1.0 / std::log(static_cast<double>(ranks[r]) / (finite + 1));
      }
    }
  }
  return out;
}

Matrix uniform_scores(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix out(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t finite = 0;
    const auto ranks = column_ranks(x.data() + c, n, d, &finite);
    for (std::size_t r = 0; r < n; ++r)
      out(r, c) = ranks[r] == 0 ? kNaN : static_cast<double>(ranks[r]) / finite;
  }
  return out;
}

double empirical_chi(const double* us, const double* ut, std::size_t n, double u,
                     bool* corrected, bool* undefined) {
  if (corrected) *corrected = false;
  if (undefined) *undefined = false;
  if (!(u > 0.0 && u < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  std::size_t n_eff = 0, cm = 0, cj = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = us[i], b = ut[i];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    ++n_eff;
    if (a < u) {
      ++cm;
      if (b < u) ++cj;
    }
  }
  if (n_eff == 0) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  if (cj == cm && cm > 0) return 1.0;  // log ratio is exactly 1
  if (cm == n_eff) return 0.0;         // marginal log vanishes; limit of Eq. ratio
  if (cm == 0) {
    cm = 1;
    cj = 1;
    if (corrected) *corrected = true;
  } else if (cj == 0) {
    cj = 1;
    if (corrected) *corrected = true;
  }
  const double nn = static_cast<double>(n_eff);
  const double v = 2.0 - std::log(cj / nn) / std::log(cm / nn);
  return clamp(v, 0.0, 1.0);
}

double empirical_chibar(const double* us, const double* ut, std::size_t n, double u,
                        bool* corrected, bool* undefined) {
  if (corrected) *corrected = false;
  if (undefined) *undefined = false;
  if (!(u > 0.0 && u < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  std::size_t n_eff = 0, cm = 0, cj = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = us[i], b = ut[i];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    ++n_eff;
    if (a > u) {
      ++cm;
      if (b > u) ++cj;
    }
  }
  if (n_eff == 0) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  if (cj == cm && cm > 0) return 1.0;
  if (cm == 0) {
    cm = 1;
    cj = 1;
    if (corrected) *corrected = true;
  } else if (cj == 0) {
    cj = 1;
    if (corrected) *corrected = true;
  }
  const double nn = static_cast<double>(n_eff);
  const double v = 2.0 * std::log(cm / nn) / std::log(cj / nn) - 1.0;
  return clamp(v, -1.0, 1.0);
}

DependenceTensor dependence_tensor(const Matrix& scores, double u, TensorQuality* quality) {
  const std::size_t d = scores.cols(), n = scores.rows();
  if (d < 2) throw ConfigError("dependence tensor needs at least two sites");
  TensorQuality q;
  // column-major copy so each pair walks contiguous memory
  Matrix cols(d, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) cols(c, r) = scores(r, c);

  DependenceTensor t;
  t.d = d;
  t.u = u;
  t.chi = Matrix(d, d, 1.0);
  t.chibar = Matrix(d, d, 1.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      bool corr = false, undef = false;
      const double chi = empirical_chi(cols.row(i), cols.row(j), n, u, &corr, &undef);
      if (corr) ++q.corrected_cells;
      if (undef) ++q.undefined_cells;
      const double chibar =
          empirical_chibar(cols.row(i), cols.row(j), n, u, &corr, &undef);
      if (corr) ++q.corrected_cells;
      if (undef) ++q.undefined_cells;
      t.chi(i, j) = chi;
      t.chi(j, i) = chi;
      t.chibar(i, j) = chibar;
      t.chibar(j, i) = chibar;
    }
  if (quality) *quality = q;
  return t;
}

std::vector<ProfilePoint> directional_tail_profile(const Matrix& scores,
                                                   const SiteSet& sites, double u,
                                                   std::size_t n_bins) {
  const std::size_t d = sites.size();
  if (d < 2) throw ConfigError("directional profile needs at least two sites");
  if (scores.cols() != d) throw ConfigError("score columns do not match the site count");
  if (n_bins < 1) throw ConfigError("need at least one distance bin");
  const std::size_t n = scores.rows();

  Matrix cols(d, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) cols(c, r) = scores(r, c);

  double hmax = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) hmax = std::max(hmax, sites.distance(i, j));

  const double width = hmax / static_cast<double>(n_bins);
  struct Acc {
    double chi = 0.0, chibar = 0.0;
    std::size_t count = 0;
  };
  std::vector<Acc> acc(4 * n_bins);

  constexpr double pi = std::numbers::pi;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double dx = sites[j].x - sites[i].x;
      const double dy = sites[j].y - sites[i].y;
      // bearing 0 = north, positive clockwise; pairs are undirected so fold
      // onto (-pi/8, 7pi/8]
      double b = std::atan2(dx, dy);
      while (b <= -pi / 8.0) b += pi;
      while (b > 7.0 * pi / 8.0) b -= pi;
      int cls;
      if (b <= pi / 8.0) cls = 0;
      else if (b <= 3.0 * pi / 8.0) cls = 1;
      else if (b <= 5.0 * pi / 8.0) cls = 2;
      else cls = 3;

      const double h = sites.distance(i, j);
      std::size_t bin = width > 0.0 ? static_cast<std::size_t>(h / width) : 0;
      if (bin >= n_bins) bin = n_bins - 1;

      bool undef_chi = false, undef_cb = false;
      const double chi =
          empirical_chi(cols.row(i), cols.row(j), n, u, nullptr, &undef_chi);
      const double chibar =
          empirical_chibar(cols.row(i), cols.row(j), n, u, nullptr, &undef_cb);
      if (undef_chi || undef_cb) continue;
      Acc& a = acc[static_cast<std::size_t>(cls) * n_bins + bin];
      a.chi += chi;
      a.chibar += chibar;
      ++a.count;
    }

  std::vector<ProfilePoint> out;
  for (int cls = 0; cls < 4; ++cls)
    for (std::size_t bin = 0; bin < n_bins; ++bin) {
      const Acc& a = acc[static_cast<std::size_t>(cls) * n_bins + bin];
      if (a.count == 0) continue;
      ProfilePoint p;
      p.direction = cls;
      p.h = (static_cast<double>(bin) + 0.5) * width;
      p.chi = a.chi / a.count;
      p.chibar = a.chibar / a.count;
      p.pairs = a.count;
      out.push_back(p);
    }
  return out;
}

}  // namespace taildep
