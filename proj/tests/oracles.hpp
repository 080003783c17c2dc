// Independent brute-force reference implementations used by the tests.
// They deliberately avoid the library's own helpers (normalize, mean_std,
// auc_from_scores, ...) so that a shared bug cannot hide on both sides.

#ifndef ARSAL_TESTS_ORACLES_HPP
#define ARSAL_TESTS_ORACLES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Map = std::vector<double>;  // row-major
using Points = std::vector<std::pair<int, int>>;

constexpr double kEps = 1e-7;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Alpha blend, written straight from the compositing formula.
inline double composite(double ar, double bg, double transparency, double alpha) {
  return alpha * transparency * ar + (1.0 - alpha * transparency) * bg;
}

inline double mean(const Map& m) {
  long double s = 0;
  for (double v : m) s += v;
  return static_cast<double>(s / m.size());
}

inline double pearson(const Map& a, const Map& b) {
  const double ma = mean(a), mb = mean(b);
  long double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return static_cast<double>(num / std::sqrt(da * db));
}

inline Map to_distribution(const Map& m) {
  long double s = 0;
  for (double v : m) s += v;
  Map out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = s == 0 ? 0.0 : static_cast<double>(m[i] / s);
  return out;
}

inline double similarity(const Map& a, const Map& b) {
  const Map p = to_distribution(a), q = to_distribution(b);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] < q[i] ? p[i] : q[i];
  return s;
}

// KL(gt || pred) with epsilon in the denominator.
inline double kl_div(const Map& pred, const Map& gt) {
  const Map p = to_distribution(pred), q = to_distribution(gt);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] > 0) s += q[i] * std::log(q[i] / (p[i] + kEps));
  }
  return s;
}

inline double nss(const Map& pred, int w, const Points& fix) {
  const double m = mean(pred);
  double ss = 0;
  for (double v : pred) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / pred.size());
  if (sd == 0) return 0.0;
  double s = 0;
  for (auto [x, y] : fix) s += (pred[static_cast<std::size_t>(y * w + x)] - m) / sd;
  return s / fix.size();
}

// AUC-Judd by threshold enumeration: thresholds are the fixated values, the
// false-positive rate counts non-fixated pixels at or above the threshold.
inline double auc_judd(const Map& pred, int w, const Points& fix) {
  std::vector<bool> fixated(pred.size(), false);
  for (auto [x, y] : fix) fixated[static_cast<std::size_t>(y * w + x)] = true;
  std::set<double, std::greater<>> thresholds;
  for (auto [x, y] : fix) thresholds.insert(pred[static_cast<std::size_t>(y * w + x)]);
  std::size_t n_neg = 0;
  for (bool f : fixated) n_neg += f ? 0 : 1;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (auto [x, y] : fix) tp += pred[static_cast<std::size_t>(y * w + x)] >= t ? 1 : 0;
    for (std::size_t i = 0; i < pred.size(); ++i) fp += (!fixated[i] && pred[i] >= t) ? 1 : 0;
    pts.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / fix.size()});
  }
  pts.push_back({1.0, 1.0});
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2;
  }
  return area;
}

// Mann-Whitney form of the ROC area: P(pos > neg) + 0.5 P(pos == neg).
inline double auc_pairwise(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos) {
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return s / (static_cast<double>(pos.size()) * neg.size());
}

inline double info_gain(const Map& pred, const Map& base, int w, const Points& fix) {
  const Map p = to_distribution(pred), b = to_distribution(base);
  double s = 0;
  for (auto [x, y] : fix) {
    const auto i = static_cast<std::size_t>(y * w + x);
    s += std::log2(p[i] + kEps) - std::log2(b[i] + kEps);
  }
  return s / fix.size();
}

inline Map center_gaussian(int w, int h) {
  Map g(static_cast<std::size_t>(w * h));
  const double sigma = w / 4.0, cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      g[static_cast<std::size_t>(y * w + x)] =
          std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * sigma * sigma));
    }
  }
  return to_distribution(g);
}

// Haversine great-circle distance in degrees.
inline double haversine_deg(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
  const double dp = p2 - p1, dl = deg2rad(lon2 - lon1);
  const double a = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2 * std::asin(std::min(1.0, std::sqrt(a))) * 180.0 / std::numbers::pi;
}

// Gnomonic projection for a viewport centred on the equator.
struct Plane {
  double x, y;
};
inline Plane gnomonic(double lat, double lon, double center_long, int w, int h, double fov_h, double fov_v) {
  const double dl = deg2rad(lon - center_long);
  const double px = std::tan(dl);
  const double py = std::tan(deg2rad(lat)) / std::cos(dl);
  return {w / 2.0 * (1 + px / std::tan(deg2rad(fov_h / 2))), h / 2.0 * (1 - py / std::tan(deg2rad(fov_v / 2)))};
}

// Sum of isotropic Gaussians truncated at 4 sigma, then sum-to-one.
inline Map gaussian_density(int w, int h, const Points& fix, double sigma) {
  Map g(static_cast<std::size_t>(w * h), 0.0);
  for (auto [fx, fy] : fix) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - fx) * (x - fx) + (y - fy) * (y - fy);
        if (d2 <= 16 * sigma * sigma) g[static_cast<std::size_t>(y * w + x)] += std::exp(-d2 / (2 * sigma * sigma));
      }
    }
  }
  return to_distribution(g);
}

// Ordinary least squares for y ~ X w + b (3 features) via normal equations
// solved by Gauss-Jordan elimination.
inline std::vector<double> least_squares(const std::vector<std::array<double, 3>>& X, const std::vector<double>& y) {
  double A[4][5] = {};
  for (std::size_t n = 0; n < X.size(); ++n) {
    const double row[4] = {X[n][0], X[n][1], X[n][2], 1.0};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) A[i][j] += row[i] * row[j];
      A[i][4] += row[i] * y[n];
    }
  }
  // Gauss-Jordan with partial pivoting.
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r) {
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    }
    for (int k = 0; k < 5; ++k) std::swap(A[c][k], A[piv][k]);
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (int k = 0; k < 5; ++k) A[r][k] -= f * A[c][k];
    }
  }
  return {A[0][4] / A[0][0], A[1][4] / A[1][1], A[2][4] / A[2][2], A[3][4] / A[3][3]};
}

}  // namespace oracle

#endif  // ARSAL_TESTS_ORACLES_HPP
