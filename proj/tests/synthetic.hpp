// Synthetic datasets for the analysis tests and the acceptance run.

#ifndef ARSAL_TESTS_SYNTHETIC_HPP
#define ARSAL_TESTS_SYNTHETIC_HPP

#include <cmath>
#include <string>
#include <vector>

#include "arsal/analysis.hpp"
#include "arsal/compositor.hpp"
#include "arsal/gazeproc.hpp"
#include "arsal/rng.hpp"

namespace synthetic {

using arsal::analysis::Category;
using arsal::analysis::ScenarioRecord;

inline constexpr double kLevels[3] = {0.25, 0.5, 0.75};

/// `pairs_per_category` pairs per category, each at the three mixing levels.
inline std::vector<ScenarioRecord> manifest(int pairs_per_category) {
  std::vector<ScenarioRecord> out;
  for (Category c : arsal::analysis::kCategories) {
    const std::string cat(arsal::analysis::to_string(c));
    for (int p = 0; p < pairs_per_category; ++p) {
      const std::string pair = cat + "-" + std::to_string(p);
      for (int m = 0; m < 3; ++m) {
        ScenarioRecord r;
        r.scenario_id = pair + "-m" + std::to_string(m + 1);
        r.pair_id = pair;
        r.category = c;
        r.ar_path = "ar/" + pair + ".png";
        r.bg_path = "bg/" + pair + ".png";
        r.mixing = kLevels[m];
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

/// Sum of a few Gaussian blobs at random places.
inline arsal::RealGrid blobs(arsal::Rng& rng, int w, int h, int count) {
  arsal::RealGrid g(w, h, 0.0);
  for (int b = 0; b < count; ++b) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h), s = rng.uniform(2.0, 5.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) g(x, y) += std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
    }
  }
  return g;
}

/// Triples whose middle map is the average of the outer two.
inline std::vector<arsal::analysis::MixingTriple> averaged_triples(int n, std::uint64_t seed, int w = 24, int h = 20) {
  arsal::Rng rng(seed);
  std::vector<arsal::analysis::MixingTriple> out;
  for (int i = 0; i < n; ++i) {
    arsal::analysis::MixingTriple t;
    t.pair_id = "pair" + std::to_string(i);
    t.category = arsal::analysis::kCategories[static_cast<std::size_t>(i % 3)];
    t.maps[0] = blobs(rng, w, h, 3);
    t.maps[2] = blobs(rng, w, h, 3);
    t.maps[1] = arsal::RealGrid(w, h);
    for (std::size_t k = 0; k < t.maps[1].size(); ++k) t.maps[1][k] = 0.5 * (t.maps[0][k] + t.maps[2][k]);
    out.push_back(std::move(t));
  }
  return out;
}

inline arsal::ViewportSpec small_spec(int w, int h, double fov_h = 90.0) {
  arsal::ViewportSpec s;
  s.width_px = w;
  s.height_px = h;
  s.fov_h_deg = fov_h;
  s.fov_v_deg = arsal::ViewportSpec::square_pixel_fov_v(w, h, fov_h);
  return s;
}

/// In-memory benchmark scenarios: a bright AR square over a textured
/// background, with fixations drawn around the square and a background spot.
inline std::vector<arsal::analysis::BenchmarkScenario> benchmark_scenarios(int pairs_per_category, std::uint64_t seed,
                                                                          int w = 32, int h = 24) {
  using namespace arsal;
  Rng rng(seed);
  const ViewportSpec spec = small_spec(w, h);
  std::vector<analysis::BenchmarkScenario> out;
  for (const ScenarioRecord& rec : manifest(pairs_per_category)) {
    Rng pr(seed ^ std::hash<std::string>{}(rec.pair_id));
    const int ax = 4 + static_cast<int>(pr.index(static_cast<std::uint64_t>(w - 12)));
    const int ay = 4 + static_cast<int>(pr.index(static_cast<std::uint64_t>(h - 12)));
    std::array<RealGrid, 3> argb{RealGrid(w, h, 0.0), RealGrid(w, h, 0.0), RealGrid(w, h, 0.0)};
    RealGrid alpha(w, h, 0.0);
    for (int y = ay; y < ay + 5; ++y) {
      for (int x = ax; x < ax + 5; ++x) {
        argb[0](x, y) = 0.95;
        argb[1](x, y) = 0.9;
        argb[2](x, y) = 0.2;
        alpha(x, y) = 1.0;
      }
    }
    std::array<RealGrid, 3> brgb;
    const RealGrid texture = blobs(pr, w, h, 4);
    double tmax = 0;
    for (double v : texture.values()) tmax = std::max(tmax, v);
    for (auto& c : brgb) {
      c = texture;
      for (double& v : c.values()) v = 0.1 + 0.5 * v / tmax;
    }
    analysis::BenchmarkScenario s;
    s.record = rec;
    s.ar_padded = ViewportImage(std::move(argb), std::move(alpha));
    s.bg_view = ViewportImage(std::move(brgb));
    s.superimposed = compositor::composite(s.ar_padded, s.bg_view, MixingLevel(rec.mixing));
    // More looks at the AR square as alpha grows.
    std::vector<PixelPos> fix;
    const int on_ar = static_cast<int>(std::lround(12 * rec.mixing));
    for (int i = 0; i < 12; ++i) {
      const bool ar = i < on_ar;
      const int cx = ar ? ax + 2 : static_cast<int>(pr.index(static_cast<std::uint64_t>(w)));
      const int cy = ar ? ay + 2 : static_cast<int>(pr.index(static_cast<std::uint64_t>(h)));
      const int x = std::clamp(cx + static_cast<int>(rng.index(3)) - 1, 0, w - 1);
      const int y = std::clamp(cy + static_cast<int>(rng.index(3)) - 1, 0, h - 1);
      fix.push_back({x, y});
    }
    s.fixations = FixationMap(w, h, fix);
    s.gt = gaze::density_from_fixations(s.fixations, spec, 3.34);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace synthetic

#endif  // ARSAL_TESTS_SYNTHETIC_HPP
