// Constructed pop-out scenes shared by the unit and acceptance tests. Each
// scene reports the bounds of its single salient target.

#ifndef ARSAL_TESTS_POPOUT_FIXTURES_HPP
#define ARSAL_TESTS_POPOUT_FIXTURES_HPP

#include <array>
#include <string>
#include <vector>

#include "arsal/core.hpp"

namespace popout {

struct Box {
  int x0, y0, x1, y1;  // inclusive
  bool contains(int x, int y, int slack = 0) const {
    return x >= x0 - slack && x <= x1 + slack && y >= y0 - slack && y <= y1 + slack;
  }
};

struct Scene {
  std::string name;
  arsal::ViewportImage image;
  Box target;
};

inline arsal::ViewportImage paint(int w, int h, std::array<double, 3> fill,
                                  const std::vector<std::pair<Box, std::array<double, 3>>>& boxes) {
  std::array<arsal::RealGrid, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = arsal::RealGrid(w, h, fill[c]);
    for (const auto& [b, col] : boxes) {
      for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) rgb[c](x, y) = col[c];
      }
    }
  }
  return arsal::ViewportImage(std::move(rgb));
}

// Bright 4x4 patch on black, off centre.
inline Scene bright_patch() {
  const Box t{84, 30, 87, 33};
  return {"bright-patch", paint(128, 96, {0, 0, 0}, {{t, {1, 1, 1}}}), t};
}

// Red square on a green field. The colours differ in intensity as well, so
// the grey-level spectral models also see the square.
inline Scene red_on_green() {
  const Box t{36, 70, 51, 85};
  return {"red-on-green", paint(128, 128, {0.1, 0.6, 0.1}, {{t, {0.9, 0.1, 0.1}}}), t};
}

// Lattice of vertical bars with one horizontal bar. The bars need to span
// several pyramid levels, hence the larger canvas.
inline Scene odd_bar() {
  std::vector<std::pair<Box, std::array<double, 3>>> bars;
  Box target{};
  for (int gy = 0; gy < 6; ++gy) {
    for (int gx = 0; gx < 6; ++gx) {
      const int cx = 48 + gx * 84, cy = 48 + gy * 84;
      const bool odd = gx == 4 && gy == 1;
      const Box b = odd ? Box{cx - 26, cy - 6, cx + 26, cy + 6} : Box{cx - 6, cy - 26, cx + 6, cy + 26};
      if (odd) target = b;
      bars.push_back({b, {1, 1, 1}});
    }
  }
  return {"odd-bar", paint(512, 512, {0, 0, 0}, bars), target};
}

inline std::vector<Scene> all_scenes() { return {bright_patch(), red_on_green(), odd_bar()}; }

}  // namespace popout

#endif  // ARSAL_TESTS_POPOUT_FIXTURES_HPP
