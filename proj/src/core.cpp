#include "arsal/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace arsal {

namespace {

void check_unit_range(const RealGrid& grid, const char* what) {
  for (double v : grid.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError(std::string(what) + " values must lie in [0,1]");
    }
  }
}

int reflect_index(int i, int n) {
  if (n == 1) {
    return 0;
  }
  // Reflect without repeating the edge sample: -1 -> 1, n -> n-2.
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) {
    i += period;
  }
  return i < n ? i : period - i;
}

}  // namespace

ViewportImage::ViewportImage(std::array<RealGrid, 3> rgb, RealGrid alpha)
    : rgb_(std::move(rgb)), alpha_(std::move(alpha)) {
  if (alpha_.width() <= 0 || alpha_.height() <= 0) {
    throw ValidationError("image width and height must be positive");
  }
  for (const auto& c : rgb_) {
    if (!c.same_shape(alpha_)) {
      throw ValidationError("image channel dimensions do not match");
    }
    check_unit_range(c, "colour");
  }
  check_unit_range(alpha_, "alpha");
}

ViewportImage::ViewportImage(std::array<RealGrid, 3> rgb)
    : ViewportImage(rgb, RealGrid(rgb[0].width(), rgb[0].height(), 1.0)) {}

ViewportImage ViewportImage::filled(int width, int height, double r, double g, double b, double alpha) {
  return ViewportImage({RealGrid(width, height, r), RealGrid(width, height, g), RealGrid(width, height, b)},
                       RealGrid(width, height, alpha));
}

RealGrid ViewportImage::gray() const {
  RealGrid out(width(), height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (rgb_[0][i] + rgb_[1][i] + rgb_[2][i]) / 3.0;
  }
  return out;
}

MixingLevel::MixingLevel(double value) : value_(value) {
  if (!(value > 0.0 && value <= 1.0)) {
    throw ValidationError("mixing level must lie in (0,1]");
  }
}

bool MixingLevel::is_dataset_level() const {
  return value_ == 0.25 || value_ == 0.5 || value_ == 0.75;
}

void ViewportSpec::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw ValidationError("viewport width and height must be positive");
  }
  if (!(fov_h_deg > 0.0 && fov_h_deg <= 180.0) || !(fov_v_deg > 0.0 && fov_v_deg <= 180.0)) {
    throw ValidationError("viewport FOV must lie in (0,180] degrees");
  }
  if (!std::isfinite(center_lat_deg) || !std::isfinite(center_long_deg)) {
    throw ValidationError("viewport centre must be finite");
  }
}

double ViewportSpec::square_pixel_fov_v(int width_px, int height_px, double fov_h_deg) {
  const double half_h = fov_h_deg * std::numbers::pi / 360.0;
  return 2.0 * std::atan(std::tan(half_h) * height_px / width_px) * 180.0 / std::numbers::pi;
}

std::string_view to_string(NormalizationState state) {
  switch (state) {
    case NormalizationState::kRaw:
      return "raw";
    case NormalizationState::kSumToOne:
      return "sum-to-one";
    case NormalizationState::kZScored:
      return "z-scored";
    case NormalizationState::kMinMax:
      return "min-max";
  }
  return "raw";
}

NormalizationState normalization_state_from_string(std::string_view text) {
  if (text == "raw") return NormalizationState::kRaw;
  if (text == "sum-to-one") return NormalizationState::kSumToOne;
  if (text == "z-scored") return NormalizationState::kZScored;
  if (text == "min-max") return NormalizationState::kMinMax;
  throw ValidationError("unknown normalization state '" + std::string(text) + "'");
}

FixationMap::FixationMap(int width, int height, std::vector<PixelPos> fixations)
    : counts_(width, height, 0), fixations_(std::move(fixations)) {
  for (const auto& p : fixations_) {
    if (!counts_.in_bounds(p.x, p.y)) {
      throw ValidationError("fixation (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                            ") lies outside the map");
    }
    ++counts_(p.x, p.y);
  }
}

double grid_sum(const RealGrid& grid) {
  return std::accumulate(grid.values().begin(), grid.values().end(), 0.0);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) {
    return {0.0, 0.0};
  }
  // A constant input is reported exactly; summing it could leave the mean an
  // ulp off and turn the spread into noise.
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / n)};
}

SaliencyDensity normalize(const RealGrid& grid, NormalizeMode mode) {
  for (double v : grid.values()) {
    if (!std::isfinite(v)) {
      throw ValidationError("cannot normalize a grid with non-finite values");
    }
  }
  SaliencyDensity out{grid, NormalizationState::kRaw, false};
  auto values = out.grid.values();
  switch (mode) {
    case NormalizeMode::kSumToOne: {
      out.state = NormalizationState::kSumToOne;
      const double total = grid_sum(grid);
      if (total <= 0.0) {
        std::fill(values.begin(), values.end(), 0.0);
        out.degenerate = true;
        break;
      }
      for (double& v : values) v /= total;
      break;
    }
    case NormalizeMode::kZScored: {
      out.state = NormalizationState::kZScored;
      const auto [mean, sd] = mean_std(grid.values());
      if (!(sd > 0.0)) {
        std::fill(values.begin(), values.end(), 0.0);
        out.degenerate = true;
        break;
      }
      for (double& v : values) v = (v - mean) / sd;
      break;
    }
    case NormalizeMode::kMinMax: {
      out.state = NormalizationState::kMinMax;
      if (values.empty()) break;
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      const double min = *lo;
      const double range = *hi - *lo;
      if (!(range > 0.0)) {
        std::fill(values.begin(), values.end(), 0.0);
        out.degenerate = true;
        break;
      }
      for (double& v : values) v = (v - min) / range;
      break;
    }
  }
  return out;
}

SaliencyDensity normalize(const SaliencyDensity& density, NormalizeMode mode) {
  SaliencyDensity out = normalize(density.grid, mode);
  out.degenerate = out.degenerate || density.degenerate;
  return out;
}

RealGrid resize_bilinear(const RealGrid& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.empty()) {
    throw ValidationError("resize target and source must be non-empty");
  }
  if (width == src.width() && height == src.height()) {
    return src;
  }
  RealGrid out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const double top = src(x0, y0) * (1.0 - wx) + src(x1, y0) * wx;
      const double bottom = src(x0, y1) * (1.0 - wx) + src(x1, y1) * wx;
      out(x, y) = top * (1.0 - wy) + bottom * wy;
    }
  }
  return out;
}

RealGrid gaussian_blur(const RealGrid& src, double sigma) {
  if (!(sigma > 0.0) || src.empty()) {
    return src;
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const int w = src.width();
  const int h = src.height();
  RealGrid tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src(reflect_index(x + k, w), y);
      }
      tmp(x, y) = acc;
    }
  }
  RealGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(x, reflect_index(y + k, h));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace arsal

namespace arsal {

namespace {

// Weights mapping n_src samples onto n_dst bins of equal width.
std::vector<std::vector<std::pair<int, double>>> area_weights(int n_src, int n_dst) {
  std::vector<std::vector<std::pair<int, double>>> weights(static_cast<std::size_t>(n_dst));
  const double scale = static_cast<double>(n_src) / n_dst;
  for (int i = 0; i < n_dst; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < std::min(n_src, static_cast<int>(std::ceil(hi))); ++s) {
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      if (overlap > 0.0) weights[static_cast<std::size_t>(i)].emplace_back(s, overlap / scale);
    }
  }
  return weights;
}

}  // namespace

RealGrid resize_area(const RealGrid& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.empty()) {
    throw ValidationError("resize target and source must be non-empty");
  }
  if (width == src.width() && height == src.height()) {
    return src;
  }
  const auto wx = area_weights(src.width(), width);
  const auto wy = area_weights(src.height(), height);
  RealGrid tmp(width, src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& [s, w] : wx[static_cast<std::size_t>(x)]) acc += w * src(s, y);
      tmp(x, y) = acc;
    }
  }
  RealGrid out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& [s, w] : wy[static_cast<std::size_t>(y)]) acc += w * tmp(x, s);
      out(x, y) = acc;
    }
  }
  return out;
}

RealGrid resize(const RealGrid& src, int width, int height) {
  if (width <= src.width() && height <= src.height()) {
    return resize_area(src, width, height);
  }
  return resize_bilinear(src, width, height);
}

}  // namespace arsal
