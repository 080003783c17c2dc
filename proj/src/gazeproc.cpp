#include "arsal/gazeproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace arsal::gaze {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double normalize_long(double long_deg) {
  double l = std::fmod(long_deg, 360.0);
  if (l > 180.0) l -= 360.0;
  if (l <= -180.0) l += 360.0;
  return l;
}

double mean_abs_deviation(std::span<const double> values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double mad = 0.0;
  for (double v : values) mad += std::abs(v - mean);
  return mad / static_cast<double>(values.size());
}

double position_mad(const std::vector<GazePoint>& trace, std::size_t first, std::size_t count) {
  std::vector<GazePoint> window(trace.begin() + static_cast<std::ptrdiff_t>(first),
                                trace.begin() + static_cast<std::ptrdiff_t>(first + count));
  const auto [clat, clong] = spherical_centroid(window);
  double total = 0.0;
  for (const auto& p : window) total += great_circle_deg(p.lat_deg, p.long_deg, clat, clong);
  return total / static_cast<double>(count);
}

}  // namespace

void FixationParams::validate() const {
  if (window_samples <= 0 || window_samples % 2 == 0) {
    throw ValidationError("window_samples must be a positive odd count");
  }
  if (!(mad_threshold_deg_per_s > 0.0) || !(min_duration_ms > 0.0) || !(sample_rate_hz > 0.0)) {
    throw ValidationError("fixation thresholds and sample rate must be positive");
  }
}

GazePoint euler_to_latlong(const GazeSample& s) {
  if (!std::isfinite(s.timestamp_ms) || !std::isfinite(s.pitch_deg) || !std::isfinite(s.yaw_deg) ||
      !std::isfinite(s.roll_deg)) {
    throw ValidationError("gaze sample contains a non-finite value");
  }
  // Pitch beyond the poles folds back over the top of the sphere.
  double lat = std::fmod(s.pitch_deg, 360.0);
  if (lat > 180.0) lat -= 360.0;
  if (lat <= -180.0) lat += 360.0;
  double lon = s.yaw_deg;
  if (lat > 90.0) {
    lat = 180.0 - lat;
    lon += 180.0;
  } else if (lat < -90.0) {
    lat = -180.0 - lat;
    lon += 180.0;
  }
  return {s.timestamp_ms, lat, normalize_long(lon)};
}

std::vector<GazePoint> euler_to_latlong(const std::vector<GazeSample>& trace) {
  std::vector<GazePoint> out;
  out.reserve(trace.size());
  for (const auto& s : trace) out.push_back(euler_to_latlong(s));
  return out;
}

double great_circle_deg(double lat1, double long1, double lat2, double long2) {
  const double p1 = lat1 * kDeg;
  const double p2 = lat2 * kDeg;
  const double dl = (long2 - long1) * kDeg;
  const double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
  // The cosine form loses precision for small separations; switch to haversine there.
  if (c > 0.999) {
    const double sp = std::sin((p2 - p1) / 2.0);
    const double sl = std::sin(dl / 2.0);
    const double h = sp * sp + std::cos(p1) * std::cos(p2) * sl * sl;
    return 2.0 * std::asin(std::min(1.0, std::sqrt(h))) / kDeg;
  }
  return std::acos(std::clamp(c, -1.0, 1.0)) / kDeg;
}

std::vector<double> angular_velocity(const std::vector<GazePoint>& trace) {
  if (trace.size() < 2) {
    throw ValidationError("angular velocity needs at least two samples");
  }
  std::vector<double> v;
  v.reserve(trace.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const double dt = trace[i + 1].timestamp_ms - trace[i].timestamp_ms;
    if (!(dt > 0.0)) {
      throw ValidationError("gaze timestamps must be strictly increasing (sample " + std::to_string(i + 1) + ")");
    }
    const double d = great_circle_deg(trace[i].lat_deg, trace[i].long_deg, trace[i + 1].lat_deg, trace[i + 1].long_deg);
    v.push_back(d / (dt / 1000.0));
  }
  return v;
}

std::pair<double, double> spherical_centroid(const std::vector<GazePoint>& points) {
  Direction sum;
  for (const auto& p : points) {
    const Direction d = direction_from_latlong(p.lat_deg, p.long_deg);
    sum.x += d.x;
    sum.y += d.y;
    sum.z += d.z;
  }
  return latlong_from_direction(sum);
}

DetectionResult detect_fixations(const std::vector<GazePoint>& trace, const FixationParams& params) {
  params.validate();
  DetectionResult result;
  const auto window = static_cast<std::size_t>(params.window_samples);
  if (trace.size() < window || trace.size() < 2) {
    result.warning = "trace has " + std::to_string(trace.size()) + " samples, fewer than the " +
                     std::to_string(window) + "-sample window";
    return result;
  }
  const std::vector<double> velocity = angular_velocity(trace);
  const std::size_t n = trace.size();
  const std::size_t half = window / 2;

  // Each window labels its centre sample; edge samples take the nearest full window.
  std::vector<bool> candidate(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double mad = 0.0;
    if (params.mad_source == MadSource::kVelocity) {
      const std::size_t nv = velocity.size();
      if (nv >= window) {
        const std::size_t c = std::clamp(i, half, nv - 1 - half);
        mad = mean_abs_deviation(std::span<const double>(velocity).subspan(c - half, window));
      } else {
        mad = mean_abs_deviation(velocity);
      }
    } else {
      const std::size_t c = std::clamp(i, half, n - 1 - half);
      mad = position_mad(trace, c - half, window) * params.sample_rate_hz;
    }
    candidate[i] = mad < params.mad_threshold_deg_per_s;
  }

  std::size_t i = 0;
  while (i < n) {
    if (!candidate[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && candidate[j + 1]) ++j;
    const double onset = trace[i].timestamp_ms;
    const double duration = trace[j].timestamp_ms - onset;
    if (duration >= params.min_duration_ms) {
      std::vector<GazePoint> members(trace.begin() + static_cast<std::ptrdiff_t>(i),
                                     trace.begin() + static_cast<std::ptrdiff_t>(j + 1));
      const auto [lat, lon] = spherical_centroid(members);
      result.fixations.push_back({lat, lon, onset, duration});
    }
    i = j + 1;
  }
  return result;
}

std::optional<ViewportPoint> latlong_to_viewport_px(const GazePoint& p, const ViewportSpec& spec) {
  spec.validate();
  return project_to_viewport(p.lat_deg, p.long_deg, spec);
}

FixationMapBuild build_fixation_map(const std::vector<Fixation>& fixations, const ViewportSpec& spec) {
  spec.validate();
  std::vector<PixelPos> pixels;
  FixationMapBuild build;
  build.total = fixations.size();
  for (const auto& f : fixations) {
    const auto p = project_to_viewport(f.lat_deg, f.long_deg, spec);
    if (!p) {
      ++build.out_of_viewport;
      continue;
    }
    const int x = std::clamp(static_cast<int>(std::floor(p->x)), 0, spec.width_px - 1);
    const int y = std::clamp(static_cast<int>(std::floor(p->y)), 0, spec.height_px - 1);
    pixels.push_back({x, y});
  }
  build.map = FixationMap(spec.width_px, spec.height_px, std::move(pixels));
  return build;
}

SaliencyDensity density_from_fixations(const FixationMap& fm, const ViewportSpec& spec, double sigma_deg) {
  if (fm.width() != spec.width_px || fm.height() != spec.height_px) {
    throw ValidationError("fixation map size does not match the viewport spec");
  }
  if (!(sigma_deg > 0.0)) {
    throw ValidationError("Gaussian sigma must be positive");
  }
  const double sigma = sigma_pixels(spec, sigma_deg);
  const int radius = static_cast<int>(std::floor(4.0 * sigma));
  const double cutoff2 = 16.0 * sigma * sigma;
  std::vector<double> profile(static_cast<std::size_t>(radius + 1));
  for (int d = 0; d <= radius; ++d) profile[static_cast<std::size_t>(d)] = std::exp(-0.5 * d * d / (sigma * sigma));

  RealGrid grid(fm.width(), fm.height(), 0.0);
  const CountGrid& counts = fm.counts();
  for (int cy = 0; cy < counts.height(); ++cy) {
    for (int cx = 0; cx < counts.width(); ++cx) {
      const int count = counts(cx, cy);
      if (count == 0) continue;
      const int y0 = std::max(0, cy - radius);
      const int y1 = std::min(grid.height() - 1, cy + radius);
      const int x0 = std::max(0, cx - radius);
      const int x1 = std::min(grid.width() - 1, cx + radius);
      for (int y = y0; y <= y1; ++y) {
        const int dy = std::abs(y - cy);
        for (int x = x0; x <= x1; ++x) {
          const int dx = std::abs(x - cx);
          if (static_cast<double>(dx * dx + dy * dy) > cutoff2) continue;
          grid(x, y) += count * profile[static_cast<std::size_t>(dx)] * profile[static_cast<std::size_t>(dy)];
        }
      }
    }
  }
  if (fm.fixation_count() == 0) {
    return SaliencyDensity{std::move(grid), NormalizationState::kRaw, true};
  }
  return normalize(grid, NormalizeMode::kSumToOne);
}

}  // namespace arsal::gaze
