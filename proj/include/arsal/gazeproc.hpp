// Gaze log processing: head/eye Euler angles to sphere coordinates, velocity,
// MAD-windowed fixation detection and ground-truth density generation.

#ifndef ARSAL_GAZEPROC_HPP
#define ARSAL_GAZEPROC_HPP

#include <optional>
#include <string>
#include <vector>

#include "arsal/compositor.hpp"
#include "arsal/core.hpp"

namespace arsal::gaze {

struct GazeSample {
  double timestamp_ms = 0.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
};

struct GazePoint {
  double timestamp_ms = 0.0;
  double lat_deg = 0.0;
  double long_deg = 0.0;
};

struct Fixation {
  double lat_deg = 0.0;
  double long_deg = 0.0;
  double onset_ms = 0.0;
  double duration_ms = 0.0;
};

/// Quantity whose mean absolute deviation is compared against the threshold.
enum class MadSource {
  /// MAD of the windowed angular velocities (deg/s).
  kVelocity,
  /// MAD of the windowed positions about their centroid (deg), scaled by the sample rate to deg/s.
  kPosition,
};

struct FixationParams {
  int window_samples = 7;
  double mad_threshold_deg_per_s = 50.0;
  double min_duration_ms = 100.0;
  double sample_rate_hz = 90.0;
  MadSource mad_source = MadSource::kVelocity;

  void validate() const;
};

struct DetectionResult {
  std::vector<Fixation> fixations;
  /// Non-empty when the trace could not be processed (e.g. shorter than the window).
  std::string warning;
};

GazePoint euler_to_latlong(const GazeSample& sample);
std::vector<GazePoint> euler_to_latlong(const std::vector<GazeSample>& trace);

/// Great-circle distance in degrees.
double great_circle_deg(double lat1, double long1, double lat2, double long2);

/// Velocity between consecutive points (deg/s); size is trace.size() - 1.
std::vector<double> angular_velocity(const std::vector<GazePoint>& trace);

DetectionResult detect_fixations(const std::vector<GazePoint>& trace, const FixationParams& params);

/// Normalized mean of unit vectors, returned as (lat, long).
std::pair<double, double> spherical_centroid(const std::vector<GazePoint>& points);

/// Viewport pixel position of a sphere point, or nullopt outside the field of view.
std::optional<ViewportPoint> latlong_to_viewport_px(const GazePoint& p, const ViewportSpec& spec);

struct FixationMapBuild {
  FixationMap map;
  std::size_t total = 0;
  std::size_t out_of_viewport = 0;
  double coverage() const { return total == 0 ? 1.0 : 1.0 - static_cast<double>(out_of_viewport) / total; }
};

/// Projects fixations into the viewport; out-of-view fixations are counted, not clamped.
FixationMapBuild build_fixation_map(const std::vector<Fixation>& fixations, const ViewportSpec& spec);

/// Isotropic Gaussian per fixation (sigma in degrees of visual angle), truncated
/// at 4 sigma, then sum-to-one normalization. An empty map yields an all-zero
/// grid flagged degenerate.
SaliencyDensity density_from_fixations(const FixationMap& fm, const ViewportSpec& spec, double sigma_deg = 3.34);

inline double sigma_pixels(const ViewportSpec& spec, double sigma_deg) { return sigma_deg * spec.pixels_per_degree(); }

}  // namespace arsal::gaze

#endif  // ARSAL_GAZEPROC_HPP
