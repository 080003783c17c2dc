// Superimposed viewport construction: viewport extraction from an
// equirectangular background, AR padding and alpha blending.

#ifndef ARSAL_COMPOSITOR_HPP
#define ARSAL_COMPOSITOR_HPP

#include <optional>

#include "arsal/core.hpp"

namespace arsal {

/// Unit direction for a (latitude, longitude) pair in degrees.
/// Axes: x toward longitude +90, y toward the north pole, z toward (0, 0).
struct Direction {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Direction direction_from_latlong(double lat_deg, double long_deg);
/// Inverse of direction_from_latlong; longitude in (-180, 180].
std::pair<double, double> latlong_from_direction(const Direction& d);

/// Continuous viewport coordinates in [0, W] x [0, H] (pixel i spans [i, i+1)).
struct ViewportPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Gnomonic projection of a sphere direction into the viewport, or nullopt when
/// the point is behind the viewer or outside the field of view.
std::optional<ViewportPoint> project_to_viewport(double lat_deg, double long_deg, const ViewportSpec& spec);
/// Sphere direction seen through continuous viewport coordinate (x, y).
std::pair<double, double> unproject_from_viewport(double x, double y, const ViewportSpec& spec);

namespace compositor {

/// Rectilinear viewport rendered from an equirectangular panorama with bilinear sampling.
ViewportImage extract_viewport(const ViewportImage& bg_equirect, const ViewportSpec& spec);

struct Placement {
  /// Offset in pixels added to the centred position.
  int offset_x = 0;
  int offset_y = 0;
};

/// Pads AR content to the viewport size; padded pixels get rgb = 0 and alpha = 0.
ViewportImage pad_ar(const ViewportImage& ar, const ViewportSpec& spec, Placement placement = {});

/// I_S = a*I_alpha*I_AR + (1 - a*I_alpha)*I_BG per pixel and channel; output alpha is all ones.
ViewportImage composite(const ViewportImage& ar_padded, const ViewportImage& bg_viewport, MixingLevel alpha);

/// Scalar form of the blend, exposed for callers working on single pixels.
inline double blend(double ar, double bg, double transparency, double alpha) {
  const double w = alpha * transparency;
  return w * ar + (1.0 - w) * bg;
}

}  // namespace compositor
}  // namespace arsal

#endif  // ARSAL_COMPOSITOR_HPP
