#include "arsal/compositor.hpp"

#include <cmath>
#include <numbers>

namespace arsal {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Basis {
  Direction forward;
  Direction right;
  Direction up;
};

double dot(const Direction& a, const Direction& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Basis viewport_basis(const ViewportSpec& spec) {
  const double lat = spec.center_lat_deg * kDeg;
  const double lon = spec.center_long_deg * kDeg;
  Basis b;
  b.forward = direction_from_latlong(spec.center_lat_deg, spec.center_long_deg);
  b.right = {std::cos(lon), 0.0, -std::sin(lon)};
  // up = forward x right
  b.up = {-std::sin(lat) * std::sin(lon), std::cos(lat), -std::sin(lat) * std::cos(lon)};
  return b;
}

double wrap_long(double long_deg) {
  double l = std::fmod(long_deg, 360.0);
  if (l > 180.0) l -= 360.0;
  if (l <= -180.0) l += 360.0;
  return l;
}

}  // namespace

Direction direction_from_latlong(double lat_deg, double long_deg) {
  const double lat = lat_deg * kDeg;
  const double lon = long_deg * kDeg;
  return {std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon)};
}

std::pair<double, double> latlong_from_direction(const Direction& d) {
  const double norm = std::sqrt(dot(d, d));
  const double lat = std::asin(std::clamp(d.y / norm, -1.0, 1.0)) / kDeg;
  const double lon = wrap_long(std::atan2(d.x, d.z) / kDeg);
  return {lat, lon};
}

std::optional<ViewportPoint> project_to_viewport(double lat_deg, double long_deg, const ViewportSpec& spec) {
  const Basis b = viewport_basis(spec);
  const Direction d = direction_from_latlong(lat_deg, long_deg);
  const double depth = dot(d, b.forward);
  if (!(depth > 1e-12)) {
    return std::nullopt;
  }
  const double tx = dot(d, b.right) / depth;
  const double ty = dot(d, b.up) / depth;
  const double half_w = std::tan(spec.fov_h_deg * kDeg / 2.0);
  const double half_h = std::tan(spec.fov_v_deg * kDeg / 2.0);
  ViewportPoint p{spec.width_px / 2.0 * (1.0 + tx / half_w), spec.height_px / 2.0 * (1.0 - ty / half_h)};
  // Tolerate rounding at the exact field-of-view boundary.
  constexpr double kEdge = 1e-9;
  if (p.x < -kEdge || p.x > spec.width_px + kEdge || p.y < -kEdge || p.y > spec.height_px + kEdge) {
    return std::nullopt;
  }
  return p;
}

std::pair<double, double> unproject_from_viewport(double x, double y, const ViewportSpec& spec) {
  const Basis b = viewport_basis(spec);
  const double tx = (2.0 * x / spec.width_px - 1.0) * std::tan(spec.fov_h_deg * kDeg / 2.0);
  const double ty = (1.0 - 2.0 * y / spec.height_px) * std::tan(spec.fov_v_deg * kDeg / 2.0);
  const Direction d{b.forward.x + tx * b.right.x + ty * b.up.x, b.forward.y + tx * b.right.y + ty * b.up.y,
                    b.forward.z + tx * b.right.z + ty * b.up.z};
  return latlong_from_direction(d);
}

namespace compositor {

ViewportImage extract_viewport(const ViewportImage& bg_equirect, const ViewportSpec& spec) {
  spec.validate();
  const int ew = bg_equirect.width();
  const int eh = bg_equirect.height();
  if (std::abs(ew - 2 * eh) > 1) {
    throw ValidationError("equirectangular background must be twice as wide as it is tall (got " +
                          std::to_string(ew) + "x" + std::to_string(eh) + ")");
  }
  std::array<RealGrid, 3> out{RealGrid(spec.width_px, spec.height_px), RealGrid(spec.width_px, spec.height_px),
                              RealGrid(spec.width_px, spec.height_px)};
  for (int y = 0; y < spec.height_px; ++y) {
    for (int x = 0; x < spec.width_px; ++x) {
      const auto [lat, lon] = unproject_from_viewport(x + 0.5, y + 0.5, spec);
      // Continuous equirect coordinates, pixel centres at i + 0.5.
      const double u = (lon + 180.0) / 360.0 * ew - 0.5;
      const double v = std::clamp((90.0 - lat) / 180.0 * eh - 0.5, 0.0, eh - 1.0);
      const int u0 = static_cast<int>(std::floor(u));
      const int v0 = static_cast<int>(std::floor(v));
      const double wu = u - u0;
      const double wv = v - v0;
      const int ua = ((u0 % ew) + ew) % ew;
      const int ub = (ua + 1) % ew;
      const int va = v0;
      const int vb = std::min(v0 + 1, eh - 1);
      for (int c = 0; c < 3; ++c) {
        const RealGrid& src = bg_equirect.channel(c);
        const double top = src(ua, va) * (1.0 - wu) + src(ub, va) * wu;
        const double bottom = src(ua, vb) * (1.0 - wu) + src(ub, vb) * wu;
        out[static_cast<std::size_t>(c)](x, y) = std::clamp(top * (1.0 - wv) + bottom * wv, 0.0, 1.0);
      }
    }
  }
  return ViewportImage(std::move(out));
}

ViewportImage pad_ar(const ViewportImage& ar, const ViewportSpec& spec, Placement placement) {
  spec.validate();
  if (ar.width() > spec.width_px || ar.height() > spec.height_px) {
    throw ValidationError("AR content (" + std::to_string(ar.width()) + "x" + std::to_string(ar.height()) +
                          ") is larger than the viewport (" + std::to_string(spec.width_px) + "x" +
                          std::to_string(spec.height_px) + ")");
  }
  const int left = (spec.width_px - ar.width()) / 2 + placement.offset_x;
  const int top = (spec.height_px - ar.height()) / 2 + placement.offset_y;
  if (left < 0 || top < 0 || left + ar.width() > spec.width_px || top + ar.height() > spec.height_px) {
    throw ValidationError("AR placement offset moves content outside the viewport");
  }
  std::array<RealGrid, 3> rgb{RealGrid(spec.width_px, spec.height_px, 0.0),
                              RealGrid(spec.width_px, spec.height_px, 0.0),
                              RealGrid(spec.width_px, spec.height_px, 0.0)};
  RealGrid alpha(spec.width_px, spec.height_px, 0.0);
  for (int y = 0; y < ar.height(); ++y) {
    for (int x = 0; x < ar.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb[static_cast<std::size_t>(c)](left + x, top + y) = ar.channel(c)(x, y);
      }
      alpha(left + x, top + y) = ar.alpha()(x, y);
    }
  }
  return ViewportImage(std::move(rgb), std::move(alpha));
}

ViewportImage composite(const ViewportImage& ar_padded, const ViewportImage& bg_viewport, MixingLevel alpha) {
  if (ar_padded.width() != bg_viewport.width() || ar_padded.height() != bg_viewport.height()) {
    throw ValidationError("composite inputs differ in size (" + std::to_string(ar_padded.width()) + "x" +
                          std::to_string(ar_padded.height()) + " vs " + std::to_string(bg_viewport.width()) + "x" +
                          std::to_string(bg_viewport.height()) + ")");
  }
  const int w = ar_padded.width();
  const int h = ar_padded.height();
  std::array<RealGrid, 3> out{RealGrid(w, h), RealGrid(w, h), RealGrid(w, h)};
  const RealGrid& ia = ar_padded.alpha();
  for (int c = 0; c < 3; ++c) {
    const RealGrid& ar = ar_padded.channel(c);
    const RealGrid& bg = bg_viewport.channel(c);
    RealGrid& dst = out[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < dst.size(); ++i) {
      // Clamp guards the last-ulp overshoot of a convex combination.
      dst[i] = std::clamp(blend(ar[i], bg[i], ia[i], alpha.value()), 0.0, 1.0);
    }
  }
  return ViewportImage(std::move(out));
}

}  // namespace compositor
}  // namespace arsal
