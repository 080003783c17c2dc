// Shared value types for the AR saliency toolkit.
//
// Every grid is row-major with the origin at the top-left corner, x growing
// to the right and y growing downward. Pixel values are linear reals; 8-bit
// conversion happens only at file boundaries.

#ifndef ARSAL_CORE_HPP
#define ARSAL_CORE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace arsal {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a file cannot be read, parsed or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw ValidationError("grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> values) : width_(width), height_(height), data_(std::move(values)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ValidationError("grid data size does not match its dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using CountGrid = Grid<int>;

/// RGB content plus its per-pixel transparency matrix (1 = opaque content).
class ViewportImage {
 public:
  ViewportImage() = default;
  /// Validates ranges; throws ValidationError on out-of-range or mismatched planes.
  ViewportImage(std::array<RealGrid, 3> rgb, RealGrid alpha);
  /// Opaque image (alpha all ones).
  explicit ViewportImage(std::array<RealGrid, 3> rgb);

  static ViewportImage filled(int width, int height, double r, double g, double b, double alpha = 1.0);

  int width() const { return alpha_.width(); }
  int height() const { return alpha_.height(); }
  const RealGrid& channel(int c) const { return rgb_.at(static_cast<std::size_t>(c)); }
  const std::array<RealGrid, 3>& rgb() const { return rgb_; }
  const RealGrid& alpha() const { return alpha_; }

  /// Mean of the three channels.
  RealGrid gray() const;

  friend bool operator==(const ViewportImage&, const ViewportImage&) = default;

 private:
  std::array<RealGrid, 3> rgb_;
  RealGrid alpha_;
};

/// Global opacity applied to AR content; any value in (0, 1].
class MixingLevel {
 public:
  explicit MixingLevel(double value);
  double value() const { return value_; }
  /// True for the three levels used by the dataset layout (0.25, 0.5, 0.75).
  bool is_dataset_level() const;

 private:
  double value_;
};

struct ViewportSpec {
  int width_px = 1440;
  int height_px = 1600;
  double fov_h_deg = 110.0;
  /// Defaults to the value giving square pixels at the default resolution.
  double fov_v_deg = 115.56282340491357;
  double center_lat_deg = 0.0;
  double center_long_deg = 0.0;

  void validate() const;
  /// Horizontal pixels per degree of visual angle.
  double pixels_per_degree() const { return width_px / fov_h_deg; }
  /// Vertical FOV that makes pixels square for the given resolution and horizontal FOV.
  static double square_pixel_fov_v(int width_px, int height_px, double fov_h_deg);
};

enum class NormalizationState { kRaw, kSumToOne, kZScored, kMinMax };
enum class NormalizeMode { kSumToOne, kZScored, kMinMax };

std::string_view to_string(NormalizationState state);
NormalizationState normalization_state_from_string(std::string_view text);

/// Continuous saliency grid with its normalization state.
struct SaliencyDensity {
  RealGrid grid;
  NormalizationState state = NormalizationState::kRaw;
  /// Set when normalization hit a degenerate input (all-zero or constant grid).
  bool degenerate = false;

  int width() const { return grid.width(); }
  int height() const { return grid.height(); }
};

struct PixelPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Discrete fixation locations and the per-pixel count grid derived from them.
class FixationMap {
 public:
  FixationMap() = default;
  FixationMap(int width, int height, std::vector<PixelPos> fixations);

  int width() const { return counts_.width(); }
  int height() const { return counts_.height(); }
  const CountGrid& counts() const { return counts_; }
  const std::vector<PixelPos>& fixations() const { return fixations_; }
  std::size_t fixation_count() const { return fixations_.size(); }

 private:
  CountGrid counts_;
  std::vector<PixelPos> fixations_;
};

SaliencyDensity normalize(const SaliencyDensity& density, NormalizeMode mode);
SaliencyDensity normalize(const RealGrid& grid, NormalizeMode mode);

double grid_sum(const RealGrid& grid);
/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// Bilinear resize with pixel-centre alignment.
RealGrid resize_bilinear(const RealGrid& src, int width, int height);
/// Area-weighted (box) resampling; preferred over bilinear when shrinking.
RealGrid resize_area(const RealGrid& src, int width, int height);
/// resize_area when shrinking along both axes, bilinear otherwise.
RealGrid resize(const RealGrid& src, int width, int height);
/// Separable Gaussian blur, kernel truncated at 4 sigma, reflected borders.
RealGrid gaussian_blur(const RealGrid& src, double sigma);

}  // namespace arsal

#endif  // ARSAL_CORE_HPP
