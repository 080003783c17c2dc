// Classical bottom-up saliency predictors: Spectral Residual, phase-only
// Fourier transform and the Itti-Koch centre-surround model.

#ifndef ARSAL_SALMODELS_HPP
#define ARSAL_SALMODELS_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arsal/core.hpp"

namespace arsal::models {

struct SpectralParams {
  int work_width = 64;
  double blur_sigma = 2.5;
  /// Bins with amplitude below this fraction of the peak carry no usable phase and are dropped.
  double amplitude_floor = 1e-9;
};

struct IttiParams {
  int min_short_side = 256;
  int levels = 9;
  std::vector<int> centers{2, 3, 4};
  std::vector<int> deltas{3, 4};
  /// Level at which across-scale sums are formed.
  int output_level = 4;
  double gabor_sigma = 2.0;
  double gabor_wavelength = 6.0;
  int gabor_radius = 5;
  /// Local maxima below this fraction of the range are ignored by N(.).
  double local_max_threshold = 0.1;
};

struct ModelConfig {
  SpectralParams spectral;
  IttiParams itti;

  static ModelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

SaliencyDensity spectral_residual(const ViewportImage& img, const SpectralParams& params = {});
SaliencyDensity pft(const ViewportImage& img, const SpectralParams& params = {});
SaliencyDensity itti(const ViewportImage& img, const IttiParams& params = {});

/// Itti normalization operator: scale to [0,1], then weight by (1 - mean of the other local maxima)^2.
RealGrid itti_normalize(const RealGrid& map, double local_max_threshold = 0.1);

/// A saliency model usable as the base predictor of the fusion benchmarks.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string_view name() const = 0;
  /// Output matches the input size, min-max normalized to [0,1].
  virtual SaliencyDensity predict(const ViewportImage& img) const = 0;
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>(const ModelConfig&)>;

/// Name -> factory table; ships with IT, SR and PFT and accepts additional models.
class Registry {
 public:
  static Registry& global();

  void add(std::string name, PredictorFactory factory);
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;
  /// Throws ValidationError for unknown ids.
  std::unique_ptr<Predictor> create(std::string_view name, const ModelConfig& config = {}) const;

 private:
  Registry();
  std::map<std::string, PredictorFactory, std::less<>> factories_;
};

inline std::unique_ptr<Predictor> make_predictor(std::string_view name, const ModelConfig& config = {}) {
  return Registry::global().create(name, config);
}

}  // namespace arsal::models

#endif  // ARSAL_SALMODELS_HPP
