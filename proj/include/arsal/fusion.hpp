// AR saliency from a base predictor S:
//   Type I    s = S(I_S)
//   Type II   s = a*S(I_AR) + (1-a)*S(I_BG)
//   Type III  s = regressor(S(I_AR), S(I_BG), S(I_S)) learned per pixel.

#ifndef ARSAL_FUSION_HPP
#define ARSAL_FUSION_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsal/core.hpp"
#include "arsal/salmodels.hpp"

namespace arsal::fusion {

SaliencyDensity type1(const models::Predictor& model, const ViewportImage& superimposed);

/// Convex mix of two already-predicted maps, each min-max normalized first.
/// No final normalization: the result is exactly linear in alpha.
RealGrid type2_mix(const RealGrid& s_ar, const RealGrid& s_bg, double alpha);
/// type2_mix followed by min-max.
SaliencyDensity type2(const RealGrid& s_ar, const RealGrid& s_bg, double alpha);
SaliencyDensity type2(const models::Predictor& model, const ViewportImage& ar_padded, const ViewportImage& bg_view,
                      double alpha);

struct RegressorConfig {
  double epsilon = 0.01;
  double c = 1.0;
  std::size_t max_samples = 100000;
  std::uint64_t seed = 0;
  /// Closed-form ridge regression instead of the SVR.
  bool use_ridge = false;
  double ridge_lambda = 1e-3;
  int max_epochs = 500;
  double tolerance = 1e-4;

  nlohmann::json to_json() const;
  static RegressorConfig from_json(const nlohmann::json& j);
};

struct FusionRegressor {
  /// Weights for (S(I_AR), S(I_BG), S(I_S)).
  std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double bias = 0.0;
  RegressorConfig config;
  std::string method = "svr";
  /// Set when training fell back to averaging weights.
  bool degenerate = false;
  std::size_t training_pixels = 0;
  std::vector<std::string> training_scenarios;

  double apply(double s_ar, double s_bg, double s_s) const {
    return weights[0] * s_ar + weights[1] * s_bg + weights[2] * s_s + bias;
  }

  nlohmann::json to_json() const;
  static FusionRegressor from_json(const nlohmann::json& j);
};

/// Per-pixel training triples, subsampled with a fixed seed.
class TrainingSet {
 public:
  /// `expected_images` spreads the pixel budget evenly across the images of a fold.
  TrainingSet(std::size_t max_samples, std::size_t expected_images, std::uint64_t seed);

  void add_image(const RealGrid& s_ar, const RealGrid& s_bg, const RealGrid& s_s, const RealGrid& target,
                 const std::string& scenario_id = {});
  void add_sample(std::array<double, 3> features, double target);

  const std::vector<std::array<double, 3>>& features() const { return features_; }
  const std::vector<double>& targets() const { return targets_; }
  const std::vector<std::string>& scenarios() const { return scenarios_; }
  std::size_t size() const { return targets_.size(); }

 private:
  std::size_t per_image_;
  std::uint64_t seed_;
  std::size_t images_ = 0;
  std::vector<std::array<double, 3>> features_;
  std::vector<double> targets_;
  std::vector<std::string> scenarios_;
};

FusionRegressor type3_train(const TrainingSet& data, const RegressorConfig& config);

struct Type3Output {
  SaliencyDensity density;
  bool degenerate = false;
};

/// Applies the regressor per pixel, clamps at zero and min-max normalizes.
Type3Output type3_predict(const FusionRegressor& reg, const RealGrid& s_ar, const RealGrid& s_bg, const RealGrid& s_s);

}  // namespace arsal::fusion

#endif  // ARSAL_FUSION_HPP
