#include "arsal/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "arsal/rng.hpp"

namespace arsal::fusion {

namespace {

void require_same_shape(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("fusion inputs differ in size");
  }
}

bool features_constant(const std::vector<std::array<double, 3>>& x) {
  for (std::size_t j = 0; j < 3; ++j) {
    for (const auto& row : x) {
      if (row[j] != x.front()[j]) return false;
    }
  }
  return true;
}

// Dual coordinate descent for L1-loss epsilon-SVR with the bias folded in as a
// constant feature (LIBLINEAR's solver without shrinking).
FusionRegressor fit_svr(const TrainingSet& data, const RegressorConfig& cfg) {
  const auto& x = data.features();
  const auto& y = data.targets();
  const std::size_t n = y.size();
  std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
  std::vector<double> beta(n, 0.0);
  std::vector<double> qdiag(n);
  for (std::size_t i = 0; i < n; ++i) {
    qdiag[i] = x[i][0] * x[i][0] + x[i][1] * x[i][1] + x[i][2] * x[i][2] + 1.0;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  const double upper = cfg.c;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double max_violation = 0.0;
    for (std::size_t i : order) {
      const auto& xi = x[i];
      const double g = w[0] * xi[0] + w[1] * xi[1] + w[2] * xi[2] + w[3] - y[i];
      const double gp = g + cfg.epsilon;
      const double gn = g - cfg.epsilon;
      const double b = beta[i];
      double violation = 0.0;
      if (b == 0.0) {
        violation = std::max({0.0, -gp, gn});
      } else if (b >= upper) {
        violation = std::max(0.0, gp);
      } else if (b <= -upper) {
        violation = std::max(0.0, -gn);
      } else if (b > 0.0) {
        violation = std::abs(gp);
      } else {
        violation = std::abs(gn);
      }
      max_violation = std::max(max_violation, violation);
      if (violation == 0.0) continue;
      const double h = qdiag[i];
      double d = 0.0;
      if (gp < h * b) {
        d = -gp / h;
      } else if (gn > h * b) {
        d = -gn / h;
      } else {
        d = -b;
      }
      const double nb = std::clamp(b + d, -upper, upper);
      const double delta = nb - b;
      if (delta == 0.0) continue;
      beta[i] = nb;
      w[0] += delta * xi[0];
      w[1] += delta * xi[1];
      w[2] += delta * xi[2];
      w[3] += delta;
    }
    if (max_violation < cfg.tolerance) break;
  }
  FusionRegressor reg;
  reg.weights = {w[0], w[1], w[2]};
  reg.bias = w[3];
  reg.method = "svr";
  return reg;
}

FusionRegressor fit_ridge(const TrainingSet& data, const RegressorConfig& cfg) {
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d aty = Eigen::Vector4d::Zero();
  const auto& x = data.features();
  const auto& y = data.targets();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Eigen::Vector4d row(x[i][0], x[i][1], x[i][2], 1.0);
    ata.noalias() += row * row.transpose();
    aty.noalias() += row * y[i];
  }
  // The bias is not penalized.
  for (int j = 0; j < 3; ++j) ata(j, j) += cfg.ridge_lambda;
  const Eigen::Vector4d sol = ata.ldlt().solve(aty);
  FusionRegressor reg;
  reg.weights = {sol[0], sol[1], sol[2]};
  reg.bias = sol[3];
  reg.method = "ridge";
  return reg;
}

}  // namespace

SaliencyDensity type1(const models::Predictor& model, const ViewportImage& superimposed) {
  return normalize(model.predict(superimposed), NormalizeMode::kMinMax);
}

RealGrid type2_mix(const RealGrid& s_ar, const RealGrid& s_bg, double alpha) {
  require_same_shape(s_ar, s_bg);
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("Type II mixing value must lie in [0,1]");
  }
  // A constant map has no range to stretch and enters the mix as given.
  auto rescale = [](const RealGrid& g) {
    SaliencyDensity n = normalize(g, NormalizeMode::kMinMax);
    return n.degenerate ? g : std::move(n.grid);
  };
  const RealGrid a = rescale(s_ar);
  const RealGrid b = rescale(s_bg);
  RealGrid out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return out;
}

SaliencyDensity type2(const RealGrid& s_ar, const RealGrid& s_bg, double alpha) {
  return normalize(type2_mix(s_ar, s_bg, alpha), NormalizeMode::kMinMax);
}

SaliencyDensity type2(const models::Predictor& model, const ViewportImage& ar_padded, const ViewportImage& bg_view,
                      double alpha) {
  return type2(model.predict(ar_padded).grid, model.predict(bg_view).grid, alpha);
}

nlohmann::json RegressorConfig::to_json() const {
  return {{"epsilon", epsilon},           {"C", c},
          {"max_samples", max_samples},   {"seed", seed},
          {"use_ridge", use_ridge},       {"ridge_lambda", ridge_lambda},
          {"max_epochs", max_epochs},     {"tolerance", tolerance}};
}

RegressorConfig RegressorConfig::from_json(const nlohmann::json& j) {
  RegressorConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.c = j.value("C", c.c);
  c.max_samples = j.value("max_samples", c.max_samples);
  c.seed = j.value("seed", c.seed);
  c.use_ridge = j.value("use_ridge", c.use_ridge);
  c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.tolerance = j.value("tolerance", c.tolerance);
  return c;
}

nlohmann::json FusionRegressor::to_json() const {
  return {{"weights", weights},
          {"bias", bias},
          {"method", method},
          {"degenerate", degenerate},
          {"training_pixels", training_pixels},
          {"training_scenarios", training_scenarios},
          {"config", config.to_json()}};
}

FusionRegressor FusionRegressor::from_json(const nlohmann::json& j) {
  FusionRegressor r;
  try {
    r.weights = j.at("weights").get<std::array<double, 3>>();
    r.bias = j.at("bias").get<double>();
    r.method = j.value("method", std::string("svr"));
    r.degenerate = j.value("degenerate", false);
    r.training_pixels = j.value("training_pixels", std::size_t{0});
    r.training_scenarios = j.value("training_scenarios", std::vector<std::string>{});
    if (j.contains("config")) r.config = RegressorConfig::from_json(j["config"]);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed regressor checkpoint: ") + e.what());
  }
  return r;
}

TrainingSet::TrainingSet(std::size_t max_samples, std::size_t expected_images, std::uint64_t seed)
    : per_image_(expected_images == 0 ? max_samples : (max_samples + expected_images - 1) / expected_images),
      seed_(seed) {}

void TrainingSet::add_image(const RealGrid& s_ar, const RealGrid& s_bg, const RealGrid& s_s, const RealGrid& target,
                            const std::string& scenario_id) {
  require_same_shape(s_ar, s_bg);
  require_same_shape(s_ar, s_s);
  require_same_shape(s_ar, target);
  Rng rng(seed_ + 0x9e3779b97f4a7c15ULL * (images_ + 1));
  const auto picks = sample_without_replacement(rng, s_ar.size(), per_image_);
  for (std::size_t i : picks) {
    features_.push_back({s_ar[i], s_bg[i], s_s[i]});
    targets_.push_back(target[i]);
  }
  ++images_;
  if (!scenario_id.empty()) scenarios_.push_back(scenario_id);
}

void TrainingSet::add_sample(std::array<double, 3> features, double target) {
  features_.push_back(features);
  targets_.push_back(target);
}

FusionRegressor type3_train(const TrainingSet& data, const RegressorConfig& config) {
  FusionRegressor reg;
  if (data.size() == 0 || features_constant(data.features())) {
    reg.degenerate = true;
    reg.method = "average";
  } else {
    reg = config.use_ridge ? fit_ridge(data, config) : fit_svr(data, config);
  }
  reg.config = config;
  reg.training_pixels = data.size();
  reg.training_scenarios = data.scenarios();
  return reg;
}

Type3Output type3_predict(const FusionRegressor& reg, const RealGrid& s_ar, const RealGrid& s_bg, const RealGrid& s_s) {
  require_same_shape(s_ar, s_bg);
  require_same_shape(s_ar, s_s);
  RealGrid out(s_ar.width(), s_ar.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, reg.apply(s_ar[i], s_bg[i], s_s[i]));
  Type3Output result;
  result.density = normalize(out, NormalizeMode::kMinMax);
  result.degenerate = result.density.degenerate;
  return result;
}

}  // namespace arsal::fusion
