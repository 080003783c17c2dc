// Saliency evaluation suite: AUC (Judd), shuffled AUC, CC, NSS, SIM, KL and IG.
//
// Conventions: population standard deviation; epsilon = 1e-7 in every log
// denominator; a constant map correlates as 0 and z-scores to all zeros.

#ifndef ARSAL_METRICS_HPP
#define ARSAL_METRICS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "arsal/core.hpp"

namespace arsal::metrics {

inline constexpr double kEpsilon = 1e-7;

double cc(const RealGrid& a, const RealGrid& b);
double nss(const RealGrid& pred, const FixationMap& fm);
double sim(const RealGrid& a, const RealGrid& b);
/// KL(gt || pred) over sum-to-one grids.
double kl(const RealGrid& pred, const RealGrid& gt);
double auc_judd(const RealGrid& pred, const FixationMap& fm);
/// Shuffled AUC; negatives are drawn from `negative_pool` (equal count to the
/// positives, without replacement when the pool is large enough).
double sauc(const RealGrid& pred, const FixationMap& fm, const std::vector<PixelPos>& negative_pool,
            std::uint64_t seed);
/// Area under the ROC curve of positive vs negative scores (ties count half).
double auc_from_scores(std::vector<double> positives, std::vector<double> negatives);
/// Information gain in bits per fixation over `baseline`.
double ig(const RealGrid& pred, const RealGrid& baseline, const FixationMap& fm);

/// Isotropic Gaussian centred in the frame with sigma = width / 4, sum-to-one.
RealGrid center_prior(int width, int height);

enum class Metric { kAuc, kSauc, kCc, kNss, kSim, kKl, kIg };
inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::kAuc, Metric::kSauc, Metric::kCc, Metric::kNss,
                                                      Metric::kSim, Metric::kKl,   Metric::kIg};
std::string_view metric_name(Metric m);

struct MetricReport {
  std::string scenario_id;
  std::string model_id;
  std::string fusion_type;
  int fold_id = -1;
  std::array<double, 7> values{};
  /// Human-readable notes for degenerate inputs; metrics that could not be computed are NaN.
  std::vector<std::string> flags;

  double get(Metric m) const { return values[static_cast<std::size_t>(m)]; }
  void set(Metric m, double v) { values[static_cast<std::size_t>(m)] = v; }
};

struct EvaluationInputs {
  const RealGrid* pred = nullptr;
  const SaliencyDensity* gt_density = nullptr;
  const FixationMap* fixations = nullptr;
  const std::vector<PixelPos>* negative_pool = nullptr;
  /// Defaults to center_prior when null.
  const RealGrid* baseline = nullptr;
  std::uint64_t seed = 0;
};

/// Computes all seven metrics. Degenerate inputs are flagged, never thrown.
MetricReport evaluate_all(const EvaluationInputs& in);

}  // namespace arsal::metrics

#endif  // ARSAL_METRICS_HPP
