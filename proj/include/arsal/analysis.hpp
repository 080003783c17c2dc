// Dataset analysis: subject consistency, agreement across mixing levels,
// pair-preserving cross-validation splits and the k-fold benchmark.

#ifndef ARSAL_ANALYSIS_HPP
#define ARSAL_ANALYSIS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsal/core.hpp"
#include "arsal/fusion.hpp"
#include "arsal/metrics.hpp"
#include "arsal/vqsal.hpp"

namespace arsal::analysis {

enum class Category { kGraphic, kNatural, kWebpage };
inline constexpr std::array<Category, 3> kCategories{Category::kGraphic, Category::kNatural, Category::kWebpage};

std::string_view to_string(Category c);
Category category_from_string(std::string_view text);

/// One (AR, BG, alpha) triple of the manifest.
struct ScenarioRecord {
  std::string scenario_id;
  /// Identifies the (AR, BG) pair shared by the mixing variants.
  std::string pair_id;
  Category category = Category::kGraphic;
  std::filesystem::path ar_path;
  std::filesystem::path bg_path;
  double mixing = 0.5;
};

/// Columns: scenario_id, ar_path, bg_path, category, alpha, and optionally
/// pair_id (otherwise derived from the two paths). Relative paths resolve
/// against the manifest's directory.
std::vector<ScenarioRecord> load_manifest(const std::filesystem::path& path);

// ---- subject consistency -------------------------------------------------

/// Viewport fixations of each subject for one scenario.
struct SubjectFixations {
  std::string scenario_id;
  std::vector<std::vector<PixelPos>> subjects;
};

struct ConsistencyPoint {
  int n = 0;
  double mean_cc = 0.0;
  double std_cc = 0.0;
  std::size_t samples = 0;
};

struct ConsistencyResult {
  std::vector<ConsistencyPoint> curve;
  std::vector<std::string> warnings;
};

/// For each group size n, draws `trials` subsets of n subjects without
/// replacement per scenario and correlates the subset density with the
/// all-subject density.
ConsistencyResult subject_consistency_curve(const std::vector<SubjectFixations>& scenarios,
                                            const std::vector<int>& group_sizes, int trials, std::uint64_t seed,
                                            const ViewportSpec& spec, double sigma_deg = 3.34);

// ---- cross-mixing agreement -----------------------------------------------

/// Maps of one pair at alpha = 0.25, 0.5, 0.75 (m1, m2, m3).
struct MixingTriple {
  std::string pair_id;
  Category category = Category::kGraphic;
  std::array<RealGrid, 3> maps;
};

/// Pair order used throughout: (m1,m2), (m2,m3), (m1,m3).
inline constexpr std::array<std::array<int, 2>, 3> kMixingPairs{{{0, 1}, {1, 2}, {0, 2}}};
inline constexpr std::array<std::string_view, 3> kMixingPairNames{"m1&m2", "m2&m3", "m1&m3"};

struct PairStats {
  double cc_mean = 0.0;
  double cc_std = 0.0;
  double sim_mean = 0.0;
  double sim_std = 0.0;
  std::size_t count = 0;
};

struct CrossMixingRow {
  std::string pair_id;
  Category category = Category::kGraphic;
  std::array<double, 3> cc{};
  std::array<double, 3> sim{};
};

struct CrossMixingResult {
  std::vector<CrossMixingRow> rows;
  /// Keys: "graphic", "natural", "webpage", "all".
  std::map<std::string, std::array<PairStats, 3>> groups;

  nlohmann::json to_json() const;
};

CrossMixingResult cross_mixing_correlation(const std::vector<MixingTriple>& triples);

// ---- cross-validation -----------------------------------------------------

struct CvSplits {
  int k = 0;
  std::uint64_t seed = 0;
  /// Fold of each manifest record, in manifest order.
  std::vector<int> fold_of;

  std::vector<std::size_t> fold_records(int fold) const;
  std::vector<std::size_t> train_records(int fold) const;
};

/// Keeps all mixing variants of a pair in one fold and balances categories:
/// pairs are shuffled per category and dealt round-robin, continuing the deal
/// across categories.
CvSplits make_cv_splits(const std::vector<ScenarioRecord>& records, int k, std::uint64_t seed);

struct LeakageAudit {
  int fold = 0;
  std::vector<std::string> shared_scenarios;
  std::vector<std::string> shared_pairs;
  bool clean() const { return shared_scenarios.empty() && shared_pairs.empty(); }
  nlohmann::json to_json() const;
};

/// Intersection of training and test scenario/pair ids for one fold.
LeakageAudit audit_fold(const std::vector<ScenarioRecord>& records, const std::vector<std::size_t>& train,
                        const std::vector<std::size_t>& test, int fold);
/// Intersection between a learned component's training provenance and a test set.
LeakageAudit audit_provenance(const std::vector<std::string>& training_scenarios,
                              const std::vector<ScenarioRecord>& records, const std::vector<std::size_t>& test,
                              int fold);

// ---- benchmark ------------------------------------------------------------

/// Everything the benchmark needs for one scenario, already in viewport space.
struct BenchmarkScenario {
  ScenarioRecord record;
  ViewportImage ar_padded;
  ViewportImage bg_view;
  ViewportImage superimposed;
  SaliencyDensity gt;
  FixationMap fixations;
};

struct VqBenchmarkOptions {
  bool enabled = false;
  /// Square working resolution for the network (multiple of 4).
  int size = 32;
  vq::VQConfig config;
  vq::Schedule reconstruction;
  vq::Schedule saliency;
  vq::Schedule fusion;
};

struct BenchmarkConfig {
  std::vector<std::string> models{"IT", "SR", "PFT"};
  std::vector<int> types{1, 2, 3};
  int folds = 5;
  std::uint64_t seed = 0;
  fusion::RegressorConfig regressor;
  VqBenchmarkOptions vq;
  int jobs = 1;

  void validate() const;
};

struct BenchmarkResult {
  CvSplits splits;
  /// Ordered by manifest record, then model, then type.
  std::vector<metrics::MetricReport> reports;
  std::vector<LeakageAudit> audits;
  nlohmann::json aggregate;
};

std::string_view fusion_type_name(int type);

BenchmarkResult run_benchmark(const std::vector<BenchmarkScenario>& scenarios, const BenchmarkConfig& config);

/// Means and stds per (model, type), overall, per category and per mixing level.
/// NaN values are skipped and counted.
nlohmann::json aggregate_reports(const std::vector<metrics::MetricReport>& reports,
                                 const std::vector<ScenarioRecord>& records);

/// One CSV row per report: scenario_id, category, mixing, model, type, fold, seven metrics, flags.
std::string reports_csv(const std::vector<metrics::MetricReport>& reports, const std::vector<ScenarioRecord>& records);

}  // namespace arsal::analysis

#endif  // ARSAL_ANALYSIS_HPP
