#include "arsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arsal/rng.hpp"

namespace arsal::metrics {

namespace {

void require_same_shape(const RealGrid& a, const RealGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": grids differ in size");
  }
}

void require_fixations(const RealGrid& pred, const FixationMap& fm, const char* what) {
  if (pred.width() != fm.width() || pred.height() != fm.height()) {
    throw ValidationError(std::string(what) + ": prediction and fixation map differ in size");
  }
  if (fm.fixation_count() == 0) {
    throw ValidationError(std::string(what) + ": at least one fixation is required");
  }
}

RealGrid sum_to_one(const RealGrid& g) { return normalize(g, NormalizeMode::kSumToOne).grid; }

}  // namespace

double cc(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "CC");
  const double ma = mean_std(a.values()).first;
  const double mb = mean_std(b.values()).first;
  double saa = 0.0;
  double sbb = 0.0;
  double sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    return 0.0;
  }
  // sqrt(s*s) == s exactly, so identical maps give exactly 1.
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double nss(const RealGrid& pred, const FixationMap& fm) {
  require_fixations(pred, fm, "NSS");
  const RealGrid z = normalize(pred, NormalizeMode::kZScored).grid;
  double total = 0.0;
  for (const auto& p : fm.fixations()) total += z(p.x, p.y);
  return total / static_cast<double>(fm.fixation_count());
}

double sim(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "SIM");
  const RealGrid na = sum_to_one(a);
  const RealGrid nb = sum_to_one(b);
  double total = 0.0;
  for (std::size_t i = 0; i < na.size(); ++i) total += std::min(na[i], nb[i]);
  return total;
}

double kl(const RealGrid& pred, const RealGrid& gt) {
  require_same_shape(pred, gt, "KL");
  const RealGrid p = sum_to_one(pred);
  const RealGrid q = sum_to_one(gt);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] > 0.0) total += q[i] * std::log(q[i] / (p[i] + kEpsilon));
  }
  return total;
}

double auc_judd(const RealGrid& pred, const FixationMap& fm) {
  require_fixations(pred, fm, "AUC");
  const CountGrid& counts = fm.counts();
  std::vector<double> positives;
  positives.reserve(fm.fixation_count());
  for (const auto& p : fm.fixations()) positives.push_back(pred(p.x, p.y));
  std::vector<double> negatives;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (counts[i] == 0) negatives.push_back(pred[i]);
  }
  if (negatives.empty()) {
    throw ValidationError("AUC: every pixel is fixated, no negatives remain");
  }
  std::sort(positives.begin(), positives.end(), std::greater<>());
  std::sort(negatives.begin(), negatives.end(), std::greater<>());

  // Thresholds at each distinct fixated value, highest first.
  // Trapezoids are summed in count units (exact integers) and scaled once.
  double twice_area = 0.0;
  std::size_t ip = 0;
  std::size_t in = 0;
  std::size_t prev_ip = 0;
  std::size_t prev_in = 0;
  while (ip < positives.size()) {
    const double t = positives[ip];
    while (ip < positives.size() && positives[ip] >= t) ++ip;
    while (in < negatives.size() && negatives[in] >= t) ++in;
    twice_area += static_cast<double>(in - prev_in) * static_cast<double>(ip + prev_ip);
    prev_ip = ip;
    prev_in = in;
  }
  twice_area += static_cast<double>(negatives.size() - prev_in) * static_cast<double>(positives.size() + prev_ip);
  return twice_area / (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

double auc_from_scores(std::vector<double> positives, std::vector<double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw ValidationError("AUC needs at least one positive and one negative");
  }
  std::sort(positives.begin(), positives.end(), std::greater<>());
  std::sort(negatives.begin(), negatives.end(), std::greater<>());
  double twice_area = 0.0;
  std::size_t ip = 0;
  std::size_t in = 0;
  std::size_t prev_ip = 0;
  std::size_t prev_in = 0;
  while (ip < positives.size() || in < negatives.size()) {
    double t = -std::numeric_limits<double>::infinity();
    if (ip < positives.size()) t = std::max(t, positives[ip]);
    if (in < negatives.size()) t = std::max(t, negatives[in]);
    while (ip < positives.size() && positives[ip] >= t) ++ip;
    while (in < negatives.size() && negatives[in] >= t) ++in;
    twice_area += static_cast<double>(in - prev_in) * static_cast<double>(ip + prev_ip);
    prev_ip = ip;
    prev_in = in;
  }
  return twice_area / (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

double sauc(const RealGrid& pred, const FixationMap& fm, const std::vector<PixelPos>& negative_pool,
            std::uint64_t seed) {
  require_fixations(pred, fm, "sAUC");
  if (negative_pool.empty()) {
    throw ValidationError("sAUC: the negative fixation pool is empty");
  }
  std::vector<double> positives;
  positives.reserve(fm.fixation_count());
  for (const auto& p : fm.fixations()) positives.push_back(pred(p.x, p.y));
  Rng rng(seed);
  const std::size_t k = positives.size();
  std::vector<double> negatives;
  negatives.reserve(k);
  if (negative_pool.size() >= k) {
    for (std::size_t idx : sample_without_replacement(rng, negative_pool.size(), k)) {
      const PixelPos& p = negative_pool[idx];
      if (!pred.in_bounds(p.x, p.y)) throw ValidationError("sAUC: negative fixation outside the map");
      negatives.push_back(pred(p.x, p.y));
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      const PixelPos& p = negative_pool[static_cast<std::size_t>(rng.index(negative_pool.size()))];
      if (!pred.in_bounds(p.x, p.y)) throw ValidationError("sAUC: negative fixation outside the map");
      negatives.push_back(pred(p.x, p.y));
    }
  }
  return auc_from_scores(std::move(positives), std::move(negatives));
}

double ig(const RealGrid& pred, const RealGrid& baseline, const FixationMap& fm) {
  require_fixations(pred, fm, "IG");
  require_same_shape(pred, baseline, "IG");
  const RealGrid p = sum_to_one(pred);
  const RealGrid b = sum_to_one(baseline);
  double total = 0.0;
  for (const auto& f : fm.fixations()) {
    total += std::log2(p(f.x, f.y) + kEpsilon) - std::log2(b(f.x, f.y) + kEpsilon);
  }
  return total / static_cast<double>(fm.fixation_count());
}

RealGrid center_prior(int width, int height) {
  RealGrid g(width, height);
  const double sigma = width / 4.0;
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      g(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return sum_to_one(g);
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kAuc:
      return "auc";
    case Metric::kSauc:
      return "sauc";
    case Metric::kCc:
      return "cc";
    case Metric::kNss:
      return "nss";
    case Metric::kSim:
      return "sim";
    case Metric::kKl:
      return "kl";
    case Metric::kIg:
      return "ig";
  }
  return "?";
}

MetricReport evaluate_all(const EvaluationInputs& in) {
  MetricReport report;
  report.values.fill(std::numeric_limits<double>::quiet_NaN());
  if (in.pred == nullptr || in.gt_density == nullptr || in.fixations == nullptr) {
    report.flags.emplace_back("missing prediction, ground truth or fixations");
    return report;
  }
  const RealGrid& pred = *in.pred;
  const RealGrid& gt = in.gt_density->grid;
  const FixationMap& fm = *in.fixations;
  if (in.gt_density->degenerate) report.flags.emplace_back("ground-truth density is degenerate");
  if (fm.fixation_count() == 0) report.flags.emplace_back("no fixations in viewport");
  {
    const auto [mean, sd] = mean_std(pred.values());
    (void)mean;
    if (!(sd > 0.0)) report.flags.emplace_back("prediction is constant");
  }
  RealGrid fallback;
  const RealGrid* baseline = in.baseline;
  if (baseline == nullptr) {
    fallback = center_prior(pred.width(), pred.height());
    baseline = &fallback;
  }
  auto attempt = [&](Metric m, auto&& fn) {
    try {
      report.set(m, fn());
    } catch (const ValidationError& e) {
      report.flags.emplace_back(std::string(metric_name(m)) + ": " + e.what());
    }
  };
  attempt(Metric::kAuc, [&] { return auc_judd(pred, fm); });
  attempt(Metric::kSauc, [&] {
    if (in.negative_pool == nullptr) throw ValidationError("no negative pool supplied");
    return sauc(pred, fm, *in.negative_pool, in.seed);
  });
  attempt(Metric::kCc, [&] { return cc(pred, gt); });
  attempt(Metric::kNss, [&] { return nss(pred, fm); });
  attempt(Metric::kSim, [&] { return sim(pred, gt); });
  attempt(Metric::kKl, [&] { return kl(pred, gt); });
  attempt(Metric::kIg, [&] { return ig(pred, *baseline, fm); });
  return report;
}

}  // namespace arsal::metrics
