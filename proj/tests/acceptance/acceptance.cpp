// Acceptance run: one line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "arsal/analysis.hpp"
#include "arsal/compositor.hpp"
#include "arsal/fusion.hpp"
#include "arsal/gazeproc.hpp"
#include "arsal/metrics.hpp"
#include "arsal/pipeline.hpp"
#include "arsal/salmodels.hpp"
#include "arsal/vqsal.hpp"
#include "gradcheck.hpp"
#include "popout_fixtures.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace arsal;
namespace fs = std::filesystem;

namespace {

// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  int count() const { return count_; }
  int failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }
  void note(const std::string& s) { notes_.push_back(s); }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  int count_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

ViewportImage random_image(Rng& rng, int w, int h, bool random_alpha, double lo = 0.0) {
  std::array<RealGrid, 3> rgb;
  for (auto& c : rgb) c = testutil::random_grid(rng, w, h, lo, 1.0);
  RealGrid a = random_alpha ? testutil::random_grid(rng, w, h) : RealGrid(w, h, 1.0);
  return ViewportImage(std::move(rgb), std::move(a));
}

// 1. Superimposition arithmetic.
void composite_exactness(Check& c) {
  Rng rng(101);
  double worst = 0;
  // 40 images of 5x5 pixels: 1000 pixel tuples, each with its own alpha map value.
  for (int t = 0; t < 40; ++t) {
    const ViewportImage ar = random_image(rng, 5, 5, true);
    const ViewportImage bg = random_image(rng, 5, 5, false);
    const double alpha = rng.uniform(1e-6, 1.0);
    const ViewportImage out = compositor::composite(ar, bg, MixingLevel(alpha));
    for (int ch = 0; ch < 3; ++ch) {
      for (std::size_t i = 0; i < out.channel(ch).size(); ++i) {
        const double e = oracle::composite(ar.channel(ch)[i], bg.channel(ch)[i], ar.alpha()[i], alpha);
        worst = std::max(worst, std::abs(out.channel(ch)[i] - e));
      }
    }
  }
  c.expect(worst <= 1e-12, "max deviation " + fmt(worst));
  c.note("1000 tuples, max |error| " + fmt(worst));

  // A vanishing level or a fully transparent AR pixel leaves the background.
  // Background values stay above 1e-3 so the residual AR term is below half an ulp.
  for (int t = 0; t < 20; ++t) {
    const ViewportImage ar = random_image(rng, 6, 4, true);
    const ViewportImage bg = random_image(rng, 6, 4, false, 1e-3);
    const ViewportImage clear({ar.channel(0), ar.channel(1), ar.channel(2)}, RealGrid(6, 4, 0.0));
    const ViewportImage tiny = compositor::composite(ar, bg, MixingLevel(1e-300));
    const ViewportImage hidden = compositor::composite(clear, bg, MixingLevel(rng.uniform(0.01, 1.0)));
    for (int ch = 0; ch < 3; ++ch) {
      c.expect(tiny.channel(ch) == bg.channel(ch), "alpha -> 0 differs from background");
      c.expect(hidden.channel(ch) == bg.channel(ch), "I_alpha = 0 differs from background");
    }
  }
}

// 2. Fixation detection on planted traces.
struct Planted {
  double lat, lon, onset, end;
};

void fixation_pipeline(Check& c) {
  const double dt = 1000.0 / 90.0;
  Rng rng(202);
  int planted_total = 0, detected_total = 0, matched_total = 0;
  double worst_err = 0;
  for (int trace_id = 0; trace_id < 50; ++trace_id) {
    std::vector<gaze::GazePoint> trace;
    std::vector<Planted> planted;
    double t = 0, lat = rng.uniform(-30, 30), lon = rng.uniform(-150, 150);
    const int n_fix = 3 + static_cast<int>(rng.index(4));
    for (int f = 0; f < n_fix; ++f) {
      const int samples = 18 + static_cast<int>(rng.index(30));  // 200 to 520 ms
      planted.push_back({lat, lon, t, t + (samples - 1) * dt});
      for (int s = 0; s < samples; ++s, t += dt) {
        trace.push_back({t, lat + 0.02 * rng.normal(), lon + 0.02 * rng.normal()});
      }
      if (f + 1 == n_fix) break;
      // Short saccade with a bell-shaped speed profile.
      const double nlat = std::clamp(lat + rng.uniform(-25, 25), -60.0, 60.0);
      const double nlon = lon + (rng.uniform(0, 1) < 0.5 ? -1 : 1) * rng.uniform(12, 30);
      const int steps = 3 + static_cast<int>(rng.index(3));
      for (int s = 1; s <= steps; ++s, t += dt) {
        const double u = 0.5 - 0.5 * std::cos(std::numbers::pi * s / (steps + 1));
        trace.push_back({t, lat + u * (nlat - lat), lon + u * (nlon - lon)});
      }
      lat = nlat;
      lon = nlon;
    }
    const auto detected = gaze::detect_fixations(trace, gaze::FixationParams{}).fixations;
    planted_total += static_cast<int>(planted.size());
    detected_total += static_cast<int>(detected.size());
    std::set<std::size_t> used;
    for (const auto& d : detected) {
      for (std::size_t j = 0; j < planted.size(); ++j) {
        const Planted& p = planted[j];
        if (used.count(j) || d.onset_ms < p.onset - 1e-9 || d.onset_ms > p.end) continue;
        const double err = gaze::great_circle_deg(d.lat_deg, d.long_deg, p.lat, p.lon);
        if (err > 1.0) continue;
        used.insert(j);
        ++matched_total;
        worst_err = std::max(worst_err, err);
        break;
      }
    }
  }
  const double recall = static_cast<double>(matched_total) / planted_total;
  const double precision = detected_total ? static_cast<double>(matched_total) / detected_total : 0.0;
  c.expect(recall == 1.0, "recall " + fmt(recall));
  c.expect(precision == 1.0, "precision " + fmt(precision));
  c.expect(worst_err < 0.1, "centroid error " + fmt(worst_err) + " deg");
  c.note(std::to_string(planted_total) + " planted, " + std::to_string(detected_total) + " detected, recall " +
         fmt(recall) + ", precision " + fmt(precision) + ", worst centroid error " + fmt(worst_err) + " deg");
}

// 3. Metrics against brute force and closed forms.
void metric_oracles(Check& c) {
  using namespace metrics;
  Rng rng(303);
  constexpr int W = 16, H = 16;
  const RealGrid prior = center_prior(W, H);
  const oracle::Map base = oracle::center_gaussian(W, H);
  double worst = 0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  for (int trial = 0; trial < 500; ++trial) {
    RealGrid pred = testutil::random_grid(rng, W, H);
    if (trial % 2) {
      for (double& v : pred.values()) v = std::round(v * 8.0) / 8.0;
    }
    const RealGrid gt = testutil::random_grid(rng, W, H);
    const int n = 1 + static_cast<int>(rng.index(24));
    std::vector<PixelPos> pts, pool;
    for (int i = 0; i < 2 * n; ++i) {
      PixelPos p{static_cast<int>(rng.index(W)), static_cast<int>(rng.index(H))};
      (i < n ? pts : pool).push_back(p);
    }
    const FixationMap fm(W, H, pts);
    oracle::Points fix;
    for (const auto& p : fm.fixations()) fix.emplace_back(p.x, p.y);
    const oracle::Map p = testutil::flat(pred), g = testutil::flat(gt);
    track(cc(pred, gt), oracle::pearson(p, g));
    track(nss(pred, fm), oracle::nss(p, W, fix));
    track(sim(pred, gt), oracle::similarity(p, g));
    track(kl(pred, gt), oracle::kl_div(p, g));
    track(auc_judd(pred, fm), oracle::auc_judd(p, W, fix));
    track(ig(pred, prior, fm), oracle::info_gain(p, base, W, fix));
    std::vector<double> pos, neg;
    for (auto [x, y] : fix) pos.push_back(p[static_cast<std::size_t>(y * W + x)]);
    for (const auto& q : pool) neg.push_back(p[static_cast<std::size_t>(q.y * W + q.x)]);
    track(sauc(pred, fm, pool, static_cast<std::uint64_t>(trial)), oracle::auc_pairwise(pos, neg));
  }
  c.expect(worst < 1e-9, "max deviation " + fmt(worst));
  c.note("500 instances x 7 metrics, max |error| " + fmt(worst));

  const RealGrid a = testutil::grid_of(2, 2, {0, 1, 1, 0});
  const RealGrid b = testutil::grid_of(2, 2, {1, 0, 0, 1});
  c.expect(cc(a, a) == 1.0, "CC(a,a) != 1");
  c.expect(cc(a, b) == -1.0, "CC(a,-a) != -1");
  c.expect(sim(a, b) == 0.0, "SIM of disjoint maps != 0");
  c.expect(std::abs(sim(a, a) - 1.0) < 1e-15, "SIM(a,a) != 1");
  const RealGrid r = testutil::random_grid(rng, 8, 8, 0.1, 1.0);
  c.expect(std::abs(kl(r, r)) <= 1e-5, "KL(p,p) = " + fmt(kl(r, r)));
  c.expect(auc_judd(RealGrid(6, 6, 0.3), FixationMap(6, 6, {{1, 1}, {4, 2}})) == 0.5, "constant-map AUC != 0.5");
  const double n3 = nss(testutil::grid_of(2, 2, {0, 0, 0, 1}), FixationMap(2, 2, {{1, 1}}));
  c.expect(std::abs(n3 - 1.732) < 1e-3, "NSS fixture " + fmt(n3));
}

// 4. Straight-through gradients.
void vq_gradients(Check& c) {
  const auto batch = gradcheck::toy_batch(2);
  auto run = [&](const char* label, vq::VQNet& net) {
    const gradcheck::Report r = gradcheck::check(net, batch);
    c.expect(r.failures == 0, std::string(label) + ": " + std::to_string(r.failures) + " entries off, worst ratio " +
                                  fmt(r.worst_ratio) + " in " + r.worst_param);
    c.note(std::string(label) + ": " + std::to_string(r.checked) + " entries, worst ratio " + fmt(r.worst_ratio));
  };
  vq::VQNet rec(gradcheck::toy_config(11));
  run("reconstruction", rec);

  vq::VQNet fine(gradcheck::toy_config(14));
  fine.init_saliency_decoder();
  fine.set_mode(vq::Mode::kSaliency);
  fine.backbone().set_frozen(false);
  run("saliency, all parameters", fine);

  vq::VQNet frozen(gradcheck::toy_config(12));
  frozen.init_saliency_decoder();
  frozen.set_mode(vq::Mode::kSaliency);
  run("saliency, frozen backbone", frozen);
  const auto grads = vq::straight_through_backward(frozen, batch);
  const auto params = frozen.parameters();
  std::size_t frozen_entries = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->frozen) continue;
    for (double g : grads[i].data) {
      ++frozen_entries;
      c.expect(g == 0.0, "nonzero gradient in frozen " + params[i]->name);
    }
  }
  c.expect(frozen_entries > 0, "no frozen parameters in saliency mode");
  c.note(std::to_string(frozen_entries) + " frozen entries, all exactly zero");
}

// 5. Fusion regressor and Type II.
void fusion_identifiability(Check& c) {
  using namespace fusion;
  const std::vector<std::array<double, 3>> truths{{0, 0, 1}, {0.5, 0.5, 0}, {0.2, 0.3, 0.5}};
  Rng rng(505);
  for (std::size_t k = 0; k < truths.size(); ++k) {
    const auto& w = truths[k];
    TrainingSet train(4000, 4, 60 + k);
    for (int i = 0; i < 4; ++i) {
      const RealGrid ar = testutil::random_grid(rng, 32, 32);
      const RealGrid bg = testutil::random_grid(rng, 32, 32);
      const RealGrid s = testutil::random_grid(rng, 32, 32);
      RealGrid target(32, 32);
      for (std::size_t j = 0; j < target.size(); ++j) target[j] = w[0] * ar[j] + w[1] * bg[j] + w[2] * s[j];
      train.add_image(ar, bg, s, target);
    }
    const FusionRegressor r = type3_train(train, RegressorConfig{});
    double err = 0;
    for (std::size_t j = 0; j < 3; ++j) err = std::max(err, std::abs(r.weights[j] - w[j]));
    c.expect(err < 0.05, "weights off by " + fmt(err));
    c.note("target (" + fmt(w[0]) + ", " + fmt(w[1]) + ", " + fmt(w[2]) + "): learned (" + fmt(r.weights[0]) + ", " +
           fmt(r.weights[1]) + ", " + fmt(r.weights[2]) + ")");
  }
  for (int t = 0; t < 10; ++t) {
    const RealGrid a = normalize(testutil::random_grid(rng, 9, 7), NormalizeMode::kMinMax).grid;
    const RealGrid b = normalize(testutil::random_grid(rng, 9, 7), NormalizeMode::kMinMax).grid;
    c.expect(type2_mix(a, b, 1.0) == a, "Type II at alpha 1 is not S(I_AR)");
    c.expect(type2_mix(a, b, 0.0) == b, "Type II at alpha 0 is not S(I_BG)");
  }
}

// 6. Cross-validation splits.
void protocol_integrity(Check& c) {
  using namespace analysis;
  const auto recs = synthetic::manifest(150);
  c.expect(recs.size() == 1350, "manifest size " + std::to_string(recs.size()));
  const CvSplits splits = make_cv_splits(recs, 5, 42);
  std::set<std::string> all_pairs;
  for (int f = 0; f < 5; ++f) {
    const auto test = splits.fold_records(f);
    const auto train = splits.train_records(f);
    std::set<std::string> pairs;
    std::map<Category, std::set<std::string>> per_cat;
    for (std::size_t i : test) {
      pairs.insert(recs[i].pair_id);
      per_cat[recs[i].category].insert(recs[i].pair_id);
    }
    c.expect(pairs.size() == 90, "fold " + std::to_string(f) + " has " + std::to_string(pairs.size()) + " pairs");
    for (Category cat : kCategories) c.expect(per_cat[cat].size() == 30, "fold category count");
    for (const auto& p : pairs) c.expect(all_pairs.insert(p).second, "pair in two folds: " + p);
    const LeakageAudit audit = audit_fold(recs, train, test, f);
    c.expect(audit.clean(), "leakage in fold " + std::to_string(f));
  }
  c.expect(all_pairs.size() == 450, "pairs covered " + std::to_string(all_pairs.size()));
  c.note("5 folds x 90 pairs (30 per category), audits clean");
}

// 7. Cross-mixing correlation with averaged middle level.
void cross_mixing(Check& c) {
  const auto r = analysis::cross_mixing_correlation(synthetic::averaged_triples(30, 8));
  const auto& all = r.groups.at("all");
  const double m12 = all[0].cc_mean, m23 = all[1].cc_mean, m13 = all[2].cc_mean;
  c.expect(m13 < m12, "CC(m1,m3) not below CC(m1,m2)");
  c.expect(m13 < m23, "CC(m1,m3) not below CC(m2,m3)");
  c.note("CC(m1,m2) " + fmt(m12) + ", CC(m2,m3) " + fmt(m23) + ", CC(m1,m3) " + fmt(m13));
}

// 8. Classical models on pop-out scenes.
void classical_models(Check& c) {
  for (const auto& scene : popout::all_scenes()) {
    for (const char* id : {"SR", "PFT", "IT"}) {
      const auto d = models::make_predictor(id)->predict(scene.image);
      const auto [x, y] = testutil::argmax(d.grid);
      c.expect(scene.target.contains(x, y), std::string(id) + " on " + scene.name + " peaks at (" +
                                                std::to_string(x) + ", " + std::to_string(y) + ")");
    }
  }
  for (const char* id : {"SR", "PFT", "IT"}) {
    for (double level : {0.0, 0.37, 1.0}) {
      const auto d = models::make_predictor(id)->predict(ViewportImage::filled(40, 30, level, level, level));
      const auto [lo, hi] = std::minmax_element(d.grid.values().begin(), d.grid.values().end());
      c.expect(*lo == *hi, std::string(id) + " not flat on a constant image");
    }
  }
  c.note("3 models x 3 scenes, constant images flat");
}

// 9. The fixture pipeline twice, from gaze logs to benchmark results.
void determinism(Check& c) {
  const fs::path fix = testutil::fixture_dir();
  auto run = [&](const fs::path& dir, const std::string& jobs) {
    const app::Args common{{"config", (fix / "config.json").string()}, {"jobs", jobs}};
    auto with = [&](app::Args extra) {
      extra.insert(common.begin(), common.end());
      return extra;
    };
    app::run_command("gaze-process", with({{"in", (fix / "gaze.csv").string()},
                                           {"out-fixations", (dir / "fix.csv").string()},
                                           {"out-density", (dir / "gt").string()}}));
    app::run_command("analyze-benchmark", with({{"manifest", (fix / "manifest.csv").string()},
                                                {"gt-dir", (dir / "gt").string()},
                                                {"out-dir", (dir / "bench").string()},
                                                {"models", "SR,PFT,IT"},
                                                {"folds", "3"},
                                                {"vq", "true"}}));
    return std::vector<std::string>{io::read_file(dir / "bench" / "results.csv"),
                                    io::read_file(dir / "bench" / "aggregate.json"),
                                    io::read_file(dir / "fix.csv")};
  };
  testutil::TempDir a("accept-a"), b("accept-b");
  const auto first = run(a.path(), "1");
  const auto second = run(b.path(), "2");
  c.expect(first[0] == second[0], "results.csv differs");
  c.expect(first[1] == second[1], "aggregate.json differs");
  c.expect(first[2] == second[2], "fixation CSV differs");
  const auto rows = std::count(first[0].begin(), first[0].end(), '\n') - 1;
  c.expect(rows > 0, "no result rows");
  c.note(std::to_string(rows) + " result rows, byte-identical across runs with 1 and 2 threads");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Check&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "composite matches the scalar blend; boundary identities exact", 1.0, composite_exactness},
      {2, "fixation detection on planted traces", 5.0, fixation_pipeline},
      {3, "metrics agree with brute force; closed forms", 10.0, metric_oracles},
      {4, "straight-through gradients match finite differences", 60.0, vq_gradients},
      {5, "fusion weights identifiable; Type II identities", 30.0, fusion_identifiability},
      {6, "5-fold splits without scenario repeat", 1.0, protocol_integrity},
      {7, "averaged middle level: CC(m1,m3) lowest", 5.0, cross_mixing},
      {8, "classical models find pop-out targets; constant input flat", 10.0, classical_models},
      {9, "pipeline runs are byte-identical", 120.0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < cr.budget_s;
    const bool pass = error.empty() && c.ok() && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] %d. %s (%.2f s, budget %.0f s)\n", pass ? "PASS" : "FAIL", cr.id, cr.name, secs, cr.budget_s);
    for (const auto& n : c.notes()) std::printf("       %s\n", n.c_str());
    if (!error.empty()) std::printf("       error: %s\n", error.c_str());
    for (const auto& f : c.failures()) std::printf("       failed: %s\n", f.c_str());
    if (c.failed() > static_cast<int>(c.failures().size())) {
      std::printf("       ... %d failed checks in total\n", c.failed());
    }
    if (!in_time) std::printf("       over the time budget\n");
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
