#include "arsal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "arsal/gazeproc.hpp"
#include "arsal/io.hpp"
#include "arsal/parallel.hpp"
#include "arsal/rng.hpp"
#include "arsal/salmodels.hpp"

namespace arsal::analysis {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::pair<double, double> mean_std_of(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return mean_std(v);
}

RealGrid min_max(const RealGrid& g) { return normalize(g, NormalizeMode::kMinMax).grid; }

ViewportImage resize_image(const ViewportImage& img, int size) {
  std::array<RealGrid, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[static_cast<std::size_t>(c)] = resize(img.channel(c), size, size);
    for (double& v : rgb[static_cast<std::size_t>(c)].values()) v = std::clamp(v, 0.0, 1.0);
  }
  return ViewportImage(std::move(rgb));
}

vq::Tensor density_tensor(const SaliencyDensity& gt, int size) {
  RealGrid g = resize(gt.grid, size, size);
  for (double& v : g.values()) v = std::max(v, 0.0);
  RealGrid s = normalize(g, NormalizeMode::kSumToOne).grid;
  if (grid_sum(s) == 0.0) s = RealGrid(size, size, 1.0 / (static_cast<double>(size) * size));
  return vq::grid_tensor(s);
}

nlohmann::json stats_json(const std::vector<double>& values, std::size_t missing) {
  const auto [m, s] = mean_std_of(values);
  nlohmann::json j = {{"n", values.size()}, {"missing", missing}};
  j["mean"] = values.empty() ? nlohmann::json(nullptr) : nlohmann::json(m);
  j["std"] = values.empty() ? nlohmann::json(nullptr) : nlohmann::json(s);
  return j;
}

nlohmann::json metric_block(const std::vector<const metrics::MetricReport*>& rows) {
  nlohmann::json out = nlohmann::json::object();
  for (metrics::Metric m : metrics::kAllMetrics) {
    std::vector<double> v;
    std::size_t missing = 0;
    for (const auto* r : rows) {
      const double x = r->get(m);
      if (std::isnan(x)) {
        ++missing;
      } else {
        v.push_back(x);
      }
    }
    out[std::string(metrics::metric_name(m))] = stats_json(v, missing);
  }
  out["count"] = rows.size();
  return out;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kGraphic:
      return "graphic";
    case Category::kNatural:
      return "natural";
    case Category::kWebpage:
      return "webpage";
  }
  return "graphic";
}

Category category_from_string(std::string_view text) {
  if (text == "graphic") return Category::kGraphic;
  if (text == "natural") return Category::kNatural;
  if (text == "webpage") return Category::kWebpage;
  throw ValidationError("unknown category '" + std::string(text) + "' (expected graphic, natural or webpage)");
}

std::vector<ScenarioRecord> load_manifest(const std::filesystem::path& path) {
  const io::CsvTable table = io::CsvTable::load(path);
  for (const char* col : {"scenario_id", "ar_path", "bg_path", "category", "alpha"}) {
    if (!table.has_column(col)) throw ValidationError("manifest " + path.string() + " lacks column " + col);
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp : base / fp;
  };
  std::vector<ScenarioRecord> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    ScenarioRecord rec;
    rec.scenario_id = table.at(r, "scenario_id");
    if (rec.scenario_id.empty()) throw ValidationError("manifest row " + std::to_string(r + 1) + " has no scenario_id");
    if (!seen.insert(rec.scenario_id).second) throw ValidationError("duplicate scenario_id " + rec.scenario_id);
    rec.category = category_from_string(table.at(r, "category"));
    rec.ar_path = resolve(table.at(r, "ar_path"));
    rec.bg_path = resolve(table.at(r, "bg_path"));
    rec.mixing = MixingLevel(table.number(r, "alpha")).value();
    rec.pair_id = table.has_column("pair_id") && !table.at(r, "pair_id").empty()
                      ? table.at(r, "pair_id")
                      : table.at(r, "ar_path") + "|" + table.at(r, "bg_path");
    out.push_back(std::move(rec));
  }
  return out;
}

ConsistencyResult subject_consistency_curve(const std::vector<SubjectFixations>& scenarios,
                                            const std::vector<int>& group_sizes, int trials, std::uint64_t seed,
                                            const ViewportSpec& spec, double sigma_deg) {
  spec.validate();
  if (trials < 1) throw ValidationError("trials must be at least 1");
  ConsistencyResult result;
  auto density_of = [&](const SubjectFixations& s, const std::vector<std::size_t>& who) {
    std::vector<PixelPos> pts;
    for (std::size_t i : who) {
      const auto& f = s.subjects[i];
      pts.insert(pts.end(), f.begin(), f.end());
    }
    return gaze::density_from_fixations(FixationMap(spec.width_px, spec.height_px, std::move(pts)), spec, sigma_deg)
        .grid;
  };
  std::vector<RealGrid> overall(scenarios.size());
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    if (scenarios[s].subjects.size() < 2) {
      result.warnings.push_back("scenario " + scenarios[s].scenario_id + " has fewer than 2 subjects; skipped");
      continue;
    }
    std::vector<std::size_t> all(scenarios[s].subjects.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    overall[s] = density_of(scenarios[s], all);
  }
  for (std::size_t gi = 0; gi < group_sizes.size(); ++gi) {
    const int n = group_sizes[gi];
    if (n < 1) throw ValidationError("group sizes must be positive");
    std::vector<double> values;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const std::size_t count = scenarios[s].subjects.size();
      if (count < 2) continue;
      if (static_cast<std::size_t>(n) > count) {
        result.warnings.push_back("group size " + std::to_string(n) + " exceeds the " + std::to_string(count) +
                                  " subjects of scenario " + scenarios[s].scenario_id + "; skipped");
        continue;
      }
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(n), s));
      for (int t = 0; t < trials; ++t) {
        auto who = sample_without_replacement(rng, count, static_cast<std::size_t>(n));
        // Sorted gathering makes the full-group density bit-identical to the overall one.
        std::sort(who.begin(), who.end());
        values.push_back(metrics::cc(density_of(scenarios[s], who), overall[s]));
      }
    }
    if (values.empty()) continue;
    const auto [m, sd] = mean_std(values);
    result.curve.push_back({n, m, sd, values.size()});
  }
  return result;
}

nlohmann::json CrossMixingResult::to_json() const {
  nlohmann::json j;
  for (const auto& [group, stats] : groups) {
    nlohmann::json g;
    for (std::size_t p = 0; p < 3; ++p) {
      g[std::string(kMixingPairNames[p])] = {{"cc_mean", stats[p].cc_mean},
                                             {"cc_std", stats[p].cc_std},
                                             {"sim_mean", stats[p].sim_mean},
                                             {"sim_std", stats[p].sim_std},
                                             {"count", stats[p].count}};
    }
    j[group] = std::move(g);
  }
  return j;
}

CrossMixingResult cross_mixing_correlation(const std::vector<MixingTriple>& triples) {
  CrossMixingResult result;
  for (const MixingTriple& t : triples) {
    CrossMixingRow row;
    row.pair_id = t.pair_id;
    row.category = t.category;
    for (std::size_t p = 0; p < 3; ++p) {
      const RealGrid& a = t.maps[static_cast<std::size_t>(kMixingPairs[p][0])];
      const RealGrid& b = t.maps[static_cast<std::size_t>(kMixingPairs[p][1])];
      row.cc[p] = metrics::cc(a, b);
      row.sim[p] = metrics::sim(a, b);
    }
    result.rows.push_back(std::move(row));
  }
  auto summarize = [&](std::optional<Category> cat) {
    std::array<PairStats, 3> stats;
    for (std::size_t p = 0; p < 3; ++p) {
      std::vector<double> ccs;
      std::vector<double> sims;
      for (const auto& r : result.rows) {
        if (cat && r.category != *cat) continue;
        ccs.push_back(r.cc[p]);
        sims.push_back(r.sim[p]);
      }
      std::tie(stats[p].cc_mean, stats[p].cc_std) = mean_std_of(ccs);
      std::tie(stats[p].sim_mean, stats[p].sim_std) = mean_std_of(sims);
      stats[p].count = ccs.size();
    }
    return stats;
  };
  for (Category c : kCategories) result.groups[std::string(to_string(c))] = summarize(c);
  result.groups["all"] = summarize(std::nullopt);
  return result;
}

std::vector<std::size_t> CvSplits::fold_records(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> CvSplits::train_records(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

CvSplits make_cv_splits(const std::vector<ScenarioRecord>& records, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  std::vector<std::string> pairs;
  std::unordered_map<std::string, std::size_t> pair_index;
  std::vector<Category> pair_category;
  for (const auto& r : records) {
    auto [it, inserted] = pair_index.try_emplace(r.pair_id, pairs.size());
    if (inserted) {
      pairs.push_back(r.pair_id);
      pair_category.push_back(r.category);
    } else if (pair_category[it->second] != r.category) {
      throw ValidationError("pair " + r.pair_id + " appears under two categories");
    }
  }
  if (static_cast<std::size_t>(k) > pairs.size()) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(pairs.size()) +
                          " scenario pairs");
  }
  Rng rng(seed);
  std::vector<int> pair_fold(pairs.size(), -1);
  std::size_t deal = 0;
  for (Category c : kCategories) {
    std::vector<std::size_t> members;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pair_category[p] == c) members.push_back(p);
    }
    rng.shuffle(members);
    for (std::size_t p : members) pair_fold[p] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
  }
  CvSplits s;
  s.k = k;
  s.seed = seed;
  for (const auto& r : records) s.fold_of.push_back(pair_fold[pair_index.at(r.pair_id)]);
  return s;
}

nlohmann::json LeakageAudit::to_json() const {
  return {{"fold", fold}, {"shared_scenarios", shared_scenarios}, {"shared_pairs", shared_pairs}, {"clean", clean()}};
}

LeakageAudit audit_fold(const std::vector<ScenarioRecord>& records, const std::vector<std::size_t>& train,
                        const std::vector<std::size_t>& test, int fold) {
  std::set<std::string> train_ids;
  std::set<std::string> train_pairs;
  for (std::size_t i : train) {
    train_ids.insert(records.at(i).scenario_id);
    train_pairs.insert(records.at(i).pair_id);
  }
  LeakageAudit a;
  a.fold = fold;
  std::set<std::string> pairs_seen;
  for (std::size_t i : test) {
    if (train_ids.contains(records.at(i).scenario_id)) a.shared_scenarios.push_back(records[i].scenario_id);
    if (train_pairs.contains(records[i].pair_id) && pairs_seen.insert(records[i].pair_id).second) {
      a.shared_pairs.push_back(records[i].pair_id);
    }
  }
  return a;
}

LeakageAudit audit_provenance(const std::vector<std::string>& training_scenarios,
                              const std::vector<ScenarioRecord>& records, const std::vector<std::size_t>& test,
                              int fold) {
  std::unordered_map<std::string, const ScenarioRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.scenario_id, &r);
  std::set<std::string> ids(training_scenarios.begin(), training_scenarios.end());
  std::set<std::string> pairs;
  for (const auto& id : training_scenarios) {
    auto it = by_id.find(id);
    if (it != by_id.end()) pairs.insert(it->second->pair_id);
  }
  LeakageAudit a;
  a.fold = fold;
  std::set<std::string> pairs_seen;
  for (std::size_t i : test) {
    if (ids.contains(records.at(i).scenario_id)) a.shared_scenarios.push_back(records[i].scenario_id);
    if (pairs.contains(records[i].pair_id) && pairs_seen.insert(records[i].pair_id).second) {
      a.shared_pairs.push_back(records[i].pair_id);
    }
  }
  return a;
}

void BenchmarkConfig::validate() const {
  if (models.empty() && !vq.enabled) throw ValidationError("benchmark needs at least one model");
  for (int t : types) {
    if (t < 1 || t > 3) throw ValidationError("fusion types must be 1, 2 or 3");
  }
  if (folds < 2) throw ValidationError("benchmark needs at least 2 folds");
  if (vq.enabled && (vq.size < 4 || vq.size % 4 != 0)) throw ValidationError("VQ working size must be a multiple of 4");
}

std::string_view fusion_type_name(int type) {
  switch (type) {
    case 1:
      return "I";
    case 2:
      return "II";
    case 3:
      return "III";
  }
  throw ValidationError("unknown fusion type " + std::to_string(type));
}

BenchmarkResult run_benchmark(const std::vector<BenchmarkScenario>& scenarios, const BenchmarkConfig& config) {
  config.validate();
  const std::size_t n = scenarios.size();
  std::vector<ScenarioRecord> records;
  records.reserve(n);
  for (const auto& s : scenarios) records.push_back(s.record);

  BenchmarkResult result;
  result.splits = make_cv_splits(records, config.folds, config.seed);

  // Component predictions, min-max normalized, per model and scenario.
  struct Components {
    RealGrid ar;
    RealGrid bg;
    RealGrid s;
  };
  const std::size_t nm = config.models.size();
  std::vector<std::unique_ptr<models::Predictor>> predictors;
  for (const auto& m : config.models) predictors.push_back(models::make_predictor(m));
  std::vector<Components> comps(nm * n);
  parallel_for(nm * n, config.jobs, [&](std::size_t job) {
    const std::size_t m = job / n;
    const BenchmarkScenario& sc = scenarios[job % n];
    comps[job] = {min_max(predictors[m]->predict(sc.ar_padded).grid), min_max(predictors[m]->predict(sc.bg_view).grid),
                  min_max(predictors[m]->predict(sc.superimposed).grid)};
  });

  std::vector<std::string> model_ids = config.models;
  std::vector<std::string> type_ids;
  for (int t : config.types) type_ids.emplace_back(fusion_type_name(t));
  if (config.vq.enabled) {
    model_ids.emplace_back("VQSal");
    model_ids.emplace_back("VQSal-AR");
  }

  // predictions[(scenario * model_ids.size() + m) * slots + t]
  const std::size_t slots = std::max<std::size_t>(type_ids.size(), 1);
  std::vector<std::optional<RealGrid>> predictions(n * model_ids.size() * slots);
  auto slot = [&](std::size_t i, std::size_t m, std::size_t t) -> std::optional<RealGrid>& {
    return predictions[(i * model_ids.size() + m) * slots + t];
  };
  std::vector<std::string> slot_type(n * model_ids.size() * slots);

  for (int f = 0; f < config.folds; ++f) {
    const auto test = result.splits.fold_records(f);
    const auto train = result.splits.train_records(f);
    result.audits.push_back(audit_fold(records, train, test, f));

    for (std::size_t m = 0; m < nm; ++m) {
      std::optional<fusion::FusionRegressor> reg;
      if (std::find(config.types.begin(), config.types.end(), 3) != config.types.end()) {
        fusion::RegressorConfig rc = config.regressor;
        rc.seed = mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(f), m);
        fusion::TrainingSet ts(rc.max_samples, train.size(), rc.seed);
        for (std::size_t i : train) {
          const Components& c = comps[m * n + i];
          ts.add_image(c.ar, c.bg, c.s, min_max(scenarios[i].gt.grid), records[i].scenario_id);
        }
        reg = fusion::type3_train(ts, rc);
        result.audits.push_back(audit_provenance(reg->training_scenarios, records, test, f));
      }
      for (std::size_t i : test) {
        const Components& c = comps[m * n + i];
        for (std::size_t t = 0; t < config.types.size(); ++t) {
          RealGrid pred;
          switch (config.types[t]) {
            case 1:
              pred = c.s;
              break;
            case 2:
              pred = fusion::type2(c.ar, c.bg, records[i].mixing).grid;
              break;
            default:
              pred = fusion::type3_predict(*reg, c.ar, c.bg, c.s).density.grid;
              break;
          }
          slot(i, m, t) = std::move(pred);
          slot_type[(i * model_ids.size() + m) * slots + t] = type_ids[t];
        }
      }
    }

    if (config.vq.enabled) {
      const int size = config.vq.size;
      vq::VQConfig vc = config.vq.config;
      vc.seed = mix_seed(config.seed, 2000 + static_cast<std::uint64_t>(f));
      vq::VQNet net(vc);
      std::vector<vq::Sample> rec_data;
      std::vector<vq::Sample> sal_data;
      std::vector<vq::ArSample> ar_data;
      std::vector<vq::Tensor> images;
      std::vector<std::string> provenance;
      for (std::size_t i : train) {
        const auto& sc = scenarios[i];
        vq::Tensor img = vq::image_tensor(resize_image(sc.superimposed, size));
        vq::Tensor gt = density_tensor(sc.gt, size);
        rec_data.push_back({img, {}});
        sal_data.push_back({img, gt});
        ar_data.push_back({vq::image_tensor(resize_image(sc.ar_padded, size)),
                           vq::image_tensor(resize_image(sc.bg_view, size)), img, gt});
        images.push_back(img);
        provenance.push_back(records[i].scenario_id);
      }
      vq::init_codebook_from_data(net, images, vc.seed);
      vq::train(net, rec_data, config.vq.reconstruction);
      net.set_mode(vq::Mode::kSaliency);
      net.init_saliency_decoder();
      vq::train(net, sal_data, config.vq.saliency);
      vq::ARFusionNet arnet(net);
      vq::train(arnet, ar_data, config.vq.fusion);
      result.audits.push_back(audit_provenance(provenance, records, test, f));
      for (std::size_t i : test) {
        const auto& sc = scenarios[i];
        const int w = sc.superimposed.width();
        const int h = sc.superimposed.height();
        vq::Tensor img = vq::image_tensor(resize_image(sc.superimposed, size));
        RealGrid single = vq::tensor_grid(net.predict_saliency(img));
        RealGrid fused = arnet
                             .predict(vq::image_tensor(resize_image(sc.ar_padded, size)),
                                      vq::image_tensor(resize_image(sc.bg_view, size)), img)
                             .grid;
        slot(i, nm, 0) = min_max(resize(single, w, h));
        slot_type[(i * model_ids.size() + nm) * slots] = "I";
        slot(i, nm + 1, 0) = min_max(resize(fused, w, h));
        slot_type[(i * model_ids.size() + nm + 1) * slots] = "AR";
      }
    }
  }

  // Negative pools: fixations of the other scenarios in the same fold and mixing
  // level, widened to the whole fold and then to every scenario when empty.
  std::vector<std::vector<PixelPos>> pools(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int level = 0; level < 3 && pools[i].empty(); ++level) {
      for (std::size_t j = 0; j < n; ++j) {
        const bool same_fold = result.splits.fold_of[j] == result.splits.fold_of[i];
        const bool same_mixing = records[j].mixing == records[i].mixing;
        if (j == i || (level < 2 && !same_fold) || (level < 1 && !same_mixing)) continue;
        const auto& f = scenarios[j].fixations.fixations();
        pools[i].insert(pools[i].end(), f.begin(), f.end());
      }
    }
  }

  const std::size_t per_scenario = model_ids.size() * slots;
  std::vector<std::optional<metrics::MetricReport>> out(n * per_scenario);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const auto& sc = scenarios[i];
    const RealGrid baseline = metrics::center_prior(sc.gt.width(), sc.gt.height());
    for (std::size_t m = 0; m < model_ids.size(); ++m) {
      for (std::size_t t = 0; t < slots; ++t) {
        const auto& pred = slot(i, m, t);
        if (!pred) continue;
        metrics::EvaluationInputs in;
        in.pred = &*pred;
        in.gt_density = &sc.gt;
        in.fixations = &sc.fixations;
        in.negative_pool = &pools[i];
        in.baseline = &baseline;
        in.seed = mix_seed(config.seed, 3000 + i);
        metrics::MetricReport r = metrics::evaluate_all(in);
        r.scenario_id = records[i].scenario_id;
        r.model_id = model_ids[m];
        r.fusion_type = slot_type[(i * model_ids.size() + m) * slots + t];
        r.fold_id = result.splits.fold_of[i];
        out[i * per_scenario + m * slots + t] = std::move(r);
      }
    }
  });
  for (auto& r : out) {
    if (r) result.reports.push_back(std::move(*r));
  }
  result.aggregate = aggregate_reports(result.reports, records);
  return result;
}

nlohmann::json aggregate_reports(const std::vector<metrics::MetricReport>& reports,
                                 const std::vector<ScenarioRecord>& records) {
  std::unordered_map<std::string, const ScenarioRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.scenario_id, &r);
  std::map<std::string, std::vector<const metrics::MetricReport*>> groups;
  for (const auto& r : reports) groups[r.model_id + "/" + r.fusion_type].push_back(&r);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, rows] : groups) {
    nlohmann::json g;
    g["model"] = rows.front()->model_id;
    g["type"] = rows.front()->fusion_type;
    g["overall"] = metric_block(rows);
    std::map<std::string, std::vector<const metrics::MetricReport*>> by_cat;
    std::map<std::string, std::vector<const metrics::MetricReport*>> by_mix;
    for (const auto* r : rows) {
      auto it = by_id.find(r->scenario_id);
      if (it == by_id.end()) continue;
      by_cat[std::string(to_string(it->second->category))].push_back(r);
      by_mix[io::format_double(it->second->mixing)].push_back(r);
    }
    for (const auto& [c, v] : by_cat) g["by_category"][c] = metric_block(v);
    for (const auto& [mx, v] : by_mix) g["by_mixing"][mx] = metric_block(v);
    out[key] = std::move(g);
  }
  return out;
}

std::string reports_csv(const std::vector<metrics::MetricReport>& reports, const std::vector<ScenarioRecord>& records) {
  std::unordered_map<std::string, const ScenarioRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.scenario_id, &r);
  std::ostringstream os;
  os << "scenario_id,category,mixing,model,type,fold";
  for (metrics::Metric m : metrics::kAllMetrics) os << ',' << metrics::metric_name(m);
  os << ",flags\n";
  for (const auto& r : reports) {
    auto it = by_id.find(r.scenario_id);
    os << io::csv_field(r.scenario_id) << ',';
    os << (it != by_id.end() ? to_string(it->second->category) : std::string_view{}) << ',';
    os << (it != by_id.end() ? io::format_double(it->second->mixing) : std::string{}) << ',';
    os << io::csv_field(r.model_id) << ',' << io::csv_field(r.fusion_type) << ',' << r.fold_id;
    for (metrics::Metric m : metrics::kAllMetrics) os << ',' << io::format_double(r.get(m));
    std::string flags;
    for (std::size_t i = 0; i < r.flags.size(); ++i) flags += (i ? "; " : "") + r.flags[i];
    os << ',' << io::csv_field(flags) << '\n';
  }
  return os.str();
}

}  // namespace arsal::analysis
