#include "arsal/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "arsal/compositor.hpp"
#include "arsal/metrics.hpp"
#include "arsal/parallel.hpp"

namespace arsal::app {

namespace fs = std::filesystem;

namespace {

const std::string& need(const Args& args, const std::string& key) {
  auto it = args.find(key);
  if (it == args.end() || it->second.empty()) throw ValidationError("missing required flag --" + key);
  return it->second;
}

std::optional<std::string> opt(const Args& args, const std::string& key) {
  auto it = args.find(key);
  if (it == args.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError("--" + key + " expects a number, got '" + text + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError("--" + key + " expects an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("--" + key + " expects true or false, got '" + text + "'");
}

double number(const Args& a, const std::string& key, double fallback) {
  auto v = opt(a, key);
  return v ? to_double(key, *v) : fallback;
}

int integer(const Args& a, const std::string& key, int fallback) {
  auto v = opt(a, key);
  return v ? static_cast<int>(to_int(key, *v)) : fallback;
}

bool flag(const Args& a, const std::string& key, bool fallback) {
  auto v = opt(a, key);
  return v ? to_bool(key, *v) : fallback;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

nlohmann::json load_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

io::RunStamp stamp(const std::string& command, const Settings& s) {
  return {io::fnv1a_hex(command + "\n" + s.canonical.dump()), s.seed, io::library_version()};
}

nlohmann::json run_meta(const std::string& command, const Settings& s) {
  nlohmann::json j = stamp(command, s).to_json();
  j["command"] = command;
  return j;
}

void write_meta(const fs::path& file, const nlohmann::json& meta) {
  io::write_file_atomic(io::meta_sidecar_path(file), meta.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string cell(double v) { return io::format_double(v); }

// ---- gaze helpers -----------------------------------------------------------

struct FixationRow {
  std::string subject;
  std::string scenario;
  gaze::Fixation fixation;
};

std::vector<FixationRow> read_fixation_csv(const fs::path& path) {
  const io::CsvTable t = io::CsvTable::load(path);
  for (const char* c : {"subject_id", "scenario_id", "lat_deg", "long_deg"}) {
    if (!t.has_column(c)) throw ValidationError("fixation CSV " + path.string() + " lacks column " + c);
  }
  std::vector<FixationRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    FixationRow f;
    f.subject = t.at(r, "subject_id");
    f.scenario = t.at(r, "scenario_id");
    f.fixation.lat_deg = t.number(r, "lat_deg");
    f.fixation.long_deg = t.number(r, "long_deg");
    if (t.has_column("onset_ms")) f.fixation.onset_ms = t.number(r, "onset_ms");
    if (t.has_column("duration_ms")) f.fixation.duration_ms = t.number(r, "duration_ms");
    rows.push_back(std::move(f));
  }
  return rows;
}

std::string write_ground_truth(const std::vector<FixationRow>& rows, const fs::path& dir, const Settings& s,
                               const std::string& command) {
  ensure_dir(dir);
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<gaze::Fixation>> by_scenario;
  for (const auto& r : rows) {
    auto [it, inserted] = by_scenario.try_emplace(r.scenario);
    if (inserted) order.push_back(r.scenario);
    it->second.push_back(r.fixation);
  }
  std::vector<std::string> notes(order.size());
  parallel_for(order.size(), s.jobs, [&](std::size_t i) {
    const std::string& id = order[i];
    const gaze::FixationMapBuild build = gaze::build_fixation_map(by_scenario.at(id), s.viewport);
    const SaliencyDensity d = gaze::density_from_fixations(build.map, s.viewport, s.sigma_deg);
    nlohmann::json extra = {{"run", run_meta(command, s)},
                            {"fixations_total", build.total},
                            {"fixations_out_of_viewport", build.out_of_viewport},
                            {"coverage", build.coverage()},
                            {"degenerate", d.degenerate},
                            {"sigma_deg", s.sigma_deg}};
    io::write_float_grid(dir / (id + ".f32"), d.grid, d.state, extra);
    std::string csv = "x,y\n";
    for (const auto& p : build.map.fixations()) csv += std::to_string(p.x) + "," + std::to_string(p.y) + "\n";
    io::write_file_atomic(dir / (id + ".fixations.csv"), csv);
    if (d.degenerate) notes[i] = id + ": no fixations inside the viewport";
  });
  std::string summary = "wrote ground truth for " + std::to_string(order.size()) + " scenarios to " + dir.string();
  for (const auto& n : notes) {
    if (!n.empty()) summary += "\nwarning: " + n;
  }
  return summary;
}

// ---- commands -----------------------------------------------------------------

std::string cmd_composite(const Args& a) {
  const Settings s = load_settings(a);
  if (auto manifest = opt(a, "manifest")) {
    const fs::path out_dir = need(a, "out-dir");
    ensure_dir(out_dir);
    const auto records = analysis::load_manifest(*manifest);
    parallel_for(records.size(), s.jobs, [&](std::size_t i) {
      const PreparedScenario p = prepare_scenario(records[i], s.viewport);
      const fs::path out = out_dir / (records[i].scenario_id + ".png");
      io::write_image(out, p.superimposed);
      nlohmann::json meta = {{"run", run_meta("composite", s)},
                             {"scenario_id", records[i].scenario_id},
                             {"alpha", records[i].mixing}};
      write_meta(out, meta);
    });
    return "composited " + std::to_string(records.size()) + " scenarios into " + out_dir.string();
  }
  const fs::path ar_path = need(a, "ar");
  const fs::path bg_path = need(a, "bg");
  const double alpha = to_double("alpha", need(a, "alpha"));
  const fs::path out = need(a, "out");
  const compositor::Placement placement{integer(a, "offset-x", 0), integer(a, "offset-y", 0)};
  const ViewportImage ar = compositor::pad_ar(io::read_image(ar_path), s.viewport, placement);
  const ViewportImage bg = compositor::extract_viewport(io::read_image(bg_path), s.viewport);
  io::write_image(out, compositor::composite(ar, bg, MixingLevel(alpha)));
  write_meta(out, {{"run", run_meta("composite", s)}, {"alpha", alpha}});
  return "wrote " + out.string();
}

std::string cmd_gaze_process(const Args& a) {
  const Settings s = load_settings(a);
  const fs::path in = need(a, "in");
  const fs::path out = need(a, "out-fixations");
  const io::CsvTable t = io::CsvTable::load(in);
  for (const char* c : {"subject_id", "scenario_id", "timestamp_ms", "pitch_deg", "yaw_deg"}) {
    if (!t.has_column(c)) throw ValidationError("gaze CSV " + in.string() + " lacks column " + c);
  }
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<gaze::GazeSample>> traces;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Key k{t.at(r, "subject_id"), t.at(r, "scenario_id")};
    auto [it, inserted] = traces.try_emplace(k);
    if (inserted) order.push_back(k);
    gaze::GazeSample g;
    g.timestamp_ms = t.number(r, "timestamp_ms");
    g.pitch_deg = t.number(r, "pitch_deg");
    g.yaw_deg = t.number(r, "yaw_deg");
    g.roll_deg = t.has_column("roll_deg") ? t.number(r, "roll_deg") : 0.0;
    it->second.push_back(g);
  }
  std::vector<gaze::DetectionResult> results(order.size());
  parallel_for(order.size(), s.jobs, [&](std::size_t i) {
    try {
      results[i] = gaze::detect_fixations(gaze::euler_to_latlong(traces.at(order[i])), s.fixation);
    } catch (const ValidationError& e) {
      throw ValidationError("trace of subject " + order[i].first + " in scenario " + order[i].second + ": " +
                            e.what());
    }
  });
  std::string csv = "subject_id,scenario_id,lat_deg,long_deg,onset_ms,duration_ms\n";
  std::vector<FixationRow> rows;
  nlohmann::json warnings = nlohmann::json::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!results[i].warning.empty()) {
      warnings.push_back(order[i].first + "/" + order[i].second + ": " + results[i].warning);
    }
    for (const auto& f : results[i].fixations) {
      csv += io::csv_field(order[i].first) + "," + io::csv_field(order[i].second) + "," + cell(f.lat_deg) + "," +
             cell(f.long_deg) + "," + cell(f.onset_ms) + "," + cell(f.duration_ms) + "\n";
      rows.push_back({order[i].first, order[i].second, f});
    }
  }
  io::write_file_atomic(out, csv);
  write_meta(out, {{"run", run_meta("gaze-process", s)}, {"traces", order.size()}, {"warnings", warnings}});
  std::string summary = "detected " + std::to_string(rows.size()) + " fixations in " + std::to_string(order.size()) +
                        " traces";
  for (const auto& w : warnings) summary += "\nwarning: " + w.get<std::string>();
  if (auto dir = opt(a, "out-density")) summary += "\n" + write_ground_truth(rows, *dir, s, "gaze-process");
  return summary;
}

std::string cmd_gt_maps(const Args& a) {
  const Settings s = load_settings(a);
  const auto rows = read_fixation_csv(need(a, "fixations"));
  return write_ground_truth(rows, need(a, "out"), s, "gt-maps");
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") out.push_back(e.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

std::string cmd_predict(const Args& a) {
  const Settings s = load_settings(a);
  const std::string model = need(a, "model");
  const fs::path in = need(a, "in");
  const fs::path out_dir = need(a, "out");
  const bool png = flag(a, "png", false);
  auto predictor = models::make_predictor(model, s.models);
  std::vector<fs::path> inputs;
  if (fs::is_directory(in)) {
    inputs = list_images(in);
  } else if (fs::exists(in)) {
    inputs.push_back(in);
  } else {
    throw IoError("input not found: " + in.string());
  }
  ensure_dir(out_dir);
  parallel_for(inputs.size(), s.jobs, [&](std::size_t i) {
    const SaliencyDensity d = predictor->predict(io::read_image(inputs[i]));
    const fs::path out = out_dir / (inputs[i].stem().string() + ".f32");
    io::write_float_grid(out, d.grid, d.state,
                         {{"run", run_meta("predict", s)}, {"model", model}, {"source", inputs[i].filename().string()}});
    if (png) io::write_density_png(out_dir / (inputs[i].stem().string() + ".png"), d.grid);
  });
  return "predicted " + std::to_string(inputs.size()) + " images with " + model;
}

struct Components {
  RealGrid ar;
  RealGrid bg;
  RealGrid s;
};

Components predict_components(const models::Predictor& p, const PreparedScenario& sc) {
  auto mm = [](const SaliencyDensity& d) { return normalize(d.grid, NormalizeMode::kMinMax).grid; };
  return {mm(p.predict(sc.ar_padded)), mm(p.predict(sc.bg_view)), mm(p.predict(sc.superimposed))};
}

std::string cmd_fuse(const Args& a) {
  const Settings s = load_settings(a);
  const int type = static_cast<int>(to_int("type", need(a, "type")));
  if (type < 1 || type > 3) throw ValidationError("--type must be 1, 2 or 3");
  const std::string model = need(a, "model");
  const auto records = analysis::load_manifest(need(a, "scenario-manifest"));
  const fs::path out_dir = need(a, "out");
  std::optional<fusion::FusionRegressor> reg;
  if (type == 3) {
    if (auto r = opt(a, "regressor")) {
      reg = fusion::FusionRegressor::from_json(load_json(*r));
    } else if (!opt(a, "gt-dir")) {
      throw ValidationError("missing required flag --regressor (or --gt-dir to train one)");
    }
  }
  auto predictor = models::make_predictor(model, s.models);
  std::vector<Components> comps(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    comps[i] = predict_components(*predictor, prepare_scenario(records[i], s.viewport));
  });
  std::string summary;
  if (type == 3 && !reg) {
    const fs::path gt_dir = need(a, "gt-dir");
    fusion::RegressorConfig rc = s.regressor;
    fusion::TrainingSet ts(rc.max_samples, records.size(), rc.seed);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const GroundTruth gt = load_ground_truth(gt_dir, records[i].scenario_id);
      ts.add_image(comps[i].ar, comps[i].bg, comps[i].s, normalize(gt.density.grid, NormalizeMode::kMinMax).grid,
                   records[i].scenario_id);
    }
    reg = fusion::type3_train(ts, rc);
    const fs::path save = opt(a, "save-regressor").value_or((out_dir / "regressor.json").string());
    ensure_dir(save.has_parent_path() ? save.parent_path() : fs::path("."));
    nlohmann::json j = reg->to_json();
    j["run"] = run_meta("fuse", s);
    io::write_file_atomic(save, j.dump(2) + "\n");
    summary = "trained regressor on " + std::to_string(reg->training_pixels) + " pixels -> " + save.string() + "\n";
  }
  ensure_dir(out_dir);
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    SaliencyDensity d;
    bool degenerate = false;
    if (type == 1) {
      d = normalize(comps[i].s, NormalizeMode::kMinMax);
    } else if (type == 2) {
      d = fusion::type2(comps[i].ar, comps[i].bg, records[i].mixing);
    } else {
      const auto r = fusion::type3_predict(*reg, comps[i].ar, comps[i].bg, comps[i].s);
      d = r.density;
      degenerate = r.degenerate;
    }
    io::write_float_grid(out_dir / (records[i].scenario_id + ".f32"), d.grid, d.state,
                         {{"run", run_meta("fuse", s)},
                          {"model", model},
                          {"type", std::string(analysis::fusion_type_name(type))},
                          {"degenerate", degenerate}});
  });
  return summary + "fused " + std::to_string(records.size()) + " scenarios (type " +
         std::string(analysis::fusion_type_name(type)) + ", " + model + ")";
}

std::vector<std::vector<PixelPos>> negative_pools(const std::vector<analysis::ScenarioRecord>& records,
                                                  const std::vector<GroundTruth>& gts) {
  std::vector<std::vector<PixelPos>> pools(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (bool same_mixing : {true, false}) {
      for (std::size_t j = 0; j < records.size(); ++j) {
        if (i == j || (same_mixing && records[j].mixing != records[i].mixing)) continue;
        const auto& f = gts[j].fixations.fixations();
        pools[i].insert(pools[i].end(), f.begin(), f.end());
      }
      if (!pools[i].empty()) break;
    }
  }
  return pools;
}

std::string cmd_evaluate(const Args& a) {
  const Settings s = load_settings(a);
  const auto records = analysis::load_manifest(need(a, "manifest"));
  const fs::path pred_dir = need(a, "pred-dir");
  const fs::path gt_dir = need(a, "gt-dir");
  const fs::path out = need(a, "out");
  const std::string model = opt(a, "model").value_or("unknown");
  const std::string type = opt(a, "type").value_or("");
  std::vector<GroundTruth> gts(records.size());
  std::vector<RealGrid> preds(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    gts[i] = load_ground_truth(gt_dir, records[i].scenario_id);
    preds[i] = io::read_float_grid(pred_dir / (records[i].scenario_id + ".f32")).grid;
    if (!preds[i].same_shape(gts[i].density.grid)) {
      throw ValidationError("prediction for " + records[i].scenario_id + " does not match the ground-truth size");
    }
  });
  const auto pools = negative_pools(records, gts);
  std::vector<metrics::MetricReport> reports(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    metrics::EvaluationInputs in;
    in.pred = &preds[i];
    in.gt_density = &gts[i].density;
    in.fixations = &gts[i].fixations;
    in.negative_pool = &pools[i];
    in.seed = mix_seed(s.seed, i);
    reports[i] = metrics::evaluate_all(in);
    reports[i].scenario_id = records[i].scenario_id;
    reports[i].model_id = model;
    reports[i].fusion_type = type;
  });
  io::write_file_atomic(out, analysis::reports_csv(reports, records));
  nlohmann::json agg = analysis::aggregate_reports(reports, records);
  fs::path agg_path = out;
  agg_path.replace_extension(".aggregate.json");
  io::write_file_atomic(agg_path, agg.dump(2) + "\n");
  write_meta(out, {{"run", run_meta("evaluate", s)}, {"model", model}, {"type", type}});
  return "evaluated " + std::to_string(reports.size()) + " scenarios -> " + out.string();
}

// ---- VQ commands ------------------------------------------------------------------

ViewportImage resized(const ViewportImage& img, int size) {
  std::array<RealGrid, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[static_cast<std::size_t>(c)] = resize(img.channel(c), size, size);
    for (double& v : rgb[static_cast<std::size_t>(c)].values()) v = std::clamp(v, 0.0, 1.0);
  }
  return ViewportImage(std::move(rgb));
}

vq::Tensor target_tensor(const SaliencyDensity& gt, int size) {
  RealGrid g = resize(gt.grid, size, size);
  for (double& v : g.values()) v = std::max(v, 0.0);
  RealGrid n = normalize(g, NormalizeMode::kSumToOne).grid;
  if (grid_sum(n) == 0.0) n = RealGrid(size, size, 1.0 / (static_cast<double>(size) * size));
  return vq::grid_tensor(n);
}

void check_size(int size) {
  if (size < 4 || size % 4 != 0) throw ValidationError("--size must be a positive multiple of 4");
}

nlohmann::json train_meta(const std::string& command, const Settings& s, const vq::TrainResult& r) {
  return {{"run", run_meta(command, s)},
          {"schedule", s.schedule.to_json()},
          {"initial_loss", r.initial_loss},
          {"final_loss", r.final_loss},
          {"slope", r.slope},
          {"losses", r.losses}};
}

std::string train_summary(const vq::TrainResult& r, const fs::path& out) {
  return "loss " + cell(r.initial_loss) + " -> " + cell(r.final_loss) + " over " + std::to_string(r.losses.size()) +
         " steps; saved " + out.string();
}

std::string cmd_train_vq(const Args& a) {
  const Settings s = load_settings(a);
  check_size(s.vq_size);
  const fs::path out = need(a, "out");
  std::vector<vq::Tensor> images;
  if (auto m = opt(a, "manifest")) {
    const auto records = analysis::load_manifest(*m);
    images.resize(records.size());
    parallel_for(records.size(), s.jobs, [&](std::size_t i) {
      images[i] = vq::image_tensor(resized(prepare_scenario(records[i], s.viewport).superimposed, s.vq_size));
    });
  } else if (auto dir = opt(a, "images")) {
    for (const auto& p : list_images(*dir)) images.push_back(vq::image_tensor(resized(io::read_image(p), s.vq_size)));
  } else {
    throw ValidationError("missing required flag --manifest (or --images)");
  }
  if (images.empty()) throw ValidationError("no training images found");
  vq::VQNet net(s.vq);
  vq::init_codebook_from_data(net, images, s.seed);
  std::vector<vq::Sample> data;
  for (auto& img : images) data.push_back({std::move(img), {}});
  const vq::TrainResult r = vq::train(net, data, s.schedule);
  vq::save(out, net);
  write_meta(out, train_meta("train-vq", s, r));
  return train_summary(r, out);
}

struct SaliencyData {
  std::vector<analysis::ScenarioRecord> records;
  std::vector<PreparedScenario> prepared;
  std::vector<vq::Tensor> targets;
};

SaliencyData load_saliency_data(const Args& a, const Settings& s) {
  SaliencyData d;
  d.records = analysis::load_manifest(need(a, "manifest"));
  const fs::path gt_dir = need(a, "gt-dir");
  d.prepared.resize(d.records.size());
  d.targets.resize(d.records.size());
  parallel_for(d.records.size(), s.jobs, [&](std::size_t i) {
    d.prepared[i] = prepare_scenario(d.records[i], s.viewport);
    d.targets[i] = target_tensor(load_ground_truth(gt_dir, d.records[i].scenario_id).density, s.vq_size);
  });
  return d;
}

std::string cmd_train_sal(const Args& a) {
  const Settings s = load_settings(a);
  check_size(s.vq_size);
  const fs::path out = need(a, "out");
  vq::VQNet net = vq::load_vqnet(need(a, "vq"));
  const SaliencyData d = load_saliency_data(a, s);
  if (net.mode() == vq::Mode::kReconstruction) {
    net.set_mode(vq::Mode::kSaliency);
    net.init_saliency_decoder();
  }
  if (!flag(a, "freeze", true)) net.backbone().set_frozen(false);
  std::vector<vq::Sample> data;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    data.push_back({vq::image_tensor(resized(d.prepared[i].superimposed, s.vq_size)), d.targets[i]});
  }
  const vq::TrainResult r = vq::train(net, data, s.schedule);
  net.backbone().set_frozen(true);
  vq::save(out, net);
  nlohmann::json meta = train_meta("train-sal", s, r);
  std::vector<std::string> ids;
  for (const auto& rec : d.records) ids.push_back(rec.scenario_id);
  meta["training_scenarios"] = ids;
  write_meta(out, meta);
  return train_summary(r, out);
}

std::string cmd_train_ar(const Args& a) {
  const Settings s = load_settings(a);
  check_size(s.vq_size);
  const fs::path out = need(a, "out");
  vq::VQNet base = vq::load_vqnet(need(a, "sal"));
  if (base.mode() != vq::Mode::kSaliency) throw ValidationError("--sal must be a saliency-mode checkpoint");
  const SaliencyData d = load_saliency_data(a, s);
  vq::ARFusionNet net(base);
  std::vector<vq::ArSample> data;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& p = d.prepared[i];
    data.push_back({vq::image_tensor(resized(p.ar_padded, s.vq_size)), vq::image_tensor(resized(p.bg_view, s.vq_size)),
                    vq::image_tensor(resized(p.superimposed, s.vq_size)), d.targets[i]});
  }
  const vq::TrainResult r = vq::train(net, data, s.schedule);
  vq::save(out, net);
  nlohmann::json meta = train_meta("train-ar", s, r);
  std::vector<std::string> ids;
  for (const auto& rec : d.records) ids.push_back(rec.scenario_id);
  meta["training_scenarios"] = ids;
  write_meta(out, meta);
  return train_summary(r, out);
}

std::string cmd_infer_ar(const Args& a) {
  const Settings s = load_settings(a);
  vq::ARFusionNet net = vq::load_arnet(need(a, "model"));
  const auto records = analysis::load_manifest(need(a, "manifest"));
  const fs::path out_dir = need(a, "out");
  const int size = s.vq_size;
  check_size(size);
  ensure_dir(out_dir);
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    const PreparedScenario p = prepare_scenario(records[i], s.viewport);
    const SaliencyDensity small = net.predict(vq::image_tensor(resized(p.ar_padded, size)),
                                              vq::image_tensor(resized(p.bg_view, size)),
                                              vq::image_tensor(resized(p.superimposed, size)));
    RealGrid full = resize(small.grid, s.viewport.width_px, s.viewport.height_px);
    for (double& v : full.values()) v = std::max(v, 0.0);
    const SaliencyDensity d = normalize(full, NormalizeMode::kSumToOne);
    io::write_float_grid(out_dir / (records[i].scenario_id + ".f32"), d.grid, d.state,
                         {{"run", run_meta("infer-ar", s)}, {"model", "VQSal-AR"}});
  });
  return "inferred " + std::to_string(records.size()) + " scenarios into " + out_dir.string();
}

// ---- analysis commands ---------------------------------------------------------------

std::string cmd_consistency(const Args& a) {
  const Settings s = load_settings(a);
  const auto rows = read_fixation_csv(need(a, "fixations"));
  const fs::path out = need(a, "out");
  const int trials = integer(a, "trials", 100);
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> subject_order;
  std::map<std::string, std::map<std::string, std::vector<PixelPos>>> grouped;
  for (const auto& r : rows) {
    if (!grouped.contains(r.scenario)) order.push_back(r.scenario);
    auto& subjects = grouped[r.scenario];
    if (!subjects.contains(r.subject)) subject_order[r.scenario].push_back(r.subject);
    auto& list = subjects[r.subject];
    if (auto p = gaze::latlong_to_viewport_px({0.0, r.fixation.lat_deg, r.fixation.long_deg}, s.viewport)) {
      list.push_back({std::clamp(static_cast<int>(std::floor(p->x)), 0, s.viewport.width_px - 1),
                      std::clamp(static_cast<int>(std::floor(p->y)), 0, s.viewport.height_px - 1)});
    }
  }
  std::vector<analysis::SubjectFixations> scenarios;
  std::size_t max_subjects = 0;
  for (const auto& id : order) {
    analysis::SubjectFixations sf;
    sf.scenario_id = id;
    for (const auto& subj : subject_order[id]) sf.subjects.push_back(grouped[id][subj]);
    max_subjects = std::max(max_subjects, sf.subjects.size());
    scenarios.push_back(std::move(sf));
  }
  std::vector<int> groups;
  if (auto g = opt(a, "groups")) {
    for (const auto& item : split_list(*g)) groups.push_back(static_cast<int>(to_int("groups", item)));
  } else {
    for (std::size_t n = 1; n <= max_subjects; ++n) groups.push_back(static_cast<int>(n));
  }
  const auto result = analysis::subject_consistency_curve(scenarios, groups, trials, s.seed, s.viewport, s.sigma_deg);
  nlohmann::json j = {{"run", run_meta("analyze-consistency", s)}, {"trials", trials}, {"warnings", result.warnings}};
  std::string dat = "# n mean_cc std_cc samples\n";
  for (const auto& p : result.curve) {
    j["curve"].push_back({{"n", p.n}, {"mean_cc", p.mean_cc}, {"std_cc", p.std_cc}, {"samples", p.samples}});
    dat += std::to_string(p.n) + " " + cell(p.mean_cc) + " " + cell(p.std_cc) + " " + std::to_string(p.samples) + "\n";
  }
  io::write_file_atomic(out, j.dump(2) + "\n");
  fs::path dat_path = out;
  dat_path.replace_extension(".dat");
  io::write_file_atomic(dat_path, dat);
  std::string summary = "consistency curve with " + std::to_string(result.curve.size()) + " points -> " + out.string();
  for (const auto& w : result.warnings) summary += "\nwarning: " + w;
  return summary;
}

std::string cmd_cross_mixing(const Args& a) {
  const Settings s = load_settings(a);
  const auto records = analysis::load_manifest(need(a, "manifest"));
  const fs::path gt_dir = need(a, "gt-dir");
  const fs::path out = need(a, "out");
  static constexpr std::array<double, 3> kLevels{0.25, 0.5, 0.75};
  std::vector<std::string> order;
  std::map<std::string, std::array<std::optional<std::size_t>, 3>> by_pair;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!by_pair.contains(records[i].pair_id)) order.push_back(records[i].pair_id);
    auto& slots = by_pair[records[i].pair_id];
    for (std::size_t l = 0; l < 3; ++l) {
      if (records[i].mixing == kLevels[l]) slots[l] = i;
    }
  }
  std::vector<analysis::MixingTriple> triples;
  std::vector<std::string> warnings;
  for (const auto& pair : order) {
    const auto& slots = by_pair[pair];
    if (!slots[0] || !slots[1] || !slots[2]) {
      warnings.push_back("pair " + pair + " lacks one of the mixing levels 0.25/0.5/0.75; skipped");
      continue;
    }
    analysis::MixingTriple t;
    t.pair_id = pair;
    t.category = records[*slots[0]].category;
    for (std::size_t l = 0; l < 3; ++l) t.maps[l] = load_ground_truth(gt_dir, records[*slots[l]].scenario_id).density.grid;
    triples.push_back(std::move(t));
  }
  const auto result = analysis::cross_mixing_correlation(triples);
  nlohmann::json j = {{"run", run_meta("analyze-cross-mixing", s)}, {"groups", result.to_json()}, {"warnings", warnings}};
  io::write_file_atomic(out, j.dump(2) + "\n");
  std::string csv = "pair_id,category";
  for (auto name : analysis::kMixingPairNames) csv += ",cc_" + std::string(name) + ",sim_" + std::string(name);
  csv += "\n";
  for (const auto& r : result.rows) {
    csv += io::csv_field(r.pair_id) + "," + std::string(analysis::to_string(r.category));
    for (std::size_t p = 0; p < 3; ++p) csv += "," + cell(r.cc[p]) + "," + cell(r.sim[p]);
    csv += "\n";
  }
  fs::path csv_path = out;
  csv_path.replace_extension(".csv");
  io::write_file_atomic(csv_path, csv);
  std::string summary = "cross-mixing agreement over " + std::to_string(triples.size()) + " pairs -> " + out.string();
  for (const auto& w : warnings) summary += "\nwarning: " + w;
  return summary;
}

std::string splits_csv(const std::vector<analysis::ScenarioRecord>& records, const analysis::CvSplits& splits) {
  std::string csv = "scenario_id,pair_id,category,mixing,fold\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    csv += io::csv_field(records[i].scenario_id) + "," + io::csv_field(records[i].pair_id) + "," +
           std::string(analysis::to_string(records[i].category)) + "," + cell(records[i].mixing) + "," +
           std::to_string(splits.fold_of[i]) + "\n";
  }
  return csv;
}

std::string cmd_cv_split(const Args& a) {
  const Settings s = load_settings(a);
  const auto records = analysis::load_manifest(need(a, "manifest"));
  const fs::path out = need(a, "out");
  const int k = integer(a, "k", 5);
  const auto splits = analysis::make_cv_splits(records, k, s.seed);
  io::write_file_atomic(out, splits_csv(records, splits));
  nlohmann::json audit = {{"run", run_meta("cv-split", s)}, {"k", k}};
  bool clean = true;
  for (int f = 0; f < k; ++f) {
    const auto a_f = analysis::audit_fold(records, splits.train_records(f), splits.fold_records(f), f);
    clean = clean && a_f.clean();
    audit["folds"].push_back(a_f.to_json());
  }
  fs::path audit_path = out;
  audit_path.replace_extension(".audit.json");
  io::write_file_atomic(audit_path, audit.dump(2) + "\n");
  write_meta(out, {{"run", run_meta("cv-split", s)}});
  return std::to_string(k) + " folds over " + std::to_string(records.size()) + " scenarios -> " + out.string() +
         (clean ? " (no leakage)" : " (LEAKAGE DETECTED)");
}

std::string cmd_benchmark(const Args& a) {
  const Settings s = load_settings(a);
  const auto records = analysis::load_manifest(need(a, "manifest"));
  const fs::path gt_dir = need(a, "gt-dir");
  const fs::path out_dir = need(a, "out-dir");
  analysis::BenchmarkConfig cfg;
  if (auto m = opt(a, "models")) cfg.models = split_list(*m);
  if (auto t = opt(a, "types")) {
    cfg.types.clear();
    for (const auto& item : split_list(*t)) cfg.types.push_back(static_cast<int>(to_int("types", item)));
  }
  cfg.folds = integer(a, "folds", 5);
  cfg.seed = s.seed;
  cfg.regressor = s.regressor;
  cfg.jobs = s.jobs;
  cfg.vq.enabled = flag(a, "vq", false);
  cfg.vq.size = s.vq_size;
  cfg.vq.config = s.vq;
  cfg.vq.reconstruction = s.schedule;
  cfg.vq.saliency = s.schedule;
  cfg.vq.fusion = s.schedule;
  cfg.validate();
  for (const auto& m : cfg.models) models::make_predictor(m, s.models);

  std::vector<analysis::BenchmarkScenario> scenarios(records.size());
  parallel_for(records.size(), s.jobs, [&](std::size_t i) {
    PreparedScenario p = prepare_scenario(records[i], s.viewport);
    GroundTruth gt = load_ground_truth(gt_dir, records[i].scenario_id);
    if (gt.density.width() != s.viewport.width_px || gt.density.height() != s.viewport.height_px) {
      throw ValidationError("ground truth for " + records[i].scenario_id + " does not match the viewport size");
    }
    scenarios[i] = {records[i], std::move(p.ar_padded), std::move(p.bg_view), std::move(p.superimposed),
                    std::move(gt.density), std::move(gt.fixations)};
  });
  const auto result = analysis::run_benchmark(scenarios, cfg);
  ensure_dir(out_dir);
  io::write_file_atomic(out_dir / "results.csv", analysis::reports_csv(result.reports, records));
  io::write_file_atomic(out_dir / "splits.csv", splits_csv(records, result.splits));
  nlohmann::json agg = result.aggregate;
  io::write_file_atomic(out_dir / "aggregate.json", agg.dump(2) + "\n");
  std::string audit;
  bool clean = true;
  for (const auto& au : result.audits) {
    audit += au.to_json().dump() + "\n";
    clean = clean && au.clean();
  }
  io::write_file_atomic(out_dir / "audit.jsonl", audit);
  nlohmann::json meta = {{"run", run_meta("analyze-benchmark", s)},
                         {"models", cfg.models},
                         {"types", cfg.types},
                         {"folds", cfg.folds},
                         {"vq", cfg.vq.enabled}};
  write_meta(out_dir / "results.csv", meta);
  return "benchmark: " + std::to_string(result.reports.size()) + " report rows -> " + (out_dir / "results.csv").string() +
         (clean ? " (audit clean)" : " (LEAKAGE DETECTED)");
}

const std::map<std::string, std::function<std::string(const Args&)>>& registry() {
  static const std::map<std::string, std::function<std::string(const Args&)>> commands = {
      {"composite", cmd_composite},
      {"gaze-process", cmd_gaze_process},
      {"gt-maps", cmd_gt_maps},
      {"predict", cmd_predict},
      {"fuse", cmd_fuse},
      {"evaluate", cmd_evaluate},
      {"train-vq", cmd_train_vq},
      {"train-sal", cmd_train_sal},
      {"train-ar", cmd_train_ar},
      {"infer-ar", cmd_infer_ar},
      {"analyze-consistency", cmd_consistency},
      {"analyze-cross-mixing", cmd_cross_mixing},
      {"analyze-cv-split", cmd_cv_split},
      {"analyze-benchmark", cmd_benchmark},
      {"cv-split", cmd_cv_split},
  };
  return commands;
}

}  // namespace

ViewportSpec viewport_from_json(const nlohmann::json& j, ViewportSpec base) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw ValidationError("viewport spec must be a JSON object");
  try {
    const bool resized = j.contains("width_px") || j.contains("height_px") || j.contains("fov_h_deg");
    base.width_px = j.value("width_px", base.width_px);
    base.height_px = j.value("height_px", base.height_px);
    base.fov_h_deg = j.value("fov_h_deg", base.fov_h_deg);
    if (j.contains("fov_v_deg")) {
      base.fov_v_deg = j.at("fov_v_deg").get<double>();
    } else if (resized) {
      base.fov_v_deg = ViewportSpec::square_pixel_fov_v(base.width_px, base.height_px, base.fov_h_deg);
    }
    base.center_lat_deg = j.value("center_lat_deg", base.center_lat_deg);
    base.center_long_deg = j.value("center_long_deg", base.center_long_deg);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid viewport spec: ") + e.what());
  }
  base.validate();
  return base;
}

nlohmann::json viewport_to_json(const ViewportSpec& spec) {
  return {{"width_px", spec.width_px},         {"height_px", spec.height_px},
          {"fov_h_deg", spec.fov_h_deg},       {"fov_v_deg", spec.fov_v_deg},
          {"center_lat_deg", spec.center_lat_deg}, {"center_long_deg", spec.center_long_deg}};
}

gaze::FixationParams fixation_params_from_json(const nlohmann::json& j, gaze::FixationParams base) {
  if (j.is_null()) return base;
  try {
    base.window_samples = j.value("window_samples", base.window_samples);
    base.mad_threshold_deg_per_s = j.value("mad_threshold_deg_per_s", base.mad_threshold_deg_per_s);
    base.min_duration_ms = j.value("min_duration_ms", base.min_duration_ms);
    base.sample_rate_hz = j.value("sample_rate_hz", base.sample_rate_hz);
    const std::string src = j.value("mad_source", std::string("velocity"));
    if (src == "velocity") {
      base.mad_source = gaze::MadSource::kVelocity;
    } else if (src == "position") {
      base.mad_source = gaze::MadSource::kPosition;
    } else {
      throw ValidationError("mad_source must be 'velocity' or 'position'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid fixation parameters: ") + e.what());
  }
  base.validate();
  return base;
}

Settings load_settings(const Args& a) {
  nlohmann::json cfg = nlohmann::json::object();
  if (auto path = opt(a, "config")) cfg = load_json(*path);
  if (!cfg.is_object()) throw ValidationError("config must be a JSON object");
  Settings s;
  auto section = [&](const char* key) { return cfg.contains(key) ? cfg[key] : nlohmann::json(); };
  try {
    s.seed = cfg.value("seed", std::uint64_t{0});
    s.jobs = cfg.value("jobs", default_jobs());
    s.sigma_deg = cfg.value("sigma_deg", s.sigma_deg);
    s.vq_size = cfg.value("vq_size", s.vq_size);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  if (auto v = opt(a, "seed")) s.seed = static_cast<std::uint64_t>(to_int("seed", *v));
  if (auto v = opt(a, "jobs")) s.jobs = static_cast<int>(to_int("jobs", *v));
  if (s.jobs < 1) throw ValidationError("--jobs must be at least 1");
  s.sigma_deg = number(a, "sigma-deg", s.sigma_deg);
  if (!(s.sigma_deg > 0.0)) throw ValidationError("sigma_deg must be positive");
  s.vq_size = integer(a, "size", s.vq_size);

  s.viewport = viewport_from_json(section("viewport"));
  if (auto spec = opt(a, "spec")) s.viewport = viewport_from_json(load_json(*spec), s.viewport);
  s.fixation = fixation_params_from_json(section("fixation"));
  if (auto p = opt(a, "params")) s.fixation = fixation_params_from_json(load_json(*p), s.fixation);
  s.models = cfg.contains("models") ? models::ModelConfig::from_json(cfg["models"]) : models::ModelConfig{};

  nlohmann::json reg = section("regressor");
  if (reg.is_null()) reg = nlohmann::json::object();
  if (!reg.contains("seed")) reg["seed"] = s.seed;
  s.regressor = fusion::RegressorConfig::from_json(reg);
  if (flag(a, "ridge", s.regressor.use_ridge)) s.regressor.use_ridge = true;

  nlohmann::json vqj = section("vq");
  if (vqj.is_null()) vqj = nlohmann::json::object();
  if (!vqj.contains("seed")) vqj["seed"] = s.seed;
  const nlohmann::json loss = section("loss");
  if (loss.is_object()) {
    if (loss.contains("beta")) vqj["beta"] = loss["beta"];
    if (loss.contains("lambda")) vqj["lambda"] = loss["lambda"];
  }
  if (auto v = opt(a, "beta")) vqj["beta"] = to_double("beta", *v);
  if (auto v = opt(a, "lambda")) vqj["lambda"] = to_double("lambda", *v);
  if (auto v = opt(a, "rec-target")) vqj["sal_rec_target"] = *v;
  s.vq = vq::VQConfig::from_json(vqj);

  nlohmann::json sch = section("schedule");
  if (sch.is_null()) sch = nlohmann::json::object();
  if (!sch.contains("seed")) sch["seed"] = s.seed;
  if (auto v = opt(a, "steps")) sch["steps"] = to_int("steps", *v);
  if (auto v = opt(a, "lr")) sch["learning_rate"] = to_double("lr", *v);
  if (auto v = opt(a, "batch")) sch["batch_size"] = to_int("batch", *v);
  if (auto v = opt(a, "adversarial")) sch["adversarial"] = to_bool("adversarial", *v);
  s.schedule = vq::Schedule::from_json(sch);

  s.canonical = {{"seed", s.seed},
                 {"viewport", viewport_to_json(s.viewport)},
                 {"fixation",
                  {{"window_samples", s.fixation.window_samples},
                   {"mad_threshold_deg_per_s", s.fixation.mad_threshold_deg_per_s},
                   {"min_duration_ms", s.fixation.min_duration_ms},
                   {"sample_rate_hz", s.fixation.sample_rate_hz},
                   {"mad_source", s.fixation.mad_source == gaze::MadSource::kVelocity ? "velocity" : "position"}}},
                 {"sigma_deg", s.sigma_deg},
                 {"models", s.models.to_json()},
                 {"regressor", s.regressor.to_json()},
                 {"vq", s.vq.to_json()},
                 {"schedule", s.schedule.to_json()},
                 {"vq_size", s.vq_size}};
  return s;
}

PreparedScenario prepare_scenario(const analysis::ScenarioRecord& record, const ViewportSpec& spec) {
  PreparedScenario p;
  p.ar_padded = compositor::pad_ar(io::read_image(record.ar_path), spec);
  p.bg_view = compositor::extract_viewport(io::read_image(record.bg_path), spec);
  p.superimposed = compositor::composite(p.ar_padded, p.bg_view, MixingLevel(record.mixing));
  return p;
}

GroundTruth load_ground_truth(const fs::path& dir, const std::string& scenario_id) {
  GroundTruth gt;
  gt.density = io::read_float_grid(dir / (scenario_id + ".f32"));
  const io::CsvTable t = io::CsvTable::load(dir / (scenario_id + ".fixations.csv"));
  std::vector<PixelPos> pts;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    pts.push_back({static_cast<int>(t.number(r, "x")), static_cast<int>(t.number(r, "y"))});
  }
  gt.fixations = FixationMap(gt.density.width(), gt.density.height(), std::move(pts));
  return gt;
}

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : registry()) out.push_back(name);
  return out;
}

std::string run_command(const std::string& name, const Args& args) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ValidationError("unknown command '" + name + "'");
  return it->second(args);
}

}  // namespace arsal::app
