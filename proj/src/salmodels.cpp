#include "arsal/salmodels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <opencv2/core.hpp>

namespace arsal::models {

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Spectral reconstruction shared by SR and PFT. With residual == false every
// kept bin gets unit amplitude (phase-only transform).
RealGrid spectral_map(const RealGrid& gray, bool residual, const SpectralParams& params) {
  const int w = gray.width();
  const int h = gray.height();
  cv::Mat spatial(h, w, CV_64FC2);
  for (int y = 0; y < h; ++y) {
    auto* row = spatial.ptr<cv::Vec2d>(y);
    for (int x = 0; x < w; ++x) row[x] = cv::Vec2d(gray(x, y), 0.0);
  }
  cv::Mat spectrum;
  cv::dft(spatial, spectrum, cv::DFT_COMPLEX_OUTPUT);

  RealGrid amplitude(w, h);
  RealGrid phase(w, h);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    const auto* row = spectrum.ptr<cv::Vec2d>(y);
    for (int x = 0; x < w; ++x) {
      amplitude(x, y) = std::hypot(row[x][0], row[x][1]);
      phase(x, y) = std::atan2(row[x][1], row[x][0]);
      peak = std::max(peak, amplitude(x, y));
    }
  }
  const double floor = peak * params.amplitude_floor;
  Grid<std::uint8_t> kept(w, h, 0);
  RealGrid log_amp(w, h, 0.0);
  for (std::size_t i = 0; i < amplitude.size(); ++i) {
    kept[i] = peak > 0.0 && amplitude[i] > floor;
    if (kept[i]) log_amp[i] = std::log(amplitude[i]);
  }

  cv::Mat recon(h, w, CV_64FC2, cv::Scalar(0.0, 0.0));
  for (int y = 0; y < h; ++y) {
    auto* row = recon.ptr<cv::Vec2d>(y);
    for (int x = 0; x < w; ++x) {
      if (!kept(x, y)) continue;
      double magnitude = 1.0;
      if (residual) {
        // 3x3 mean of the log spectrum over kept bins, periodic in frequency.
        double sum = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = wrap(x + dx, w);
            const int yy = wrap(y + dy, h);
            if (!kept(xx, yy)) continue;
            sum += log_amp(xx, yy);
            ++count;
          }
        }
        magnitude = std::exp(log_amp(x, y) - sum / count);
      }
      row[x] = cv::Vec2d(magnitude * std::cos(phase(x, y)), magnitude * std::sin(phase(x, y)));
    }
  }
  cv::Mat back;
  cv::dft(recon, back, cv::DFT_INVERSE | cv::DFT_SCALE | cv::DFT_COMPLEX_OUTPUT);
  RealGrid energy(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* row = back.ptr<cv::Vec2d>(y);
    for (int x = 0; x < w; ++x) energy(x, y) = row[x][0] * row[x][0] + row[x][1] * row[x][1];
  }
  return energy;
}

SaliencyDensity spectral_model(const ViewportImage& img, bool residual, const SpectralParams& params) {
  const RealGrid gray = img.gray();
  const int work_w = std::max(1, params.work_width);
  const int work_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(work_w) * img.height() / img.width())));
  const RealGrid small = resize(gray, work_w, work_h);
  RealGrid energy = spectral_map(small, residual, params);
  energy = gaussian_blur(energy, params.blur_sigma);
  return normalize(resize_bilinear(energy, img.width(), img.height()), NormalizeMode::kMinMax);
}

// --- Itti-Koch -------------------------------------------------------------

// Separable [1 3 3 1]/8 filter with stride 2. Being symmetric about the gap
// between samples, it keeps the pyramid equivariant under 90-degree rotations.
RealGrid pyr_down(const RealGrid& src) {
  const int w = src.width();
  const int h = src.height();
  const int ow = std::max(1, (w + 1) / 2);
  const int oh = std::max(1, (h + 1) / 2);
  static constexpr double k[4] = {1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0};
  RealGrid tmp(ow, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < 4; ++t) acc += k[t] * src(reflect(2 * x - 1 + t, w), y);
      tmp(x, y) = acc;
    }
  }
  RealGrid out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < 4; ++t) acc += k[t] * tmp(x, reflect(2 * y - 1 + t, h));
      out(x, y) = acc;
    }
  }
  return out;
}

std::vector<RealGrid> pyramid(const RealGrid& base, int levels) {
  std::vector<RealGrid> out;
  out.push_back(base);
  for (int l = 1; l < levels; ++l) out.push_back(pyr_down(out.back()));
  return out;
}

RealGrid convolve(const RealGrid& src, const RealGrid& kernel) {
  const int r = kernel.width() / 2;
  RealGrid out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      double acc = 0.0;
      for (int ky = -r; ky <= r; ++ky) {
        const int yy = reflect(y + ky, src.height());
        for (int kx = -r; kx <= r; ++kx) {
          acc += kernel(kx + r, ky + r) * src(reflect(x + kx, src.width()), yy);
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

RealGrid odd_gabor(double theta_deg, const IttiParams& p) {
  const int r = p.gabor_radius;
  RealGrid k(2 * r + 1, 2 * r + 1);
  const double t = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  const double s = std::sin(t);
  double positive = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      // Carrier runs across the preferred orientation so bars at theta respond.
      const double across = -x * s + y * c;
      const double env = std::exp(-(x * x + y * y) / (2.0 * p.gabor_sigma * p.gabor_sigma));
      const double v = env * std::sin(2.0 * std::numbers::pi * across / p.gabor_wavelength);
      k(x + r, y + r) = v;
      if (v > 0.0) positive += v;
    }
  }
  if (positive > 0.0) {
    for (double& v : k.values()) v /= positive;
  }
  return k;
}

RealGrid abs_diff(const RealGrid& center, const RealGrid& surround) {
  const RealGrid up = resize_bilinear(surround, center.width(), center.height());
  RealGrid out(center.width(), center.height());
  // Differences at rounding level are noise; left in, min-max would blow a
  // constant image up into a textured map.
  constexpr double kNoise = 1e-9;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = std::abs(center[i] - up[i]);
    out[i] = d < kNoise ? 0.0 : d;
  }
  return out;
}

void accumulate(RealGrid& into, const RealGrid& map) {
  const RealGrid resized = resize(map, into.width(), into.height());
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += resized[i];
}

}  // namespace

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("spectral")) {
    const auto& s = j["spectral"];
    c.spectral.work_width = s.value("work_width", c.spectral.work_width);
    c.spectral.blur_sigma = s.value("blur_sigma", c.spectral.blur_sigma);
    c.spectral.amplitude_floor = s.value("amplitude_floor", c.spectral.amplitude_floor);
  }
  if (j.contains("itti")) {
    const auto& s = j["itti"];
    c.itti.min_short_side = s.value("min_short_side", c.itti.min_short_side);
    c.itti.levels = s.value("levels", c.itti.levels);
    c.itti.centers = s.value("centers", c.itti.centers);
    c.itti.deltas = s.value("deltas", c.itti.deltas);
    c.itti.output_level = s.value("output_level", c.itti.output_level);
    c.itti.gabor_sigma = s.value("gabor_sigma", c.itti.gabor_sigma);
    c.itti.gabor_wavelength = s.value("gabor_wavelength", c.itti.gabor_wavelength);
    c.itti.gabor_radius = s.value("gabor_radius", c.itti.gabor_radius);
    c.itti.local_max_threshold = s.value("local_max_threshold", c.itti.local_max_threshold);
  }
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"spectral",
           {{"work_width", spectral.work_width},
            {"blur_sigma", spectral.blur_sigma},
            {"amplitude_floor", spectral.amplitude_floor}}},
          {"itti",
           {{"min_short_side", itti.min_short_side},
            {"levels", itti.levels},
            {"centers", itti.centers},
            {"deltas", itti.deltas},
            {"output_level", itti.output_level},
            {"gabor_sigma", itti.gabor_sigma},
            {"gabor_wavelength", itti.gabor_wavelength},
            {"gabor_radius", itti.gabor_radius},
            {"local_max_threshold", itti.local_max_threshold}}}};
}

SaliencyDensity spectral_residual(const ViewportImage& img, const SpectralParams& params) {
  return spectral_model(img, true, params);
}

SaliencyDensity pft(const ViewportImage& img, const SpectralParams& params) {
  return spectral_model(img, false, params);
}

RealGrid itti_normalize(const RealGrid& map, double local_max_threshold) {
  RealGrid scaled = normalize(map, NormalizeMode::kMinMax).grid;
  const int w = scaled.width();
  const int h = scaled.height();
  double sum = 0.0;
  int count = 0;
  bool skipped_global = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = scaled(x, y);
      if (v < local_max_threshold || v <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          if (!scaled.in_bounds(xx, yy)) continue;
          const double n = scaled(xx, yy);
          // Neighbours earlier in raster order must be strictly lower so a
          // plateau contributes a single maximum.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (n > v || (earlier && n == v)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      if (v == 1.0 && !skipped_global) {
        skipped_global = true;
        continue;
      }
      sum += v;
      ++count;
    }
  }
  const double others = count > 0 ? sum / count : 0.0;
  const double weight = (1.0 - others) * (1.0 - others);
  for (double& v : scaled.values()) v *= weight;
  return scaled;
}

SaliencyDensity itti(const ViewportImage& img, const IttiParams& p) {
  const int short_side = std::min(img.width(), img.height());
  const double scale = short_side < p.min_short_side ? static_cast<double>(p.min_short_side) / short_side : 1.0;
  const int bw = static_cast<int>(std::lround(img.width() * scale));
  const int bh = static_cast<int>(std::lround(img.height() * scale));
  auto base = [&](const RealGrid& g) { return scale == 1.0 ? g : resize_bilinear(g, bw, bh); };

  const RealGrid r0 = base(img.channel(0));
  const RealGrid g0 = base(img.channel(1));
  const RealGrid b0 = base(img.channel(2));
  const auto rp = pyramid(r0, p.levels);
  const auto gp = pyramid(g0, p.levels);
  const auto bp = pyramid(b0, p.levels);

  const int levels = p.levels;
  std::vector<RealGrid> intensity(static_cast<std::size_t>(levels));
  std::vector<RealGrid> rg(static_cast<std::size_t>(levels));
  std::vector<RealGrid> by(static_cast<std::size_t>(levels));
  double max_intensity = 0.0;
  for (int l = 0; l < levels; ++l) {
    const auto li = static_cast<std::size_t>(l);
    intensity[li] = RealGrid(rp[li].width(), rp[li].height());
    for (std::size_t i = 0; i < intensity[li].size(); ++i) {
      intensity[li][i] = (rp[li][i] + gp[li][i] + bp[li][i]) / 3.0;
      if (l == 0) max_intensity = std::max(max_intensity, intensity[li][i]);
    }
  }
  for (int l = 0; l < levels; ++l) {
    const auto li = static_cast<std::size_t>(l);
    rg[li] = RealGrid(rp[li].width(), rp[li].height());
    by[li] = RealGrid(rp[li].width(), rp[li].height());
    for (std::size_t i = 0; i < rg[li].size(); ++i) {
      const double in = intensity[li][i];
      if (!(in > 0.1 * max_intensity) || in <= 0.0) continue;
      const double r = rp[li][i] / in;
      const double g = gp[li][i] / in;
      const double b = bp[li][i] / in;
      const double R = std::max(0.0, r - (g + b) / 2.0);
      const double G = std::max(0.0, g - (r + b) / 2.0);
      const double B = std::max(0.0, b - (r + g) / 2.0);
      const double Y = std::max(0.0, (r + g) / 2.0 - std::abs(r - g) / 2.0 - b);
      rg[li][i] = R - G;
      by[li][i] = B - Y;
    }
  }

  static constexpr double kAngles[4] = {0.0, 45.0, 90.0, 135.0};
  std::vector<std::vector<RealGrid>> orient(4);
  for (int o = 0; o < 4; ++o) {
    const RealGrid kernel = odd_gabor(kAngles[o], p);
    for (int l = 0; l < levels; ++l) {
      RealGrid resp = convolve(intensity[static_cast<std::size_t>(l)], kernel);
      for (double& v : resp.values()) v = std::abs(v);
      orient[static_cast<std::size_t>(o)].push_back(std::move(resp));
    }
  }

  const auto& out_ref = intensity[static_cast<std::size_t>(std::min(p.output_level, levels - 1))];
  const int ow = out_ref.width();
  const int oh = out_ref.height();
  RealGrid intensity_consp(ow, oh, 0.0);
  RealGrid color_consp(ow, oh, 0.0);
  RealGrid orient_consp(ow, oh, 0.0);
  std::vector<RealGrid> per_angle(4, RealGrid(ow, oh, 0.0));
  const double thr = p.local_max_threshold;
  for (int c : p.centers) {
    for (int d : p.deltas) {
      const int s = c + d;
      if (c < 0 || s >= levels) continue;
      const auto ci = static_cast<std::size_t>(c);
      const auto si = static_cast<std::size_t>(s);
      accumulate(intensity_consp, itti_normalize(abs_diff(intensity[ci], intensity[si]), thr));
      accumulate(color_consp, itti_normalize(abs_diff(rg[ci], rg[si]), thr));
      accumulate(color_consp, itti_normalize(abs_diff(by[ci], by[si]), thr));
      for (std::size_t o = 0; o < 4; ++o) {
        accumulate(per_angle[o], itti_normalize(abs_diff(orient[o][ci], orient[o][si]), thr));
      }
    }
  }
  for (const auto& m : per_angle) accumulate(orient_consp, itti_normalize(m, thr));

  const RealGrid ni = itti_normalize(intensity_consp, thr);
  const RealGrid nc = itti_normalize(color_consp, thr);
  const RealGrid no = itti_normalize(orient_consp, thr);
  RealGrid combined(ow, oh);
  for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = (ni[i] + nc[i] + no[i]) / 3.0;
  return normalize(resize_bilinear(combined, img.width(), img.height()), NormalizeMode::kMinMax);
}

namespace {

class SpectralResidualModel final : public Predictor {
 public:
  explicit SpectralResidualModel(SpectralParams p) : params_(p) {}
  std::string_view name() const override { return "SR"; }
  SaliencyDensity predict(const ViewportImage& img) const override { return spectral_residual(img, params_); }

 private:
  SpectralParams params_;
};

class PftModel final : public Predictor {
 public:
  explicit PftModel(SpectralParams p) : params_(p) {}
  std::string_view name() const override { return "PFT"; }
  SaliencyDensity predict(const ViewportImage& img) const override { return pft(img, params_); }

 private:
  SpectralParams params_;
};

class IttiModel final : public Predictor {
 public:
  explicit IttiModel(IttiParams p) : params_(std::move(p)) {}
  std::string_view name() const override { return "IT"; }
  SaliencyDensity predict(const ViewportImage& img) const override { return itti(img, params_); }

 private:
  IttiParams params_;
};

}  // namespace

Registry::Registry() {
  factories_["SR"] = [](const ModelConfig& c) { return std::make_unique<SpectralResidualModel>(c.spectral); };
  factories_["PFT"] = [](const ModelConfig& c) { return std::make_unique<PftModel>(c.spectral); };
  factories_["IT"] = [](const ModelConfig& c) { return std::make_unique<IttiModel>(c.itti); };
}

Registry& Registry::global() {
  static Registry registry;
  return registry;
}

void Registry::add(std::string name, PredictorFactory factory) {
  std::lock_guard lock(registry_mutex());
  factories_[std::move(name)] = std::move(factory);
}

bool Registry::contains(std::string_view name) const {
  std::lock_guard lock(registry_mutex());
  return factories_.find(name) != factories_.end();
}

std::vector<std::string> Registry::names() const {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

std::unique_ptr<Predictor> Registry::create(std::string_view name, const ModelConfig& config) const {
  PredictorFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    const auto it = factories_.find(name);
    if (it == factories_.end()) {
      throw ValidationError("unknown saliency model '" + std::string(name) + "'");
    }
    factory = it->second;
  }
  return factory(config);
}

}  // namespace arsal::models
