#include "arsal/vqsal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "arsal/io.hpp"
#include "arsal/rng.hpp"

namespace arsal::vq {

namespace {

constexpr double kEps = 1e-7;
constexpr const char* kMagic = "ARSAL-CHECKPOINT 1";

Tensor random_tensor(std::vector<int> shape, double sd, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

void require_divisible(const Tensor& image) {
  if (image.shape.size() != 3 || image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0 || image.dim(1) == 0 ||
      image.dim(2) == 0) {
    throw ValidationError("network input must be {C,H,W} with H and W positive multiples of 4");
  }
}

Decoder renamed(const Decoder& d, const std::string& prefix) {
  Decoder out = d;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    out.layers[i].weight.name = prefix + "." + std::to_string(i) + ".weight";
    out.layers[i].bias.name = prefix + "." + std::to_string(i) + ".bias";
  }
  return out;
}

Var sum_to_one(Var x) { return div(x, sum(x)); }

PerceptualOptions perceptual_options(const VQConfig& c) {
  PerceptualOptions o;
  o.scales = c.perceptual_scales;
  o.gradient_eps = c.gradient_eps;
  return o;
}

std::string to_string(SalRecTarget t) { return t == SalRecTarget::kImage ? "image" : "saliency-map"; }

SalRecTarget sal_rec_from_string(const std::string& s) {
  if (s == "image") return SalRecTarget::kImage;
  if (s == "saliency-map") return SalRecTarget::kSaliencyMap;
  throw ValidationError("unknown L_rec target: " + s);
}

struct Momentum {
  std::vector<Parameter*> params;
  std::vector<Tensor> velocity;

  explicit Momentum(std::vector<Parameter*> p) : params(std::move(p)) {
    for (Parameter* q : params) velocity.emplace_back(q->value.shape, 0.0);
  }

  void step(double lr, double mu, double clip_norm) {
    double sq = 0.0;
    for (const Parameter* p : params) {
      for (double g : p->grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    const double scale = clip_norm > 0.0 && norm > clip_norm ? clip_norm / norm : 1.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      Tensor& v = velocity[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        v.data[j] = mu * v.data[j] + scale * p.grad.data[j];
        p.value.data[j] -= lr * v.data[j];
      }
    }
  }
};

template <typename T>
std::vector<T> draw_batch(const std::vector<T>& data, int batch_size, Rng& rng) {
  std::vector<T> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) batch.push_back(data[static_cast<std::size_t>(rng.index(data.size()))]);
  return batch;
}

void finish(TrainResult& r) { r.slope = trend_slope(r.losses); }

}  // namespace

void VQLossWeights::validate() const {
  if (!(beta > 0.0) || !(lambda > 0.0)) {
    throw ValidationError("beta and lambda must be positive");
  }
}

void VQConfig::validate() const {
  if (in_channels < 1 || codebook_size < 1 || n_z < 1 || enc_channels1 < 1 || enc_channels2 < 1) {
    throw ValidationError("network sizes must be positive");
  }
  if (perceptual_scales < 1) throw ValidationError("perceptual_scales must be at least 1");
  if (!(gradient_eps > 0.0)) throw ValidationError("gradient_eps must be positive");
  weights.validate();
}

nlohmann::json VQConfig::to_json() const {
  return {{"in_channels", in_channels},
          {"K", codebook_size},
          {"n_z", n_z},
          {"enc_channels", {enc_channels1, enc_channels2}},
          {"seed", seed},
          {"beta", weights.beta},
          {"lambda", weights.lambda},
          {"sal_rec_target", to_string(sal_rec_target)},
          {"perceptual_scales", perceptual_scales},
          {"gradient_eps", gradient_eps}};
}

VQConfig VQConfig::from_json(const nlohmann::json& j) {
  VQConfig c;
  try {
    c.in_channels = j.value("in_channels", c.in_channels);
    c.codebook_size = j.value("K", c.codebook_size);
    c.n_z = j.value("n_z", c.n_z);
    if (j.contains("enc_channels")) {
      const auto ch = j.at("enc_channels").get<std::vector<int>>();
      if (ch.size() != 2) throw ValidationError("enc_channels needs two entries");
      c.enc_channels1 = ch[0];
      c.enc_channels2 = ch[1];
    }
    c.seed = j.value("seed", c.seed);
    c.weights.beta = j.value("beta", c.weights.beta);
    c.weights.lambda = j.value("lambda", c.weights.lambda);
    c.sal_rec_target = sal_rec_from_string(j.value("sal_rec_target", to_string(c.sal_rec_target)));
    c.perceptual_scales = j.value("perceptual_scales", c.perceptual_scales);
    c.gradient_eps = j.value("gradient_eps", c.gradient_eps);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid network config: ") + e.what());
  }
  c.validate();
  return c;
}

Conv::Conv(std::string name, int in, int out, int stride_, std::uint64_t seed) : stride(stride_) {
  Rng rng(seed);
  const double sd = std::sqrt(1.0 / (in * 9.0));
  weight = Parameter(name + ".weight", random_tensor({out, in, 3, 3}, sd, rng));
  bias = Parameter(name + ".bias", Tensor({out}, 0.0));
}

Var Conv::forward(Tape& tape, Var x) {
  return ad::conv2d(x, tape.parameter(weight), tape.parameter(bias), stride, 1);
}

Var Encoder::forward(Tape& tape, Var x) {
  Var h = silu(layers.at(0).forward(tape, x));
  h = silu(layers.at(1).forward(tape, h));
  return layers.at(2).forward(tape, h);
}

Decoder::Decoder(const std::string& prefix, int n_z, int c2, int c1, int out, std::uint64_t seed) {
  Rng rng(seed);
  layers.emplace_back(prefix + ".0", n_z, c2, 1, rng.fork());
  layers.emplace_back(prefix + ".1", c2, c1, 1, rng.fork());
  layers.emplace_back(prefix + ".2", c1, out, 1, rng.fork());
}

Var Decoder::forward(Tape& tape, Var z) {
  Var h = upsample_nearest2x(silu(layers.at(0).forward(tape, z)));
  h = upsample_nearest2x(silu(layers.at(1).forward(tape, h)));
  return layers.at(2).forward(tape, h);
}

std::vector<Parameter*> Decoder::parameters() {
  std::vector<Parameter*> out;
  for (Conv& c : layers) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<Parameter*> Backbone::parameters() {
  std::vector<Parameter*> out;
  for (Conv& c : encoder.layers) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  out.push_back(&codebook);
  return out;
}

void Backbone::set_frozen(bool frozen) {
  for (Parameter* p : parameters()) p->frozen = frozen;
}

VisualTokens tokenize(Backbone& backbone, const Tensor& image) {
  require_divisible(image);
  Tape tape;
  Var z = backbone.encoder.forward(tape, tape.constant(image));
  ad::Quantized q = ad::quantize(z, tape.constant(backbone.codebook.value));
  VisualTokens t;
  t.indices = Grid<int>(z.value().dim(2), z.value().dim(1), std::move(q.indices));
  t.embedded = q.z_q.value();
  return t;
}

Var mse(Var a, Var b) {
  if (a.value().size() != b.value().size()) throw ValidationError("MSE operands differ in size");
  return mean(square(sub(a, b)));
}

Var perceptual_loss(Var a, Var b, const PerceptualOptions& options) {
  if (a.value().shape != b.value().shape) throw ValidationError("perceptual loss operands differ in shape");
  if (a.value().shape.size() != 3) throw ValidationError("perceptual loss expects {C,H,W} maps");
  Var total = mse(a, b);
  Var pa = a;
  Var pb = b;
  for (int s = 1; s < options.scales; ++s) {
    if (std::min(pa.value().dim(1), pa.value().dim(2)) < 2) break;
    pa = pyr_down(pa);
    pb = pyr_down(pb);
    total = add(total, mse(pa, pb));
  }
  if (a.value().dim(1) >= 2 && a.value().dim(2) >= 2) {
    total = add(total, mse(grad_magnitude(a, options.gradient_eps), grad_magnitude(b, options.gradient_eps)));
  }
  if (options.features) {
    Tape& tape = *a.tape;
    total = add(total, mse(options.features(tape, a), options.features(tape, b)));
  }
  return total;
}

VqLossTerms vq_loss(Var x, Var x_hat, Var z_enc, Var z_q, const VQLossWeights& weights,
                    const PerceptualOptions& perceptual) {
  if (x.value().shape != x_hat.value().shape || z_enc.value().shape != z_q.value().shape) {
    throw ValidationError("vq_loss operands differ in shape");
  }
  VqLossTerms t;
  t.rec = add(mse(x, x_hat), perceptual_loss(x, x_hat, perceptual));
  t.codebook = mse(stop_gradient(z_enc), z_q);
  t.commitment = scale(mse(stop_gradient(z_q), z_enc), weights.beta);
  t.total = add(add(t.rec, t.codebook), t.commitment);
  return t;
}

SaliencyLossTerms saliency_loss(Var pred, Var gt, double lambda, const PerceptualOptions& perceptual) {
  const Tensor& g = gt.value();
  if (pred.value().shape != g.shape) throw ValidationError("saliency loss operands differ in shape");
  const double n = static_cast<double>(g.size());
  // Mean-one rescaling keeps the loss terms independent of the map size.
  Var pm = scale(pred, n);
  Var gm = scale(gt, n);
  SaliencyLossTerms t;
  t.rec = add(mse(pm, gm), perceptual_loss(pm, gm, perceptual));

  Var pc = sub(pm, mean(pm));
  Var gc = sub(gm, mean(gm));
  Var cov = mean(mul(pc, gc));
  Var var = mul(mean(square(pc)), mean(square(gc)));
  Var cc = div(cov, ad::sqrt(add_scalar(var, 1e-24)));
  t.cc = add_scalar(scale(cc, -1.0), 1.0);

  double entropy_part = 0.0;
  for (double v : g.data) {
    if (v > 0.0) entropy_part += v * std::log(v);
  }
  t.kl = add_scalar(scale(dot_const(log_eps(pred, kEps), g), -1.0), entropy_part);
  t.total = add(t.rec, scale(add(t.cc, t.kl), lambda));
  return t;
}

double saliency_loss_value(const SaliencyDensity& pred, const SaliencyDensity& gt, double lambda,
                           const PerceptualOptions& perceptual) {
  if (!pred.grid.same_shape(gt.grid)) throw ValidationError("saliency loss operands differ in size");
  Tape tape;
  Var p = tape.constant(grid_tensor(normalize(pred, NormalizeMode::kSumToOne).grid));
  Var g = tape.constant(grid_tensor(normalize(gt, NormalizeMode::kSumToOne).grid));
  return saliency_loss(p, g, lambda, perceptual).total.value().item();
}

GanLosses gan_loss(const Tensor& d_real, const Tensor& d_fake) {
  Tape tape;
  Var r = tape.constant(d_real);
  Var f = tape.constant(d_fake);
  return {gan_loss_d(r, f).value().item(), gan_loss_g(f).value().item()};
}

Var gan_loss_d(Var d_real, Var d_fake) {
  Var real_term = mean(log_eps(d_real, kEps));
  Var fake_term = mean(log_eps(add_scalar(scale(d_fake, -1.0), 1.0), kEps));
  return scale(add(real_term, fake_term), -1.0);
}

Var gan_loss_g(Var d_fake) { return scale(mean(log_eps(d_fake, kEps)), -1.0); }

PatchDiscriminator::PatchDiscriminator(int in_channels, std::uint64_t seed) {
  Rng rng(seed);
  layers.emplace_back("disc.0", in_channels, 16, 2, rng.fork());
  layers.emplace_back("disc.1", 16, 32, 2, rng.fork());
  layers.emplace_back("disc.2", 32, 1, 1, rng.fork());
}

Var PatchDiscriminator::forward(Tape& tape, Var x) {
  Var h = silu(layers.at(0).forward(tape, x));
  h = silu(layers.at(1).forward(tape, h));
  return sigmoid(layers.at(2).forward(tape, h));
}

std::vector<Parameter*> PatchDiscriminator::parameters() {
  std::vector<Parameter*> out;
  for (Conv& c : layers) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

VQNet::VQNet(const VQConfig& config) : config_(config), backbone_(std::make_shared<Backbone>()) {
  config_.validate();
  Rng rng(config_.seed);
  auto& enc = backbone_->encoder.layers;
  enc.emplace_back("encoder.0", config_.in_channels, config_.enc_channels1, 2, rng.fork());
  enc.emplace_back("encoder.1", config_.enc_channels1, config_.enc_channels2, 2, rng.fork());
  enc.emplace_back("encoder.2", config_.enc_channels2, config_.n_z, 1, rng.fork());
  Rng cb_rng(rng.fork());
  Tensor cb({config_.codebook_size, config_.n_z});
  const double bound = 1.0 / config_.codebook_size;
  for (double& v : cb.data) v = cb_rng.uniform(-bound, bound);
  backbone_->codebook = Parameter("codebook", std::move(cb));
  decoder_ = Decoder("decoder", config_.n_z, config_.enc_channels2, config_.enc_channels1, config_.in_channels,
                     rng.fork());
  saliency_decoder_ = Decoder("saliency_decoder", config_.n_z, config_.enc_channels2, config_.enc_channels1, 1,
                              rng.fork());
  image_head_ = Decoder("image_head", config_.n_z, config_.enc_channels2, config_.enc_channels1,
                        config_.in_channels, rng.fork());
}

void VQNet::set_mode(Mode mode) {
  mode_ = mode;
  backbone_->set_frozen(mode == Mode::kSaliency);
}

void VQNet::init_saliency_decoder() {
  saliency_decoder_ = renamed(decoder_, "saliency_decoder");
  image_head_ = renamed(decoder_, "image_head");
  Conv& last = saliency_decoder_.layers.back();
  const Conv& src = decoder_.layers.back();
  const int out = src.weight.value.dim(0);
  const int in = src.weight.value.dim(1);
  Tensor w({1, in, 3, 3});
  const std::size_t filter = static_cast<std::size_t>(in) * 9;
  for (int o = 0; o < out; ++o) {
    for (std::size_t j = 0; j < filter; ++j) w.data[j] += src.weight.value.data[o * filter + j] / out;
  }
  double b = 0.0;
  for (double v : src.bias.value.data) b += v / out;
  last.weight = Parameter(last.weight.name, std::move(w));
  last.bias = Parameter(last.bias.name, Tensor({1}, b));
}

std::vector<Parameter*> VQNet::parameters() {
  std::vector<Parameter*> out = backbone_->parameters();
  for (Decoder* d : {&decoder_, &saliency_decoder_, &image_head_}) {
    for (Parameter* p : d->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> VQNet::trainable_parameters() {
  std::vector<Parameter*> out;
  if (mode_ == Mode::kReconstruction) {
    out = backbone_->parameters();
    for (Parameter* p : decoder_.parameters()) out.push_back(p);
  } else {
    out = backbone_->parameters();
    for (Parameter* p : saliency_decoder_.parameters()) out.push_back(p);
    if (config_.sal_rec_target == SalRecTarget::kImage) {
      for (Parameter* p : image_head_.parameters()) out.push_back(p);
    }
  }
  std::erase_if(out, [](const Parameter* p) { return p->frozen; });
  return out;
}

void VQNet::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Var VQNet::saliency_logits(Tape& tape, Var z_q) { return saliency_decoder_.forward(tape, z_q); }

double VQNet::objective(const std::vector<Sample>& batch, SgCache* cache, bool backward) {
  return objective(batch, cache, backward, nullptr, 0.0);
}

double VQNet::objective(const std::vector<Sample>& batch, SgCache* cache, bool backward, PatchDiscriminator* disc,
                        double weight) {
  if (batch.empty()) throw ValidationError("empty training batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  const PerceptualOptions perceptual = perceptual_options(config_);
  std::vector<bool> disc_frozen;
  if (disc != nullptr) {
    for (Parameter* p : disc->parameters()) {
      disc_frozen.push_back(p->frozen);
      p->frozen = true;
    }
  }
  double total = 0.0;
  for (const Sample& s : batch) {
    require_divisible(s.image);
    if (s.image.dim(0) != config_.in_channels) throw ValidationError("image channel count does not match the network");
    Tape tape(cache);
    Var x = tape.constant(s.image);
    Var z_e = backbone_->encoder.forward(tape, x);
    ad::Quantized q = ad::quantize(z_e, tape.parameter(backbone_->codebook));
    Var loss;
    if (mode_ == Mode::kReconstruction) {
      Var z_st = add(z_e, stop_gradient(sub(q.z_q, z_e)));
      Var x_hat = decoder_.forward(tape, z_st);
      loss = vq_loss(x, x_hat, z_e, q.z_q, config_.weights, perceptual).total;
      if (disc != nullptr) loss = add(loss, scale(gan_loss_g(disc->forward(tape, x_hat)), weight));
    } else {
      if (s.saliency.size() != static_cast<std::size_t>(s.image.dim(1)) * static_cast<std::size_t>(s.image.dim(2))) {
        throw ValidationError("saliency target does not match the image size");
      }
      // An unfrozen backbone is finetuned through the straight-through path
      // together with its codebook and commitment terms.
      const bool finetune = !backbone_->codebook.frozen;
      Var z_in = finetune ? add(z_e, stop_gradient(sub(q.z_q, z_e))) : q.z_q;
      Var pred = sum_to_one(softplus(saliency_decoder_.forward(tape, z_in)));
      Tensor target = s.saliency;
      target.shape = pred.value().shape;
      SaliencyLossTerms t = saliency_loss(pred, tape.constant(std::move(target)), config_.weights.lambda, perceptual);
      loss = t.total;
      if (config_.sal_rec_target == SalRecTarget::kImage) {
        Var x_img = image_head_.forward(tape, z_in);
        Var rec = add(mse(x, x_img), perceptual_loss(x, x_img, perceptual));
        loss = add(rec, scale(add(t.cc, t.kl), config_.weights.lambda));
      }
      if (finetune) {
        loss = add(loss, mse(stop_gradient(z_e), q.z_q));
        loss = add(loss, scale(mse(stop_gradient(q.z_q), z_e), config_.weights.beta));
      }
    }
    total += loss.value().item() * inv;
    if (backward) tape.backward(scale(loss, inv));
  }
  if (disc != nullptr) {
    auto params = disc->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->frozen = disc_frozen[i];
  }
  return total;
}

Tensor VQNet::reconstruct(const Tensor& image) {
  require_divisible(image);
  Tape tape;
  Var z_e = backbone_->encoder.forward(tape, tape.constant(image));
  ad::Quantized q = ad::quantize(z_e, tape.constant(backbone_->codebook.value));
  return decoder_.forward(tape, q.z_q).value();
}

Tensor VQNet::predict_saliency(const Tensor& image) {
  require_divisible(image);
  Tape tape;
  Var z_e = backbone_->encoder.forward(tape, tape.constant(image));
  ad::Quantized q = ad::quantize(z_e, tape.constant(backbone_->codebook.value));
  return sum_to_one(softplus(saliency_decoder_.forward(tape, q.z_q))).value();
}

std::vector<Tensor> straight_through_backward(VQNet& net, const std::vector<Sample>& batch, SgCache* cache) {
  net.zero_grad();
  net.objective(batch, cache, true);
  std::vector<Tensor> grads;
  for (Parameter* p : net.parameters()) grads.push_back(p->grad);
  return grads;
}

void init_codebook_from_data(VQNet& net, const std::vector<Tensor>& images, std::uint64_t seed) {
  std::vector<std::vector<double>> sites;
  Backbone& bb = net.backbone();
  for (const Tensor& img : images) {
    require_divisible(img);
    Tape tape;
    const Tensor z = bb.encoder.forward(tape, tape.constant(img)).value();
    for (int y = 0; y < z.dim(1); ++y) {
      for (int x = 0; x < z.dim(2); ++x) {
        std::vector<double> v(static_cast<std::size_t>(z.dim(0)));
        for (int c = 0; c < z.dim(0); ++c) v[static_cast<std::size_t>(c)] = z.at(c, y, x);
        sites.push_back(std::move(v));
      }
    }
  }
  if (sites.empty()) return;
  Rng rng(seed);
  Tensor& cb = bb.codebook.value;
  const auto k = static_cast<std::size_t>(cb.dim(0));
  const auto nz = static_cast<std::size_t>(cb.dim(1));
  std::vector<std::size_t> picks = sample_without_replacement(rng, sites.size(), k);
  while (picks.size() < k) picks.push_back(static_cast<std::size_t>(rng.index(sites.size())));
  for (std::size_t e = 0; e < k; ++e) {
    // Small jitter keeps duplicated sites from producing identical rows.
    for (std::size_t c = 0; c < nz; ++c) cb.data[e * nz + c] = sites[picks[e]][c] + rng.normal(0.0, 1e-3);
  }
}

ARFusionNet::ARFusionNet(VQNet& base)
    : ARFusionNet(base.config(), base.shared_backbone(), base.saliency_decoder(), base.saliency_decoder(),
                  base.saliency_decoder()) {}

ARFusionNet::ARFusionNet(const VQConfig& config, std::shared_ptr<Backbone> backbone, Decoder ar, Decoder bg,
                         Decoder s)
    : config_(config),
      backbone_(std::move(backbone)),
      decoders_{renamed(ar, "decoder_ar"), renamed(bg, "decoder_bg"), renamed(s, "decoder_s")} {
  if (!backbone_) throw ValidationError("fusion net needs a backbone");
  backbone_->set_frozen(true);
  fusion_w_ = Parameter("fusion.weight", Tensor({1, 3, 1, 1}, 1.0 / 3.0));
  fusion_b_ = Parameter("fusion.bias", Tensor({1}, 0.0));
}

std::vector<Parameter*> ARFusionNet::parameters() {
  std::vector<Parameter*> out = backbone_->parameters();
  for (Decoder& d : decoders_) {
    for (Parameter* p : d.parameters()) out.push_back(p);
  }
  out.push_back(&fusion_w_);
  out.push_back(&fusion_b_);
  return out;
}

std::vector<Parameter*> ARFusionNet::trainable_parameters() {
  std::vector<Parameter*> out = parameters();
  std::erase_if(out, [](const Parameter* p) { return p->frozen; });
  return out;
}

void ARFusionNet::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Var ARFusionNet::forward(Tape& tape, const Tensor& ar, const Tensor& bg, const Tensor& superimposed) {
  if (ar.shape != bg.shape || ar.shape != superimposed.shape) {
    throw ValidationError("AR, background and superimposed inputs differ in size");
  }
  require_divisible(ar);
  Var cb = tape.parameter(backbone_->codebook);
  std::vector<Var> logits;
  const Tensor* inputs[3] = {&ar, &bg, &superimposed};
  for (std::size_t i = 0; i < 3; ++i) {
    Var z_e = backbone_->encoder.forward(tape, tape.constant(*inputs[i]));
    ad::Quantized q = ad::quantize(z_e, cb);
    logits.push_back(decoders_[i].forward(tape, q.z_q));
  }
  Var fused = ad::conv2d(concat_channels(logits), tape.parameter(fusion_w_), tape.parameter(fusion_b_), 1, 0);
  return sum_to_one(softplus(fused));
}

SaliencyDensity ARFusionNet::predict(const Tensor& ar, const Tensor& bg, const Tensor& superimposed) {
  Tape tape;
  SaliencyDensity d;
  d.grid = tensor_grid(forward(tape, ar, bg, superimposed).value());
  d.state = NormalizationState::kSumToOne;
  return d;
}

double ARFusionNet::objective(const std::vector<ArSample>& batch, bool backward) {
  if (batch.empty()) throw ValidationError("empty training batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  const PerceptualOptions perceptual = perceptual_options(config_);
  double total = 0.0;
  for (const ArSample& s : batch) {
    Tape tape;
    Var pred = forward(tape, s.ar, s.bg, s.superimposed);
    if (s.saliency.size() != pred.value().size()) throw ValidationError("saliency target does not match the image size");
    Tensor target = s.saliency;
    target.shape = pred.value().shape;
    Var loss = saliency_loss(pred, tape.constant(std::move(target)), config_.weights.lambda, perceptual).total;
    total += loss.value().item() * inv;
    if (backward) tape.backward(scale(loss, inv));
  }
  return total;
}

void Schedule::validate() const {
  if (steps < 0) throw ValidationError("steps must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
  if (!(clip_norm >= 0.0)) throw ValidationError("clip_norm must be >= 0");
  if (adversarial && !(adversarial_weight >= 0.0)) throw ValidationError("adversarial weight must be >= 0");
}

nlohmann::json Schedule::to_json() const {
  return {{"steps", steps},         {"learning_rate", learning_rate}, {"momentum", momentum},
          {"batch_size", batch_size}, {"seed", seed},                 {"clip_norm", clip_norm},                 {"adversarial", adversarial},
          {"adversarial_weight", adversarial_weight}};
}

Schedule Schedule::from_json(const nlohmann::json& j) {
  Schedule s;
  try {
    s.steps = j.value("steps", s.steps);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.momentum = j.value("momentum", s.momentum);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.seed = j.value("seed", s.seed);
    s.clip_norm = j.value("clip_norm", s.clip_norm);
    s.adversarial = j.value("adversarial", s.adversarial);
    s.adversarial_weight = j.value("adversarial_weight", s.adversarial_weight);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid schedule: ") + e.what());
  }
  s.validate();
  return s;
}

TrainResult train(VQNet& net, const std::vector<Sample>& data, const Schedule& schedule) {
  schedule.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  Rng rng(schedule.seed);
  Momentum opt(net.trainable_parameters());
  std::unique_ptr<PatchDiscriminator> disc;
  std::unique_ptr<Momentum> disc_opt;
  const bool adversarial = schedule.adversarial && net.mode() == Mode::kReconstruction;
  if (adversarial) {
    disc = std::make_unique<PatchDiscriminator>(net.config().in_channels, rng.fork());
    disc_opt = std::make_unique<Momentum>(disc->parameters());
  }
  TrainResult result;
  result.initial_loss = net.objective(data, nullptr, false);
  for (int step = 0; step < schedule.steps; ++step) {
    const std::vector<Sample> batch = draw_batch(data, schedule.batch_size, rng);
    if (adversarial) {
      for (Parameter* p : disc->parameters()) p->zero_grad();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (const Sample& s : batch) {
        Tape tape;
        Var real = disc->forward(tape, tape.constant(s.image));
        Var fake = disc->forward(tape, tape.constant(net.reconstruct(s.image)));
        tape.backward(scale(gan_loss_d(real, fake), inv));
      }
      disc_opt->step(schedule.learning_rate, schedule.momentum, schedule.clip_norm);
    }
    net.zero_grad();
    result.losses.push_back(net.objective(batch, nullptr, true, disc.get(), schedule.adversarial_weight));
    opt.step(schedule.learning_rate, schedule.momentum, schedule.clip_norm);
  }
  result.final_loss = net.objective(data, nullptr, false);
  finish(result);
  return result;
}

TrainResult train(ARFusionNet& net, const std::vector<ArSample>& data, const Schedule& schedule) {
  schedule.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  Rng rng(schedule.seed);
  Momentum opt(net.trainable_parameters());
  TrainResult result;
  result.initial_loss = net.objective(data, false);
  for (int step = 0; step < schedule.steps; ++step) {
    const std::vector<ArSample> batch = draw_batch(data, schedule.batch_size, rng);
    net.zero_grad();
    result.losses.push_back(net.objective(batch, true));
    opt.step(schedule.learning_rate, schedule.momentum, schedule.clip_norm);
  }
  result.final_loss = net.objective(data, false);
  finish(result);
  return result;
}

double trend_slope(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double mx = (static_cast<double>(n) - 1.0) / 2.0;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                     const std::vector<Parameter*>& params) {
  nlohmann::json h = header;
  nlohmann::json entries = nlohmann::json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    entries.push_back({{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}});
    for (double v : p->value.data) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      char bytes[4];
      for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
      blob.append(bytes, 4);
    }
    offset += p->value.size();
  }
  h["parameters"] = std::move(entries);
  h["version"] = io::library_version();
  std::string out = std::string(kMagic) + "\n" + h.dump() + "\n";
  out += blob;
  io::write_file_atomic(path, out);
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  const std::string raw = io::read_file(path);
  const std::string magic = std::string(kMagic) + "\n";
  if (raw.compare(0, magic.size(), magic) != 0) throw IoError("not a checkpoint: " + path.string());
  const std::size_t end = raw.find('\n', magic.size());
  if (end == std::string::npos) throw IoError("truncated checkpoint header: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(magic.size(), end - magic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header: " + std::string(e.what()));
  }
  const std::string_view blob(raw.data() + end + 1, raw.size() - end - 1);
  for (Parameter* p : params) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : header.at("parameters")) {
      if (e.at("name") == p->name) entry = &e;
    }
    if (entry == nullptr) throw IoError("checkpoint lacks parameter " + p->name);
    if (entry->at("shape").get<std::vector<int>>() != p->value.shape) {
      throw IoError("checkpoint shape mismatch for " + p->name);
    }
    const auto offset = entry->at("offset").get<std::size_t>();
    if ((offset + p->value.size()) * 4 > blob.size()) throw IoError("checkpoint blob is truncated");
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[(offset + i) * 4 + b])) << (8 * b);
      }
      p->value.data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    p->zero_grad();
  }
  return header;
}

void save(const std::filesystem::path& path, VQNet& net) {
  nlohmann::json h = {{"kind", "vqnet"},
                      {"architecture", "conv-s2/conv-s2/conv-s1 encoder, nearest-upsampling decoder"},
                      {"K", net.config().codebook_size},
                      {"n_z", net.config().n_z},
                      {"seed", net.config().seed},
                      {"mode", net.mode() == Mode::kSaliency ? "saliency" : "reconstruction"},
                      {"config", net.config().to_json()}};
  save_checkpoint(path, h, net.parameters());
}

VQNet load_vqnet(const std::filesystem::path& path) {
  const std::string raw = io::read_file(path);
  const std::size_t a = raw.find('\n');
  const std::size_t b = a == std::string::npos ? a : raw.find('\n', a + 1);
  if (b == std::string::npos) throw IoError("not a checkpoint: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(a + 1, b - a - 1));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header: " + std::string(e.what()));
  }
  if (header.value("kind", "") != "vqnet") throw IoError("checkpoint is not a VQ network: " + path.string());
  VQNet net(VQConfig::from_json(header.at("config")));
  load_checkpoint(path, net.parameters());
  if (header.value("mode", "") == "saliency") net.set_mode(Mode::kSaliency);
  return net;
}

void save(const std::filesystem::path& path, ARFusionNet& net) {
  nlohmann::json h = {{"kind", "arfusion"},
                      {"K", net.config().codebook_size},
                      {"n_z", net.config().n_z},
                      {"seed", net.config().seed},
                      {"config", net.config().to_json()}};
  save_checkpoint(path, h, net.parameters());
}

ARFusionNet load_arnet(const std::filesystem::path& path) {
  const std::string raw = io::read_file(path);
  const std::size_t a = raw.find('\n');
  const std::size_t b = a == std::string::npos ? a : raw.find('\n', a + 1);
  if (b == std::string::npos) throw IoError("not a checkpoint: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(a + 1, b - a - 1));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header: " + std::string(e.what()));
  }
  if (header.value("kind", "") != "arfusion") throw IoError("checkpoint is not an AR fusion network: " + path.string());
  VQNet base(VQConfig::from_json(header.at("config")));
  ARFusionNet net(base);
  load_checkpoint(path, net.parameters());
  return net;
}

Tensor image_tensor(const ViewportImage& image) {
  Tensor t({3, image.height(), image.width()});
  const std::size_t plane = static_cast<std::size_t>(image.width()) * static_cast<std::size_t>(image.height());
  for (int c = 0; c < 3; ++c) {
    const RealGrid& ch = image.channel(c);
    std::copy(ch.values().begin(), ch.values().end(), t.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  return t;
}

Tensor grid_tensor(const RealGrid& grid) {
  Tensor t({1, grid.height(), grid.width()});
  std::copy(grid.values().begin(), grid.values().end(), t.data.begin());
  return t;
}

RealGrid tensor_grid(const Tensor& t) {
  if (t.shape.size() != 3 || t.dim(0) != 1) throw ValidationError("expected a single-channel {1,H,W} tensor");
  return RealGrid(t.dim(2), t.dim(1), t.data);
}

}  // namespace arsal::vq
