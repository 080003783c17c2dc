#include <doctest.h>

#include <chrono>

#include "arsal/vqsal.hpp"
#include "arsal/io.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace arsal;
using namespace arsal::vq;

namespace {

Tensor column(std::vector<double> v) {
  Tensor t({static_cast<int>(v.size()), 1, 1});
  t.data = std::move(v);
  return t;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

std::vector<Sample> pattern_set(int n, int size) {
  std::vector<Sample> out;
  for (int k = 0; k < n; ++k) {
    Sample s{Tensor({1, size, size}), {}};
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        s.image.at(0, y, x) = 0.5 + 0.45 * std::sin(0.4 * (k % 4 + 1) * x + 0.3 * k) * std::cos(0.35 * (k / 4 + 1) * y);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("quantize: nearest entry with ties to the lowest index") {
  Tensor cb({2, 2});
  cb.data = {0, 0, 1, 1};
  CHECK(ad::nearest_codes(column({0.2, 0.1}), cb) == std::vector<int>{0});
  CHECK(ad::nearest_codes(column({1, 1}), cb) == std::vector<int>{1});
  CHECK(ad::nearest_codes(column({0.5, 0.5}), cb) == std::vector<int>{0});

  ad::Tape tape;
  const ad::Quantized q = ad::quantize(tape.constant(column({1, 1})), tape.constant(cb));
  CHECK(q.z_q.value().data == std::vector<double>{1, 1});
}

TEST_CASE("tokenize: embedded sites are bit-exact codebook rows") {
  VQNet net(gradcheck::toy_config(3));
  const auto batch = gradcheck::toy_batch(2);
  for (const auto& s : batch) {
    const VisualTokens t = tokenize(net.backbone(), s.image);
    const Tensor& cb = net.backbone().codebook.value;
    const int n_z = cb.dim(1);
    for (int y = 0; y < t.indices.height(); ++y) {
      for (int x = 0; x < t.indices.width(); ++x) {
        const int k = t.indices(x, y);
        for (int c = 0; c < n_z; ++c) CHECK(t.embedded.at(c, y, x) == cb.data[static_cast<std::size_t>(k * n_z + c)]);
      }
    }
  }
}

TEST_CASE("vq_loss: zero terms and linearity in beta") {
  Rng rng(4);
  Tensor x({1, 8, 8});
  for (double& v : x.data) v = rng.uniform(0, 1);
  Tensor z({4, 2, 2});
  for (double& v : z.data) v = rng.uniform(-1, 1);
  Tensor zq = z;
  for (double& v : zq.data) v += 0.3;

  ad::Tape tape;
  const PerceptualOptions po;
  const VqLossTerms same = vq_loss(tape.constant(x), tape.constant(x), tape.constant(z), tape.constant(z), {}, po);
  CHECK(same.total.value().item() == 0.0);

  VQLossWeights w1, w2;
  w2.beta = 2 * w1.beta;
  const VqLossTerms a = vq_loss(tape.constant(x), tape.constant(x), tape.constant(z), tape.constant(zq), w1, po);
  const VqLossTerms b = vq_loss(tape.constant(x), tape.constant(x), tape.constant(z), tape.constant(zq), w2, po);
  CHECK(b.commitment.value().item() == doctest::Approx(2 * a.commitment.value().item()).epsilon(1e-15));
  CHECK(b.codebook.value().item() == a.codebook.value().item());
  CHECK(b.rec.value().item() == a.rec.value().item());
  CHECK(a.codebook.value().item() == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("perceptual loss: zero, symmetric, plain MSE on one pixel") {
  Rng rng(6);
  ad::Tape tape;
  Tensor a({1, 8, 8}), b({1, 8, 8});
  for (double& v : a.data) v = rng.uniform(0, 1);
  for (double& v : b.data) v = rng.uniform(0, 1);
  const PerceptualOptions po;
  CHECK(perceptual_loss(tape.constant(a), tape.constant(a), po).value().item() == 0.0);
  CHECK(perceptual_loss(tape.constant(a), tape.constant(b), po).value().item() ==
        perceptual_loss(tape.constant(b), tape.constant(a), po).value().item());
  Tensor p({1, 1, 1}, 0.2), q({1, 1, 1}, 0.7);
  CHECK(perceptual_loss(tape.constant(p), tape.constant(q), po).value().item() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("GAN losses") {
  const Tensor half({1, 2, 2}, 0.5);
  const GanLosses h = gan_loss(half, half);
  CHECK(h.loss_d == doctest::Approx(-2 * std::log(0.5)).epsilon(1e-6));
  const GanLosses perfect = gan_loss(Tensor({1, 2, 2}, 1.0), Tensor({1, 2, 2}, 0.0));
  CHECK(perfect.loss_d < 1e-6);
  double prev = 1e9;
  for (double d : {0.1, 0.3, 0.6, 0.9, 0.99}) {
    const double g = gan_loss(half, Tensor({1, 2, 2}, d)).loss_g;
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("saliency loss examples") {
  const auto batch = gradcheck::toy_batch(1);
  const Tensor& gt = batch[0].saliency;
  ad::Tape tape;
  const PerceptualOptions po;
  const SaliencyLossTerms same = saliency_loss(tape.constant(gt), tape.constant(gt), 0.2, po);
  CHECK(std::abs(same.cc.value().item()) < 1e-12);
  CHECK(std::abs(same.kl.value().item()) < 1e-5);
  CHECK(same.rec.value().item() == 0.0);

  const Tensor uniform({1, 8, 8}, 1.0 / 64.0);
  const SaliencyLossTerms u = saliency_loss(tape.constant(uniform), tape.constant(gt), 0.2, po);
  CHECK(u.cc.value().item() == doctest::Approx(1.0).epsilon(1e-9));
  const SaliencyLossTerms none = saliency_loss(tape.constant(uniform), tape.constant(gt), 0.0, po);
  CHECK(none.total.value().item() == none.rec.value().item());
}

TEST_CASE("straight-through gradients match finite differences (reconstruction)") {
  VQNet net(gradcheck::toy_config(11));
  const gradcheck::Report r = gradcheck::check(net, gradcheck::toy_batch(2));
  INFO("worst ratio ", r.worst_ratio, " in ", r.worst_param);
  CHECK(r.checked > 1000);
  CHECK(r.failures == 0);
}

TEST_CASE("gradients match finite differences (saliency, frozen backbone)") {
  VQNet net(gradcheck::toy_config(12));
  net.init_saliency_decoder();
  net.set_mode(Mode::kSaliency);
  const auto batch = gradcheck::toy_batch(2);
  const gradcheck::Report r = gradcheck::check(net, batch);
  INFO("worst ratio ", r.worst_ratio, " in ", r.worst_param);
  CHECK(r.failures == 0);

  const auto grads = straight_through_backward(net, batch);
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->frozen) continue;
    for (double g : grads[i].data) CHECK(g == 0.0);
  }
  const auto bb = net.backbone().parameters();
  REQUIRE_FALSE(bb.empty());
  for (const Parameter* p : bb) CHECK(p->frozen);
}

TEST_CASE("gradients match finite differences (saliency, finetuned backbone)") {
  VQNet net(gradcheck::toy_config(14));
  net.init_saliency_decoder();
  net.set_mode(Mode::kSaliency);
  net.backbone().set_frozen(false);
  const gradcheck::Report r = gradcheck::check(net, gradcheck::toy_batch(2));
  INFO("worst ratio ", r.worst_ratio, " in ", r.worst_param);
  CHECK(r.failures == 0);
}

TEST_CASE("saliency training leaves the backbone bit-identical") {
  VQNet net(gradcheck::toy_config(13));
  net.init_saliency_decoder();
  net.set_mode(Mode::kSaliency);
  const auto before = snapshot(net.backbone().parameters());
  Schedule s;
  s.steps = 10;
  s.batch_size = 2;
  train(net, gradcheck::toy_batch(3), s);
  CHECK(snapshot(net.backbone().parameters()) == before);
}

TEST_CASE("K = 1: constant quantizer output, the decoder still learns") {
  VQConfig c = gradcheck::toy_config(5);
  c.codebook_size = 1;
  VQNet net(c);
  const auto batch = gradcheck::toy_batch(2);
  for (const auto& s : batch) {
    const VisualTokens t = tokenize(net.backbone(), s.image);
    for (int v : t.indices.values()) CHECK(v == 0);
  }
  const auto grads = straight_through_backward(net, batch);
  const auto params = net.parameters();
  double decoder_norm = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name.rfind("decoder.", 0) != 0) continue;
    for (double g : grads[i].data) decoder_norm += g * g;
  }
  CHECK(decoder_norm > 0.0);
}

TEST_CASE("AR fusion net: normalised output, selection and averaging heads, branch permutation") {
  VQNet base(gradcheck::toy_config(21));
  base.init_saliency_decoder();
  base.set_mode(Mode::kSaliency);
  // Give the branches distinct decoders before testing permutations.
  ARFusionNet net(base);
  Rng rng(1);
  for (int b = 0; b < 3; ++b) {
    for (Parameter* p : net.decoder(b).parameters()) {
      for (double& v : p->value.data) v += rng.normal(0.0, 0.05);
    }
  }
  const auto batch = gradcheck::toy_batch(3);
  const Tensor &ar = batch[0].image, &bg = batch[1].image, &s = batch[2].image;

  const SaliencyDensity out = net.predict(ar, bg, s);
  CHECK(grid_sum(out.grid) == doctest::Approx(1.0).epsilon(1e-12));

  // Permute decoders and F's input channels together.
  const std::array<double, 3> w{0.7, -0.2, 0.5};
  net.fusion_weight().value.data.assign(w.begin(), w.end());
  net.fusion_bias().value.data = {0.1};
  const SaliencyDensity ref = net.predict(ar, bg, s);
  ARFusionNet swapped(net.config(), base.shared_backbone(), net.decoder(1), net.decoder(0), net.decoder(2));
  swapped.fusion_weight().value.data = {w[1], w[0], w[2]};
  swapped.fusion_bias().value.data = {0.1};
  const SaliencyDensity perm = swapped.predict(bg, ar, s);
  for (std::size_t i = 0; i < ref.grid.size(); ++i) CHECK(std::abs(perm.grid[i] - ref.grid[i]) < 1e-9);

  // Selection head reproduces the single-stream prediction.
  ARFusionNet pick(net.config(), base.shared_backbone(), net.decoder(0), net.decoder(1), base.saliency_decoder());
  pick.fusion_weight().value.data = {0, 0, 1};
  const SaliencyDensity sel = pick.predict(ar, bg, s);
  const Tensor single = base.predict_saliency(s);
  for (std::size_t i = 0; i < single.size(); ++i) CHECK(std::abs(sel.grid[i] - single.data[i]) < 1e-12);

  // Averaging head over identical branches and inputs.
  ARFusionNet avg(base);
  const SaliencyDensity a = avg.predict(s, s, s);
  for (std::size_t i = 0; i < single.size(); ++i) CHECK(std::abs(a.grid[i] - single.data[i]) < 1e-12);

  CHECK_THROWS_AS(net.predict(ar, Tensor({1, 4, 4}), s), ValidationError);
}

TEST_CASE("training: zero learning rate, determinism and loss reduction") {
  const auto data = pattern_set(16, 8);
  Schedule s;
  s.steps = 5;
  s.batch_size = 4;
  s.learning_rate = 0.0;
  VQNet frozen(gradcheck::toy_config(8));
  const auto before = snapshot(frozen.parameters());
  train(frozen, data, s);
  CHECK(snapshot(frozen.parameters()) == before);

  s.learning_rate = 0.05;
  s.steps = 20;
  VQNet a(gradcheck::toy_config(8)), b(gradcheck::toy_config(8));
  CHECK(train(a, data, s).losses == train(b, data, s).losses);
  CHECK(snapshot(a.parameters()) == snapshot(b.parameters()));

  VQNet net(gradcheck::toy_config(9));
  s.steps = 200;
  const TrainResult r = train(net, data, s);
  INFO("initial ", r.initial_loss, " final ", r.final_loss);
  CHECK(r.final_loss <= 0.5 * r.initial_loss);
  CHECK(r.slope < 0.0);
}

TEST_CASE("checkpoints round-trip through float32") {
  testutil::TempDir dir("ckpt");
  VQNet net(gradcheck::toy_config(17));
  net.init_saliency_decoder();
  net.set_mode(Mode::kSaliency);
  save(dir / "net.ckpt", net);
  VQNet back = load_vqnet(dir / "net.ckpt");
  CHECK(back.mode() == Mode::kSaliency);
  const auto p = net.parameters(), q = back.parameters();
  REQUIRE(p.size() == q.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i]->name == q[i]->name);
    REQUIRE(p[i]->value.shape == q[i]->value.shape);
    for (std::size_t k = 0; k < p[i]->value.size(); ++k) {
      CHECK(q[i]->value.data[k] == static_cast<double>(static_cast<float>(p[i]->value.data[k])));
    }
  }
  CHECK_THROWS_AS(load_vqnet(dir / "missing.ckpt"), IoError);
  io::write_file_atomic(dir / "bad.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(load_vqnet(dir / "bad.ckpt"), IoError);
}
