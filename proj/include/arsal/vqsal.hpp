// Desk-scale vector-quantized saliency network.
//
// Reconstruction mode trains encoder E, codebook and decoder G with
//   L = L_rec(x, G(z_st)) + |sg(z_e) - z_q|^2 + beta |sg(z_q) - z_e|^2,
// where z_st = z_e + sg(z_q - z_e) carries the straight-through gradient.
// Saliency mode freezes E and the codebook and trains a saliency decoder with
//   L = L_rec + lambda (1 - CC + KL).
// The AR fusion net runs three decoders over tokens from one shared backbone
// and merges their logits with a 1x1 convolution.

#ifndef ARSAL_VQSAL_HPP
#define ARSAL_VQSAL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsal/autodiff.hpp"
#include "arsal/core.hpp"

namespace arsal::vq {

using ad::Parameter;
using ad::SgCache;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Mode { kReconstruction, kSaliency };
/// What L_rec compares during saliency training.
enum class SalRecTarget { kSaliencyMap, kImage };

struct VQLossWeights {
  double beta = 0.25;
  double lambda = 0.2;
  void validate() const;
};

struct VQConfig {
  int in_channels = 3;
  int codebook_size = 64;
  int n_z = 16;
  int enc_channels1 = 16;
  int enc_channels2 = 32;
  std::uint64_t seed = 0;
  VQLossWeights weights;
  SalRecTarget sal_rec_target = SalRecTarget::kSaliencyMap;
  /// Gaussian-pyramid levels compared by the perceptual proxy.
  int perceptual_scales = 3;
  /// Regularizer inside the gradient-magnitude square root.
  double gradient_eps = 1e-4;

  void validate() const;
  nlohmann::json to_json() const;
  static VQConfig from_json(const nlohmann::json& j);
};

/// 3x3 convolution layer, zero padded.
struct Conv {
  Parameter weight;
  Parameter bias;
  int stride = 1;

  Conv() = default;
  Conv(std::string name, int in, int out, int stride, std::uint64_t seed);
  Var forward(Tape& tape, Var x);
};

/// conv s2, SiLU, conv s2, SiLU, conv s1: downsamples by 4.
struct Encoder {
  std::vector<Conv> layers;
  Var forward(Tape& tape, Var x);
};

/// conv, SiLU, up2, conv, SiLU, up2, conv: mirror of the encoder.
struct Decoder {
  std::vector<Conv> layers;
  Decoder() = default;
  Decoder(const std::string& prefix, int n_z, int c2, int c1, int out, std::uint64_t seed);
  Var forward(Tape& tape, Var z);
  std::vector<Parameter*> parameters();
};

/// Encoder plus codebook; shared by every branch that tokenizes images.
struct Backbone {
  Encoder encoder;
  /// {K, n_z}
  Parameter codebook;

  std::vector<Parameter*> parameters();
  void set_frozen(bool frozen);
};

struct VisualTokens {
  /// Row-major h x w indices.
  Grid<int> indices;
  /// {n_z, h, w}; each site is an exact copy of a codebook row.
  Tensor embedded;
};

VisualTokens tokenize(Backbone& backbone, const Tensor& image);

/// Plain MSE (mean over elements).
Var mse(Var a, Var b);

struct PerceptualOptions {
  int scales = 3;
  double gradient_eps = 1e-4;
  /// Optional feature extractor; its outputs are compared by MSE and added.
  std::function<Var(Tape&, Var)> features;
};

/// Sum of pyramid-level MSEs over up to `scales` dyadic levels plus the MSE of
/// gradient magnitudes. A 1x1 input reduces to plain MSE.
Var perceptual_loss(Var a, Var b, const PerceptualOptions& options);

struct VqLossTerms {
  Var total;
  Var rec;
  Var codebook;
  /// Already multiplied by beta.
  Var commitment;
};

/// z_enc and z_q are the encoder output and gathered codebook rows for the same image.
VqLossTerms vq_loss(Var x, Var x_hat, Var z_enc, Var z_q, const VQLossWeights& weights,
                    const PerceptualOptions& perceptual);

struct SaliencyLossTerms {
  Var total;
  Var rec;
  Var cc;
  Var kl;
};

/// pred and gt are sum-to-one {1,H,W} maps. L_rec compares their mean-one rescalings.
SaliencyLossTerms saliency_loss(Var pred, Var gt, double lambda, const PerceptualOptions& perceptual);
double saliency_loss_value(const SaliencyDensity& pred, const SaliencyDensity& gt, double lambda,
                           const PerceptualOptions& perceptual = {});

struct GanLosses {
  double loss_d = 0.0;
  double loss_g = 0.0;
};

/// loss_D = -mean log(D(x)+eps) - mean log(1-D(x_hat)+eps); loss_G = -mean log(D(x_hat)+eps).
GanLosses gan_loss(const Tensor& d_real, const Tensor& d_fake);
Var gan_loss_d(Var d_real, Var d_fake);
Var gan_loss_g(Var d_fake);

/// Three convolutions and a sigmoid; one probability per patch.
struct PatchDiscriminator {
  std::vector<Conv> layers;
  PatchDiscriminator() = default;
  PatchDiscriminator(int in_channels, std::uint64_t seed);
  Var forward(Tape& tape, Var x);
  std::vector<Parameter*> parameters();
};

/// One training example. `saliency` is a sum-to-one {1,H,W} map, empty in
/// reconstruction mode.
struct Sample {
  Tensor image;
  Tensor saliency;
};

class VQNet {
 public:
  explicit VQNet(const VQConfig& config);

  const VQConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  /// Saliency mode freezes the backbone; returning to reconstruction unfreezes it.
  void set_mode(Mode mode);
  /// Copies the reconstruction decoder into the saliency decoder, averaging
  /// the final filter across output channels.
  void init_saliency_decoder();

  Backbone& backbone() { return *backbone_; }
  std::shared_ptr<Backbone> shared_backbone() { return backbone_; }
  Decoder& decoder() { return decoder_; }
  Decoder& saliency_decoder() { return saliency_decoder_; }
  Decoder& image_head() { return image_head_; }

  /// Every parameter, frozen or not, in a stable order.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();

  /// Mean loss over the batch for the current mode. Accumulates gradients
  /// into the parameters when `backward` is set. With a cache, stop-gradient
  /// values and code assignments are recorded or replayed.
  double objective(const std::vector<Sample>& batch, SgCache* cache, bool backward);
  /// Reconstruction objective plus `weight` times the non-saturating generator
  /// loss against `disc`. Discriminator gradients are left untouched.
  double objective(const std::vector<Sample>& batch, SgCache* cache, bool backward, PatchDiscriminator* disc,
                   double weight);

  /// Reconstruction of one image {C,H,W}.
  Tensor reconstruct(const Tensor& image);
  /// Sum-to-one saliency map {1,H,W}.
  Tensor predict_saliency(const Tensor& image);
  /// Saliency decoder logits for a token grid.
  Var saliency_logits(Tape& tape, Var z_q);

  void zero_grad();

 private:
  VQConfig config_;
  Mode mode_ = Mode::kReconstruction;
  std::shared_ptr<Backbone> backbone_;
  Decoder decoder_;
  Decoder saliency_decoder_;
  Decoder image_head_;
};

/// Clears gradients, runs the objective with backward and returns the
/// gradient of every parameter in VQNet::parameters() order.
std::vector<Tensor> straight_through_backward(VQNet& net, const std::vector<Sample>& batch, SgCache* cache = nullptr);

/// Seeds codebook rows with encoder outputs at random sites of the given images.
void init_codebook_from_data(VQNet& net, const std::vector<Tensor>& images, std::uint64_t seed);

struct ArSample {
  Tensor ar;
  Tensor bg;
  Tensor superimposed;
  Tensor saliency;
};

class ARFusionNet {
 public:
  /// Branch decoders start as copies of the saliency decoder of `base`.
  explicit ARFusionNet(VQNet& base);
  ARFusionNet(const VQConfig& config, std::shared_ptr<Backbone> backbone, Decoder ar, Decoder bg, Decoder s);

  const VQConfig& config() const { return config_; }
  Backbone& backbone() { return *backbone_; }
  const Backbone* backbone_ptr() const { return backbone_.get(); }
  /// Order: AR, BG, superimposed.
  Decoder& decoder(int branch) { return decoders_.at(static_cast<std::size_t>(branch)); }
  /// F weight {1,3,1,1} and bias {1}.
  Parameter& fusion_weight() { return fusion_w_; }
  Parameter& fusion_bias() { return fusion_b_; }

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();

  Var forward(Tape& tape, const Tensor& ar, const Tensor& bg, const Tensor& superimposed);
  /// Sum-to-one saliency map.
  SaliencyDensity predict(const Tensor& ar, const Tensor& bg, const Tensor& superimposed);
  double objective(const std::vector<ArSample>& batch, bool backward);
  void zero_grad();

 private:
  VQConfig config_;
  std::shared_ptr<Backbone> backbone_;
  std::array<Decoder, 3> decoders_;
  Parameter fusion_w_;
  Parameter fusion_b_;
};

struct Schedule {
  int steps = 200;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 4;
  std::uint64_t seed = 0;
  /// Global gradient-norm cap applied before each update; 0 disables it.
  double clip_norm = 5.0;
  /// Adds a patch-discriminator term to reconstruction training.
  bool adversarial = false;
  double adversarial_weight = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& j);
};

struct TrainResult {
  /// Batch loss at each step, before the update.
  std::vector<double> losses;
  /// Objective over the whole dataset before and after training.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// Least-squares slope of `losses` against step index.
  double slope = 0.0;
};

TrainResult train(VQNet& net, const std::vector<Sample>& data, const Schedule& schedule);
TrainResult train(ARFusionNet& net, const std::vector<ArSample>& data, const Schedule& schedule);

/// Least-squares slope of y against 0..n-1.
double trend_slope(const std::vector<double>& y);

/// Checkpoint: magic line, JSON header, float32 little-endian parameter blob.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                     const std::vector<Parameter*>& params);
/// Loads parameters by name and shape; returns the header.
nlohmann::json load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params);

void save(const std::filesystem::path& path, VQNet& net);
VQNet load_vqnet(const std::filesystem::path& path);
void save(const std::filesystem::path& path, ARFusionNet& net);
ARFusionNet load_arnet(const std::filesystem::path& path);

/// {3,H,W} tensor from the RGB planes.
Tensor image_tensor(const ViewportImage& image);
/// {1,H,W} tensor from a grid.
Tensor grid_tensor(const RealGrid& grid);
/// Single-channel tensor back to a grid.
RealGrid tensor_grid(const Tensor& t);

}  // namespace arsal::vq

#endif  // ARSAL_VQSAL_HPP
