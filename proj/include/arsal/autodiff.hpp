// Minimal reverse-mode differentiation over a fixed operator set: convolution,
// nearest upsampling, pyramid downsampling, elementwise maps and reductions.
//
// Tensors are dense doubles. Images use {C, H, W}; convolution weights use
// {out, in, k, k}; a scalar has an empty shape.

#ifndef ARSAL_AUTODIFF_HPP
#define ARSAL_AUTODIFF_HPP

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "arsal/core.hpp"

namespace arsal::ad {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);
  static Tensor scalar(double v);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  bool is_scalar() const { return data.size() == 1; }
  double item() const { return data.at(0); }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * static_cast<std::size_t>(shape[1]) + static_cast<std::size_t>(y)) *
                    static_cast<std::size_t>(shape[2]) +
                static_cast<std::size_t>(x)];
  }
  double at(int c, int y, int x) const { return const_cast<Tensor*>(this)->at(c, y, x); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape, 0.0) {}
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Captures stop-gradient values and quantizer assignments from one forward
/// pass so later passes can hold them fixed. Replaying the capture turns the
/// loss into the surrogate whose exact derivative is the straight-through
/// gradient, which is what finite differences must be compared against.
class SgCache {
 public:
  enum class Mode { kRecord, kReplay };

  explicit SgCache(Mode mode = Mode::kRecord) : mode_(mode) {}
  Mode mode() const { return mode_; }
  void replay() {
    mode_ = Mode::kReplay;
    next_value_ = 0;
    next_indices_ = 0;
  }

  const Tensor& value(const Tensor& live);
  const std::vector<int>& indices(const std::vector<int>& live);

 private:
  Mode mode_;
  std::vector<Tensor> values_;
  std::vector<std::vector<int>> indices_;
  std::size_t next_value_ = 0;
  std::size_t next_indices_ = 0;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape; }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(SgCache* cache = nullptr) : cache_(cache) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; gradients accumulate into p.grad unless p is frozen.
  Var parameter(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable parameter.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad(int id);
  SgCache* cache() const { return cache_; }

  Var push(Tensor value, std::vector<int> inputs, Backward backward);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<int> inputs;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  SgCache* cache_ = nullptr;
};

// Elementwise binary ops broadcast when either side is a scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var silu(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
/// log(a + eps).
Var log_eps(Var a, double eps);
Var square(Var a);
Var sqrt(Var a);

Var sum(Var a);
Var mean(Var a);
/// Sum of a * c for a constant tensor c of the same size.
Var dot_const(Var a, const Tensor& c);

/// 2-D convolution, zero padding. x {Cin,H,W}, w {Cout,Cin,k,k}, b {Cout}.
Var conv2d(Var x, Var w, Var b, int stride, int pad);
Var upsample_nearest2x(Var x);
/// [1 4 6 4 1]/16 separable blur with stride 2 and reflected borders.
Var pyr_down(Var x);
/// sqrt(dx^2 + dy^2 + eps) from forward differences; shape {C, H-1, W-1}.
Var grad_magnitude(Var x, double eps);
Var concat_channels(const std::vector<Var>& parts);
/// Value pass-through with no gradient; replayed from the tape's SgCache when present.
Var stop_gradient(Var a);

struct Quantized {
  /// Row-major h x w codebook indices.
  std::vector<int> indices;
  /// Gathered codebook rows {n_z, h, w}; differentiable with respect to the codebook only.
  Var z_q;
};

/// Nearest codebook row per site (ties to the lowest index). z_hat {n_z,h,w}, codebook {K,n_z}.
Quantized quantize(Var z_hat, Var codebook);
/// Indices only, without a tape.
std::vector<int> nearest_codes(const Tensor& z_hat, const Tensor& codebook);

}  // namespace arsal::ad

#endif  // ARSAL_AUTODIFF_HPP
