#include "arsal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace arsal::ad {

namespace {

std::size_t product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 0) throw ValidationError("tensor dimensions must be non-negative");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void require_3d(const Tensor& t, const char* op) {
  if (t.shape.size() != 3) {
    throw ValidationError(std::string(op) + " expects a {C,H,W} tensor");
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

template <typename Fwd, typename Da, typename Db>
Var binary(Var a, Var b, Fwd fwd, Da da, Db db) {
  Tape& t = *a.tape;
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const bool a_scalar = va.is_scalar() && !vb.is_scalar();
  const bool b_scalar = vb.is_scalar() && !va.is_scalar();
  if (!a_scalar && !b_scalar && va.size() != vb.size()) {
    throw ValidationError("elementwise operands differ in size");
  }
  const Tensor& shape_src = a_scalar ? vb : va;
  Tensor out(shape_src.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = fwd(va.data[a_scalar ? 0 : i], vb.data[b_scalar ? 0 : i]);
  }
  const int ia = a.id;
  const int ib = b.id;
  return t.push(std::move(out), {ia, ib}, [ia, ib, a_scalar, b_scalar, da, db](Tape& tape, int self) {
    const Tensor& g = tape.grad(self);
    const Tensor& x = tape.value(ia);
    const Tensor& y = tape.value(ib);
    const bool need_a = tape.requires_grad(ia);
    const bool need_b = tape.requires_grad(ib);
    Tensor* ga = need_a ? &tape.grad(ia) : nullptr;
    Tensor* gb = need_b ? &tape.grad(ib) : nullptr;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xv = x.data[a_scalar ? 0 : i];
      const double yv = y.data[b_scalar ? 0 : i];
      if (ga) ga->data[a_scalar ? 0 : i] += g.data[i] * da(xv, yv);
      if (gb) gb->data[b_scalar ? 0 : i] += g.data[i] * db(xv, yv);
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape;
  const Tensor& va = a.value();
  Tensor out(va.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = fwd(va.data[i]);
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, deriv](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const Tensor& g = tape.grad(self);
    const Tensor& x = tape.value(ia);
    const Tensor& y = tape.value(self);
    Tensor& gx = tape.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * deriv(x.data[i], y.data[i]);
  });
}

double softplus_value(double x) {
  // log(1 + e^x) without overflow.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(std::vector<int> dims, double fill) : shape(std::move(dims)), data(product(shape), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data = {v};
  return t;
}

const Tensor& SgCache::value(const Tensor& live) {
  if (mode_ == Mode::kRecord) {
    values_.push_back(live);
    return values_.back();
  }
  if (next_value_ >= values_.size()) {
    throw ValidationError("stop-gradient replay ran past the recorded pass");
  }
  return values_[next_value_++];
}

const std::vector<int>& SgCache::indices(const std::vector<int>& live) {
  if (mode_ == Mode::kRecord) {
    indices_.push_back(live);
    return indices_.back();
  }
  if (next_indices_ >= indices_.size()) {
    throw ValidationError("quantizer replay ran past the recorded pass");
  }
  return indices_[next_indices_++];
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = !p.frozen;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

Var Tape::push(Tensor value, std::vector<int> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (int i : inputs) {
    if (nodes_[static_cast<std::size_t>(i)].requires_grad) n.requires_grad = true;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  if (loss.tape != this || !value(loss.id).is_scalar()) {
    throw ValidationError("backward expects a scalar on this tape");
  }
  grad(loss.id).data[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr && !n.param->frozen) add_into(n.param->grad, n.grad);
  }
}

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var silu(Var a) {
  return unary(
      a, [](double x) { return x * sigmoid_value(x); },
      [](double x, double) {
        const double s = sigmoid_value(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Var softplus(Var a) {
  return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var log_eps(Var a, double eps) {
  return unary(a, [eps](double x) { return std::log(x + eps); }, [eps](double x, double) { return 1.0 / (x + eps); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var sum(Var a) {
  const Tensor& va = a.value();
  const double total = std::accumulate(va.data.begin(), va.data.end(), 0.0);
  const int ia = a.id;
  return a.tape->push(Tensor::scalar(total), {ia}, [ia](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const double g = tape.grad(self).data[0];
    for (double& v : tape.grad(ia).data) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var dot_const(Var a, const Tensor& c) {
  const Tensor& va = a.value();
  if (va.size() != c.size()) throw ValidationError("dot_const operands differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) total += va.data[i] * c.data[i];
  const int ia = a.id;
  return a.tape->push(Tensor::scalar(total), {ia}, [ia, c](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const double g = tape.grad(self).data[0];
    Tensor& ga = tape.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += g * c.data[i];
  });
}

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
  const Tensor& vx = x.value();
  const Tensor& vw = w.value();
  const Tensor& vb = b.value();
  require_3d(vx, "conv2d");
  if (vw.shape.size() != 4 || vw.dim(1) != vx.dim(0) || vw.dim(2) != vw.dim(3) ||
      vb.size() != static_cast<std::size_t>(vw.dim(0))) {
    throw ValidationError("conv2d weight/bias shapes do not match the input");
  }
  const int cin = vx.dim(0);
  const int h = vx.dim(1);
  const int wd = vx.dim(2);
  const int cout = vw.dim(0);
  const int k = vw.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (wd + 2 * pad - k) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ValidationError("conv2d input is smaller than the kernel");
  Tensor out({cout, oh, ow});
  for (int co = 0; co < cout; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = vb.data[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < cin; ++ci) {
          const double* wk = &vw.data[((static_cast<std::size_t>(co) * cin + ci) * k) * k];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              acc += wk[ky * k + kx] * vx.at(ci, iy, ix);
            }
          }
        }
        out.at(co, oy, ox) = acc;
      }
    }
  }
  const int ix_id = x.id;
  const int iw_id = w.id;
  const int ib_id = b.id;
  return x.tape->push(std::move(out), {ix_id, iw_id, ib_id},
                      [=](Tape& tape, int self) {
                        const Tensor& g = tape.grad(self);
                        const Tensor& X = tape.value(ix_id);
                        const Tensor& W = tape.value(iw_id);
                        Tensor* gx = tape.requires_grad(ix_id) ? &tape.grad(ix_id) : nullptr;
                        Tensor* gw = tape.requires_grad(iw_id) ? &tape.grad(iw_id) : nullptr;
                        Tensor* gb = tape.requires_grad(ib_id) ? &tape.grad(ib_id) : nullptr;
                        for (int co = 0; co < cout; ++co) {
                          for (int oy = 0; oy < oh; ++oy) {
                            for (int ox = 0; ox < ow; ++ox) {
                              const double go = g.at(co, oy, ox);
                              if (go == 0.0) continue;
                              if (gb) gb->data[static_cast<std::size_t>(co)] += go;
                              for (int ci = 0; ci < cin; ++ci) {
                                const std::size_t base = ((static_cast<std::size_t>(co) * cin + ci) * k) * k;
                                for (int ky = 0; ky < k; ++ky) {
                                  const int iy = oy * stride - pad + ky;
                                  if (iy < 0 || iy >= h) continue;
                                  for (int kx = 0; kx < k; ++kx) {
                                    const int ixx = ox * stride - pad + kx;
                                    if (ixx < 0 || ixx >= wd) continue;
                                    const std::size_t wi = base + static_cast<std::size_t>(ky * k + kx);
                                    if (gw) gw->data[wi] += go * X.at(ci, iy, ixx);
                                    if (gx) gx->at(ci, iy, ixx) += go * W.data[wi];
                                  }
                                }
                              }
                            }
                          }
                        }
                      });
}

Var upsample_nearest2x(Var x) {
  const Tensor& vx = x.value();
  require_3d(vx, "upsample");
  const int c = vx.dim(0);
  const int h = vx.dim(1);
  const int w = vx.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int xx = 0; xx < 2 * w; ++xx) out.at(ch, y, xx) = vx.at(ch, y / 2, xx / 2);
    }
  }
  const int ix = x.id;
  return x.tape->push(std::move(out), {ix}, [ix, c, h, w](Tape& tape, int self) {
    if (!tape.requires_grad(ix)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad(ix);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < 2 * h; ++y) {
        for (int xx = 0; xx < 2 * w; ++xx) gx.at(ch, y / 2, xx / 2) += g.at(ch, y, xx);
      }
    }
  });
}

Var pyr_down(Var x) {
  const Tensor& vx = x.value();
  require_3d(vx, "pyr_down");
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int c = vx.dim(0);
  const int h = vx.dim(1);
  const int w = vx.dim(2);
  const int oh = (h + 1) / 2;
  const int ow = (w + 1) / 2;
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ty = 0; ty < 5; ++ty) {
          const int iy = reflect(2 * oy - 2 + ty, h);
          for (int tx = 0; tx < 5; ++tx) acc += k[ty] * k[tx] * vx.at(ch, iy, reflect(2 * ox - 2 + tx, w));
        }
        out.at(ch, oy, ox) = acc;
      }
    }
  }
  const int ix = x.id;
  return x.tape->push(std::move(out), {ix}, [ix, c, h, w, oh, ow](Tape& tape, int self) {
    if (!tape.requires_grad(ix)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad(ix);
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double go = g.at(ch, oy, ox);
          for (int ty = 0; ty < 5; ++ty) {
            const int iy = reflect(2 * oy - 2 + ty, h);
            for (int tx = 0; tx < 5; ++tx) gx.at(ch, iy, reflect(2 * ox - 2 + tx, w)) += k[ty] * k[tx] * go;
          }
        }
      }
    }
  });
}

Var grad_magnitude(Var x, double eps) {
  const Tensor& vx = x.value();
  require_3d(vx, "grad_magnitude");
  const int c = vx.dim(0);
  const int h = vx.dim(1);
  const int w = vx.dim(2);
  if (h < 2 || w < 2) throw ValidationError("grad_magnitude needs at least 2x2 input");
  Tensor out({c, h - 1, w - 1});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h - 1; ++y) {
      for (int xx = 0; xx < w - 1; ++xx) {
        const double gx = vx.at(ch, y, xx + 1) - vx.at(ch, y, xx);
        const double gy = vx.at(ch, y + 1, xx) - vx.at(ch, y, xx);
        out.at(ch, y, xx) = std::sqrt(gx * gx + gy * gy + eps);
      }
    }
  }
  const int ix = x.id;
  return x.tape->push(std::move(out), {ix}, [ix, c, h, w](Tape& tape, int self) {
    if (!tape.requires_grad(ix)) return;
    const Tensor& g = tape.grad(self);
    const Tensor& X = tape.value(ix);
    const Tensor& M = tape.value(self);
    Tensor& gxt = tape.grad(ix);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h - 1; ++y) {
        for (int xx = 0; xx < w - 1; ++xx) {
          const double gx = X.at(ch, y, xx + 1) - X.at(ch, y, xx);
          const double gy = X.at(ch, y + 1, xx) - X.at(ch, y, xx);
          const double go = g.at(ch, y, xx) / M.at(ch, y, xx);
          gxt.at(ch, y, xx + 1) += go * gx;
          gxt.at(ch, y + 1, xx) += go * gy;
          gxt.at(ch, y, xx) -= go * (gx + gy);
        }
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_channels needs at least one input");
  const Tensor& first = parts.front().value();
  require_3d(first, "concat_channels");
  int channels = 0;
  std::vector<int> ids;
  std::vector<int> offsets;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_3d(v, "concat_channels");
    if (v.dim(1) != first.dim(1) || v.dim(2) != first.dim(2)) {
      throw ValidationError("concat_channels inputs differ in spatial size");
    }
    offsets.push_back(channels);
    channels += v.dim(0);
    ids.push_back(p.id);
  }
  Tensor out({channels, first.dim(1), first.dim(2)});
  const std::size_t plane = static_cast<std::size_t>(first.dim(1)) * static_cast<std::size_t>(first.dim(2));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offsets[i] * plane));
  }
  Tape* tape = parts.front().tape;
  return tape->push(std::move(out), ids, [ids, offsets, plane](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Tensor& gi = t.grad(ids[i]);
      const std::size_t base = static_cast<std::size_t>(offsets[i]) * plane;
      for (std::size_t j = 0; j < gi.size(); ++j) gi.data[j] += g.data[base + j];
    }
  });
}

Var stop_gradient(Var a) {
  Tape& t = *a.tape;
  SgCache* cache = t.cache();
  return t.constant(cache ? cache->value(a.value()) : a.value());
}

std::vector<int> nearest_codes(const Tensor& z_hat, const Tensor& codebook) {
  require_3d(z_hat, "quantize");
  if (codebook.shape.size() != 2 || codebook.dim(1) != z_hat.dim(0)) {
    throw ValidationError("codebook dimensionality does not match the encoder output");
  }
  const int nz = z_hat.dim(0);
  const int h = z_hat.dim(1);
  const int w = z_hat.dim(2);
  const int k = codebook.dim(0);
  std::vector<int> idx(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int e = 0; e < k; ++e) {
        double d = 0.0;
        for (int c = 0; c < nz; ++c) {
          const double diff = z_hat.at(c, y, x) - codebook.data[static_cast<std::size_t>(e) * nz + c];
          d += diff * diff;
        }
        // Strict comparison keeps the lowest index on ties.
        if (d < best) {
          best = d;
          best_k = e;
        }
      }
      idx[static_cast<std::size_t>(y) * w + x] = best_k;
    }
  }
  return idx;
}

Quantized quantize(Var z_hat, Var codebook) {
  Tape& t = *z_hat.tape;
  const Tensor& zv = z_hat.value();
  const Tensor& cb = codebook.value();
  std::vector<int> live = nearest_codes(zv, cb);
  std::vector<int> idx = t.cache() ? t.cache()->indices(live) : std::move(live);
  const int nz = zv.dim(0);
  const int h = zv.dim(1);
  const int w = zv.dim(2);
  Tensor out({nz, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto e = static_cast<std::size_t>(idx[static_cast<std::size_t>(y) * w + x]);
      for (int c = 0; c < nz; ++c) out.at(c, y, x) = cb.data[e * static_cast<std::size_t>(nz) + static_cast<std::size_t>(c)];
    }
  }
  const int icb = codebook.id;
  Var zq = t.push(std::move(out), {icb}, [icb, idx, nz, h, w](Tape& tape, int self) {
    if (!tape.requires_grad(icb)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gc = tape.grad(icb);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto e = static_cast<std::size_t>(idx[static_cast<std::size_t>(y) * w + x]);
        for (int c = 0; c < nz; ++c) gc.data[e * static_cast<std::size_t>(nz) + static_cast<std::size_t>(c)] += g.at(c, y, x);
      }
    }
  });
  return {std::move(idx), zq};
}

}  // namespace arsal::ad
