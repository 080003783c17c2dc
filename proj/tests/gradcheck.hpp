// Central finite-difference check of VQNet gradients. Stop-gradient values and
// code assignments are recorded on the analytic pass and replayed for every
// perturbed evaluation, so the numerical derivative is taken of the same
// surrogate the straight-through rule differentiates.

#ifndef ARSAL_TESTS_GRADCHECK_HPP
#define ARSAL_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "arsal/vqsal.hpp"

namespace gradcheck {

struct Report {
  std::size_t checked = 0;
  std::size_t failures = 0;
  /// Largest |analytic - numeric| / allowed over all entries; <= 1 passes.
  double worst_ratio = 0.0;
  std::string worst_param;
};

inline arsal::vq::VQConfig toy_config(std::uint64_t seed) {
  arsal::vq::VQConfig c;
  c.in_channels = 1;
  c.codebook_size = 8;
  c.n_z = 4;
  c.enc_channels1 = 4;
  c.enc_channels2 = 8;
  c.seed = seed;
  return c;
}

/// Smooth 8x8 single-channel images with sum-to-one saliency targets.
inline std::vector<arsal::vq::Sample> toy_batch(int n, int size = 8) {
  std::vector<arsal::vq::Sample> out;
  for (int k = 0; k < n; ++k) {
    arsal::vq::Sample s{arsal::ad::Tensor({1, size, size}), arsal::ad::Tensor({1, size, size})};
    double total = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        s.image.at(0, y, x) = 0.5 + 0.4 * std::sin(0.7 * x + 1.3 * k) * std::cos(0.5 * y - 0.4 * k);
        const double dx = x - 2.0 - k, dy = y - 4.0;
        s.saliency.at(0, y, x) = std::exp(-(dx * dx + dy * dy) / 6.0) + 1e-3;
        total += s.saliency.at(0, y, x);
      }
    }
    for (double& v : s.saliency.data) v /= total;
    out.push_back(std::move(s));
  }
  return out;
}

inline Report check(arsal::vq::VQNet& net, const std::vector<arsal::vq::Sample>& batch, double h = 1e-5,
                    double rel = 1e-4, double abs_floor = 1e-6) {
  arsal::ad::SgCache cache(arsal::ad::SgCache::Mode::kRecord);
  const std::vector<arsal::ad::Tensor> analytic = arsal::vq::straight_through_backward(net, batch, &cache);
  Report r;
  const auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    // Frozen parameters report zero gradient by contract; checked separately.
    if (params[p]->frozen) continue;
    auto& values = params[p]->value.data;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      cache.replay();
      const double up = net.objective(batch, &cache, false);
      values[i] = orig - h;
      cache.replay();
      const double down = net.objective(batch, &cache, false);
      values[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[p].data[i];
      const double allowed = std::max(rel * std::max(std::abs(a), std::abs(numeric)), abs_floor);
      const double ratio = std::abs(a - numeric) / allowed;
      ++r.checked;
      if (ratio > 1.0) ++r.failures;
      if (ratio > r.worst_ratio) {
        r.worst_ratio = ratio;
        r.worst_param = params[p]->name;
      }
    }
  }
  return r;
}

}  // namespace gradcheck

#endif  // ARSAL_TESTS_GRADCHECK_HPP
