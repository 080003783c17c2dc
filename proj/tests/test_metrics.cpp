#include <doctest.h>

#include "arsal/metrics.hpp"
#include "test_util.hpp"

using namespace arsal;
using namespace arsal::metrics;
using testutil::flat;
using testutil::grid_of;

namespace {

oracle::Points points_of(const FixationMap& fm) {
  oracle::Points out;
  for (const auto& p : fm.fixations()) out.emplace_back(p.x, p.y);
  return out;
}

// Random map; every other instance is quantised to force ties.
RealGrid random_map(Rng& rng, int w, int h, bool ties) {
  RealGrid g = testutil::random_grid(rng, w, h, 0.0, 1.0);
  if (ties) {
    for (double& v : g.values()) v = std::round(v * 8.0) / 8.0;
  }
  return g;
}

std::vector<PixelPos> random_points(Rng& rng, int w, int h, int n) {
  std::vector<PixelPos> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({static_cast<int>(rng.index(static_cast<std::uint64_t>(w))),
                   static_cast<int>(rng.index(static_cast<std::uint64_t>(h)))});
  }
  return out;
}

}  // namespace

TEST_CASE("all seven metrics agree with brute force on 500 random instances") {
  Rng rng(2024);
  constexpr int W = 16, H = 16;
  const oracle::Map base = oracle::center_gaussian(W, H);
  const RealGrid prior = center_prior(W, H);
  for (std::size_t i = 0; i < base.size(); ++i) REQUIRE(std::abs(prior[i] - base[i]) < 1e-15);

  for (int trial = 0; trial < 500; ++trial) {
    CAPTURE(trial);
    const bool ties = trial % 2 == 1;
    const RealGrid pred = random_map(rng, W, H, ties);
    const RealGrid gt = random_map(rng, W, H, false);
    const int n = 1 + static_cast<int>(rng.index(24));
    const FixationMap fm(W, H, random_points(rng, W, H, n));
    const auto pool = random_points(rng, W, H, n);
    const oracle::Points fix = points_of(fm);
    const oracle::Map p = flat(pred), g = flat(gt);

    CHECK(std::abs(cc(pred, gt) - oracle::pearson(p, g)) < 1e-9);
    CHECK(std::abs(nss(pred, fm) - oracle::nss(p, W, fix)) < 1e-9);
    CHECK(std::abs(sim(pred, gt) - oracle::similarity(p, g)) < 1e-9);
    CHECK(std::abs(kl(pred, gt) - oracle::kl_div(p, g)) < 1e-9);
    CHECK(std::abs(auc_judd(pred, fm) - oracle::auc_judd(p, W, fix)) < 1e-9);
    CHECK(std::abs(ig(pred, prior, fm) - oracle::info_gain(p, base, W, fix)) < 1e-9);

    // Pool as large as the fixation set: sampling without replacement takes all of it.
    std::vector<double> pos, neg;
    for (auto [x, y] : fix) pos.push_back(p[static_cast<std::size_t>(y * W + x)]);
    for (const auto& q : pool) neg.push_back(p[static_cast<std::size_t>(q.y * W + q.x)]);
    CHECK(std::abs(sauc(pred, fm, pool, static_cast<std::uint64_t>(trial)) - oracle::auc_pairwise(pos, neg)) < 1e-9);
  }
}

TEST_CASE("CC closed forms") {
  const RealGrid a = grid_of(2, 2, {0, 1, 1, 0});
  const RealGrid b = grid_of(2, 2, {1, 0, 0, 1});
  CHECK(cc(a, b) == -1.0);
  CHECK(cc(a, a) == 1.0);
  Rng rng(4);
  const RealGrid r = testutil::random_grid(rng, 5, 5);
  RealGrid neg = r;
  for (double& v : neg.values()) v = 3.0 - v;
  CHECK(cc(r, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cc(r, RealGrid(5, 5, 0.4)) == 0.0);
  CHECK(cc(a, b) == cc(b, a));
}

TEST_CASE("NSS closed forms") {
  const RealGrid m = grid_of(2, 2, {0, 0, 0, 1});
  CHECK(nss(m, FixationMap(2, 2, {{1, 1}})) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(nss(m, FixationMap(2, 2, {{1, 1}})) == doctest::Approx(1.732).epsilon(1e-3));
  CHECK(nss(m, FixationMap(2, 2, {{0, 0}})) == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(nss(m, FixationMap(2, 2, {{0, 0}})) == doctest::Approx(-0.577).epsilon(1e-3));
  CHECK(nss(RealGrid(3, 3, 0.2), FixationMap(3, 3, {{1, 1}})) == 0.0);
  CHECK_THROWS_AS(nss(m, FixationMap(2, 2, {})), ValidationError);
}

TEST_CASE("SIM closed forms") {
  CHECK(sim(grid_of(2, 1, {0.5, 0.5}), grid_of(2, 1, {0.25, 0.75})) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sim(grid_of(2, 1, {1, 0}), grid_of(2, 1, {0, 1})) == 0.0);
  CHECK(sim(grid_of(2, 2, {1, 2, 3, 4}), grid_of(2, 2, {1, 2, 3, 4})) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("KL closed forms and direction") {
  Rng rng(6);
  const RealGrid p = testutil::random_grid(rng, 8, 8, 0.1, 1.0);
  CHECK(std::abs(kl(p, p)) <= 1e-5);
  CHECK(std::abs(kl(RealGrid(7, 3, 1.0), RealGrid(7, 3, 1.0))) <= 1e-5);
  // gt mass where pred has none: large and positive.
  const RealGrid pred = grid_of(2, 1, {1, 0});
  const RealGrid gt = grid_of(2, 1, {0.5, 0.5});
  const double v = kl(pred, gt);
  CHECK(v > 5.0);
  CHECK(v == doctest::Approx(0.5 * std::log(0.5 / (1 + kEpsilon)) + 0.5 * std::log(0.5 / kEpsilon)).epsilon(1e-12));
  CHECK(kl(gt, pred) < v);
}

TEST_CASE("AUC closed forms") {
  CHECK(auc_judd(RealGrid(4, 4, 0.3), FixationMap(4, 4, {{1, 1}, {2, 3}})) == 0.5);
  RealGrid checker(4, 4);
  std::vector<PixelPos> high;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      checker(x, y) = (x + y) % 2 ? 1.0 : 0.0;
      if ((x + y) % 2) high.push_back({x, y});
    }
  }
  CHECK(auc_judd(checker, FixationMap(4, 4, high)) == 1.0);
  RealGrid peak(5, 5, 0.0);
  peak(2, 2) = 1.0;
  CHECK(auc_judd(peak, FixationMap(5, 5, {{2, 2}})) == 1.0);
}

TEST_CASE("affine invariance of CC, NSS and AUC; scale invariance of SIM, KL and IG") {
  Rng rng(13);
  const RealGrid pred = testutil::random_grid(rng, 10, 10, 0.05, 1.0);
  const RealGrid gt = testutil::random_grid(rng, 10, 10, 0.05, 1.0);
  const FixationMap fm(10, 10, random_points(rng, 10, 10, 7));
  RealGrid affine = pred, scaled = pred;
  for (double& v : affine.values()) v = 2.5 * v + 4.0;
  for (double& v : scaled.values()) v *= 3.0;
  CHECK(cc(affine, gt) == doctest::Approx(cc(pred, gt)).epsilon(1e-12));
  CHECK(nss(affine, fm) == doctest::Approx(nss(pred, fm)).epsilon(1e-12));
  CHECK(auc_judd(affine, fm) == auc_judd(pred, fm));
  CHECK(sim(scaled, gt) == doctest::Approx(sim(pred, gt)).epsilon(1e-12));
  CHECK(kl(scaled, gt) == doctest::Approx(kl(pred, gt)).epsilon(1e-12));
  const RealGrid base = center_prior(10, 10);
  CHECK(ig(scaled, base, fm) == doctest::Approx(ig(pred, base, fm)).epsilon(1e-12));
}

TEST_CASE("sAUC closed forms and the shuffled expectation") {
  Rng rng(21);
  const RealGrid pred = testutil::random_grid(rng, 12, 12);
  const auto pts = random_points(rng, 12, 12, 15);
  CHECK(sauc(pred, FixationMap(12, 12, pts), pts, 1) == 0.5);

  RealGrid split(12, 12, 0.0);
  for (int y = 0; y < 12; ++y) {
    for (int x = 6; x < 12; ++x) split(x, y) = 1.0;
  }
  const auto right = random_points(rng, 6, 12, 10);
  std::vector<PixelPos> pos, neg;
  for (auto p : right) {
    pos.push_back({p.x + 6, p.y});
    neg.push_back(p);
  }
  CHECK(sauc(split, FixationMap(12, 12, pos), neg, 3) == 1.0);
  CHECK_THROWS_AS(sauc(split, FixationMap(12, 12, pos), {}, 3), ValidationError);

  // Prediction is another image's density; positives and pool share its
  // distribution, so the mean over resamples sits near chance.
  auto draw = [&](const RealGrid& d, int n) {
    std::vector<PixelPos> out;
    const double total = grid_sum(d);
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform(0.0, total);
      std::size_t k = 0;
      while (k + 1 < d.size() && u > d[k]) u -= d[k++];
      out.push_back({static_cast<int>(k % 12), static_cast<int>(k / 12)});
    }
    return out;
  };
  RealGrid other(12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) other(x, y) = std::exp(-((x - 4.0) * (x - 4.0) + (y - 7.0) * (y - 7.0)) / 8.0);
  }
  double mean = 0.0;
  for (int r = 0; r < 1000; ++r) {
    const FixationMap fm(12, 12, draw(other, 10));
    mean += sauc(other, fm, draw(other, 40), static_cast<std::uint64_t>(r));
  }
  mean /= 1000.0;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.1));  // within +-0.05
}

TEST_CASE("IG closed forms") {
  const RealGrid base = center_prior(9, 9);
  const FixationMap centre(9, 9, {{4, 4}, {4, 3}});
  CHECK(ig(base, base, centre) == 0.0);
  // Double the baseline mass at the fixated pixel, take it from elsewhere.
  const RealGrid b = grid_of(2, 2, {0.25, 0.25, 0.25, 0.25});
  const RealGrid p = grid_of(2, 2, {0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3});
  CHECK(ig(p, b, FixationMap(2, 2, {{0, 0}})) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ig(RealGrid(9, 9, 1.0), base, centre) < 0.0);
  CHECK(ig(RealGrid(9, 9, 1.0), base, centre) ==
        doctest::Approx(oracle::info_gain(oracle::Map(81, 1.0), flat(base), 9, {{4, 4}, {4, 3}})).epsilon(1e-12));
}

TEST_CASE("evaluate_all flags degenerate inputs instead of throwing") {
  const RealGrid pred(6, 6, 0.5);
  SaliencyDensity gt{RealGrid(6, 6, 1.0 / 36.0), NormalizationState::kSumToOne, false};
  const FixationMap none(6, 6, {});
  EvaluationInputs in;
  in.pred = &pred;
  in.gt_density = &gt;
  in.fixations = &none;
  const MetricReport r = evaluate_all(in);
  CHECK(std::isnan(r.get(Metric::kAuc)));
  CHECK(std::isnan(r.get(Metric::kNss)));
  CHECK(std::isnan(r.get(Metric::kSauc)));
  CHECK(r.get(Metric::kCc) == 0.0);
  CHECK(r.get(Metric::kSim) == doctest::Approx(1.0));
  CHECK(r.flags.size() >= 3);

  Rng rng(9);
  const RealGrid good = testutil::random_grid(rng, 6, 6);
  const FixationMap fm(6, 6, {{1, 1}, {4, 2}});
  const std::vector<PixelPos> pool{{0, 0}, {5, 5}, {3, 3}};
  in.pred = &good;
  in.fixations = &fm;
  in.negative_pool = &pool;
  const MetricReport ok = evaluate_all(in);
  for (Metric m : kAllMetrics) CHECK(std::isfinite(ok.get(m)));
  CHECK(ok.get(Metric::kAuc) == auc_judd(good, fm));
  CHECK(ok.get(Metric::kIg) == ig(good, center_prior(6, 6), fm));
}
