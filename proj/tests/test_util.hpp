#ifndef ARSAL_TESTS_TEST_UTIL_HPP
#define ARSAL_TESTS_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>

#include "arsal/core.hpp"
#include "arsal/rng.hpp"
#include "oracles.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("arsal-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline oracle::Map flat(const arsal::RealGrid& g) { return {g.values().begin(), g.values().end()}; }

inline arsal::RealGrid grid_of(int w, int h, std::initializer_list<double> values) {
  return arsal::RealGrid(w, h, std::vector<double>(values));
}

inline arsal::RealGrid random_grid(arsal::Rng& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
  arsal::RealGrid g(w, h);
  for (double& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

inline std::pair<int, int> argmax(const arsal::RealGrid& g) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i] > g[best]) best = i;
  }
  return {static_cast<int>(best % static_cast<std::size_t>(g.width())),
          static_cast<int>(best / static_cast<std::size_t>(g.width()))};
}

inline fs::path fixture_dir() { return fs::path(ARSAL_FIXTURE_DIR); }

}  // namespace testutil

#endif  // ARSAL_TESTS_TEST_UTIL_HPP
