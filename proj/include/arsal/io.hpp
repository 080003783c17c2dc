// File formats: float grids with JSON sidecars, 8-bit PNG images and CSV tables.

#ifndef ARSAL_IO_HPP
#define ARSAL_IO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsal/core.hpp"

namespace arsal::io {

namespace fs = std::filesystem;

/// Reproducibility header embedded in every output sidecar.
struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;

  nlohmann::json to_json() const;
};

std::string library_version();
/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Writes `contents` to a temporary sibling and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view contents);
std::string read_file(const fs::path& path);

/// Sidecar path for a data file: "<path>.json" for rasters, "<path>.meta.json" otherwise.
fs::path grid_sidecar_path(const fs::path& raster);
fs::path meta_sidecar_path(const fs::path& file);

/// Little-endian float32 raster plus a JSON sidecar {width, height, normalization_state}.
void write_float_grid(const fs::path& raster, const RealGrid& grid, NormalizationState state,
                      const nlohmann::json& extra = nlohmann::json::object());
SaliencyDensity read_float_grid(const fs::path& raster);

/// 8-bit grayscale PNG after min-max scaling.
void write_density_png(const fs::path& path, const RealGrid& grid);
/// Loads PNG/JPEG; a fourth channel becomes the transparency matrix.
ViewportImage read_image(const fs::path& path);
/// Writes RGB (or RGBA when alpha is not all ones) with round(v*255) quantization.
void write_image(const fs::path& path, const ViewportImage& image);

/// Minimal RFC-4180 CSV reader. The first row is the header.
class CsvTable {
 public:
  static CsvTable parse(std::string_view text, const fs::path& origin = {});
  static CsvTable load(const fs::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  /// Value of a named column; throws IoError when the column is absent.
  const std::string& at(std::size_t row, std::string_view column) const;
  bool has_column(std::string_view column) const;
  double number(std::size_t row, std::string_view column) const;

 private:
  std::size_t column_index(std::string_view column) const;

  fs::path origin_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Escapes a CSV field when needed.
std::string csv_field(std::string_view value);
/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace arsal::io

#endif  // ARSAL_IO_HPP
