#include "arsal/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace arsal::io {

nlohmann::json RunStamp::to_json() const {
  return {{"config_hash", config_hash}, {"seed", seed}, {"version", version}};
}

std::string library_version() { return "0.3.0"; }

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path grid_sidecar_path(const fs::path& raster) {
  fs::path p = raster;
  p += ".json";
  return p;
}

fs::path meta_sidecar_path(const fs::path& file) {
  fs::path p = file;
  p += ".meta.json";
  return p;
}

void write_float_grid(const fs::path& raster, const RealGrid& grid, NormalizationState state,
                      const nlohmann::json& extra) {
  std::string bytes(grid.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid[i]));
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
    }
    std::memcpy(bytes.data() + i * sizeof(float), &bits, sizeof(bits));
  }
  nlohmann::json meta = extra;
  meta["width"] = grid.width();
  meta["height"] = grid.height();
  meta["normalization_state"] = std::string(to_string(state));
  write_file_atomic(raster, bytes);
  write_file_atomic(grid_sidecar_path(raster), meta.dump(2) + "\n");
}

SaliencyDensity read_float_grid(const fs::path& raster) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(grid_sidecar_path(raster)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar for " + raster.string() + ": " + e.what());
  }
  if (!meta.contains("width") || !meta.contains("height")) {
    throw IoError("sidecar for " + raster.string() + " lacks width/height");
  }
  const int width = meta["width"].get<int>();
  const int height = meta["height"].get<int>();
  const std::string bytes = read_file(raster);
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * sizeof(float);
  if (width < 0 || height < 0 || bytes.size() != expected) {
    throw IoError("raster " + raster.string() + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                  std::to_string(expected));
  }
  RealGrid grid(width, height);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, bytes.data() + i * sizeof(float), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
    }
    grid[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  SaliencyDensity out;
  out.grid = std::move(grid);
  out.state = normalization_state_from_string(meta.value("normalization_state", std::string("raw")));
  out.degenerate = meta.value("degenerate", false);
  return out;
}

void write_density_png(const fs::path& path, const RealGrid& grid) {
  const SaliencyDensity scaled = normalize(grid, NormalizeMode::kMinMax);
  cv::Mat img(grid.height(), grid.width(), CV_8UC1);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      img.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(scaled.grid(x, y) * 255.0));
    }
  }
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", img, buf)) {
    throw IoError("PNG encoding failed for " + path.string());
  }
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

ViewportImage read_image(const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError("image not found: " + path.string());
  }
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) {
    throw IoError("cannot decode image " + path.string());
  }
  const double scale = img.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  if (img.depth() != CV_8U && img.depth() != CV_16U) {
    throw IoError("unsupported pixel depth in " + path.string());
  }
  cv::Mat f;
  img.convertTo(f, CV_64F, scale);
  const int w = f.cols;
  const int h = f.rows;
  const int ch = f.channels();
  std::array<RealGrid, 3> rgb{RealGrid(w, h), RealGrid(w, h), RealGrid(w, h)};
  RealGrid alpha(w, h, 1.0);
  for (int y = 0; y < h; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < w; ++x) {
      const double* px = row + static_cast<std::ptrdiff_t>(x) * ch;
      if (ch == 1 || ch == 2) {
        rgb[0](x, y) = rgb[1](x, y) = rgb[2](x, y) = px[0];
        if (ch == 2) alpha(x, y) = px[1];
      } else {
        // OpenCV stores BGR(A).
        rgb[0](x, y) = px[2];
        rgb[1](x, y) = px[1];
        rgb[2](x, y) = px[0];
        if (ch == 4) alpha(x, y) = px[3];
      }
    }
  }
  return ViewportImage(std::move(rgb), std::move(alpha));
}

void write_image(const fs::path& path, const ViewportImage& image) {
  bool opaque = true;
  for (double a : image.alpha().values()) {
    if (a != 1.0) {
      opaque = false;
      break;
    }
  }
  const int ch = opaque ? 3 : 4;
  cv::Mat img(image.height(), image.width(), ch == 3 ? CV_8UC3 : CV_8UC4);
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  for (int y = 0; y < image.height(); ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      std::uint8_t* px = row + static_cast<std::ptrdiff_t>(x) * ch;
      px[0] = q(image.channel(2)(x, y));
      px[1] = q(image.channel(1)(x, y));
      px[2] = q(image.channel(0)(x, y));
      if (ch == 4) px[3] = q(image.alpha()(x, y));
    }
  }
  std::string ext = path.extension().string();
  if (ext.empty()) ext = ".png";
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(ext, img, buf)) {
    throw IoError("image encoding failed for " + path.string());
  }
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

CsvTable CsvTable::parse(std::string_view text, const fs::path& origin) {
  CsvTable table;
  table.origin_ = origin;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) {
    throw IoError("unterminated quoted field in " + origin.string());
  }
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) {
    throw IoError("CSV " + origin.string() + " has no header row");
  }
  table.header_ = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header_.size()) {
      throw IoError("CSV " + origin.string() + " row " + std::to_string(r + 1) + " has " +
                    std::to_string(records[r].size()) + " fields, expected " + std::to_string(table.header_.size()));
    }
    table.rows_.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable CsvTable::load(const fs::path& path) { return parse(read_file(path), path); }

std::size_t CsvTable::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == column) return i;
  }
  throw IoError("CSV " + origin_.string() + " lacks column '" + std::string(column) + "'");
}

bool CsvTable::has_column(std::string_view column) const {
  for (const auto& h : header_) {
    if (h == column) return true;
  }
  return false;
}

const std::string& CsvTable::at(std::size_t row, std::string_view column) const {
  return rows_.at(row)[column_index(column)];
}

double CsvTable::number(std::size_t row, std::string_view column) const {
  const std::string& text = at(row, column);
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  while (begin < end && *begin == ' ') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw IoError("CSV " + origin_.string() + " row " + std::to_string(row + 2) + ": '" + text +
                  "' in column '" + std::string(column) + "' is not a number");
  }
  return value;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(value);
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace arsal::io
