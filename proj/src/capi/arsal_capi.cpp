#include "arsal/arsal.h"

#include <exception>
#include <string>

#include "arsal/compositor.hpp"
#include "arsal/io.hpp"
#include "arsal/metrics.hpp"
#include "arsal/pipeline.hpp"
#include "arsal/salmodels.hpp"

struct arsal_image {
  arsal::ViewportImage value;
};
struct arsal_grid {
  arsal::SaliencyDensity value;
};
struct arsal_fixmap {
  arsal::FixationMap value;
};
struct arsal_args {
  arsal::app::Args values;
  std::string output;
};

namespace {

thread_local std::string g_error;

template <class F>
arsal_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    return ARSAL_OK;
  } catch (const arsal::ValidationError& e) {
    g_error = e.what();
    return ARSAL_ERR_VALIDATION;
  } catch (const arsal::IoError& e) {
    g_error = e.what();
    return ARSAL_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return ARSAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return ARSAL_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return ARSAL_ERR_INTERNAL;
  }
}

template <class T>
const T& deref(const T* p, const char* what) {
  if (p == nullptr) throw arsal::ValidationError(std::string(what) + " is null");
  return *p;
}

std::string str(const char* p, const char* what) {
  if (p == nullptr) throw arsal::ValidationError(std::string(what) + " is null");
  return p;
}

template <class T>
void check_out(T** out) {
  if (out == nullptr) throw arsal::ValidationError("output pointer is null");
}

arsal::ViewportSpec to_spec(const arsal_viewport_spec* s) {
  const auto& c = deref(s, "viewport spec");
  arsal::ViewportSpec spec;
  spec.width_px = c.width_px;
  spec.height_px = c.height_px;
  spec.fov_h_deg = c.fov_h_deg;
  spec.fov_v_deg = c.fov_v_deg;
  spec.center_lat_deg = c.center_lat_deg;
  spec.center_long_deg = c.center_long_deg;
  spec.validate();
  return spec;
}

std::vector<arsal::PixelPos> to_points(const int* xy, size_t count) {
  if (count > 0 && xy == nullptr) throw arsal::ValidationError("coordinate array is null");
  std::vector<arsal::PixelPos> pts(count);
  for (size_t i = 0; i < count; ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
  return pts;
}

}  // namespace

extern "C" {

const char* arsal_last_error(void) { return g_error.c_str(); }

const char* arsal_version(void) {
  static const std::string v = arsal::io::library_version();
  return v.c_str();
}

void arsal_viewport_default(arsal_viewport_spec* spec) {
  if (spec == nullptr) return;
  const arsal::ViewportSpec d;
  *spec = {d.width_px, d.height_px, d.fov_h_deg, d.fov_v_deg, d.center_lat_deg, d.center_long_deg};
}

arsal_status arsal_image_load(const char* path, arsal_image** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_image{arsal::io::read_image(str(path, "path"))};
  });
}

arsal_status arsal_image_create(int width, int height, double r, double g, double b, double alpha,
                                arsal_image** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_image{arsal::ViewportImage::filled(width, height, r, g, b, alpha)};
  });
}

arsal_status arsal_image_from_rgba(int width, int height, const double* rgba, arsal_image** out) {
  return guarded([&] {
    check_out(out);
    deref(rgba, "pixel data");
    std::array<arsal::RealGrid, 3> ch{arsal::RealGrid(width, height), arsal::RealGrid(width, height),
                                      arsal::RealGrid(width, height)};
    arsal::RealGrid a(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double* p = rgba + 4 * (static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x));
        for (int c = 0; c < 3; ++c) ch[static_cast<size_t>(c)](x, y) = p[c];
        a(x, y) = p[3];
      }
    }
    *out = new arsal_image{arsal::ViewportImage(std::move(ch), std::move(a))};
  });
}

arsal_status arsal_image_save(const arsal_image* img, const char* path) {
  return guarded([&] { arsal::io::write_image(str(path, "path"), deref(img, "image").value); });
}

int arsal_image_width(const arsal_image* img) { return img ? img->value.width() : 0; }
int arsal_image_height(const arsal_image* img) { return img ? img->value.height() : 0; }

arsal_status arsal_image_pixel(const arsal_image* img, int x, int y, double* rgba) {
  return guarded([&] {
    const auto& im = deref(img, "image").value;
    if (rgba == nullptr) throw arsal::ValidationError("output pointer is null");
    if (x < 0 || y < 0 || x >= im.width() || y >= im.height()) throw arsal::ValidationError("pixel out of range");
    for (int c = 0; c < 3; ++c) rgba[c] = im.channel(c)(x, y);
    rgba[3] = im.alpha()(x, y);
  });
}

void arsal_image_free(arsal_image* img) { delete img; }

arsal_status arsal_pad_ar(const arsal_image* ar, const arsal_viewport_spec* spec, int offset_x, int offset_y,
                          arsal_image** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_image{arsal::compositor::pad_ar(deref(ar, "image").value, to_spec(spec), {offset_x, offset_y})};
  });
}

arsal_status arsal_extract_viewport(const arsal_image* equirect, const arsal_viewport_spec* spec, arsal_image** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_image{arsal::compositor::extract_viewport(deref(equirect, "image").value, to_spec(spec))};
  });
}

arsal_status arsal_composite(const arsal_image* ar_padded, const arsal_image* bg_view, double alpha,
                             arsal_image** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_image{arsal::compositor::composite(deref(ar_padded, "AR image").value,
                                                        deref(bg_view, "background image").value,
                                                        arsal::MixingLevel(alpha))};
  });
}

arsal_status arsal_grid_create(int width, int height, const double* values, arsal_grid** out) {
  return guarded([&] {
    check_out(out);
    arsal::RealGrid g(width, height);
    if (values != nullptr) std::copy(values, values + g.size(), g.values().begin());
    *out = new arsal_grid{{std::move(g), arsal::NormalizationState::kRaw, false}};
  });
}

int arsal_grid_width(const arsal_grid* g) { return g ? g->value.width() : 0; }
int arsal_grid_height(const arsal_grid* g) { return g ? g->value.height() : 0; }
const double* arsal_grid_data(const arsal_grid* g) { return g ? g->value.grid.values().data() : nullptr; }

arsal_status arsal_grid_load(const char* path, arsal_grid** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_grid{arsal::io::read_float_grid(str(path, "path"))};
  });
}

arsal_status arsal_grid_save(const arsal_grid* g, const char* path) {
  return guarded([&] {
    const auto& d = deref(g, "grid").value;
    arsal::io::write_float_grid(str(path, "path"), d.grid, d.state);
  });
}

void arsal_grid_free(arsal_grid* g) { delete g; }

arsal_status arsal_predict(const char* model, const arsal_image* img, arsal_grid** out) {
  return guarded([&] {
    check_out(out);
    auto p = arsal::models::make_predictor(str(model, "model name"));
    *out = new arsal_grid{p->predict(deref(img, "image").value)};
  });
}

arsal_status arsal_fixmap_create(int width, int height, const int* xy, size_t count, arsal_fixmap** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_fixmap{arsal::FixationMap(width, height, to_points(xy, count))};
  });
}

void arsal_fixmap_free(arsal_fixmap* f) { delete f; }

arsal_status arsal_metric_compute(arsal_metric metric, const arsal_grid* pred, const arsal_grid* gt,
                                  const arsal_fixmap* fix, double* out) {
  return guarded([&] {
    if (out == nullptr) throw arsal::ValidationError("output pointer is null");
    const auto& p = deref(pred, "prediction").value.grid;
    namespace m = arsal::metrics;
    switch (metric) {
      case ARSAL_METRIC_CC:
        *out = m::cc(p, deref(gt, "ground truth").value.grid);
        break;
      case ARSAL_METRIC_SIM:
        *out = m::sim(p, deref(gt, "ground truth").value.grid);
        break;
      case ARSAL_METRIC_KL:
        *out = m::kl(p, deref(gt, "ground truth").value.grid);
        break;
      case ARSAL_METRIC_AUC:
        *out = m::auc_judd(p, deref(fix, "fixation map").value);
        break;
      case ARSAL_METRIC_NSS:
        *out = m::nss(p, deref(fix, "fixation map").value);
        break;
      case ARSAL_METRIC_IG:
        *out = m::ig(p, m::center_prior(p.width(), p.height()), deref(fix, "fixation map").value);
        break;
      case ARSAL_METRIC_SAUC:
        throw arsal::ValidationError("sAUC needs a negative pool; use arsal_metric_sauc");
      default:
        throw arsal::ValidationError("unknown metric");
    }
  });
}

arsal_status arsal_metric_sauc(const arsal_grid* pred, const arsal_fixmap* fix, const int* pool_xy,
                               size_t pool_count, uint64_t seed, double* out) {
  return guarded([&] {
    if (out == nullptr) throw arsal::ValidationError("output pointer is null");
    *out = arsal::metrics::sauc(deref(pred, "prediction").value.grid, deref(fix, "fixation map").value,
                                to_points(pool_xy, pool_count), seed);
  });
}

arsal_status arsal_args_create(arsal_args** out) {
  return guarded([&] {
    check_out(out);
    *out = new arsal_args{};
  });
}

arsal_status arsal_args_set(arsal_args* args, const char* name, const char* value) {
  return guarded([&] {
    if (args == nullptr) throw arsal::ValidationError("args is null");
    args->values[str(name, "flag name")] = value ? value : "";
  });
}

void arsal_args_free(arsal_args* args) { delete args; }

arsal_status arsal_command_run(const char* command, arsal_args* args) {
  return guarded([&] {
    if (args == nullptr) throw arsal::ValidationError("args is null");
    args->output.clear();
    args->output = arsal::app::run_command(str(command, "command"), args->values);
  });
}

const char* arsal_args_output(const arsal_args* args) { return args ? args->output.c_str() : ""; }

}  // extern "C"
