/* C interface to the arsal library.
 *
 * Every object is an opaque handle released with its matching *_free call.
 * Functions return an arsal_status; on failure a message is available from
 * arsal_last_error() (thread-local, valid until the next call on the same
 * thread). Output pointers are only written on success.
 */

#ifndef ARSAL_H
#define ARSAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ARSAL_API __attribute__((visibility("default")))
#else
#define ARSAL_API
#endif

typedef enum arsal_status {
  ARSAL_OK = 0,
  ARSAL_ERR_VALIDATION = 1,
  ARSAL_ERR_IO = 2,
  ARSAL_ERR_INTERNAL = 3
} arsal_status;

typedef struct arsal_image arsal_image;   /* RGB + transparency, values in [0,1] */
typedef struct arsal_grid arsal_grid;     /* real-valued saliency grid */
typedef struct arsal_fixmap arsal_fixmap; /* discrete fixation locations */
typedef struct arsal_args arsal_args;     /* flag set for arsal_command_run */

typedef struct arsal_viewport_spec {
  int width_px;
  int height_px;
  double fov_h_deg;
  double fov_v_deg;
  double center_lat_deg;
  double center_long_deg;
} arsal_viewport_spec;

typedef enum arsal_metric {
  ARSAL_METRIC_AUC = 0,
  ARSAL_METRIC_SAUC = 1,
  ARSAL_METRIC_CC = 2,
  ARSAL_METRIC_NSS = 3,
  ARSAL_METRIC_SIM = 4,
  ARSAL_METRIC_KL = 5,
  ARSAL_METRIC_IG = 6
} arsal_metric;

ARSAL_API const char* arsal_last_error(void);
ARSAL_API const char* arsal_version(void);

/* Default viewport: 1440x1600, 110 deg horizontal FOV, square pixels. */
ARSAL_API void arsal_viewport_default(arsal_viewport_spec* spec);

/* ---- images ---- */
ARSAL_API arsal_status arsal_image_load(const char* path, arsal_image** out);
ARSAL_API arsal_status arsal_image_create(int width, int height, double r, double g, double b, double alpha,
                                          arsal_image** out);
/* `rgba` holds width*height*4 interleaved values in [0,1]. */
ARSAL_API arsal_status arsal_image_from_rgba(int width, int height, const double* rgba, arsal_image** out);
ARSAL_API arsal_status arsal_image_save(const arsal_image* img, const char* path);
ARSAL_API int arsal_image_width(const arsal_image* img);
ARSAL_API int arsal_image_height(const arsal_image* img);
/* Writes r, g, b, alpha of one pixel into rgba[4]. */
ARSAL_API arsal_status arsal_image_pixel(const arsal_image* img, int x, int y, double* rgba);
ARSAL_API void arsal_image_free(arsal_image* img);

/* ---- compositing ---- */
ARSAL_API arsal_status arsal_pad_ar(const arsal_image* ar, const arsal_viewport_spec* spec, int offset_x,
                                    int offset_y, arsal_image** out);
ARSAL_API arsal_status arsal_extract_viewport(const arsal_image* equirect, const arsal_viewport_spec* spec,
                                              arsal_image** out);
ARSAL_API arsal_status arsal_composite(const arsal_image* ar_padded, const arsal_image* bg_view, double alpha,
                                       arsal_image** out);

/* ---- grids ---- */
ARSAL_API arsal_status arsal_grid_create(int width, int height, const double* values, arsal_grid** out);
ARSAL_API int arsal_grid_width(const arsal_grid* g);
ARSAL_API int arsal_grid_height(const arsal_grid* g);
/* Row-major values; valid while the grid lives. */
ARSAL_API const double* arsal_grid_data(const arsal_grid* g);
ARSAL_API arsal_status arsal_grid_load(const char* path, arsal_grid** out);
ARSAL_API arsal_status arsal_grid_save(const arsal_grid* g, const char* path);
ARSAL_API void arsal_grid_free(arsal_grid* g);

/* Saliency prediction with a registered model ("IT", "SR", "PFT"). */
ARSAL_API arsal_status arsal_predict(const char* model, const arsal_image* img, arsal_grid** out);

/* ---- fixations and metrics ---- */
/* `xy` holds count pairs of pixel coordinates. */
ARSAL_API arsal_status arsal_fixmap_create(int width, int height, const int* xy, size_t count, arsal_fixmap** out);
ARSAL_API void arsal_fixmap_free(arsal_fixmap* f);

/* Distribution metrics (CC, SIM, KL) use `gt`; location metrics (AUC, NSS, IG)
 * use `fix`. IG uses a centre prior as baseline. sAUC needs arsal_metric_sauc. */
ARSAL_API arsal_status arsal_metric_compute(arsal_metric metric, const arsal_grid* pred, const arsal_grid* gt,
                                            const arsal_fixmap* fix, double* out);
ARSAL_API arsal_status arsal_metric_sauc(const arsal_grid* pred, const arsal_fixmap* fix, const int* pool_xy,
                                         size_t pool_count, uint64_t seed, double* out);

/* ---- commands ---- */
ARSAL_API arsal_status arsal_args_create(arsal_args** out);
/* Flag name without leading dashes, e.g. "manifest". */
ARSAL_API arsal_status arsal_args_set(arsal_args* args, const char* name, const char* value);
ARSAL_API void arsal_args_free(arsal_args* args);
/* Runs a pipeline command; the summary text is stored in `args` afterwards. */
ARSAL_API arsal_status arsal_command_run(const char* command, arsal_args* args);
ARSAL_API const char* arsal_args_output(const arsal_args* args);

#ifdef __cplusplus
}
#endif

#endif /* ARSAL_H */
