/* udehaze: underwater image dehazing library.
 *
 * C interface over the C++ core: opaque handles, integer status codes, and
 * JSON strings for structured results. Every function that can fail returns
 * a udh_status; on failure udh_last_error() gives a thread-local message.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with udh_string_free().
 */
#ifndef UDEHAZE_H
#define UDEHAZE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  UDH_OK = 0,
  UDH_ERR_INVALID_ARGUMENT = 1,
  UDH_ERR_IO = 2,
  UDH_ERR_RUNTIME = 3
} udh_status;

typedef struct udh_image udh_image;  /* RGB image, values in [0,1] */
typedef struct udh_model udh_model;  /* loaded model parameters */

const char* udh_version(void);
const char* udh_last_error(void);
void udh_string_free(char* s);

/* Caps worker parallelism (same effect as the UDEHAZE_THREADS variable). */
udh_status udh_set_threads(int n);

/* ---- images (PPM P6 / 8-bit PNG) ---- */
udh_status udh_image_load(const char* path, udh_image** out);
udh_status udh_image_create(int height, int width, const double* rgb_interleaved,
                            udh_image** out);
udh_status udh_image_save(const udh_image* img, const char* path);
udh_status udh_image_resize(const udh_image* img, int height, int width,
                            udh_image** out);
int udh_image_height(const udh_image* img);
int udh_image_width(const udh_image* img);
/* out must hold height*width*3 doubles (interleaved RGB). */
udh_status udh_image_pixels(const udh_image* img, double* out, size_t out_len);
void udh_image_free(udh_image* img);

/* ---- classical atmospheric-light priors ---- */
/* JSON with keys a_perc, a_dcp, a_blur, a_cl (three doubles each). */
udh_status udh_inspect_image(const udh_image* img, char** json_out);
udh_status udh_inspect_path(const char* path, char** json_out);

/* ---- models ---- */
udh_status udh_model_create(int base_channels, uint64_t seed, udh_model** out);
udh_status udh_model_load(const char* checkpoint_path, udh_model** out);
udh_status udh_model_save(const udh_model* model, const char* checkpoint_path);
/* JSON with base_channels, param_count, beta. */
udh_status udh_model_info(const udh_model* model, char** json_out);
void udh_model_free(udh_model* model);

udh_status udh_model_enhance(const udh_model* model, const udh_image* input,
                             udh_image** out);
/* options_json (nullable): {"dump_intermediates": bool, "resize": bool}.
 * json_out (nullable) receives the per-image metadata. */
udh_status udh_model_enhance_path(const udh_model* model, const char* input_path,
                                  const char* output_path, const char* options_json,
                                  char** json_out);
/* Enhances every image in a directory; json_out gets a metadata array. */
udh_status udh_model_enhance_dir(const udh_model* model, const char* input_dir,
                                 const char* out_dir, const char* options_json,
                                 char** json_out);

/* ---- workflows ----
 * Each takes a JSON configuration (documented in the README) and returns a
 * JSON report. */
udh_status udh_synthesize(const char* config_json, char** report_json);
udh_status udh_train(const char* config_json, char** report_json);
udh_status udh_evaluate(const char* config_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* UDEHAZE_H */
