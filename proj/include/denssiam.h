/* DensSiam tracker: C API over the C++ core.
 *
 * All functions return ds_status (DS_OK on success); on failure
 * ds_last_error() yields a thread-local message. Objects are opaque
 * handles released with their *_close function. Strings returned through
 * char** out-parameters are heap-allocated; release with ds_string_free.
 */
#ifndef DENSSIAM_H
#define DENSSIAM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t ds_status;

enum {
  DS_OK = 0,
  DS_ERR_ARGUMENT = 1, /* bad argument / contract violation */
  DS_ERR_CONFIG = 2,   /* invalid configuration value */
  DS_ERR_IO = 3,       /* filesystem failure */
  DS_ERR_FORMAT = 4,   /* malformed file contents */
  DS_ERR_NUMERIC = 5,  /* NaN/Inf where finite values are required */
  DS_ERR_INTERNAL = 6
};

const char* ds_status_name(ds_status status);
const char* ds_version(void);

/* Thread-local message for the most recent failure in this thread. */
const char* ds_last_error(void);

void ds_string_free(char* s);

/* ---- configuration ---- */

/* Default config as a JSON document. */
ds_status ds_config_default(char** out_json);

/* Read a config file (strict: unknown keys rejected). */
ds_status ds_config_load(const char* path, char** out_json);

/* Apply one "dotted.path=value" override; the key must already exist. */
ds_status ds_config_override(const char* config_json, const char* dotted_key,
                             const char* value, char** out_json);

/* Worker threads for the math kernels (default 1; bit-deterministic for a
 * fixed setting). */
ds_status ds_set_threads(int32_t threads);

/* ---- model ---- */

typedef struct ds_model_s ds_model;

/* Fresh deterministic initialization from config + seed. */
ds_status ds_model_create(const char* config_json, uint64_t seed,
                          ds_model** out);
ds_status ds_model_open(const char* checkpoint_path, ds_model** out);
ds_status ds_model_save(ds_model* model, const char* path);
void ds_model_close(ds_model* model);

/* ---- sequences ---- */

typedef struct ds_sequence_s ds_sequence;

/* Directory of zero-padded numbered frames + groundtruth.txt. */
ds_status ds_sequence_open(const char* dir, ds_sequence** out);
/* Synthesize from the "synth" section of a config JSON document. */
ds_status ds_sequence_synth(const char* config_json, ds_sequence** out);
ds_status ds_sequence_save(const ds_sequence* seq, const char* dir);
int32_t ds_sequence_frames(const ds_sequence* seq);
ds_status ds_sequence_groundtruth(const ds_sequence* seq, int32_t frame,
                                  double box_xywh[4]);
void ds_sequence_close(ds_sequence* seq);

/* ---- tracking ---- */

typedef struct ds_tracker_s ds_tracker;

/* config_json may be NULL to use the model's embedded config. */
ds_status ds_tracker_create(ds_model* model, const char* config_json,
                            ds_tracker** out);
/* rgb is row-major 8-bit RGB, 3 bytes per pixel. */
ds_status ds_tracker_start(ds_tracker* tracker, const uint8_t* rgb,
                           int32_t width, int32_t height,
                           const double box_xywh[4]);
ds_status ds_tracker_update(ds_tracker* tracker, const uint8_t* rgb,
                            int32_t width, int32_t height, double box_out[4]);
void ds_tracker_close(ds_tracker* tracker);

/* ---- pipelines ---- */

/* Train per the config; writes checkpoints, config echo and metrics.jsonl
 * under out_dir. data_dir may be NULL (synthetic corpus) or a directory of
 * sequence subdirectories. */
ds_status ds_train_run(const char* config_json, const char* data_dir,
                       const char* out_dir);

/* Track a sequence directory; writes one "x,y,w,h" line per frame. */
ds_status ds_track_run(const char* checkpoint_path, const char* sequence_dir,
                       const char* out_path, const char* config_json,
                       double* fps_out);

/* Evaluate a dataset directory (subdirectory per sequence). tracker_kind is
 * "denssiam" or "oracle"; checkpoint_path may be NULL for "oracle". Writes
 * report.json and report.csv under out_dir. */
ds_status ds_eval_run(const char* checkpoint_path, const char* dataset_dir,
                      const char* out_dir, const char* tracker_kind,
                      const char* config_json);

/* Verification suites: mode is "shapes", "grads", "props" or "all". Prints
 * one line per check to stdout; *failures_out receives the failure count. */
ds_status ds_verify_run(const char* mode, int32_t* failures_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DENSSIAM_H */
