#ifndef MFLD_MFLD_H
#define MFLD_MFLD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MFLD_API __declspec(dllexport)
#else
#define MFLD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mfld_status {
  MFLD_OK = 0,
  MFLD_ERR_IO = 1,
  MFLD_ERR_BAD_MAGIC = 2,
  MFLD_ERR_TRUNCATED = 3,
  MFLD_ERR_MANIFEST_MISMATCH = 4,
  MFLD_ERR_INVALID_STORE = 5,
  MFLD_ERR_UNKNOWN_KEY = 6,
  MFLD_ERR_UNKNOWN_LAYER = 7,
  MFLD_ERR_TOO_FEW_MANIFOLDS = 8,
  MFLD_ERR_INVALID_ARGUMENT = 9,
  MFLD_ERR_NOT_BRACKETABLE = 10,
  MFLD_ERR_NO_RECORDS = 11,
  MFLD_ERR_NUMERICAL = 12,
  MFLD_ERR_INTERNAL = 99
} mfld_status;

typedef struct mfld_store mfld_store;
typedef struct mfld_report mfld_report;

MFLD_API const char* mfld_version(void);
MFLD_API const char* mfld_status_name(mfld_status status);
/* Message of the last failed call on this thread; "" if none. */
MFLD_API const char* mfld_last_error(void);
/* Frees strings returned through char** out-parameters. */
MFLD_API void mfld_string_free(char* s);

/* Activation stores */
MFLD_API mfld_status mfld_store_read(const char* dir, mfld_store** out);
MFLD_API mfld_status mfld_store_write(const mfld_store* store, const char* dir);
MFLD_API mfld_status mfld_store_from_csv(const char* csv_path, const char* layer, const char* label_key,
                                         mfld_store** out);
MFLD_API void mfld_store_free(mfld_store* store);
MFLD_API mfld_status mfld_store_layer_count(const mfld_store* store, size_t* out);
/* The name stays valid until the store is freed. */
MFLD_API mfld_status mfld_store_layer_name(const mfld_store* store, size_t index, const char** out);
MFLD_API mfld_status mfld_store_layer_shape(const mfld_store* store, size_t index, uint64_t* examples,
                                            uint64_t* timesteps, uint64_t* features);
MFLD_API mfld_status mfld_store_example_count(const mfld_store* store, size_t* out);

/* Synthetic manifold families */
typedef struct mfld_synth_spec {
  const char* family; /* "ball", "gaussian-cloud" or "correlated-centers" */
  size_t n_manifolds;
  int64_t points;   /* M */
  int64_t features; /* N */
  int64_t dim;      /* D, ball family */
  double radius;
  double center_corr;
  uint64_t seed;
  int solid;
} mfld_synth_spec;

MFLD_API void mfld_synth_spec_init(mfld_synth_spec* spec);
MFLD_API mfld_status mfld_synth(const mfld_synth_spec* spec, const char* layer, const char* label_key,
                                int single_precision, mfld_store** out);

/* Analysis. config_json holds the analysis configuration; when store is NULL
   the store is read from the config's "input" path. threads = 0 picks
   MFLD_THREADS or the hardware concurrency. */
MFLD_API mfld_status mfld_analyze(const mfld_store* store, const char* config_json, size_t threads,
                                  mfld_report** out);
MFLD_API mfld_status mfld_report_record_count(const mfld_report* report, size_t* out);
MFLD_API mfld_status mfld_report_failed_count(const mfld_report* report, size_t* out);
/* 0 when every record succeeded, 2 otherwise. */
MFLD_API int mfld_report_exit_code(const mfld_report* report);
/* format: "csv", "json" or "table". */
MFLD_API mfld_status mfld_report_render(const mfld_report* report, const char* format, char** out);
MFLD_API mfld_status mfld_report_write(const mfld_report* report, const char* format, const char* path);
MFLD_API mfld_status mfld_report_read(const char* json_path, mfld_report** out);
MFLD_API void mfld_report_free(mfld_report* report);

/* Closed-form helpers */
MFLD_API mfld_status mfld_ball_capacity(double radius, double dim, double* out);
MFLD_API mfld_status mfld_participation_ratio(const double* eigenvalues, size_t n, double* out);
MFLD_API mfld_status mfld_explained_variance_dim(const double* eigenvalues, size_t n, double threshold,
                                                 size_t* out);

#ifdef __cplusplus
}
#endif

#endif
