#ifndef CERTIPROB_H
#define CERTIPROB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CP_API __declspec(dllexport)
#else
#define CP_API __attribute__((visibility("default")))
#endif

typedef enum cp_status {
  CP_OK = 0,
  CP_ERR_INVALID_ARGUMENT = 1,
  CP_ERR_SHAPE = 2,
  CP_ERR_IO = 3,
  CP_ERR_FORMAT = 4,
  CP_ERR_CONFIG = 5,
  CP_ERR_NUMERIC = 6,
  CP_ERR_STATE = 7,
  CP_ERR_INTERNAL = 8
} cp_status;

typedef struct cp_model cp_model;
typedef struct cp_dataset cp_dataset;

/* Message of the last failed call on this thread; "" after a success. */
CP_API const char* cp_last_error(void);
CP_API const char* cp_version(void);
CP_API void cp_string_free(char* s);

/* Exact binomial tails for X ~ Bin(w, p0). */
CP_API cp_status cp_binom_tail_right(uint64_t v, uint64_t w, double p0, double* out);
CP_API cp_status cp_binom_tail_left(uint64_t v, uint64_t w, double p0, double* out);

CP_API cp_status cp_dataset_load_idx(const char* images_path, const char* labels_path, cp_dataset** out);
CP_API cp_status cp_dataset_blobs(size_t n_per_class, const double* centers_xy, size_t center_count, double spread,
                                  uint64_t seed, cp_dataset** out);
CP_API size_t cp_dataset_size(const cp_dataset* ds);
/* Elements per sample (product of the sample shape). */
CP_API size_t cp_dataset_sample_numel(const cp_dataset* ds);
CP_API void cp_dataset_free(cp_dataset* ds);

CP_API cp_status cp_model_load(const char* checkpoint_path, cp_model** out);
CP_API cp_status cp_model_save(const cp_model* model, const char* checkpoint_path);
CP_API size_t cp_model_class_count(const cp_model* model);
/* Spec as JSON; release with cp_string_free. */
CP_API cp_status cp_model_spec_json(const cp_model* model, char** out);
/* Classifies `count` samples laid out contiguously in the model's input shape. */
CP_API cp_status cp_model_predict(const cp_model* model, const double* inputs, size_t count, int* classes);
CP_API void cp_model_free(cp_model* model);

/* Run options for the experiment commands. Zero-initialize, then set fields.
   Strings may be NULL. has_seed / workers == 0 leave the config value. */
typedef struct cp_run_options {
  const char* config_path;
  const char* out_dir;
  const char* checkpoint;
  const char* data_root;
  int has_seed;
  uint64_t seed;
  size_t workers;
} cp_run_options;

CP_API cp_status cp_run_train(const cp_run_options* opts);
CP_API cp_status cp_run_certify(const cp_run_options* opts);
CP_API cp_status cp_run_attack(const cp_run_options* opts);
CP_API cp_status cp_run_eval(const cp_run_options* opts);
/* Report text; release with cp_string_free. opts->out_dir names the run. */
CP_API cp_status cp_run_report(const cp_run_options* opts, char** text);
/* Reference text for every config key with its default. */
CP_API cp_status cp_config_reference(char** text);

#ifdef __cplusplus
}
#endif

#endif
