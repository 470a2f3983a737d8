/*
 * tempmask C API.
 *
 * Every function returning tm_status reports failures through the status code
 * and a thread-local message readable with tm_last_error(). Strings returned
 * through `char**` out-parameters are heap allocated by the library and must
 * be released with tm_free_string(). Handles are opaque and released with
 * their matching *_destroy function; destroy functions accept NULL.
 */
#ifndef TEMPMASK_TEMPMASK_H
#define TEMPMASK_TEMPMASK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TEMPMASK_BUILDING_LIBRARY)
#    define TM_API __declspec(dllexport)
#  else
#    define TM_API __declspec(dllimport)
#  endif
#else
#  define TM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tm_status {
  TM_OK = 0,
  TM_ERR_PARAMETER = 1,
  TM_ERR_PARSE = 2,
  TM_ERR_VALIDATION = 3,
  TM_ERR_SAMPLING = 4,
  TM_ERR_ASSOCIATION = 5,
  TM_ERR_EVALUATION = 6,
  TM_ERR_PROTOCOL = 7,
  TM_ERR_TIMEOUT = 8,
  TM_ERR_IO = 9,
  TM_ERR_CONFIG = 10,
  TM_ERR_INTERNAL = 11
} tm_status;

TM_API const char* tm_version(void);
TM_API const char* tm_status_string(tm_status status);
/* Message of the last failed call on this thread ("" if none). */
TM_API const char* tm_last_error(void);
TM_API void tm_free_string(char* str);

/* ---- Mask space E(l, k0, k1) ---------------------------------------- */

typedef struct tm_mask_space tm_mask_space;

/* |E(l, k0, k1)| as a decimal string (exact, arbitrary precision). */
TM_API tm_status tm_count_masks(int64_t l, int64_t k0, int64_t k1, char** out_decimal);

/* Builds the completion-count table used for uniform sampling. */
TM_API tm_status tm_mask_space_create(int64_t l, int64_t k0, int64_t k1, tm_mask_space** out);
TM_API void tm_mask_space_destroy(tm_mask_space* space);
TM_API tm_status tm_mask_space_total(const tm_mask_space* space, char** out_decimal);
/* Completions of the prefix state after `position` symbols whose last symbol
 * is `last_symbol` with a current run of `run_length`. */
TM_API tm_status tm_mask_space_completions(const tm_mask_space* space, int64_t position,
                                           int last_symbol, int64_t run_length,
                                           char** out_decimal);
/* Writes one uniform member of E into out_bits[0..length), length must be l. */
TM_API tm_status tm_mask_space_sample(const tm_mask_space* space, uint64_t seed,
                                      uint8_t* out_bits, size_t length);
/* q masks of p columns each, as JSON:
 *   {"class_names": [...], "masks": [{"columns": {"<class>": "0011..."}}, ...]} */
TM_API tm_status tm_mask_space_sample_multiclass(const tm_mask_space* space,
                                                 const char* const* class_names,
                                                 size_t class_count, size_t q, uint64_t seed,
                                                 char** out_json);

TM_API tm_status tm_is_member(const uint8_t* bits, size_t length, int64_t k0, int64_t k1,
                              int* out_member);

/* Canonical mask CSV from per-class bit strings ("0011100"). */
TM_API tm_status tm_mask_csv_from_columns(const char* const* columns,
                                          const char* const* class_names, size_t class_count,
                                          char** out_csv);

/* ---- Metrics ----------------------------------------------------------- */

TM_API tm_status tm_usm(double ate_rmse, double tracking_rate, double lambda, double* out_usm);
TM_API tm_status tm_default_lambda(double avg_dataset_ate, double* out_lambda);
TM_API tm_status tm_tracking_rate(uint64_t tracked_frames, uint64_t total_frames,
                                  double* out_rate);

typedef struct tm_trajectory tm_trajectory;

typedef enum tm_alignment {
  TM_ALIGN_NONE = 0,
  TM_ALIGN_RIGID = 1,
  TM_ALIGN_RIGID_WITH_SCALE = 2
} tm_alignment;

/* TUM text format: "timestamp tx ty tz qx qy qz qw" per line. */
TM_API tm_status tm_trajectory_parse(const char* text, tm_trajectory** out);
TM_API tm_status tm_trajectory_load(const char* path, tm_trajectory** out);
TM_API size_t tm_trajectory_size(const tm_trajectory* trajectory);
TM_API void tm_trajectory_destroy(tm_trajectory* trajectory);

TM_API tm_status tm_ate_rmse(const tm_trajectory* reference, const tm_trajectory* estimate,
                             tm_alignment alignment, double max_time_diff, double* out_rmse,
                             size_t* out_pairs);

/* ---- Aggregation ------------------------------------------------------- */

/* Request:
 *   {"class_names": [...],            optional, default ["object"]
 *    "samples": [{"columns": {"<class>": "0101..."} | "mask_csv": "<path>",
 *                 "score": <usm>}, ...],
 *    "sigma_a": <num>, "sigma_r": <num>, "threshold": <num, optional>}
 * Response:
 *   {"raw": {"<class>": [...]}, "normalized": {"<class>": [...]},
 *    "degenerate": <bool>, "mask": {"<class>": "0101..."}  (with threshold)} */
TM_API tm_status tm_aggregate_json(const char* request_json, char** out_json);

/* ---- Synthetic SLAM evaluator ----------------------------------------- */

/* profile: consensus_inversion | excessive_masking | mixed | static */
TM_API tm_status tm_generate_scene_json(const char* profile, size_t length, size_t classes,
                                        uint64_t seed, char** out_json);
/* Reads a scene JSON and a mask CSV, writes the evaluator result JSON. Any of
 * the out pointers may be NULL. */
TM_API tm_status tm_simulate_files(const char* scene_path, const char* mask_path,
                                   const char* out_path, uint64_t seed, double lambda,
                                   double* out_ate_rmse, double* out_tracking_rate,
                                   double* out_usm);
/* Oracle mask of a co-directional scene, as canonical CSV. */
TM_API tm_status tm_optimal_mask_csv(const char* scene_path, char** out_csv);

/* ---- Annotation pipeline ---------------------------------------------- */

/* Validates a config and returns it with every default made explicit. */
TM_API tm_status tm_config_normalize(const char* config_json, char** out_json);
/* Runs the full pipeline, writes the configured mask CSV and report JSON and
 * returns the report. */
TM_API tm_status tm_annotate(const char* config_json, char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* TEMPMASK_TEMPMASK_H */
