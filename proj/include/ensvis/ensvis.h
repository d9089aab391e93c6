//------------------------------------------------------------------------------
//
//   Copyright 2026 The ensvis Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#ifndef ENSVIS_ENSVIS_H
#define ENSVIS_ENSVIS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(ENSVIS_BUILDING_LIBRARY)
#define ENSVIS_API __declspec(dllexport)
#else
#define ENSVIS_API __declspec(dllimport)
#endif
#else
#define ENSVIS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are stable. */
typedef enum ensvis_status
{
  ENSVIS_OK                          = 0,
  ENSVIS_ERR_INVALID_ARGUMENT        = 1,
  ENSVIS_ERR_IO                      = 2,
  ENSVIS_ERR_FORMAT                  = 3,
  ENSVIS_ERR_TRUNCATED               = 4,
  ENSVIS_ERR_CORRUPT_INDEX           = 5,
  ENSVIS_ERR_DIMENSION               = 6,
  ENSVIS_ERR_NUMERICAL               = 7,
  ENSVIS_ERR_DEGENERATE_LABELS       = 8,
  ENSVIS_ERR_INCOMPLETE_INPUT        = 9,
  ENSVIS_ERR_REGISTRY                = 10,
  ENSVIS_ERR_CONSISTENCY             = 11,
  ENSVIS_ERR_INSUFFICIENT_RESOLUTION = 12,
  ENSVIS_ERR_EMPTY_SAMPLE            = 13,
  ENSVIS_ERR_MALFORMED_CORPUS        = 14,
  ENSVIS_ERR_CORRUPT_RECORD          = 15,
  ENSVIS_ERR_DEGENERATE_ENSEMBLE     = 16,
  ENSVIS_ERR_INTERNAL                = 17
} ensvis_status;

typedef enum ensvis_split
{
  ENSVIS_SPLIT_TRAIN = 0,
  ENSVIS_SPLIT_TEST  = 1
} ensvis_split;

typedef enum ensvis_tie_policy
{
  ENSVIS_TIE_LOWEST_INDEX       = 0,
  ENSVIS_TIE_MAX_CONFIDENCE_SUM = 1
} ensvis_tie_policy;

ENSVIS_API const char *ensvis_version(void);
ENSVIS_API const char *ensvis_status_name(ensvis_status status);

/* Message of the last failing call on this thread; "" after a success. */
ENSVIS_API const char *ensvis_last_error(void);

/* Strings returned through char** out-parameters are released with this. */
ENSVIS_API void ensvis_string_free(char *s);

/* Gaussian mixture codebook. */
typedef struct ensvis_gmm ensvis_gmm;

ENSVIS_API ensvis_status ensvis_gmm_load(const char *path, ensvis_gmm **out);
ENSVIS_API void          ensvis_gmm_free(ensvis_gmm *gmm);
ENSVIS_API ensvis_status ensvis_gmm_shape(const ensvis_gmm *gmm, size_t *components, size_t *dim);

/* Sum of per-row log densities of a rows x cols row-major matrix. */
ENSVIS_API ensvis_status ensvis_gmm_log_likelihood(const ensvis_gmm *gmm, const double *data, size_t rows,
                                                   size_t cols, double *out);

/* Normalized Fisher vector of a descriptor set; out_len must be 2*K*D. */
ENSVIS_API ensvis_status ensvis_fisher_encode(const ensvis_gmm *gmm, const double *descriptors, size_t rows,
                                              size_t cols, double *out, size_t out_len);

/* Feature files. */
typedef struct ensvis_feature_info
{
  char     model[256];
  uint32_t layer;
  uint32_t dim;
  uint64_t count;
} ensvis_feature_info;

/* Reads and fully validates a feature file. */
ENSVIS_API ensvis_status ensvis_features_info(const char *path, ensvis_feature_info *out);

/* Scans dir for feature files. *ok is 1 when no violation was found and
   *report receives the human-readable listing. */
ENSVIS_API ensvis_status ensvis_validate_registry(const char *dir, int *ok, char **report);

/* votes[members], confidences[members * classes] row-major (may be NULL under
   ENSVIS_TIE_LOWEST_INDEX). Writes the winning class index. */
ENSVIS_API ensvis_status ensvis_majority_vote(const size_t *votes, const double *confidences, size_t members,
                                              size_t classes, ensvis_tie_policy policy, size_t *out);

/* Trained ensemble. */
typedef struct ensvis_ensemble ensvis_ensemble;

ENSVIS_API ensvis_status ensvis_ensemble_load(const char *dir, ensvis_ensemble **out);
ENSVIS_API void          ensvis_ensemble_free(ensvis_ensemble *ens);
ENSVIS_API size_t        ensvis_ensemble_members(const ensvis_ensemble *ens);
ENSVIS_API const char   *ensvis_ensemble_member_name(const ensvis_ensemble *ens, size_t member);
ENSVIS_API size_t        ensvis_ensemble_member_dim(const ensvis_ensemble *ens, size_t member);

/* inputs[m] holds dims[m] raw features for member m. */
ENSVIS_API ensvis_status ensvis_ensemble_predict(const ensvis_ensemble *ens, const double *const *inputs,
                                                 const size_t *dims, uint32_t *label);

/* Pipeline. String fields are borrowed for the duration of each call. */
typedef struct ensvis_run_config
{
  const char *data_dir;
  const char *feat_dir;
  const char *work_dir;
  const char *ensemble_config; /* NULL: SIFT Fisher vectors only */
  size_t      gmm_components;
  size_t      subset;
  uint64_t    seed;
  int         upscale;
  unsigned    threads;
  int         em_max_iter;
  size_t      gmm_max_samples;
  int         svm_epochs;
  int         resume;
} ensvis_run_config;

ENSVIS_API void ensvis_run_config_init(ensvis_run_config *cfg);

ENSVIS_API ensvis_status ensvis_extract_sift(const ensvis_run_config *cfg, ensvis_split split, size_t *images,
                                             size_t *descriptors, size_t *dense);
ENSVIS_API ensvis_status ensvis_train_gmm(const ensvis_run_config *cfg, int *iterations, double *final_mean_ll);
ENSVIS_API ensvis_status ensvis_encode_fv(const ensvis_run_config *cfg, ensvis_split split, size_t *count);

/* stream NULL or "" selects every configured stream. */
ENSVIS_API ensvis_status ensvis_fit_pca(const ensvis_run_config *cfg, const char *stream);
ENSVIS_API ensvis_status ensvis_train_svm(const ensvis_run_config *cfg, const char *stream);
ENSVIS_API ensvis_status ensvis_train_ensemble(const ensvis_run_config *cfg);

/* report may be NULL. */
ENSVIS_API ensvis_status ensvis_evaluate(const ensvis_run_config *cfg, char **report);
ENSVIS_API ensvis_status ensvis_report(const ensvis_run_config *cfg, char **report);
ENSVIS_API ensvis_status ensvis_run_pipeline(const ensvis_run_config *cfg, char **report);

#ifdef __cplusplus
}
#endif

#endif
