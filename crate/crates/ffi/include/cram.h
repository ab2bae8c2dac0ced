#ifndef CRAM_H
#define CRAM_H

#include <stddef.h>
#include <stdint.h>

#define CRAM_KERNEL_GAUSSIAN 0

#define CRAM_KERNEL_EPANECHNIKOV 1

typedef enum CramStatus {
  CRAM_STATUS_OK = 0,
  CRAM_STATUS_NULL_POINTER = 1,
  CRAM_STATUS_INPUT = 2,
  CRAM_STATUS_CONTRACT = 3,
  CRAM_STATUS_NUMERIC = 4,
  CRAM_STATUS_IO = 5,
  CRAM_STATUS_PANIC = 6,
} CramStatus;

/**
 * Opaque dataset handle.
 */
typedef struct CramDataset CramDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct CramModel CramModel;

/**
 * Fitting options. `kernel` is one of the `CRAM_KERNEL_*` constants; a
 * nonpositive `bandwidth` selects the rule-of-thumb bandwidth for each
 * covariate.
 */
typedef struct CramFitOptions {
  uint32_t kernel;
  double bandwidth;
  double tol;
  size_t max_sweeps;
  double rank_tol;
} CramFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cram_last_error(void);

/**
 * Default options: gaussian kernel, rule-of-thumb bandwidth, tol 1e-6,
 * 500 sweeps, rank tolerance 1e-6.
 */
struct CramFitOptions cram_fit_options_default(void);

/**
 * Copies `x` (n x p) and `y` (n x q) into a new raw dataset.
 *
 * # Safety
 * `x` and `y` must point to `n*p` and `n*q` doubles; `out` must be writable.
 */
enum CramStatus cram_dataset_new(const double *x,
                                 size_t n,
                                 size_t p,
                                 const double *y,
                                 size_t q,
                                 struct CramDataset **out);

/**
 * Writes a standardized copy of `data` to `out`.
 *
 * # Safety
 * `data` must be a live dataset handle; `out` must be writable.
 */
enum CramStatus cram_dataset_standardize(const struct CramDataset *data, struct CramDataset **out);

/**
 * # Safety
 * `data` must be NULL or a handle not yet freed.
 */
void cram_dataset_free(struct CramDataset *data);

/**
 * Fits the joint penalty with weight `lambda` on a standardized dataset.
 * `options` may be NULL for defaults.
 *
 * # Safety
 * `data` must be a live dataset handle; `out` must be writable.
 */
enum CramStatus cram_fit_joint(const struct CramDataset *data,
                               double lambda,
                               const struct CramFitOptions *options,
                               struct CramModel **out);

/**
 * Fits the per-component penalty; `lambdas` holds one weight per covariate.
 *
 * # Safety
 * `lambdas` must point to `p` doubles; otherwise as [`cram_fit_joint`].
 */
enum CramStatus cram_fit_per_component(const struct CramDataset *data,
                                       const double *lambdas,
                                       size_t p,
                                       const struct CramFitOptions *options,
                                       struct CramModel **out);

/**
 * Predicts responses on the original scale for `n` raw covariate rows;
 * `out` receives `n*q` doubles.
 *
 * # Safety
 * `x` must point to `n*p` doubles and `out` to room for `n*q`.
 */
enum CramStatus cram_model_predict(const struct CramModel *model,
                                   const double *x,
                                   size_t n,
                                   size_t p,
                                   double *out);

/**
 * # Safety
 * `model` must be live; `p` and `q` writable.
 */
enum CramStatus cram_model_dims(const struct CramModel *model, size_t *p, size_t *q);

/**
 * Rank of the fit: joint rank for the joint penalty, largest component
 * rank otherwise.
 *
 * # Safety
 * `model` must be live; `rank` writable.
 */
enum CramStatus cram_model_rank(const struct CramModel *model, size_t *rank);

/**
 * Numerical rank of component `j` (0-based).
 *
 * # Safety
 * `model` must be live; `rank` writable.
 */
enum CramStatus cram_model_component_rank(const struct CramModel *model, size_t j, size_t *rank);

/**
 * # Safety
 * `model` must be live; `path` a NUL-terminated string.
 */
enum CramStatus cram_model_save(const struct CramModel *model, const char *path);

/**
 * # Safety
 * `path` a NUL-terminated string; `out` writable.
 */
enum CramStatus cram_model_load(const char *path, struct CramModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void cram_model_free(struct CramModel *model);

/**
 * Soft-thresholds the singular values of the n x q matrix `p` at level
 * `lambda` (normalized scale) and writes the n x q result to `out`.
 *
 * # Safety
 * `p` must point to `n*q` doubles and `out` to room for `n*q`.
 */
enum CramStatus cram_soft_threshold(const double *p,
                                    size_t n,
                                    size_t q,
                                    double lambda,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRAM_H */
