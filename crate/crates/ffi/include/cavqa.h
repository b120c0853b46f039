#ifndef CAVQA_H
#define CAVQA_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CavqaStatus {
  CAVQA_STATUS_OK = 0,
  CAVQA_STATUS_NULL_POINTER = 1,
  CAVQA_STATUS_INVALID_ARGUMENT = 2,
  CAVQA_STATUS_IO = 3,
  CAVQA_STATUS_FORMAT = 4,
  CAVQA_STATUS_DIVERGENCE = 5,
  CAVQA_STATUS_PANIC = 6,
} CavqaStatus;

/**
 * Opaque dataset handle.
 */
typedef struct CavqaDataset CavqaDataset;

/**
 * Opaque model handle. Use it only from the thread that created it.
 */
typedef struct CavqaModel CavqaModel;

typedef struct CavqaTrainOptions {
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double lambda;
  uint64_t seed;
  bool cross_attention;
  bool infomax;
} CavqaTrainOptions;

typedef struct CavqaMetrics {
  double overall_accuracy;
  double average_accuracy;
  size_t n_samples;
} CavqaMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cavqa_version(void);

/**
 * Message for the most recent failure on this thread; empty after a
 * success. Valid until the next call into the library on this thread.
 */
const char *cavqa_last_error(void);

/**
 * Generates a dataset from a named preset (`lr_like` or `hr_like`).
 * `n_samples == 0` keeps the preset's size.
 *
 * # Safety
 * `preset` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CavqaStatus cavqa_dataset_generate(const char *preset,
                                        size_t n_samples,
                                        uint64_t seed,
                                        struct CavqaDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CavqaStatus cavqa_dataset_load(const char *path, struct CavqaDataset **out);

/**
 * # Safety
 * `dataset` must come from this library; `path` must be NUL-terminated.
 */
enum CavqaStatus cavqa_dataset_save(const struct CavqaDataset *dataset, const char *path);

/**
 * Number of samples, optionally restricted to one split (`split` may be null).
 *
 * # Safety
 * `dataset` must come from this library and `out` must be valid.
 */
enum CavqaStatus cavqa_dataset_len(const struct CavqaDataset *dataset,
                                   const char *split,
                                   size_t *out);

/**
 * # Safety
 * `dataset` must be null or come from this library, and is invalid afterwards.
 */
void cavqa_dataset_free(struct CavqaDataset *dataset);

/**
 * Fills `out` with a named training preset (`lr_like`, `hr_like` or `desk`).
 *
 * # Safety
 * `preset` must be NUL-terminated and `out` valid.
 */
enum CavqaStatus cavqa_train_options_preset(const char *preset, struct CavqaTrainOptions *out);

/**
 * Trains on the dataset's first split.
 *
 * # Safety
 * Pointers must be valid; `dataset` must come from this library.
 */
enum CavqaStatus cavqa_model_train(const struct CavqaDataset *dataset,
                                   const struct CavqaTrainOptions *options,
                                   struct CavqaModel **out);

/**
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
enum CavqaStatus cavqa_model_load(const char *path, struct CavqaModel **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum CavqaStatus cavqa_model_save(const struct CavqaModel *model, const char *path);

/**
 * # Safety
 * Pointers must be valid; handles must come from this library.
 */
enum CavqaStatus cavqa_model_evaluate(const struct CavqaModel *model,
                                      const struct CavqaDataset *dataset,
                                      const char *split,
                                      struct CavqaMetrics *out);

/**
 * Predicted answer index for sample `index` of the dataset.
 *
 * # Safety
 * Pointers must be valid; handles must come from this library.
 */
enum CavqaStatus cavqa_model_predict(const struct CavqaModel *model,
                                     const struct CavqaDataset *dataset,
                                     size_t index,
                                     size_t *out);

/**
 * # Safety
 * `model` must be null or come from this library, and is invalid afterwards.
 */
void cavqa_model_free(struct CavqaModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVQA_H */
