#ifndef DRIFTSCOPE_H
#define DRIFTSCOPE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_IO = 3,
  DS_STATUS_FORMAT = 4,
  DS_STATUS_NOT_FOUND = 5,
  // The result is mathematically undefined, e.g. a zero vector or constant series.
  DS_STATUS_UNDEFINED = 6,
  DS_STATUS_LENGTH_MISMATCH = 7,
  DS_STATUS_BUFFER_TOO_SMALL = 8,
  DS_STATUS_INVALID_ARGUMENT = 9,
  DS_STATUS_PANIC = 10,
} DsStatus;

typedef enum DsMatrix {
  DS_MATRIX_TARGET = 0,
  DS_MATRIX_CONTEXT = 1,
} DsMatrix;

typedef enum DsClass {
  DS_CLASS_UNCORRELATED = 0,
  DS_CLASS_POSITIVE = 1,
  DS_CLASS_NEGATIVE = 2,
} DsClass;

// Opaque model handle.
typedef struct DsModel DsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *ds_last_error(void);

// Loads a binary model file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DsStatus ds_model_load(const char *path, struct DsModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`ds_model_load`] and not be used afterwards.
void ds_model_free(struct DsModel *model);

// Vector dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ds_model_dimension(const struct DsModel *model);

// Number of vocabulary terms, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ds_model_vocab_size(const struct DsModel *model);

// Copies the row of `term` in `matrix` into `out`, which must hold at
// least the model dimension.
//
// # Safety
// `model` must be a live handle, `term` NUL-terminated, and `out` valid for
// `out_len` floats.
enum DsStatus ds_model_vector(const struct DsModel *model,
                              const char *term,
                              enum DsMatrix matrix,
                              float *out,
                              size_t out_len);

// Cosine similarity of two terms' rows in the same matrix.
//
// # Safety
// `model` must be a live handle, `a` and `b` NUL-terminated, `out` valid.
enum DsStatus ds_model_similarity(const struct DsModel *model,
                                  const char *a,
                                  const char *b,
                                  enum DsMatrix matrix,
                                  double *out);

// Cosine similarity of two `len`-long vectors.
//
// # Safety
// `a` and `b` must be valid for `len` floats and `out` valid.
enum DsStatus ds_cosine_similarity(const float *a, const float *b, size_t len, double *out);

// Pearson correlation of two `len`-long series.
//
// # Safety
// `x` and `y` must be valid for `len` doubles and `out` valid.
enum DsStatus ds_pearson(const double *x, const double *y, size_t len, double *out);

// Band of a correlation coefficient: above `threshold` positive, below
// `-threshold` negative, otherwise uncorrelated.
enum DsClass ds_classify(double r, double threshold);

// TF-IDF weight `(1 + ln raw) * ln(docs / df)`. Returns
// `DS_STATUS_UNDEFINED` when the term is absent.
//
// # Safety
// `out` must be valid.
enum DsStatus ds_tfidf(uint64_t raw_count, uint64_t doc_freq, uint64_t doc_count, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTSCOPE_H */
