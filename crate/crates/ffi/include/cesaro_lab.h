#ifndef CESARO_LAB_H
#define CESARO_LAB_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CesaroNorm {
  CESARO_NORM_L1 = 0,
  CESARO_NORM_L2 = 1,
  CESARO_NORM_SUP = 2,
} CesaroNorm;

/**
 * Which operator [`cesaro_pc_eval`] applies.
 */
typedef enum CesaroOperator {
  CESARO_OPERATOR_PARTIAL_SUM = 0,
  CESARO_OPERATOR_FEJER_MEAN = 1,
  CESARO_OPERATOR_VALLEE_POUSSIN_MEAN = 2,
  CESARO_OPERATOR_SV_DIFFERENCE = 3,
  CESARO_OPERATOR_MODIFIED_HILBERT = 4,
} CesaroOperator;

typedef enum CesaroStatus {
  CESARO_STATUS_OK = 0,
  CESARO_STATUS_NULL_POINTER = 1,
  CESARO_STATUS_INVALID_ARGUMENT = 2,
  CESARO_STATUS_HYPOTHESIS = 3,
  CESARO_STATUS_SINGULAR = 4,
  CESARO_STATUS_BUFFER_TOO_SMALL = 5,
  CESARO_STATUS_INTERNAL = 6,
} CesaroStatus;

/**
 * Calderon-Zygmund decomposition at a fixed height.
 */
typedef struct CesaroCz CesaroCz;

/**
 * Piecewise-constant function on a dyadic grid.
 */
typedef struct CesaroPc CesaroPc;

/**
 * Strictly increasing index sequence.
 */
typedef struct CesaroSeq CesaroSeq;

typedef struct CesaroComplex {
  double re;
  double im;
} CesaroComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated)
 * and returns the buffer size it needs, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t cesaro_last_error_message(char *buf, size_t len);

/**
 * Builds a function with `len = 2^level` cell values. `im` may be null
 * for a real function.
 *
 * # Safety
 * `re` (and `im` if non-null) must be valid for `len` reads; `out` must be
 * valid for one write.
 */
enum CesaroStatus cesaro_pc_new(uint32_t level,
                                const double *re,
                                const double *im,
                                size_t len,
                                struct CesaroPc **out);

/**
 * # Safety
 * `f` must be null or a handle from `cesaro_pc_new` not yet freed.
 */
void cesaro_pc_free(struct CesaroPc *f);

/**
 * # Safety
 * `f` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_pc_level(const struct CesaroPc *f, uint32_t *out);

/**
 * # Safety
 * `f` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_pc_norm(const struct CesaroPc *f, enum CesaroNorm norm, double *out);

/**
 * Fourier coefficient at frequency `k`, normalized by `1 / (2 pi)`.
 *
 * # Safety
 * `f` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_pc_coefficient(const struct CesaroPc *f,
                                        int64_t k,
                                        struct CesaroComplex *out);

/**
 * Applies `op` of order `n` to `f` at the point `y`.
 *
 * # Safety
 * `f` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_pc_eval(const struct CesaroPc *f,
                                 enum CesaroOperator op,
                                 uint64_t n,
                                 double y,
                                 struct CesaroComplex *out);

/**
 * Fejer kernel `K_n(u)`.
 */
double cesaro_fejer_kernel(uint64_t n, double u);

/**
 * Real part of the Dirichlet kernel `D_n(u)`.
 */
double cesaro_dirichlet_kernel(uint64_t n, double u);

/**
 * # Safety
 * `f` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_cz_new(const struct CesaroPc *f, double lambda, struct CesaroCz **out);

/**
 * # Safety
 * `d` must be null or a handle from `cesaro_cz_new` not yet freed.
 */
void cesaro_cz_free(struct CesaroCz *d);

/**
 * # Safety
 * `d` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_cz_interval_count(const struct CesaroCz *d, size_t *out);

/**
 * The `i`-th selected interval, ordered by left endpoint, as
 * `(level, index)`.
 *
 * # Safety
 * `d` must be a live handle; `level` and `index` valid for one write each.
 */
enum CesaroStatus cesaro_cz_interval(const struct CesaroCz *d,
                                     size_t i,
                                     uint32_t *level,
                                     uint64_t *index);

/**
 * Total length of the selected intervals.
 *
 * # Safety
 * `d` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_cz_measure(const struct CesaroCz *d, double *out);

/**
 * Good part as a new function handle.
 *
 * # Safety
 * `d` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_cz_good_part(const struct CesaroCz *d, struct CesaroPc **out);

/**
 * `n_1 = n1`, `n_{j+1} = ceil(q n_j)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum CesaroStatus cesaro_seq_lacunary(double q, uint64_t n1, size_t count, struct CesaroSeq **out);

/**
 * `n_1 = n1`, `n_{j+1} = ceil((1 + j^{-delta}) n_j)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum CesaroStatus cesaro_seq_delta_growth(double delta,
                                          uint64_t n1,
                                          size_t count,
                                          struct CesaroSeq **out);

/**
 * # Safety
 * `s` must be null or a sequence handle not yet freed.
 */
void cesaro_seq_free(struct CesaroSeq *s);

/**
 * # Safety
 * `s` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_seq_len(const struct CesaroSeq *s, size_t *out);

/**
 * Term `n_j`, 1-based. Fails if it does not fit in 64 bits.
 *
 * # Safety
 * `s` must be a live handle and `out` valid for one write.
 */
enum CesaroStatus cesaro_seq_term(const struct CesaroSeq *s, size_t j, uint64_t *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CESARO_LAB_H */
