#ifndef PCGEOM_H
#define PCGEOM_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcgStatus {
  PCG_STATUS_OK = 0,
  PCG_STATUS_NULL_POINTER = 1,
  PCG_STATUS_INVALID_UTF8 = 2,
  PCG_STATUS_MALFORMED = 3,
  PCG_STATUS_INVALID = 4,
  PCG_STATUS_UNSUPPORTED_GROUP = 5,
  PCG_STATUS_OUT_OF_RANGE = 6,
  PCG_STATUS_NOT_CONSISTENT = 7,
  PCG_STATUS_BUFFER_TOO_SMALL = 8,
  PCG_STATUS_PANIC = 9,
} PcgStatus;

/**
 * Opaque matrix handle.
 */
typedef struct PcgMatrix PcgMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static nul-terminated string.
 */
const char *pcg_version(void);

/**
 * Message of the last failure on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pcg_last_error_message(void);

/**
 * Parses a JSON matrix document.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum PcgStatus pcg_matrix_from_json(const char *json, struct PcgMatrix **out);

/**
 * Builds an `n`×`n` positive-reals matrix from its `n(n−1)/2` upper entries
 * in row order.
 *
 * # Safety
 * `upper` must point to `len` doubles and `out` must be writable.
 */
enum PcgStatus pcg_matrix_positive_reals(size_t n,
                                         const double *upper,
                                         size_t len,
                                         struct PcgMatrix **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void pcg_matrix_free(struct PcgMatrix *m);

/**
 * Matrix size, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t pcg_matrix_size(const struct PcgMatrix *m);

/**
 * JSON document of the matrix; release it with `pcg_string_free`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_matrix_to_json(const struct PcgMatrix *m, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void pcg_string_free(char *s);

/**
 * Entry `a_ij` of a positive-reals matrix.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_matrix_get(const struct PcgMatrix *m, size_t i, size_t j, double *out);

/**
 * Sets `a_ij` (and `a_ji` to its inverse) in a positive-reals matrix.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum PcgStatus pcg_matrix_set(struct PcgMatrix *m, size_t i, size_t j, double value);

/**
 * Whether every triad closes within `tol`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_is_consistent(const struct PcgMatrix *m, double tol, bool *out);

/**
 * Worst triad indicator and its indices; the triple is left untouched when
 * the matrix has fewer than three rows.
 *
 * # Safety
 * `m` must be a live handle, `value` writable, `worst` null or three writable slots.
 */
enum PcgStatus pcg_ii_local(const struct PcgMatrix *m, double *value, size_t *worst);

/**
 * Indicator comparing each entry with its superdiagonal chain product.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_ii_chain(const struct PcgMatrix *m, double *out);

/**
 * Weights `λ` with `λ_0 = 1` of a positive-reals matrix into `out[0..n]`.
 *
 * # Safety
 * `m` must be a live handle and `out` must hold `len` doubles.
 */
enum PcgStatus pcg_recover_weights(const struct PcgMatrix *m, double *out, size_t len);

/**
 * Least-squares consistent approximation as a new handle.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_nearest_consistent(const struct PcgMatrix *m, struct PcgMatrix **out);

/**
 * Up to `steps` worst-triad reductions in place; writes the final indicator.
 *
 * # Safety
 * `m` must be a live handle; `ii_after` null or writable.
 */
enum PcgStatus pcg_reduce(struct PcgMatrix *m, size_t steps, double *ii_after);

/**
 * Distance matrix `|ln a_ij|`, row-major into `out[0..n·n]`.
 *
 * # Safety
 * `m` must be a live handle and `out` must hold `len` doubles.
 */
enum PcgStatus pcg_distance_matrix(const struct PcgMatrix *m, double *out, size_t len);

/**
 * Number of consistent matrices whose distance matrix is the row-major
 * `n`×`n` array `k`.
 *
 * # Safety
 * `k` must point to `n·n` doubles and `out` must be writable.
 */
enum PcgStatus pcg_count_consistent_sharing_k(const double *k, size_t n, size_t *out);

/**
 * Largest entry distance after the matrix → connection → matrix round trip;
 * `steps = 0` uses exact edge integrals, otherwise the midpoint rule.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PcgStatus pcg_holonomy_roundtrip(const struct PcgMatrix *m, size_t steps, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCGEOM_H */
