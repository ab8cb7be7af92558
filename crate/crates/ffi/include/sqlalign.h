/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SQLALIGN_H
#define SQLALIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SQLA_STATUS_OK = 0,
  SQLA_STATUS_NULL_POINTER = 1,
  SQLA_STATUS_INVALID_UTF8 = 2,
  SQLA_STATUS_PARSE_ERROR = 3,
  SQLA_STATUS_INVALID_ARGUMENT = 4,
  SQLA_STATUS_EMPTY_DISTRIBUTION = 5,
  SQLA_STATUS_PANIC = 6,
} SqlaStatus;

// An immutable n-gram distribution.
typedef struct SqlaDistribution SqlaDistribution;

// Templates of a growing set of queries.
typedef struct SqlaQuerySet SqlaQuerySet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next sqlalign call on the same thread.
const char *sqla_last_error(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void sqla_string_free(char *s);

// Writes the canonical template of `sql` (space-separated tokens) to `*out`.
//
// # Safety
// `sql` must be a NUL-terminated string; `out` must be writable.
SqlaStatus sqla_template(const char *sql, char **out);

// Creates an empty query set; `l_max` must be at least 1.
//
// # Safety
// `out` must be writable.
SqlaStatus sqla_query_set_new(size_t l_max, SqlaQuerySet **out);

// Parses `sql` and adds its template. On a parse error the set is unchanged.
//
// # Safety
// `set` must be a live handle; `sql` a NUL-terminated string.
SqlaStatus sqla_query_set_add(SqlaQuerySet *set, const char *sql);

// Number of templates in the set.
//
// # Safety
// `set` must be a live handle; `out` writable.
SqlaStatus sqla_query_set_len(const SqlaQuerySet *set, size_t *out);

// Builds the n-gram distribution of the set.
//
// # Safety
// `set` must be a live handle; `out` writable.
SqlaStatus sqla_query_set_distribution(const SqlaQuerySet *set, SqlaDistribution **out);

// Fraction of the distinct templates of `target` also present in `source`.
//
// # Safety
// Both handles must be live; `out` writable.
SqlaStatus sqla_ovlp_ratio(const SqlaQuerySet *target, const SqlaQuerySet *source, double *out);

// # Safety
// `set` must be NULL or a handle not freed before.
void sqla_query_set_free(SqlaQuerySet *set);

// Total n-gram count.
//
// # Safety
// `dist` must be a live handle; `out` writable.
SqlaStatus sqla_distribution_total(const SqlaDistribution *dist, uint64_t *out);

// Serializes the distribution as JSON.
//
// # Safety
// `dist` must be a live handle; `out` writable.
SqlaStatus sqla_distribution_to_json(const SqlaDistribution *dist, char **out);

// Reads a distribution written by `sqla_distribution_to_json`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` writable.
SqlaStatus sqla_distribution_from_json(const char *json, SqlaDistribution **out);

// # Safety
// `dist` must be NULL or a handle not freed before.
void sqla_distribution_free(SqlaDistribution *dist);

// Smoothed `D_KL(p || q)` in nats.
//
// # Safety
// Both handles must be live; `out` writable.
SqlaStatus sqla_kl_divergence(const SqlaDistribution *p,
                              const SqlaDistribution *q,
                              double alpha,
                              double *out);

// `exp(-d_kl / c)`; `c` must be positive and finite.
//
// # Safety
// `out` must be writable.
SqlaStatus sqla_kl_alignment(double d_kl, double c, double *out);

// Alignment ratio of `train` over `pred` against `target` with a shared `c`.
//
// # Safety
// All handles must be live; `out` writable.
SqlaStatus sqla_alignment_ratio(const SqlaDistribution *target,
                                const SqlaDistribution *train,
                                const SqlaDistribution *pred,
                                double alpha,
                                double c,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQLALIGN_H */
