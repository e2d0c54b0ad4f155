#ifndef EBC_H
#define EBC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define EBC_OK 0

#define EBC_ERR_NULL_POINTER 1

#define EBC_ERR_INVALID_ARGUMENT 2

#define EBC_ERR_INVALID_GEOMETRY 3

#define EBC_ERR_VALIDATION 4

#define EBC_ERR_PARSE 5

#define EBC_ERR_IO 6

#define EBC_ERR_SIZE_LIMIT 7

#define EBC_ERR_DEGENERATE 8

#define EBC_ERR_UNREACHABLE 9

#define EBC_ERR_NO_CONVERGENCE 10

#define EBC_ERR_SOLVER 11

#define EBC_ERR_PANIC 12

/**
 * Joint law of states and estimates.
 */
typedef struct EbcJoint EbcJoint;

/**
 * Two-receiver rate region.
 */
typedef struct EbcRegion EbcRegion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the toy-model joint for `k` vehicles.
 *
 * # Safety
 * `velocities` must point to `k` doubles; `out` must be writable.
 */
int32_t ebc_joint_from_geometry(double lambda,
                                double rb,
                                double ts,
                                const double *velocities,
                                uintptr_t k,
                                struct EbcJoint **out);

/**
 * Loads a joint from an `s,shat,p` CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
int32_t ebc_joint_from_csv(const char *path, bool allow_marginal_mismatch, struct EbcJoint **out);

/**
 * # Safety
 * `joint` must be null or come from an `ebc_joint_from_*` call, and must
 * not be used afterwards.
 */
void ebc_joint_free(struct EbcJoint *joint);

/**
 * # Safety
 * `joint` must be a live handle; `out` must be writable.
 */
int32_t ebc_joint_num_receivers(const struct EbcJoint *joint, uintptr_t *out);

/**
 * `P(S = s, Ŝ = shat)`, receiver 1 in the most significant bit.
 *
 * # Safety
 * `joint` must be a live handle; `out` must be writable.
 */
int32_t ebc_joint_probability(const struct EbcJoint *joint,
                              uintptr_t s,
                              uintptr_t shat,
                              double *out);

/**
 * Symmetric rate of a two-receiver joint and its binding weight
 * (`INFINITY` when a single-user limit binds). `mu` may be null.
 *
 * # Safety
 * `joint` must be a live handle; `rate` must be writable.
 */
int32_t ebc_sym_rate(const struct EbcJoint *joint, double *rate, double *mu);

/**
 * # Safety
 * `joint` must be a live handle; `out` must be writable.
 */
int32_t ebc_region_new(const struct EbcJoint *joint, struct EbcRegion **out);

/**
 * # Safety
 * `region` must be null or come from [`ebc_region_new`], and must not be
 * used afterwards.
 */
void ebc_region_free(struct EbcRegion *region);

/**
 * # Safety
 * `region` must be a live handle; `out` must be writable.
 */
int32_t ebc_region_num_vertices(const struct EbcRegion *region, uintptr_t *out);

/**
 * Vertex `i` in counter-clockwise order from the largest `R1` on the axis.
 *
 * # Safety
 * `region` must be a live handle; `r1` and `r2` must be writable.
 */
int32_t ebc_region_vertex(const struct EbcRegion *region, uintptr_t i, double *r1, double *r2);

/**
 * # Safety
 * `region` must be a live handle; `out` must be writable.
 */
int32_t ebc_region_contains(const struct EbcRegion *region,
                            double r1,
                            double r2,
                            double tol,
                            bool *out);

/**
 * Smallest density reaching `target` at a common `velocity`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t ebc_min_density(double target,
                        double velocity,
                        double rb,
                        double ts,
                        double lambda_hi,
                        double tol,
                        double *out);

/**
 * Symmetric scheduling optimum. Writes `K` rates into `rates` (capacity
 * `rates_len`). Returns `EBC_ERR_NO_CONVERGENCE` with results still written
 * when the iteration limit was hit.
 *
 * # Safety
 * `joint` must be a live handle; `rates` must hold `rates_len` doubles;
 * `value` must be writable.
 */
int32_t ebc_solve_symmetric(const struct EbcJoint *joint,
                            uintptr_t starts,
                            double *rates,
                            uintptr_t rates_len,
                            double *value);

/**
 * Simulates the optimal two-receiver policy with fresh transmissions
 * scaled by `1 - backoff`, `backoff` in `[0, 1)`.
 *
 * # Safety
 * `joint` must be a live handle; `rate1` and `rate2` must be writable.
 */
int32_t ebc_simulate(const struct EbcJoint *joint,
                     double backoff,
                     uint64_t slots,
                     uint64_t seed,
                     double *rate1,
                     double *rate2);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * plus one, so callers can size a buffer with a first call of `len = 0`.
 *
 * # Safety
 * `buf` must be null or hold `len` bytes.
 */
uintptr_t ebc_last_error_message(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ebc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBC_H */
