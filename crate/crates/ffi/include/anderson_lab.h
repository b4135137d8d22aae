#ifndef ANDERSON_LAB_H
#define ANDERSON_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AlStatus {
  AL_STATUS_OK = 0,
  AL_STATUS_NULL_POINTER = 1,
  AL_STATUS_INVALID_CONFIG = 2,
  AL_STATUS_INVALID_ARGUMENT = 3,
  AL_STATUS_DEGENERATE_ENERGY = 4,
  AL_STATUS_PANIC = 5,
} AlStatus;

typedef enum AlVerdict {
  AL_VERDICT_CERTIFIED = 0,
  AL_VERDICT_NEAR_DEGENERATE = 1,
  AL_VERDICT_NOT_CERTIFIED = 2,
} AlVerdict;

/**
 * Opaque model handle.
 */
typedef struct AlModel AlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *al_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *al_version(void);

/**
 * Builds a model from NUL-terminated UTF-8 TOML text.
 *
 * # Safety
 * `toml` must be a valid C string and `out` a valid pointer.
 */
enum AlStatus al_model_from_toml(const char *toml, struct AlModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from [`al_model_from_toml`] and not be used afterwards.
 */
void al_model_free(struct AlModel *handle);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
size_t al_model_num_atoms(const struct AlModel *handle);

/**
 * Seed recorded in the config, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
uint64_t al_model_seed(const struct AlModel *handle);

/**
 * Transfer matrix of one atom at a real energy, written as `[a, b, c, d]`.
 *
 * # Safety
 * `out` must point to 4 writable doubles.
 */
enum AlStatus al_transfer_atom(const struct AlModel *handle,
                               size_t atom_index,
                               double energy,
                               double *out);

/**
 * m-function of one atom at a complex energy, written as `[re, im]`.
 *
 * # Safety
 * `out` must point to 2 writable doubles.
 */
enum AlStatus al_mfunction_atom(const struct AlModel *handle,
                                size_t atom_index,
                                double energy_re,
                                double energy_im,
                                double *out);

/**
 * Monte Carlo Lyapunov estimate.
 *
 * # Safety
 * `mean` and `std_error` must be valid pointers.
 */
enum AlStatus al_estimate_lyapunov(const struct AlModel *handle,
                                   double energy,
                                   size_t n,
                                   size_t num_samples,
                                   uint64_t seed,
                                   double *mean,
                                   double *std_error);

/**
 * Non-commutativity check at the config's value tolerance. `holds` gets 1
 * or 0; `measure` the disagreement measure of the witness pair.
 *
 * # Safety
 * `holds` and `measure` must be valid pointers.
 */
enum AlStatus al_check_nc(const struct AlModel *handle, int *holds, double *measure);

/**
 * Type-F certificate at one energy with default tolerances.
 *
 * # Safety
 * `verdict` must be a valid pointer.
 */
enum AlStatus al_certify(const struct AlModel *handle, double energy, enum AlVerdict *verdict);

/**
 * Estimate of `P(|log ‖A_n‖ / n - l_ref| > epsilon)`.
 *
 * # Safety
 * `tail` must be a valid pointer.
 */
enum AlStatus al_tail_probability(const struct AlModel *handle,
                                  double energy,
                                  double l_ref,
                                  double epsilon,
                                  size_t n,
                                  size_t num_samples,
                                  uint64_t seed,
                                  double *tail);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANDERSON_LAB_H */
