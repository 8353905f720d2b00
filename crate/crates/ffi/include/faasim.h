#ifndef FAASIM_H
#define FAASIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FaasimStatus {
  FAASIM_STATUS_OK = 0,
  FAASIM_STATUS_NULL_POINTER = 1,
  FAASIM_STATUS_INVALID_ARGUMENT = 2,
  FAASIM_STATUS_UNKNOWN_PRESET = 3,
  FAASIM_STATUS_UNKNOWN_FUNCTION = 4,
  FAASIM_STATUS_ALREADY_EXISTS = 5,
  FAASIM_STATUS_REJECTED = 6,
  FAASIM_STATUS_INSUFFICIENT_SAMPLES = 7,
  FAASIM_STATUS_UNBOUNDED = 8,
  FAASIM_STATUS_PANIC = 99,
} FaasimStatus;

typedef enum FaasimOutcome {
  FAASIM_OUTCOME_SUCCESS = 0,
  FAASIM_OUTCOME_MEMORY_EXCEEDED = 1,
  FAASIM_OUTCOME_UNAVAILABLE = 2,
} FaasimOutcome;

/**
 * Opaque simulator handle with its deployed functions.
 */
typedef struct FaasimSimulator FaasimSimulator;

/**
 * One invocation. Instants are microseconds on the client clock
 * (`client_*`) or the platform clock (`exec_*`); durations are ms.
 */
typedef struct FaasimRecord {
  uint64_t request_id;
  bool is_cold;
  enum FaasimOutcome outcome;
  int64_t client_send_us;
  int64_t exec_start_us;
  int64_t exec_end_us;
  int64_t client_receive_us;
  double benchmark_time_ms;
  double provider_time_ms;
  double client_time_ms;
  double memory_used_mb;
  double billed_duration_ms;
  double billed_memory_mb;
  double cost_usd;
} FaasimRecord;

typedef struct FaasimInterval {
  double low;
  double high;
  double median;
} FaasimInterval;

typedef struct FaasimLinearFit {
  double slope;
  double intercept;
  double r_squared;
  double adjusted_r_squared;
} FaasimLinearFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulator for a built-in provider profile.
 *
 * # Safety
 * `provider_name` is a NUL-terminated string and `out` is writable. The
 * handle must be released with [`faasim_simulator_free`].
 */
enum FaasimStatus faasim_simulator_new(const char *provider_name,
                                       uint64_t seed,
                                       int64_t client_offset_us,
                                       struct FaasimSimulator **out);

/**
 * # Safety
 * `sim` is null or a handle from [`faasim_simulator_new`] not yet freed.
 */
void faasim_simulator_free(struct FaasimSimulator *sim);

/**
 * Deploys a function running a built-in workload, reachable over HTTP.
 *
 * # Safety
 * `sim` is a live handle; `name` and `workload` are NUL-terminated.
 */
enum FaasimStatus faasim_create_function(struct FaasimSimulator *sim,
                                         const char *name,
                                         const char *workload,
                                         uint32_t memory);

/**
 * Redeploys a function with a new memory size; all its containers go.
 *
 * # Safety
 * `sim` is a live handle; `name` is NUL-terminated.
 */
enum FaasimStatus faasim_update_function(struct FaasimSimulator *sim,
                                         const char *name,
                                         uint32_t memory);

/**
 * Invokes a function once at client time `at_client_us` and waits for the
 * response.
 *
 * # Safety
 * `sim` is a live handle, `name` is NUL-terminated, `out` is writable.
 */
enum FaasimStatus faasim_invoke(struct FaasimSimulator *sim,
                                const char *name,
                                uint64_t payload,
                                int64_t at_client_us,
                                struct FaasimRecord *out);

/**
 * # Safety
 * `sim` is a live handle and `out` is writable.
 */
enum FaasimStatus faasim_client_now(const struct FaasimSimulator *sim, int64_t *out);

/**
 * Lets simulated time pass until the client clock reads `client_us`.
 *
 * # Safety
 * `sim` is a live handle.
 */
enum FaasimStatus faasim_wait_until(struct FaasimSimulator *sim, int64_t client_us);

/**
 * # Safety
 * `out` is writable.
 */
enum FaasimStatus faasim_expected_warm_containers(double d_init,
                                                  double delta_t,
                                                  double period,
                                                  double *out);

/**
 * # Safety
 * `out` is writable.
 */
enum FaasimStatus faasim_optimal_batch_size(uint64_t n,
                                            double runtime,
                                            double period,
                                            uint64_t *out);

/**
 * # Safety
 * `provider_name` is NUL-terminated and `out` is writable.
 */
enum FaasimStatus faasim_billed_duration(const char *provider_name,
                                         double provider_time_ms,
                                         double *out);

/**
 * # Safety
 * `out` is writable.
 */
enum FaasimStatus faasim_break_even(double faas_cost_per_million,
                                    double vm_hourly_cost,
                                    uint64_t *out);

/**
 * # Safety
 * `values` points to `n` readable doubles and `out` is writable.
 */
enum FaasimStatus faasim_median_ci(const double *values,
                                   size_t n,
                                   double level,
                                   struct FaasimInterval *out);

/**
 * # Safety
 * `xs` and `ys` point to `n` readable doubles and `out` is writable.
 */
enum FaasimStatus faasim_ols_fit(const double *xs,
                                 const double *ys,
                                 size_t n,
                                 struct FaasimLinearFit *out);

/**
 * Message of the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next faasim call on the same thread.
 */
const char *faasim_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *faasim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAASIM_H */
