#ifndef ERASURE_QEC_H
#define ERASURE_QEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EqecStatus {
  EQEC_STATUS_OK = 0,
  EQEC_STATUS_NULL_POINTER = 1,
  EQEC_STATUS_INVALID_ARGUMENT = 2,
  EQEC_STATUS_SIMULATION_FAILED = 3,
  EQEC_STATUS_FIT_FAILED = 4,
  EQEC_STATUS_PANIC = 5,
} EqecStatus;

typedef enum EqecScheme {
  EQEC_SCHEME_ERASURE = 0,
  EQEC_SCHEME_STANDARD = 1,
  EQEC_SCHEME_CODE_CAPACITY = 2,
} EqecScheme;

typedef enum EqecAxis {
  EQEC_AXIS_P = 0,
  EQEC_AXIS_E = 1,
} EqecAxis;

/**
 * Opaque circuit-level simulator for one distance and round count.
 */
typedef struct EqecSimulator EqecSimulator;

/**
 * Noise point. `p_m < 0` selects the default `2p/3`; `scheme` is an
 * [`EqecScheme`] value.
 */
typedef struct EqecNoise {
  double p;
  double p_m;
  double e;
  double q_plus;
  double q_minus;
  int32_t scheme;
} EqecNoise;

typedef struct EqecEstimate {
  /**
   * An [`EqecScheme`] value.
   */
  int32_t scheme;
  uint32_t d;
  double p;
  double p_m;
  double e;
  uint64_t shots;
  uint64_t failures;
  double p_fail;
  double std_error;
} EqecEstimate;

typedef struct EqecFit {
  double a;
  double b;
  double c;
  double threshold;
  double threshold_stderr;
  double mu;
  double mu_stderr;
  double residual;
} EqecFit;

/**
 * Device parameters in rad/s and seconds.
 */
typedef struct EqecDeviceParams {
  double omega0;
  double eta;
  double delta;
  double g_c;
  double g_12;
  double g_rt1;
  double g_rt2;
  double kappa;
  double n_bar;
  double eps_d;
  double t1;
  double t_gate;
  double t_meas;
  double t_ramp;
  double q_minus;
} EqecDeviceParams;

typedef struct EqecGateResult {
  double infidelity;
  double leakage;
  double theta;
} EqecGateResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t eqec_last_error_message(char *buf, size_t len);

/**
 * Build a simulator for distance `d` (odd, ≥ 3) with `rounds` noisy rounds.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum EqecStatus eqec_simulator_new(uint32_t d, uint32_t rounds, struct EqecSimulator **out);

/**
 * Release a simulator. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a pointer from [`eqec_simulator_new`] not yet freed.
 */
void eqec_simulator_free(struct EqecSimulator *sim);

/**
 * Logical failure rate at one noise point with `shots` total shots.
 *
 * # Safety
 * `sim`, `noise` and `out` must be null or valid.
 */
enum EqecStatus eqec_estimate_pfail(const struct EqecSimulator *sim,
                                    const struct EqecNoise *noise,
                                    uint64_t shots,
                                    uint64_t seed,
                                    struct EqecEstimate *out);

/**
 * Finite-size-scaling threshold fit over `n` estimates along `axis`, an
 * [`EqecAxis`] value.
 *
 * # Safety
 * `records` must be valid for `n` elements and `out` for one write.
 */
enum EqecStatus eqec_fit_threshold(const struct EqecEstimate *records,
                                   size_t n,
                                   int32_t axis,
                                   struct EqecFit *out);

/**
 * Fill `out` with the dual-rail √iSWAP example parameters.
 *
 * # Safety
 * `out` must be null or valid for one write.
 */
enum EqecStatus eqec_device_params_default(struct EqecDeviceParams *out);

/**
 * Simulate the dual-rail √iSWAP gate.
 *
 * # Safety
 * `params` and `out` must be null or valid.
 */
enum EqecStatus eqec_sqrt_iswap(const struct EqecDeviceParams *params,
                                uint32_t levels,
                                double tol,
                                struct EqecGateResult *out);

/**
 * Leakage estimate 2g²/(Δ⁴T_ramp²) of a linear coupling ramp.
 *
 * # Safety
 * `out` must be null or valid for one write.
 */
enum EqecStatus eqec_leakage_estimate(double g_max, double delta, double t_ramp, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERASURE_QEC_H */
