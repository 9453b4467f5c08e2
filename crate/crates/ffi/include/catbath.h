#ifndef CATBATH_H
#define CATBATH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Dissipative channel operators.
 */
typedef enum CbChannelOp {
  /**
   * a
   */
  CB_CHANNEL_OP_A = 0,
  /**
   * a^2
   */
  CB_CHANNEL_OP_A2 = 1,
  /**
   * a^dag a
   */
  CB_CHANNEL_OP_ADAG_A = 2,
} CbChannelOp;

/**
 * Result codes. Zero is success.
 */
typedef enum CbStatus {
  CB_STATUS_OK = 0,
  CB_STATUS_NULL_POINTER = 1,
  CB_STATUS_INVALID_ARGUMENT = 2,
  CB_STATUS_INVALID_DIMENSION = 3,
  CB_STATUS_INVALID_STATE = 4,
  CB_STATUS_NOT_HERMITIAN = 5,
  CB_STATUS_INTEGRATION_FAILURE = 6,
  CB_STATUS_DEGENERATE_NULL_SPACE = 7,
  CB_STATUS_NON_CONVERGENCE = 8,
  CB_STATUS_UNDEFINED_REFERENCE = 9,
  CB_STATUS_INVALID_GRID = 10,
  CB_STATUS_SCALE_SEPARATION = 11,
  CB_STATUS_CONFIG = 12,
  CB_STATUS_NUMERICAL = 13,
  CB_STATUS_IO = 14,
  CB_STATUS_BUFFER_TOO_SMALL = 15,
  CB_STATUS_PANIC = 16,
} CbStatus;

/**
 * Parsed scenario file.
 */
typedef struct CbScenario CbScenario;

/**
 * Density matrix handle.
 */
typedef struct CbState CbState;

/**
 * Hamiltonian plus dissipative channels.
 */
typedef struct CbSystem CbSystem;

/**
 * Rectangular phase-space grid, cell-centred, in x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)).
 */
typedef struct CbGrid {
  double x_min;
  double x_max;
  size_t nx;
  double p_min;
  double p_max;
  size_t np;
} CbGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a successful call.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cb_last_error(void);

/**
 * Library version, static string.
 */
const char *cb_version(void);

/**
 * Fock state |n> in dimension `dim`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CbStatus cb_state_fock(size_t n, size_t dim, struct CbState **out);

/**
 * Coherent state |alpha>, renormalized after truncation.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CbStatus cb_state_coherent(double alpha_re, double alpha_im, size_t dim, struct CbState **out);

/**
 * Even (`even != 0`) or odd cat state built on |alpha> and |-alpha>.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CbStatus cb_state_cat(double alpha_re,
                           double alpha_im,
                           int32_t even,
                           size_t dim,
                           struct CbState **out);

/**
 * Density matrix from `2 * dim * dim` doubles. Must be Hermitian, unit trace and positive semidefinite.
 *
 * # Safety
 * `data` must point to `2 * dim * dim` readable doubles; `out` must be a valid pointer.
 */
enum CbStatus cb_state_from_matrix(size_t dim,
                                   const double *data,
                                   struct CbState **out);

/**
 * # Safety
 * `state` must be null or a handle returned by this library, not yet freed.
 */
void cb_state_free(struct CbState *state);

/**
 * Hilbert-space dimension, 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t cb_state_dim(const struct CbState *state);

/**
 * Copies the matrix into `buf` (`len` doubles, at least `2 * dim * dim`).
 *
 * # Safety
 * `state` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum CbStatus cb_state_matrix(const struct CbState *state, double *buf, size_t len);

/**
 * Tr(rho^2).
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum CbStatus cb_purity(const struct CbState *state, double *out);

/**
 * Von Neumann entropy in nats.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum CbStatus cb_entropy(const struct CbState *state, double *out);

/**
 * Photon-number parity expectation.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum CbStatus cb_parity(const struct CbState *state, double *out);

/**
 * Tr(rho H) for the system Hamiltonian.
 *
 * # Safety
 * `system` and `state` must be live handles and `out` a valid pointer.
 */
enum CbStatus cb_energy(const struct CbSystem *system, const struct CbState *state, double *out);

/**
 * (1/2) Tr|a - b|.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` a valid pointer.
 */
enum CbStatus cb_trace_distance(const struct CbState *a, const struct CbState *b, double *out);

/**
 * Uhlmann fidelity, squared convention (1 for identical states).
 *
 * # Safety
 * `a`, `b` must be live handles and `out` a valid pointer.
 */
enum CbStatus cb_fidelity(const struct CbState *a, const struct CbState *b, double *out);

/**
 * Wigner function on `grid`, written to `buf` as `nx * np` doubles with x as the slow index.
 *
 * # Safety
 * `state`, `grid` must be valid; `buf` must point to `len` writable doubles.
 */
enum CbStatus cb_wigner(const struct CbState *state,
                        const struct CbGrid *grid,
                        double *buf,
                        size_t len);

/**
 * Integrated negative part of the Wigner function on `grid`.
 *
 * # Safety
 * `state`, `grid` must be valid handles and `out` a valid pointer.
 */
enum CbStatus cb_negativity(const struct CbState *state, const struct CbGrid *grid, double *out);

/**
 * Negativity of `state` relative to that of `reference` on the same grid.
 *
 * # Safety
 * All pointers must be valid.
 */
enum CbStatus cb_cattiness(const struct CbState *state,
                           const struct CbState *reference,
                           const struct CbGrid *grid,
                           double *out);

/**
 * Effective two-photon loss and dephasing rates of the coupler after eliminating the buffer mode.
 *
 * # Safety
 * `gamma2` and `gamma_perp` must be valid pointers.
 */
enum CbStatus cb_effective_rates(double chi_a,
                                 double chi_b,
                                 double kappa_a,
                                 double kappa_b,
                                 double eps_re,
                                 double eps_im,
                                 double *gamma2,
                                 double *gamma_perp);

/**
 * rf-SQUID ring Hamiltonian (SI circuit values, flux as a fraction of the flux quantum), no channels.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CbStatus cb_ring_system_new(double inductance,
                                 double capacitance,
                                 double critical_current,
                                 double external_flux_frac,
                                 size_t dim,
                                 struct CbSystem **out);

/**
 * Signal-mode Hamiltonian of the coupler, no channels.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CbStatus cb_signal_system_new(double chi_a,
                                   double chi_b,
                                   double kappa_a,
                                   double kappa_b,
                                   double eps_re,
                                   double eps_im,
                                   size_t dim,
                                   struct CbSystem **out);

/**
 * System from an explicit Hermitian Hamiltonian (`2 * dim * dim` doubles).
 *
 * # Safety
 * `data` must point to `2 * dim * dim` readable doubles; `out` must be a valid pointer.
 */
enum CbStatus cb_system_from_hamiltonian(size_t dim, const double *data, struct CbSystem **out);

/**
 * # Safety
 * `system` must be null or a live handle.
 */
void cb_system_free(struct CbSystem *system);

/**
 * Hilbert-space dimension, 0 for a null handle.
 *
 * # Safety
 * `system` must be null or a live handle.
 */
size_t cb_system_dim(const struct CbSystem *system);

/**
 * Adds the channel `rate * D[op]`.
 *
 * # Safety
 * `system` must be a live handle.
 */
enum CbStatus cb_system_add_channel(struct CbSystem *system, enum CbChannelOp op, double rate);

/**
 * Lowest `count` eigenvalues of the Hamiltonian, ascending.
 *
 * # Safety
 * `system` must be a live handle and `buf` must point to `count` writable doubles.
 */
enum CbStatus cb_system_spectrum(const struct CbSystem *system, double *buf, size_t count);

/**
 * Evolves `state` for time `t` under the system's master equation (adaptive Dormand-Prince).
 *
 * # Safety
 * `system`, `state` must be live handles and `out` a valid pointer.
 */
enum CbStatus cb_evolve(const struct CbSystem *system,
                        const struct CbState *state,
                        double t,
                        double rtol,
                        double atol,
                        struct CbState **out);

/**
 * Steady state. `initial` may be null (vacuum); it only matters when the steady state is not unique.
 *
 * # Safety
 * `system` must be a live handle, `initial` null or live, `out` a valid pointer; `residual` may be null.
 */
enum CbStatus cb_steady_state(const struct CbSystem *system,
                              const struct CbState *initial,
                              struct CbState **out,
                              double *residual);

/**
 * Scenario text of a shipped preset, or null if the name is unknown. Caller frees with [`cb_string_free`].
 *
 * # Safety
 * `name` must be a NUL-terminated string.
 */
char *cb_preset_text(const char *name);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void cb_string_free(char *s);

/**
 * Parses and validates scenario TOML.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CbStatus cb_scenario_parse(const char *text, struct CbScenario **out);

/**
 * # Safety
 * `scenario` must be null or a live handle.
 */
void cb_scenario_free(struct CbScenario *scenario);

/**
 * Runs the scenario, writing results under `out_dir`. `failed_runs` (may be null) receives the
 * number of runs that failed; their manifests record why.
 *
 * # Safety
 * `scenario` must be a live handle and `out_dir` a NUL-terminated string.
 */
enum CbStatus cb_scenario_run(const struct CbScenario *scenario,
                              const char *out_dir,
                              size_t workers,
                              size_t *failed_runs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CATBATH_H */
