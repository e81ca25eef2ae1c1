#ifndef VLASOV_RENORM_H
#define VLASOV_RENORM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum VrStatus {
  VR_STATUS_OK = 0,
  VR_STATUS_NULL_POINTER = 1,
  VR_STATUS_INVALID_ARGUMENT = 2,
  // Kernel scale below two grid spacings or above a quarter period.
  VR_STATUS_SCALE = 3,
  // Axis, dimension or index mismatch, or a pair sum over budget.
  VR_STATUS_SHAPE = 4,
  // Time step above the CFL guard.
  VR_STATUS_CFL = 5,
  VR_STATUS_CHECKSUM = 6,
  VR_STATUS_IO = 7,
  VR_STATUS_BUFFER_TOO_SMALL = 8,
  VR_STATUS_PANIC = 9,
} VrStatus;

// A sampled field on a tensor grid.
typedef struct VrField VrField;

// A Vlasov-Maxwell state advanced by [`vr_sim_step`].
typedef struct VrSimulation VrSimulation;

// Axis description. `kind`: 0 = t, 1 = x1, 2 = x2, 3 = s1, 4 = s2.
typedef struct VrAxis {
  uint32_t kind;
  double origin;
  double extent;
  size_t len;
} VrAxis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *vr_last_error(void);

// Library version as a static NUL-terminated string.
const char *vr_version(void);

// Field from `len` samples in row-major axis order.
enum VrStatus vr_field_new(const struct VrAxis *axes_ptr,
                           size_t n_axes,
                           const double *data,
                           size_t len,
                           struct VrField **result);

// Random field of regularity `(theta, p)`, deterministic in `seed`.
enum VrStatus vr_field_synth(const struct VrAxis *axes_ptr,
                             size_t n_axes,
                             double theta,
                             double p,
                             uint64_t seed,
                             struct VrField **result);

// Releases a field; NULL is ignored.
void vr_field_free(struct VrField *f);

enum VrStatus vr_field_len(const struct VrField *f, size_t *len);

// Copies the samples into `buffer`, which must hold `vr_field_len` values.
enum VrStatus vr_field_copy(const struct VrField *f, double *buffer, size_t capacity);

// Mollifies along the axis of kind `axis_kind` at `scale`.
enum VrStatus vr_mollify(const struct VrField *f,
                         uint32_t axis_kind,
                         double scale,
                         struct VrField **result);

enum VrStatus vr_lp_norm(const struct VrField *f, double p, double *value);

// `‖f‖_p` and the Gagliardo seminorm; their sum is the `W^{θ,p}` norm.
enum VrStatus vr_sobolev_norm(const struct VrField *f,
                              double theta,
                              double p,
                              double *lebesgue,
                              double *seminorm);

// Annular modulus over pairs at distance in `[eps, 2 eps]` along the axes
// listed in `kinds`.
enum VrStatus vr_theta_annular(const struct VrField *f,
                               double eps,
                               double theta,
                               double p,
                               const uint32_t *kinds,
                               size_t n_kinds,
                               double *value);

// `θκ + κ + 3θ − 1` in lowest terms for rational `θ` and `κ`.
enum VrStatus vr_criticality(int64_t theta_num,
                             int64_t theta_den,
                             int64_t kappa_num,
                             int64_t kappa_den,
                             int64_t *num,
                             int64_t *den);

// Least-squares slope and intercept of `log value` against `log scale`.
enum VrStatus vr_fit_rate(const double *scales,
                          const double *values,
                          size_t n,
                          double *slope,
                          double *intercept);

// Perturbed relativistic equilibrium on an `nx × ns^momentum_dim` grid,
// advanced with Strang splitting at step `dt`. Other parameters keep their
// defaults (amplitude 0.05, wavenumber 0.5, temperature 0.1, momentum
// extent 6); `b0` sets a uniform magnetic field in 1D2V.
enum VrStatus vr_sim_new(size_t nx,
                         size_t ns,
                         size_t momentum_dim,
                         double b0,
                         double dt,
                         struct VrSimulation **result);

void vr_sim_free(struct VrSimulation *sim);

// Advances `steps` steps.
enum VrStatus vr_sim_step(struct VrSimulation *sim, size_t steps);

// Time, completed steps, total mass and Gauss-law residual.
enum VrStatus vr_sim_status(const struct VrSimulation *sim,
                            double *time,
                            uint64_t *steps,
                            double *mass,
                            double *gauss_residual);

// Copy of the distribution function.
enum VrStatus vr_sim_distribution(const struct VrSimulation *sim, struct VrField **result);

// Writes the state to a checksummed container file.
enum VrStatus vr_sim_save(const struct VrSimulation *sim, const char *file);

// Reads a state written by [`vr_sim_save`]; the container does not store
// the clock, so `time` and `steps` are supplied by the caller.
enum VrStatus vr_sim_load(const char *file,
                          double time,
                          uint64_t steps,
                          double dt,
                          struct VrSimulation **result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VLASOV_RENORM_H */
