#ifndef PILEUP_H
#define PILEUP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum PileupStatus {
  PILEUP_STATUS_OK = 0,
  PILEUP_STATUS_NULL_POINTER = 1,
  PILEUP_STATUS_INVALID_ARGUMENT = 2,
  PILEUP_STATUS_DOMAIN = 3,
  PILEUP_STATUS_DIVERGENCE = 4,
  PILEUP_STATUS_NON_CONVERGENCE = 5,
  PILEUP_STATUS_BUFFER_TOO_SMALL = 6,
  PILEUP_STATUS_IO = 7,
  PILEUP_STATUS_PANIC = 8,
} PileupStatus;

// Truncated boundary-layer solution.
typedef struct PileupBoundaryLayer PileupBoundaryLayer;

// Equilibrium of the finite problem.
typedef struct PileupConfiguration PileupConfiguration;

// Interaction potential.
typedef struct PileupPotential PileupPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null if there was none.
// The pointer stays valid until the next failing call on the same thread.
const char *pileup_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pileup_version(void);

// `V(x) = x^-a` for `a > 1`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PileupStatus pileup_potential_power_law(double a, struct PileupPotential **out);

// Dislocation-wall potential.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PileupStatus pileup_potential_wall(struct PileupPotential **out);

// Parses `powerlaw:a=<value>` or `wall`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid handle slot.
enum PileupStatus pileup_potential_parse(const char *spec, struct PileupPotential **out);

// # Safety
// `p` must be null or a handle from a `pileup_potential_*` constructor.
void pileup_potential_free(struct PileupPotential *p);

// Derivative `order` (0 to 3) of the potential at `x > 0`.
//
// # Safety
// `p` must be a live handle and `out` a valid pointer.
enum PileupStatus pileup_potential_eval(const struct PileupPotential *p,
                                        uint32_t order,
                                        double x,
                                        double *out);

// Minimises the finite energy for `n + 1` particles. `tol <= 0` selects the
// default residual tolerance.
//
// # Safety
// `p` must be a live handle and `out` a valid handle slot.
enum PileupStatus pileup_solve_finite(const struct PileupPotential *p,
                                      size_t n,
                                      double tol,
                                      struct PileupConfiguration **out);

// Number of gaps `n`; the configuration has `n + 1` positions.
//
// # Safety
// `c` must be null or a live handle.
size_t pileup_configuration_n(const struct PileupConfiguration *c);

// Writes the `n + 1` positions into `buf`.
//
// # Safety
// `c` must be a live handle and `buf` must hold `len` doubles.
enum PileupStatus pileup_configuration_positions(const struct PileupConfiguration *c,
                                                 double *buf,
                                                 size_t len);

// Writes the `n` strains into `buf`.
//
// # Safety
// `c` must be a live handle and `buf` must hold `len` doubles.
enum PileupStatus pileup_configuration_strains(const struct PileupConfiguration *c,
                                               double *buf,
                                               size_t len);

// # Safety
// `c` must be null or a handle from `pileup_solve_finite`.
void pileup_configuration_free(struct PileupConfiguration *c);

// Solves the boundary-layer system with `free` unknowns, truncated at
// `trunc`. `tol <= 0` selects the default tolerance.
//
// # Safety
// `p` must be a live handle and `out` a valid handle slot.
enum PileupStatus pileup_solve_bl(const struct PileupPotential *p,
                                  size_t free,
                                  size_t trunc,
                                  double tol,
                                  struct PileupBoundaryLayer **out);

// Number of free strains `I`.
//
// # Safety
// `s` must be null or a live handle.
size_t pileup_bl_free_len(const struct PileupBoundaryLayer *s);

// Writes the `I` free strains into `buf`.
//
// # Safety
// `s` must be a live handle and `buf` must hold `len` doubles.
enum PileupStatus pileup_bl_strains(const struct PileupBoundaryLayer *s, double *buf, size_t len);

// # Safety
// `s` must be null or a handle from `pileup_solve_bl`.
void pileup_bl_free(struct PileupBoundaryLayer *s);

// Boundary stress at `i = 1..=imax` into `buf`. `n == 0` means the
// half-infinite limit; entries past `n/2` are zero.
//
// # Safety
// `p` must be a live handle and `buf` must hold `imax` doubles.
enum PileupStatus pileup_boundary_stress(const struct PileupPotential *p,
                                         size_t n,
                                         size_t imax,
                                         double *buf);

// Renormalised energy of `len` strains summing to zero.
//
// # Safety
// `p` must be a live handle, `eps` must hold `len` doubles and `out` must
// be valid.
enum PileupStatus pileup_renorm_energy(const struct PileupPotential *p,
                                       const double *eps,
                                       size_t len,
                                       double *out);

// Riemann zeta at `a > 1`.
//
// # Safety
// `out` must be a valid pointer.
enum PileupStatus pileup_zeta(double a, double *out);

// `Z = sum_k k^2 V''(k)`.
//
// # Safety
// `p` must be a live handle and `out` a valid pointer.
enum PileupStatus pileup_second_moment(const struct PileupPotential *p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PILEUP_H */
