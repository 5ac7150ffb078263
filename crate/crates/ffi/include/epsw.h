#ifndef EPSW_H
#define EPSW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EpswStatus {
  EPSW_STATUS_OK = 0,
  EPSW_STATUS_NULL_POINTER = 1,
  EPSW_STATUS_INVALID_ARGUMENT = 2,
  EPSW_STATUS_INVALID_DISTRIBUTION = 3,
  EPSW_STATUS_INVALID_WAGE = 4,
  EPSW_STATUS_NO_CONVERGENCE = 5,
  EPSW_STATUS_NOT_CORE = 6,
  EPSW_STATUS_INFEASIBLE = 7,
  EPSW_STATUS_CONFIG = 8,
  EPSW_STATUS_OUT_OF_RANGE = 9,
  EPSW_STATUS_PANIC = 10,
} EpswStatus;

// Opaque market handle.
typedef struct EpswMarket EpswMarket;

// Opaque sampled phi curve.
typedef struct EpswPhiCurve EpswPhiCurve;

// Opaque wage schedule handle.
typedef struct EpswWage EpswWage;

typedef struct EpswPhiPoint {
  double epsilon;
  double phi;
  double w1hat_inv;
  double ndc_slack;
} EpswPhiPoint;

typedef struct EpswPhiSummary {
  double e_cap;
  // NaN when `has_eps_star` is 0.
  double eps_star;
  int32_t has_eps_star;
  double pi1_hat;
  double pi2;
  int32_t core_exists;
} EpswPhiSummary;

typedef struct EpswGroupReport {
  int32_t is_core;
  int32_t ir_ok;
  int32_t equal_profit_ok;
  int32_t ndc_ok;
  double equal_profit_residual;
  double ndc_worst_eps;
  double ndc_worst_slack;
  double profit_1;
  double profit_2;
  double gap;
} EpswGroupReport;

typedef struct EpswNongroupCore {
  double w1;
  double w2;
  double w1_star;
  double profit;
  double profit_abs;
  double unemployed_measure;
  double gap;
} EpswNongroupCore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *epsw_last_error(void);

// Library version as a static NUL-terminated string.
const char *epsw_version(void);

// Market from a preset name or scenario TOML text.
enum EpswStatus epsw_market_from_scenario(const char *spec, struct EpswMarket **out);

// Market with power densities `F_A(v) = v^k_a`, `F_B(v) = v^k_b`.
enum EpswStatus epsw_market_power(double beta, uint32_t k_a, uint32_t k_b, struct EpswMarket **out);

enum EpswStatus epsw_market_beta(const struct EpswMarket *m, double *out);

void epsw_market_free(struct EpswMarket *m);

// Wage schedule from a descriptor such as `linear:0.5` or `knots:0,0;1,1`.
enum EpswStatus epsw_wage_parse(const char *desc, struct EpswWage **out);

enum EpswStatus epsw_wage_eval(const struct EpswWage *w, double v, double *out);

void epsw_wage_free(struct EpswWage *w);

// Profit of the firm paying group B `w2`.
enum EpswStatus epsw_firm2_profit(const struct EpswMarket *m,
                                  const struct EpswWage *w2,
                                  double *out);

enum EpswStatus epsw_phi_curve_build(const struct EpswMarket *m,
                                     const struct EpswWage *w2,
                                     size_t grid,
                                     struct EpswPhiCurve **out);

// Number of grid points; 0 for NULL.
size_t epsw_phi_curve_len(const struct EpswPhiCurve *c);

enum EpswStatus epsw_phi_curve_point(const struct EpswPhiCurve *c,
                                     size_t i,
                                     struct EpswPhiPoint *out);

enum EpswStatus epsw_phi_curve_summary(const struct EpswPhiCurve *c,
                                       double tol,
                                       struct EpswPhiSummary *out);

void epsw_phi_curve_free(struct EpswPhiCurve *c);

// Completed A wage schedule for `w2`; `x_star` may be NULL.
enum EpswStatus epsw_complete_w1(const struct EpswMarket *m,
                                 const struct EpswWage *w2,
                                 double tol,
                                 struct EpswWage **out,
                                 double *x_star);

// Verifies the segregated outcome `(w1, w2)`. Returns `Ok` with
// `is_core = 0` for a negative verdict.
enum EpswStatus epsw_group_verify(const struct EpswMarket *m,
                                  const struct EpswWage *w1,
                                  const struct EpswWage *w2,
                                  double tol,
                                  struct EpswGroupReport *out);

// Uniform-wage core with low wage `w1`; `NotCore` if `w1 > w1*`.
enum EpswStatus epsw_nongroup_core(const struct EpswMarket *m,
                                   double w1,
                                   struct EpswNongroupCore *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPSW_H */
