/* kohdesign: sequential design for computer-model calibration.
 *
 * C API over the core library.  All functions return a kohd_status; on
 * failure, kohd_last_error() describes the problem (thread-local storage).
 * Matrices are passed as dense row-major double arrays.  Inputs live on the
 * coded unit cube: x in [0,1]^p are controllable inputs, u in [0,1]^s are
 * calibration inputs.
 */

#ifndef KOHDESIGN_H
#define KOHDESIGN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kohd_status {
  KOHD_OK = 0,
  KOHD_ERR_INVALID_ARGUMENT = 1, /* malformed input, name, or config */
  KOHD_ERR_NUMERIC = 2,          /* factorization or optimization failure */
  KOHD_ERR_REJECTED = 3,         /* candidate rejected (near-duplicate row) */
  KOHD_ERR_IO = 4,               /* file read/write failure */
  KOHD_ERR_INTERNAL = 5,
} kohd_status;

/* Message for the most recent failure on this thread; empty string if none. */
const char* kohd_last_error(void);

const char* kohd_version(void);

/* ---- Space-filling design ---------------------------------------------- */

/* Latin hypercube of n points in d dimensions into out[n*d], row-major. */
kohd_status kohd_lhs(int n, int d, uint64_t seed, double* out);

/* ---- Benchmark problems -------------------------------------------------
 * Names: "sinusoid" (p=1, s=1), "gohbastos" (p=2, s=2), "sx" (p=3, s=4,
 * two outputs).  options_json may be NULL or "{}"; for "sx" it accepts
 * {"sx_step": <RK4 step>, "sx_tmax": <contact time>}.
 */

typedef struct kohd_problem kohd_problem;

kohd_status kohd_problem_create(const char* name, const char* options_json,
                                kohd_problem** out);
void kohd_problem_free(kohd_problem* prob);

kohd_status kohd_problem_dims(const kohd_problem* prob, int* p, int* s,
                              int* n_outputs);

/* Simulator outputs at n coded input rows xu[n*(p+s)] into out[n*n_outputs]. */
kohd_status kohd_problem_simulate(const kohd_problem* prob, const double* xu,
                                  int n, double* out);

/* Noiseless field surface sim(x, u*) + bias_scale * bias(x) at x[n*p]. */
kohd_status kohd_problem_field_mean(const kohd_problem* prob, const double* x,
                                    int n, double bias_scale, double* out);

/* ---- Calibration fit -----------------------------------------------------
 * options_json may be NULL or override:
 *   {"priors": {"theta_m": {"shape":..., "rate"|"scale":...},
 *               "theta_b": {...}, "g": {...}, "u_beta": {"a":..., "b":...}},
 *    "n_starts": 5, "jitter": 1e-8}
 * Defaults: n_starts 5, jitter 1e-8, priors of the named problem when
 * "problem" is given, otherwise unit-rate Gamma(3/2, 1) and Beta(2, 2).
 */

typedef struct kohd_fit kohd_fit;

kohd_status kohd_fit_create(const double* xf, const double* yf, int n_f,
                            const double* xm_um, const double* ym, int n_m,
                            int p, int s, const char* options_json,
                            uint64_t seed, kohd_fit** out);
void kohd_fit_free(kohd_fit* fit);

kohd_status kohd_fit_u_hat(const kohd_fit* fit, double* u /* s */);

/* Hyperparameters as JSON into buf (NUL-terminated; error if cap too small). */
kohd_status kohd_fit_params_json(const kohd_fit* fit, char* buf, size_t cap);

/* Field prediction at x[n*p]: posterior mean and variance. */
kohd_status kohd_fit_predict(const kohd_fit* fit, const double* x, int n,
                             double* mean, double* var);

/* Integrated predictive variance after augmenting with cand[p+s]. */
kohd_status kohd_fit_imspe(const kohd_fit* fit, const double* cand, double* value);
kohd_status kohd_fit_imspe_grad(const kohd_fit* fit, const double* cand,
                                double* grad /* p+s */);

/* Next-point proposal.  strategy: "koh-imspe", "m-imspe",
 * "m-imspe-x-in-field", "m-imspe-u-at-uhat".  options_json may be NULL or
 * {"cand_per_dim":100, "n_starts":5, "max_iter":200, "grad_tol":1e-6}.
 * fallback is set to 1 when no descent converged. */
kohd_status kohd_fit_acquire(const kohd_fit* fit, const char* strategy,
                             const char* options_json, uint64_t seed,
                             double* point /* p+s */, double* value,
                             int* fallback);

/* ---- Experiment campaigns ----------------------------------------------- */

/* Runs (or resumes) a Monte-Carlo campaign described by a config JSON
 * document, streaming records to out_csv plus a .meta.json sidecar. */
kohd_status kohd_experiment_run(const char* config_json, const char* out_csv);

/* Aggregates a record CSV into per-(strategy, budget) summary rows. */
kohd_status kohd_summarize(const char* in_csv, const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KOHDESIGN_H */
