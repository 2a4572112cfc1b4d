#ifndef LOWDEG_LOWDEG_H
#define LOWDEG_LOWDEG_H

/*
 * C interface to the lowdeg library.
 *
 * Every function returns an ldg_status. On failure the message of the most recent error
 * on the calling thread is available from ldg_last_error(). Objects are opaque handles
 * released with the matching *_free function; passing NULL to a free function is a no-op.
 * Matrices crossing the interface are dense: batches are row-major (one sample per row),
 * subspace bases are column-major n x d.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(LOWDEG_BUILDING_LIBRARY)
#define LDG_API __attribute__((visibility("default")))
#else
#define LDG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  LDG_OK = 0,
  LDG_ERR_INVALID_ARGUMENT = 1,
  LDG_ERR_CONFIG = 2,
  LDG_ERR_INFEASIBLE = 3,
  LDG_ERR_NUMERIC = 4,
  LDG_ERR_IO = 5,
  LDG_ERR_INTERNAL = 6
} ldg_status;

typedef struct ldg_batch ldg_batch;
typedef struct ldg_measure ldg_measure;
typedef struct ldg_planted ldg_planted;
typedef struct ldg_verdict ldg_verdict;
typedef struct ldg_string ldg_string;

typedef enum { LDG_BUDGET_RELATIVE = 0, LDG_BUDGET_ADDITIVE = 1 } ldg_budget_kind;
typedef enum {
  LDG_STRATEGY_NONE = 0,
  LDG_STRATEGY_RANDOM_DIRECTION = 1,
  LDG_STRATEGY_EVADE = 2,
  LDG_STRATEGY_SPOOF = 3
} ldg_strategy;
typedef enum { LDG_FORMAT_CSV = 0, LDG_FORMAT_JSONL = 1 } ldg_format;
typedef enum { LDG_PROVENANCE_NULL = 0, LDG_PROVENANCE_PLANTED = 1, LDG_PROVENANCE_RERANDOMIZED = 2 } ldg_provenance;

typedef struct {
  int lambda_count;
  double lambda_radius;
  int z_count;
  double z_radius;
} ldg_grid_spec;

/* mu1: kind 0 is the point mass at 0, kind 1 is 1/2 (delta_t + delta_-t). */
typedef struct {
  int kind;
  double t;
} ldg_mu1;

LDG_API const char* ldg_version(void);
LDG_API const char* ldg_last_error(void);
LDG_API const char* ldg_status_string(ldg_status status);

/* Strings */
LDG_API const char* ldg_string_data(const ldg_string* s);
LDG_API void ldg_string_free(ldg_string* s);

/* Samples */
LDG_API ldg_status ldg_sample_null(size_t n, size_t m, uint64_t seed, ldg_batch** out);
LDG_API ldg_status ldg_sample_planted_pointmass(size_t n, double alpha, size_t m, uint64_t seed, ldg_batch** out);
/* basis: column-major n x d with orthonormal columns. */
LDG_API ldg_status ldg_sample_planted_subspace(const double* basis, size_t n, size_t d, double alpha, size_t m,
                                               uint64_t seed, ldg_batch** out);
LDG_API ldg_status ldg_random_subspace(size_t n, size_t d, uint64_t seed, double* basis_out);
LDG_API ldg_status ldg_batch_read_csv(const char* path, ldg_batch** out);
LDG_API ldg_status ldg_batch_write_csv(const ldg_batch* batch, const char* path);
LDG_API size_t ldg_batch_rows(const ldg_batch* batch);
LDG_API size_t ldg_batch_cols(const ldg_batch* batch);
LDG_API const double* ldg_batch_data(const ldg_batch* batch);
LDG_API ldg_provenance ldg_batch_provenance(const ldg_batch* batch, size_t row);
LDG_API void ldg_batch_free(ldg_batch* batch);

/* subspace may be NULL unless the strategy is evade or spoof; d may be 0. */
LDG_API ldg_status ldg_apply_noise(const ldg_batch* batch, double p, ldg_budget_kind kind, double budget,
                                   ldg_strategy strategy, const double* subspace, size_t d, uint64_t seed,
                                   ldg_batch** out);

/* Detection */
LDG_API ldg_status ldg_detect_relative(const ldg_batch* batch, int d, double threshold, ldg_verdict** out);
/* tau: pass a NaN to derive it from alpha, p, delta and c_threshold. */
LDG_API ldg_status ldg_detect_additive(const ldg_batch* batch, int d, double alpha, double p, double delta, double tau,
                                       double c_threshold, uint64_t seed, ldg_verdict** out);
LDG_API int ldg_verdict_planted(const ldg_verdict* v);
LDG_API double ldg_verdict_sigma(const ldg_verdict* v);
LDG_API size_t ldg_verdict_witness_size(const ldg_verdict* v);
LDG_API size_t ldg_verdict_witness(const ldg_verdict* v, size_t i);
LDG_API size_t ldg_verdict_tuples_scanned(const ldg_verdict* v);
LDG_API const char* ldg_verdict_json(const ldg_verdict* v);
LDG_API void ldg_verdict_free(ldg_verdict* v);
LDG_API ldg_status ldg_incoherence(const ldg_batch* batch, double* out);
LDG_API ldg_status ldg_sigma_min_tuple(const double* columns, size_t n, size_t cols, double* out);
LDG_API ldg_status ldg_additive_budget(double alpha, double p, double delta, size_t n, int d, double C, double* out);

/* Low-degree advantage. scale_law: "normal" or "heavy_two_scale". */
LDG_API ldg_status ldg_lda_single_pointmass(const char* scale_law, double alpha, int k, ldg_string** report_json);
LDG_API ldg_status ldg_lift_bound(double delta, int m, double* out);
LDG_API ldg_status ldg_theorem_bound(double alpha, int k, int m, double C, double* out);
LDG_API ldg_status ldg_mean_var_ratio_max(int k, double* out);
/* Measures on R^n: points row-major size x n. */
LDG_API ldg_status ldg_lda_bruteforce(size_t n, const double* p_points, const double* p_weights, size_t p_size,
                                      const double* q_points, const double* q_weights, size_t q_size, int k, int m,
                                      ldg_string** report_json);

/* Orthogonal polynomials. oracle: "normal", "product_normal" or "heavy_two_scale". */
LDG_API ldg_status ldg_christoffel(const char* oracle, int k, double x0, double* out);
LDG_API ldg_status ldg_basis_csv(const char* oracle, int k, ldg_string** csv);

/* Moment matching */
LDG_API void ldg_grid_default(ldg_grid_spec* spec);
/* On LDG_ERR_INFEASIBLE, *certificate_json (if non-NULL) receives the separating direction. */
LDG_API ldg_status ldg_solve_mu2(int k, double alpha, ldg_mu1 mu1, const ldg_grid_spec* grid, double residual_tol,
                                 ldg_measure** out, ldg_string** certificate_json);
LDG_API ldg_status ldg_max_alpha(int k, ldg_mu1 mu1, const ldg_grid_spec* grid, double bisect_tol, double* value,
                                 int* monotone);
LDG_API ldg_status ldg_assemble_planted(int k, ldg_mu1 mu1, const ldg_grid_spec* grid, double alpha, size_t n,
                                        ldg_planted** out);
LDG_API ldg_status ldg_planted_sample(const ldg_planted* spec, size_t m, uint64_t seed, ldg_batch** out);
LDG_API ldg_status ldg_planted_mu2(const ldg_planted* spec, ldg_measure** out);
LDG_API void ldg_planted_free(ldg_planted* spec);
LDG_API size_t ldg_measure_size(const ldg_measure* mu);
LDG_API size_t ldg_measure_dim(const ldg_measure* mu);
LDG_API double ldg_measure_point(const ldg_measure* mu, size_t i, size_t coord);
LDG_API double ldg_measure_weight(const ldg_measure* mu, size_t i);
LDG_API ldg_status ldg_measure_write_csv(const ldg_measure* mu, const char* path);
LDG_API void ldg_measure_free(ldg_measure* mu);
/* Depth of (1+delta) E_nu[Phi] for the degree-k index set. */
LDG_API ldg_status ldg_tukey_depth(int k, double delta, size_t samples, size_t directions, uint64_t seed, double* lower,
                                   double* upper);
/* p_beta = lambda^l1 z^l2; t NaN means the mean. out: estimate, standard error,
   C k (sqrt(k) delta)^(1/(2k)), C k delta^(1/k). */
LDG_API ldg_status ldg_anticonc_tail(int l1, int l2, double delta, double t, size_t trials, uint64_t seed, double C,
                                     double out[4]);
LDG_API ldg_status ldg_small_ball(double gamma, size_t n, size_t trials, uint64_t seed, double* estimate,
                                  double* standard_error);

/* Experiments. out_path NULL uses the config's output key; an empty path writes to stdout. */
LDG_API ldg_status ldg_experiment_validate(const char* config_path);
LDG_API ldg_status ldg_experiment_run(const char* config_path, unsigned threads, ldg_format format, const char* out_path,
                                      uint64_t* seed_override, ldg_string** aggregate_json);

#ifdef __cplusplus
}
#endif

#endif
