/* epibranch: discrete-time multi-type branching epidemic model.
 *
 * C interface of the shared library. All functions return eb_status; failing
 * calls leave a message retrievable with eb_last_error() (thread-local).
 * Handles are opaque and freed with their matching *_free function.
 */
#ifndef EPIBRANCH_H
#define EPIBRANCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eb_status {
  EB_OK = 0,
  EB_ERR_INVALID_ARGUMENT = 1,
  EB_ERR_IO = 2,
  EB_ERR_NUMERIC = 3,
  EB_ERR_INTERNAL = 4
} eb_status;

const char* eb_version(void);
const char* eb_last_error(void);

/* ---- disease parameters ---- */

typedef struct eb_params eb_params;

eb_status eb_params_baseline(eb_params** out);
eb_status eb_params_load(const char* path, eb_params** out);
eb_status eb_params_save(const eb_params* params, const char* path);
eb_status eb_params_from_json(const char* json_text, eb_params** out);
eb_status eb_params_set_contact_rates(eb_params* params, double alpha_i, double alpha_a);
/* horizon h; the state vector has 5h+1 entries */
int eb_params_horizon(const eb_params* params);
size_t eb_params_dim(const eb_params* params);
void eb_params_free(eb_params* params);

/* ---- mean-field model ---- */

typedef struct eb_matrix eb_matrix;

eb_status eb_matrix_build(const eb_params* params, eb_matrix** out);
size_t eb_matrix_dim(const eb_matrix* m);
/* copies the dense matrix, row-major, into out (len >= dim*dim) */
eb_status eb_matrix_copy(const eb_matrix* m, double* out, size_t len);
/* Perron root by power iteration; eigvec (1-norm normalized, nonnegative) is
 * optional and must have room for dim entries when given */
eb_status eb_matrix_spectral_radius(const eb_matrix* m, double* lambda, double* eigvec,
                                    size_t eigvec_len);
void eb_matrix_free(eb_matrix* m);

/* trajectory[t] = M^t x0; out is (days+1) x dim, row-major */
eb_status eb_simulate_meanfield(const eb_params* params, const double* x0, size_t dim,
                                int days, double* out);

/* one stochastic path of the branching process; out is (days+1) x dim */
eb_status eb_simulate_stochastic(const eb_params* params, const int64_t* x0, size_t dim,
                                 int days, uint64_t seed, uint64_t stream, int64_t* out);

/* exp(slope) of the least-squares line through (t, log series(t)) */
eb_status eb_growth_rate(const double* series, size_t len, double* lambda_hat);

/* ---- command-level interface ----
 *
 * Runs one CLI-style command described by a JSON object (the same schema the
 * epibranch tool produces from its flags; see the README). Output files plus
 * manifest.json land in the configured out directory. On success the manifest
 * path is copied into manifest_path (when non-NULL).
 */
eb_status eb_run(const char* config_json, char* manifest_path, size_t manifest_path_len);

#ifdef __cplusplus
}
#endif

#endif /* EPIBRANCH_H */
