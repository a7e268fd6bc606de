#ifndef BFEKF_BFEKF_H
#define BFEKF_BFEKF_H

#include <stddef.h>
#include <stdint.h>

#if defined(BFEKF_BUILDING_LIBRARY)
#define BFEKF_API __attribute__((visibility("default")))
#else
#define BFEKF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returning bfekf_status leaves outputs untouched on error and
 * records a message retrievable with bfekf_last_error() on the same thread. */
typedef enum bfekf_status {
  BFEKF_OK = 0,
  BFEKF_ERR_INVALID_ARGUMENT = 1, /* null pointer, bad enum, short buffer */
  BFEKF_ERR_SHAPE = 2,
  BFEKF_ERR_CONFIG = 3,
  BFEKF_ERR_NUMERICAL = 4,
  BFEKF_ERR_UNSUPPORTED = 5,
  BFEKF_ERR_DOMAIN = 6,
  BFEKF_ERR_IO = 7,
  BFEKF_ERR_OUT_OF_MEMORY = 8,
  BFEKF_ERR_INTERNAL = 9
} bfekf_status;

typedef enum bfekf_family { BFEKF_WENDLAND = 0, BFEKF_GAUSSIAN = 1 } bfekf_family;
typedef enum bfekf_method { BFEKF_DENSE = 0, BFEKF_CSRBF = 1, BFEKF_FAST_CSRBF = 2 } bfekf_method;
typedef enum bfekf_ordering { BFEKF_STAGGERED = 0, BFEKF_STACKED = 1 } bfekf_ordering;

/* Basis family with its scale (support for Wendland, length scale for
 * Gaussian) and the prior variance of every weight. */
typedef struct bfekf_basis_spec {
  bfekf_family family;
  double scale;
  double prior_weight_variance;
} bfekf_basis_spec;

typedef struct bfekf_grid bfekf_grid;
typedef struct bfekf_model bfekf_model;
typedef struct bfekf_estimator bfekf_estimator;
typedef struct bfekf_report bfekf_report;

BFEKF_API const char* bfekf_version(void);
/* Message of the last failed call on this thread; "" if none. */
BFEKF_API const char* bfekf_last_error(void);
BFEKF_API const char* bfekf_status_name(bfekf_status status);

/* Wendland function value and derivative at normalized radius r >= 0. */
BFEKF_API bfekf_status bfekf_wendland(double r, double* value, double* derivative);

/* Bits needed for the weight covariance and mean. */
BFEKF_API bfekf_status bfekf_memory_estimate(uint64_t weights_per_output, uint64_t outputs, uint64_t bits_per_number,
                                             uint64_t* covariance_bits, uint64_t* mean_bits);

/* Regular grid of centers lower + k * spacing per dimension. */
BFEKF_API bfekf_status bfekf_grid_regular(size_t dims, const double* lower, const double* upper, double spacing,
                                          bfekf_grid** out);
BFEKF_API bfekf_status bfekf_grid_size(const bfekf_grid* grid, size_t* centers);
BFEKF_API bfekf_status bfekf_grid_dims(const bfekf_grid* grid, size_t* dims);
/* Writes dims coordinates of center `index`. */
BFEKF_API bfekf_status bfekf_grid_center(const bfekf_grid* grid, size_t index, double* coordinates);
BFEKF_API void bfekf_grid_free(bfekf_grid* grid);

/* Indices (ascending) of the basis functions active at x. fast != 0 selects
 * the box enumeration; Gaussian bases return every index. *count receives the
 * number of active functions even when it exceeds capacity, in which case
 * BFEKF_ERR_INVALID_ARGUMENT is returned. */
BFEKF_API bfekf_status bfekf_active_set(const bfekf_grid* grid, const bfekf_basis_spec* basis, const double* x,
                                        int fast, size_t* indices, size_t capacity, size_t* count);

/* Constant-velocity model in 2D with a learned acceleration of position.
 * process_variance and measurement_variance scale identity covariances. */
BFEKF_API bfekf_status bfekf_model_cv(const bfekf_grid* grid, const bfekf_basis_spec* basis, double sample_time,
                                      double process_variance, double measurement_variance, double weight_noise,
                                      bfekf_ordering ordering, bfekf_model** out);

/* x+ = F x + Gf u_f(D x) + w, y = H x + e. Matrices are row-major:
 * F n_x*n_x, Gf n_x*J, H n_y*n_x, D P*n_x, Q n_x*n_x, R n_y*n_y. */
BFEKF_API bfekf_status bfekf_model_linear(const bfekf_grid* grid, const bfekf_basis_spec* basis, size_t nx, size_t ny,
                                          size_t outputs, const double* F, const double* Gf, const double* H,
                                          const double* D, const double* Q, const double* R, double weight_noise,
                                          bfekf_ordering ordering, bfekf_model** out);

/* Longitudinal tire-friction model over a 1D slip grid with default vehicle
 * constants; exact_coupling != 0 keeps the weight term of the observation. */
BFEKF_API bfekf_status bfekf_model_tire(const bfekf_grid* grid, const bfekf_basis_spec* basis, double process_variance,
                                        double weight_noise, int exact_coupling, bfekf_model** out);
BFEKF_API bfekf_status bfekf_model_dims(const bfekf_model* model, size_t* nx, size_t* ny, size_t* nu,
                                        size_t* outputs, size_t* weights);
BFEKF_API void bfekf_model_free(bfekf_model* model);

/* Estimator over a model; the model may be freed afterwards. P0 is row-major. */
BFEKF_API bfekf_status bfekf_estimator_create(const bfekf_model* model, bfekf_method method, const double* x0,
                                              const double* P0, bfekf_estimator** out);
BFEKF_API bfekf_status bfekf_estimator_predict(bfekf_estimator* est, const double* u, size_t nu);
BFEKF_API bfekf_status bfekf_estimator_correct(bfekf_estimator* est, const double* y, size_t ny, const double* u,
                                               size_t nu);
/* New state prior; the learned weights are kept. */
BFEKF_API bfekf_status bfekf_estimator_restart(bfekf_estimator* est, const double* x0, const double* P0);
BFEKF_API bfekf_status bfekf_estimator_state(const bfekf_estimator* est, double* x, size_t nx);
BFEKF_API bfekf_status bfekf_estimator_covariance(const bfekf_estimator* est, double* P, size_t nx);
/* Mean (J) and row-major covariance (J*J, may be null) of u_f at z. */
BFEKF_API bfekf_status bfekf_estimator_query(const bfekf_estimator* est, const double* z, size_t nz, double* mean,
                                             double* covariance, size_t outputs);
BFEKF_API bfekf_status bfekf_estimator_stored_weights(const bfekf_estimator* est, size_t* count);
BFEKF_API bfekf_status bfekf_estimator_write_snapshot(const bfekf_estimator* est, const char* path);
BFEKF_API void bfekf_estimator_free(bfekf_estimator* est);

/* Experiment runner. config_path, methods ("dense,csrbf", "all") and
 * nw_sweep ("1000,2000") may be null; runs <= 0 keeps the config's count.
 * write_outputs == 0 skips the results directory. */
typedef struct bfekf_run_request {
  const char* experiment;
  const char* config_path;
  uint64_t seed;
  int runs;
  const char* out_dir;
  const char* methods;
  const char* nw_sweep;
  int write_outputs;
} bfekf_run_request;

BFEKF_API bfekf_status bfekf_run_experiment(const bfekf_run_request* request, bfekf_report** out);
/* Valid until the report is freed. */
BFEKF_API const char* bfekf_report_metrics_json(const bfekf_report* report);
BFEKF_API const char* bfekf_report_directory(const bfekf_report* report);
BFEKF_API void bfekf_report_free(bfekf_report* report);

#ifdef __cplusplus
}
#endif

#endif
