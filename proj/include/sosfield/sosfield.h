#ifndef SOSFIELD_SOSFIELD_H
#define SOSFIELD_SOSFIELD_H

#include <stddef.h>
#include <stdint.h>

#if defined(SOSF_BUILDING_LIBRARY)
#define SOSF_API __attribute__((visibility("default")))
#else
#define SOSF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sosf_status {
  SOSF_OK = 0,
  SOSF_AUDIT_FAILED = 1,
  SOSF_CONFIG_ERROR = 2,
  SOSF_DOMAIN_ERROR = 3,
  SOSF_SOLVER_ERROR = 4,
  SOSF_IO_ERROR = 5,
  SOSF_INTERNAL_ERROR = 6,
  SOSF_INVALID_ARGUMENT = 7
} sosf_status;

typedef struct sosf_config sosf_config;
typedef struct sosf_field sosf_field;
typedef struct sosf_volume sosf_volume;

SOSF_API const char* sosf_version(void);
/* Message of the last failing call on this thread; empty after success. */
SOSF_API const char* sosf_last_error(void);
SOSF_API const char* sosf_status_name(sosf_status s);

/* Configuration */
SOSF_API sosf_status sosf_config_load(const char* path, sosf_config** out);
SOSF_API sosf_status sosf_config_parse(const char* text, sosf_config** out);
SOSF_API void sosf_config_free(sosf_config* c);

typedef void (*sosf_log_fn)(const char* text, void* user);

typedef struct sosf_run_options {
  int threads;
  uint64_t seed_offset;
  const char* out_dir; /* NULL keeps output.directory */
  sosf_log_fn log;     /* NULL discards */
  void* log_user;
} sosf_run_options;

SOSF_API void sosf_run_options_init(sosf_run_options* o);

/* Commands return SOSF_OK, SOSF_AUDIT_FAILED or an error status. */
SOSF_API sosf_status sosf_cmd_verify(const sosf_config* c, const sosf_run_options* o);
SOSF_API sosf_status sosf_cmd_sample(const sosf_config* c, const sosf_run_options* o);
SOSF_API sosf_status sosf_cmd_nu(const sosf_config* c, const sosf_run_options* o);
SOSF_API sosf_status sosf_cmd_contours(const sosf_config* c, const sosf_run_options* o);
SOSF_API sosf_status sosf_cmd_potential_dump(const sosf_config* c, const sosf_run_options* o);
SOSF_API sosf_status sosf_cmd_disorder_audit(const sosf_config* c, const sosf_run_options* o);

/* Disorder */
typedef struct sosf_disorder_params {
  double sigma_eta;
  double sigma_d;
  double delta_eta;
  double delta_d;
  double mstar;
  uint64_t seed;
} sosf_disorder_params;

SOSF_API sosf_status sosf_field_create(const sosf_disorder_params* p, sosf_field** out);
SOSF_API void sosf_field_free(sosf_field* f);
/* site points to three ints; unused axes are ignored. */
SOSF_API sosf_status sosf_field_eta(const sosf_field* f, const int* site, int h, double* out);
SOSF_API sosf_status sosf_field_dshift(const sosf_field* f, const int* site, int h, double* out);
SOSF_API sosf_status sosf_potential(const sosf_field* f, const int* site, double m, int window, double* value,
                                    double* tail_bar);
SOSF_API sosf_status sosf_kernel_prob(const sosf_field* f, const int* site, double m, int h, int window, double* out);

/* Volumes: the box {0..side-1}^dim */
SOSF_API sosf_status sosf_volume_box(int dim, int side, sosf_volume** out);
SOSF_API void sosf_volume_free(sosf_volume* v);
SOSF_API size_t sosf_volume_size(const sosf_volume* v);
SOSF_API sosf_status sosf_volume_site(const sosf_volume* v, size_t i, int* site3);

SOSF_API sosf_status sosf_resolvent_entry(const sosf_volume* v, double q, size_t i, size_t j, double* out);
/* Effective height energy at zero boundary; h has sosf_volume_size entries. */
SOSF_API sosf_status sosf_effective_energy(const sosf_volume* v, const sosf_field* f, double q, const int* h,
                                           double* out);
SOSF_API sosf_status sosf_ferro_energy(const sosf_volume* v, const sosf_field* f, double q, const int* h,
                                       double* out);

typedef struct sosf_peierls_constants {
  double alpha;
  int range_r;
  double tau_nn;
  double beta;
  double K_vol;
  double tau1;
  double tilde_beta;
} sosf_peierls_constants;

SOSF_API sosf_status sosf_peierls_constants_compute(int dim, double q, double mstar, double delta_d,
                                                    sosf_peierls_constants* out);

typedef struct sosf_representation_report {
  size_t configurations;
  size_t ht1_polymers;
  size_t ht2_polymers;
  size_t small_field_sets;
  double log_k;
  double max_log_k_deviation;
  double bar;
  double max_subtraction_error;
  int rho_nonneg;
  long peierls_violations;
  double worst_peierls_margin;
} sosf_representation_report;

SOSF_API sosf_status sosf_representation_audit(const sosf_volume* v, const sosf_field* f, double q, int hmax,
                                               int threads, sosf_representation_report* out);

typedef struct sosf_mcmc_params {
  long sweeps;
  long burn_in;
  int window;
  int shift_every;
  int thin;
  int hmax; /* negative: untruncated */
} sosf_mcmc_params;

SOSF_API void sosf_mcmc_params_init(sosf_mcmc_params* p);

typedef struct sosf_roughness_report {
  long samples;
  double gaussian_part;
  double centering_part;
  double centering_se;
  double total;
  double summability;
  double change_rate;
  double tau_int;
} sosf_roughness_report;

/* Chain over the height marginal, roughness at the centre site. */
SOSF_API sosf_status sosf_roughness_run(const sosf_volume* v, const sosf_field* f, double q,
                                        const sosf_mcmc_params* p, uint64_t seed, sosf_roughness_report* out);

#ifdef __cplusplus
}
#endif

#endif
