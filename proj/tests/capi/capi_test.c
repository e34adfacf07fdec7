/* Exercises the C interface from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "sosfield/sosfield.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static void count_lines(const char* text, void* user) {
  const char* p;
  for (p = text; *p; ++p)
    if (*p == '\n') ++*(int*)user;
}

int main(int argc, char** argv) {
  const char* out_dir = argc > 1 ? argv[1] : "capi_out";
  sosf_config* cfg = NULL;
  sosf_field* field = NULL;
  sosf_volume* vol = NULL;
  sosf_run_options opts;
  sosf_disorder_params dp = {0.0, 0.0, 0.0, 0.0, 10.0, 1};
  sosf_peierls_constants pc;
  sosf_mcmc_params mp;
  sosf_roughness_report rr;
  sosf_representation_report rep;
  int site[3] = {0, 0, 0};
  int h1[1] = {1};
  int h4[4] = {0, 1, 0, 0};
  double x = 0.0, y = 0.0, bar = 0.0;
  int lines = 0;

  EXPECT(strncmp(sosf_version(), "sosfield", 8) == 0);
  EXPECT(strcmp(sosf_status_name(SOSF_CONFIG_ERROR), "config error") == 0);
  EXPECT(strcmp(sosf_status_name((sosf_status)42), "unknown status") == 0);

  /* Errors come back as status codes with a message. */
  EXPECT(sosf_config_parse("[model]\nq = -1\n", &cfg) == SOSF_CONFIG_ERROR);
  EXPECT(cfg == NULL);
  EXPECT(strlen(sosf_last_error()) > 0);
  EXPECT(sosf_config_load("/nonexistent.ini", &cfg) == SOSF_CONFIG_ERROR);
  EXPECT(sosf_config_parse(NULL, &cfg) == SOSF_INVALID_ARGUMENT);
  EXPECT(sosf_volume_box(0, 3, &vol) != SOSF_OK);

  /* Field and potential. */
  EXPECT(sosf_field_create(&dp, &field) == SOSF_OK);
  EXPECT(strlen(sosf_last_error()) == 0);
  EXPECT(sosf_field_eta(field, site, 0, &x) == SOSF_OK && x == 0.0);
  EXPECT(sosf_potential(field, site, 0.0, 8, &x, &bar) == SOSF_OK);
  EXPECT(fabs(x + log(1.0 + 2.0 * exp(-50.0))) < 1e-15);
  EXPECT(sosf_kernel_prob(field, site, 0.0, 0, 8, &x) == SOSF_OK);
  EXPECT(fabs(x - 1.0) < 1e-15);
  EXPECT(sosf_kernel_prob(field, NULL, 0.0, 0, 8, &x) == SOSF_INVALID_ARGUMENT);

  /* Single site: R = q / (1 + 4q), effective energy (m*^2/2)(1 - 1/(1 + 4q)). */
  EXPECT(sosf_volume_box(2, 1, &vol) == SOSF_OK);
  EXPECT(sosf_volume_size(vol) == 1);
  EXPECT(sosf_resolvent_entry(vol, 0.1, 0, 0, &x) == SOSF_OK);
  EXPECT(fabs(x - 1.0 / 14.0) < 1e-15);
  EXPECT(sosf_resolvent_entry(vol, 0.1, 0, 3, &x) == SOSF_INVALID_ARGUMENT);
  EXPECT(sosf_resolvent_entry(vol, -2.0, 0, 0, &x) != SOSF_OK);
  EXPECT(sosf_effective_energy(vol, field, 0.1, h1, &x) == SOSF_OK);
  EXPECT(fabs(x - 50.0 * (1.0 - 1.0 / 1.4)) < 1e-11);
  sosf_volume_free(vol);

  EXPECT(sosf_volume_box(2, 2, &vol) == SOSF_OK);
  EXPECT(sosf_volume_site(vol, 3, site) == SOSF_OK && site[0] == 1 && site[1] == 1);
  EXPECT(sosf_effective_energy(vol, field, 0.1, h4, &x) == SOSF_OK);
  EXPECT(sosf_ferro_energy(vol, field, 0.1, h4, &y) == SOSF_OK);
  EXPECT(fabs(x - y) < 1e-10 * fabs(x));

  EXPECT(sosf_peierls_constants_compute(2, 0.1, 10.0, 0.0, &pc) == SOSF_OK);
  EXPECT(pc.range_r == 6);
  EXPECT(fabs(pc.alpha - 0.5 * log(3.5)) < 1e-15);

  EXPECT(sosf_representation_audit(vol, field, 0.1, 1, 1, &rep) == SOSF_OK);
  EXPECT(rep.configurations == 81);
  EXPECT(rep.rho_nonneg && rep.peierls_violations == 0);
  EXPECT(rep.max_log_k_deviation <= 1e-8 + rep.bar);

  sosf_mcmc_params_init(&mp);
  mp.sweeps = 2000;
  mp.burn_in = 100;
  EXPECT(sosf_roughness_run(vol, field, 0.1, &mp, 3, &rr) == SOSF_OK);
  EXPECT(rr.samples > 0);
  EXPECT(fabs(rr.total - rr.gaussian_part - rr.centering_part) < 1e-12);
  sosf_volume_free(vol);
  sosf_field_free(field);

  /* A command end to end through the log callback. */
  EXPECT(sosf_config_parse("[model]\nside = 2\n[disorder]\naudit_samples = 10000\n", &cfg) == SOSF_OK);
  sosf_run_options_init(&opts);
  opts.out_dir = out_dir;
  opts.log = count_lines;
  opts.log_user = &lines;
  EXPECT(sosf_cmd_potential_dump(cfg, &opts) == SOSF_OK);
  EXPECT(lines >= 1);
  EXPECT(sosf_cmd_verify(NULL, &opts) == SOSF_INVALID_ARGUMENT);
  sosf_config_free(cfg);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
