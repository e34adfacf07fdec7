#include "sosfield/sosfield.h"

#include <filesystem>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "contours.hpp"
#include "heights.hpp"
#include "potential.hpp"

struct sosf_config {
  sosf::app::RunConfig c;
};

struct sosf_field {
  std::unique_ptr<sosf::DisorderField> f;
};

struct sosf_volume {
  sosf::Volume v;
};

namespace {

thread_local std::string g_error;

sosf_status fail(sosf_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

template <class F>
sosf_status guarded(F&& body) {
  try {
    g_error.clear();
    return body();
  } catch (const sosf::app::ConfigError& e) {
    return fail(SOSF_CONFIG_ERROR, e.what());
  } catch (const sosf::app::IoError& e) {
    return fail(SOSF_IO_ERROR, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SOSF_IO_ERROR, e.what());
  } catch (const sosf::DomainError& e) {
    return fail(SOSF_DOMAIN_ERROR, e.what());
  } catch (const sosf::SolverError& e) {
    return fail(SOSF_SOLVER_ERROR, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SOSF_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SOSF_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(SOSF_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(SOSF_INTERNAL_ERROR, "unknown error");
  }
}

sosf::Site to_site(const int* s) { return {s[0], s[1], s[2]}; }

using Command = int (*)(const sosf::app::RunConfig&, const sosf::app::RunOptions&, std::ostream&);

sosf_status run_command(Command cmd, const sosf_config* c, const sosf_run_options* o) {
  if (!c) return fail(SOSF_INVALID_ARGUMENT, "null config");
  sosf_run_options defaults;
  sosf_run_options_init(&defaults);
  if (!o) o = &defaults;
  if (o->threads < 1) return fail(SOSF_INVALID_ARGUMENT, "threads must be positive");
  return guarded([&] {
    sosf::app::RunOptions ro;
    ro.threads = o->threads;
    ro.seed_offset = o->seed_offset;
    if (o->out_dir) ro.out_dir = o->out_dir;
    std::ostringstream log;
    const int code = cmd(c->c, ro, log);
    if (o->log) o->log(log.str().c_str(), o->log_user);
    if (code == sosf::app::kExitAudit) {
      g_error = "audit failed";
      return SOSF_AUDIT_FAILED;
    }
    return SOSF_OK;
  });
}

}  // namespace

extern "C" {

const char* sosf_version(void) { return sosf::app::kVersion; }

const char* sosf_last_error(void) { return g_error.c_str(); }

const char* sosf_status_name(sosf_status s) {
  switch (s) {
    case SOSF_OK: return "ok";
    case SOSF_AUDIT_FAILED: return "audit failed";
    case SOSF_CONFIG_ERROR: return "config error";
    case SOSF_DOMAIN_ERROR: return "domain error";
    case SOSF_SOLVER_ERROR: return "solver error";
    case SOSF_IO_ERROR: return "io error";
    case SOSF_INTERNAL_ERROR: return "internal error";
    case SOSF_INVALID_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

sosf_status sosf_config_load(const char* path, sosf_config** out) {
  if (!path || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sosf_config{sosf::app::load_config(path)};
    return SOSF_OK;
  });
}

sosf_status sosf_config_parse(const char* text, sosf_config** out) {
  if (!text || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sosf_config{sosf::app::parse_config(text)};
    return SOSF_OK;
  });
}

void sosf_config_free(sosf_config* c) { delete c; }

void sosf_run_options_init(sosf_run_options* o) {
  if (!o) return;
  o->threads = 1;
  o->seed_offset = 0;
  o->out_dir = nullptr;
  o->log = nullptr;
  o->log_user = nullptr;
}

sosf_status sosf_cmd_verify(const sosf_config* c, const sosf_run_options* o) {
  return run_command(sosf::app::cmd_verify, c, o);
}
sosf_status sosf_cmd_sample(const sosf_config* c, const sosf_run_options* o) {
  return run_command(sosf::app::cmd_sample, c, o);
}
sosf_status sosf_cmd_nu(const sosf_config* c, const sosf_run_options* o) { return run_command(sosf::app::cmd_nu, c, o); }
sosf_status sosf_cmd_contours(const sosf_config* c, const sosf_run_options* o) {
  return run_command(sosf::app::cmd_contours, c, o);
}
sosf_status sosf_cmd_potential_dump(const sosf_config* c, const sosf_run_options* o) {
  return run_command(sosf::app::cmd_potential_dump, c, o);
}
sosf_status sosf_cmd_disorder_audit(const sosf_config* c, const sosf_run_options* o) {
  return run_command(sosf::app::cmd_disorder_audit, c, o);
}

sosf_status sosf_field_create(const sosf_disorder_params* p, sosf_field** out) {
  if (!p || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    sosf::DisorderParams dp;
    dp.sigma_eta = p->sigma_eta;
    dp.sigma_d = p->sigma_d;
    dp.delta_eta = p->delta_eta;
    dp.delta_d = p->delta_d;
    dp.mstar = p->mstar;
    dp.seed = p->seed;
    *out = new sosf_field{std::make_unique<sosf::DisorderField>(dp)};
    return SOSF_OK;
  });
}

void sosf_field_free(sosf_field* f) { delete f; }

sosf_status sosf_field_eta(const sosf_field* f, const int* site, int h, double* out) {
  if (!f || !site || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = f->f->eta(to_site(site), h);
    return SOSF_OK;
  });
}

sosf_status sosf_field_dshift(const sosf_field* f, const int* site, int h, double* out) {
  if (!f || !site || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = f->f->dshift(to_site(site), h);
    return SOSF_OK;
  });
}

sosf_status sosf_potential(const sosf_field* f, const int* site, double m, int window, double* value,
                           double* tail_bar) {
  if (!f || !site || !value) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sosf::PotentialValue pv = sosf::potential_value(*f->f, to_site(site), m, window);
    *value = pv.value;
    if (tail_bar) *tail_bar = pv.tail_bar;
    return SOSF_OK;
  });
}

sosf_status sosf_kernel_prob(const sosf_field* f, const int* site, double m, int h, int window, double* out) {
  if (!f || !site || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = sosf::kernel(*f->f, to_site(site), m, window).prob(h);
    return SOSF_OK;
  });
}

sosf_status sosf_volume_box(int dim, int side, sosf_volume** out) {
  if (!out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sosf_volume{sosf::make_box(dim, side)};
    return SOSF_OK;
  });
}

void sosf_volume_free(sosf_volume* v) { delete v; }

size_t sosf_volume_size(const sosf_volume* v) { return v ? v->v.size() : 0; }

sosf_status sosf_volume_site(const sosf_volume* v, size_t i, int* site3) {
  if (!v || !site3) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  if (i >= v->v.size()) return fail(SOSF_INVALID_ARGUMENT, "site index out of range");
  for (int k = 0; k < 3; ++k) site3[k] = v->v.sites[i][k];
  g_error.clear();
  return SOSF_OK;
}

sosf_status sosf_resolvent_entry(const sosf_volume* v, double q, size_t i, size_t j, double* out) {
  if (!v || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  if (i >= v->v.size() || j >= v->v.size()) return fail(SOSF_INVALID_ARGUMENT, "site index out of range");
  return guarded([&] {
    *out = sosf::resolvent_entry(v->v, q, v->v.sites[i], v->v.sites[j]);
    return SOSF_OK;
  });
}

sosf_status sosf_effective_energy(const sosf_volume* v, const sosf_field* f, double q, const int* h, double* out) {
  if (!v || !f || !h || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = sosf::effective_energy(v->v, *f->f, q, sosf::HeightConfig(h, h + v->v.size()));
    return SOSF_OK;
  });
}

sosf_status sosf_ferro_energy(const sosf_volume* v, const sosf_field* f, double q, const int* h, double* out) {
  if (!v || !f || !h || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sosf::CouplingSet cs = sosf::couplings(v->v, q, f->f->params().mstar);
    *out = sosf::ferro_energy(cs, *f->f, sosf::HeightConfig(h, h + v->v.size()));
    return SOSF_OK;
  });
}

sosf_status sosf_peierls_constants_compute(int dim, double q, double mstar, double delta_d,
                                           sosf_peierls_constants* out) {
  if (!out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sosf::PeierlsConstants pc = sosf::peierls_constants(dim, q, mstar, delta_d);
    *out = {pc.alpha, pc.range_r, pc.tau_nn, pc.beta, pc.K_vol, pc.tau1, pc.tilde_beta};
    return SOSF_OK;
  });
}

sosf_status sosf_representation_audit(const sosf_volume* v, const sosf_field* f, double q, int hmax, int threads,
                                      sosf_representation_report* out) {
  if (!v || !f || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  if (threads < 1) return fail(SOSF_INVALID_ARGUMENT, "threads must be positive");
  return guarded([&] {
    sosf::RepresentationCutoffs cut;
    cut.threads = threads;
    const sosf::Representation rep = sosf::assemble_representation(v->v, *f->f, q, hmax, cut);
    const sosf::RepresentationAudit& a = rep.audit;
    *out = {a.configurations,      a.ht1_polymers, a.ht2_polymers,        a.small_field_sets,
            rep.log_k,             a.max_log_k_deviation, a.bar,         a.max_subtraction_error,
            a.rho_nonneg ? 1 : 0,  a.peierls_violations,  a.worst_peierls_margin};
    return SOSF_OK;
  });
}

void sosf_mcmc_params_init(sosf_mcmc_params* p) {
  if (!p) return;
  const sosf::MCMCParams d;
  *p = {d.sweeps, d.burn_in, d.window, d.shift_every, d.thin, d.hmax};
}

sosf_status sosf_roughness_run(const sosf_volume* v, const sosf_field* f, double q, const sosf_mcmc_params* p,
                               uint64_t seed, sosf_roughness_report* out) {
  if (!v || !f || !p || !out) return fail(SOSF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    sosf::MCMCParams mp;
    mp.sweeps = p->sweeps;
    mp.burn_in = p->burn_in;
    mp.window = p->window;
    mp.shift_every = p->shift_every;
    mp.thin = p->thin;
    mp.hmax = p->hmax;
    const sosf::Volume& vol = v->v;
    sosf::Site x0 = vol.lo;
    for (int k = 0; k < vol.dim; ++k) x0[k] = vol.lo[k] + (vol.hi[k] - vol.lo[k]) / 2;
    const sosf::CouplingSet cs = sosf::couplings(vol, q, f->f->params().mstar);
    sosf::RoughnessEstimator est(vol, *f->f, q, x0);
    sosf::Rng rng(sosf::hash_words({seed, 0x5A}));
    const sosf::ChainDiagnostics d = sosf::nu_mcmc(cs, *f->f, rng, mp, [&](const sosf::HeightConfig& h) { est.add(h); });
    const sosf::RoughnessReport r = est.report();
    *out = {r.samples, r.gaussian_part, r.centering_part, r.centering_se, r.total, r.summability, d.change_rate,
            d.tau_int};
    return SOSF_OK;
  });
}

}  // extern "C"
