#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "contours.hpp"
#include "gibbs.hpp"
#include "heights.hpp"
#include "pool.hpp"
#include "potential.hpp"

namespace sosf::app {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

void finish(std::ofstream& os, const fs::path& p) {
  os.flush();
  if (!os) throw IoError("write failed: " + p.string());
}

DisorderParams params_for(const RunConfig& c, std::uint64_t seed) {
  DisorderParams p = c.disorder;
  p.mstar = c.mstar;
  p.seed = seed;
  return p;
}

std::vector<std::uint64_t> seeds_of(const RunConfig& c, const RunOptions& o) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s : c.seeds) out.push_back(s + o.seed_offset);
  return out;
}

Site center_site(const Volume& v) {
  Site x = v.lo;
  for (int k = 0; k < v.dim; ++k) x[k] = v.lo[k] + (v.hi[k] - v.lo[k]) / 2;
  return x;
}

void site_header(std::ostream& os, int dim) {
  for (int k = 0; k < dim; ++k) os << ",x_" << k + 1;
}

void site_cols(std::ostream& os, const Site& x, int dim) {
  for (int k = 0; k < dim; ++k) os << ',' << x[k];
}

MCMCParams chain_params(const RunConfig& c) {
  MCMCParams p = c.mcmc;
  return p;
}

}  // namespace

std::string output_dir(const RunConfig& c, const RunOptions& o) { return o.out_dir.empty() ? c.output_dir : o.out_dir; }

VerifyReport run_verify(const RunConfig& c, const RunOptions& o) {
  const std::uint64_t seed = c.seeds.front() + o.seed_offset;
  const DisorderParams p = params_for(c, seed);
  VerifyReport r;
  auto add = [&](AuditResult a) {
    if (!a.passed && r.passed) {
      r.passed = false;
      r.first_failure = a.name;
    }
    r.audits.push_back(std::move(a));
  };
  add(audit_normalization(p, 50, 200, c.window));
  add(audit_resolvent_walks(c.q, 30));
  add(audit_energy_triple(2, 3, c.q, p, 100));
  add(audit_factorization(c.q, p, c.factor_hmax, c.quadrature_nodes, o.threads));
  add(audit_representation(c.q, p, o.threads));
  add(audit_peierls(c.q, p));
  add(audit_gradient_volume(2, c.q, c.mstar, c.disorder.delta_d, c.gradient_volume_configs, seed));
  add(audit_gaussian_bounds(c.gaussian_draws, 100, seed));
  add(audit_disorder(p, c.audit_samples));
  return r;
}

int cmd_verify(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const VerifyReport r = run_verify(c, o);
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["config"] = c.text;
  j["seed_offset"] = o.seed_offset;
  j["passed"] = r.passed;
  j["first_failure"] = r.first_failure;
  j["audits"] = nlohmann::ordered_json::array();
  for (const AuditResult& a : r.audits) {
    nlohmann::ordered_json e;
    e["name"] = a.name;
    e["passed"] = a.passed;
    e["margin"] = a.margin;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : a.metrics) m[k] = v;
    e["metrics"] = m;
    if (!a.detail.empty()) e["detail"] = a.detail;
    j["audits"].push_back(e);
    log << (a.passed ? "PASS " : "FAIL ") << a.name << " margin=" << num(a.margin) << "\n";
  }
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const fs::path path = dir / "verify.json";
  std::ofstream os = open_out(path);
  os << j.dump(2) << "\n";
  finish(os, path);
  log << "wrote " << path.string() << "\n";
  if (!r.passed) {
    log << "first failing audit: " << r.first_failure << "\n";
    return kExitAudit;
  }
  return kExitOk;
}

int cmd_sample(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const Volume v = make_box(c.dimension, c.side);
  const CouplingSet cs = couplings(v, c.q, c.mstar, c.support_cutoff);
  const GaussianSampler gs(v, c.q);
  const Site x0 = center_site(v);
  const std::vector<std::uint64_t> seeds = seeds_of(c, o);
  std::vector<std::string> lines(seeds.size());
  parallel_for(seeds.size(), o.threads, [&](std::size_t t) {
    const std::uint64_t seed = seeds[t];
    const DisorderField f(params_for(c, seed));
    Rng chain(hash_words({seed, 0x5A}));
    Rng draws(hash_words({seed, 0x5B}));
    const RealConfig bc = zero_bc(v);
    RoughnessEstimator est(v, f, c.q, x0);
    std::map<int, long> hist;
    const fs::path csv = dir / ("sample_seed" + std::to_string(seed) + ".csv");
    std::ofstream os = open_out(csv);
    os << config_echo(c) << "# seed: " << seed << "\n"
       << "# one row per (thinned sample, site); h integer height, m continuous field\n"
       << "sample";
    site_header(os, v.dim);
    os << ",h,m\n";
    long k = 0;
    const ChainDiagnostics diag = nu_mcmc(cs, f, chain, chain_params(c), [&](const HeightConfig& h) {
      const JointState js = sample_gibbs(v, f, c.q, bc, h, gs, draws);
      for (std::size_t i = 0; i < v.size(); ++i) {
        os << k;
        site_cols(os, v.sites[i], v.dim);
        os << ',' << h[i] << ',' << num(js.m[i]) << '\n';
        ++hist[h[i]];
      }
      est.add(h);
      ++k;
    });
    finish(os, csv);

    const RoughnessReport rr = est.report();
    const fs::path txt = dir / ("roughness_seed" + std::to_string(seed) + ".txt");
    std::ofstream rt = open_out(txt);
    rt << config_echo(c) << "seed = " << seed << "\nx0 =";
    for (int a = 0; a < v.dim; ++a) rt << ' ' << x0[a];
    rt << "\nsamples = " << rr.samples << "\ngaussian_part = " << num(rr.gaussian_part)
       << "\ncentering_part = " << num(rr.centering_part) << "\ncentering_se = " << num(rr.centering_se)
       << "\ntotal = " << num(rr.total) << "\nsummability = " << num(rr.summability)
       << "\nsweeps = " << diag.sweeps << "\nchange_rate = " << num(diag.change_rate)
       << "\nshift_acceptance = " << num(diag.shift_acceptance) << "\ntau_int = " << num(diag.tau_int) << "\n";
    finish(rt, txt);

    const fs::path hp = dir / ("heights_seed" + std::to_string(seed) + ".csv");
    std::ofstream hs = open_out(hp);
    hs << config_echo(c) << "# site-height counts over all samples and sites\nh,count\n";
    for (const auto& [h, n] : hist) hs << h << ',' << n << '\n';
    finish(hs, hp);
    lines[t] = "wrote " + csv.string() + ", " + txt.string() + ", " + hp.string() + "\n";
  });
  for (const std::string& l : lines) log << l;
  return kExitOk;
}

int cmd_nu(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const Volume v = make_box(c.dimension, c.side);
  const double count = std::pow(2.0 * c.hmax + 1.0, static_cast<double>(v.size()));
  const bool exact = count <= 1e5;
  const std::vector<std::uint64_t> seeds = seeds_of(c, o);
  std::unique_ptr<CouplingSet> cs;
  if (!exact) cs = std::make_unique<CouplingSet>(couplings(v, c.q, c.mstar, c.support_cutoff));
  std::vector<std::string> lines(seeds.size());
  parallel_for(seeds.size(), o.threads, [&](std::size_t t) {
    const std::uint64_t seed = seeds[t];
    const DisorderField f(params_for(c, seed));
    const fs::path path = dir / ("nu_seed" + std::to_string(seed) + ".csv");
    std::ofstream os = open_out(path);
    os << config_echo(c) << "# seed: " << seed << "\n";
    if (exact) {
      const NuTable tab = nu_exact(v, f, c.q, c.hmax);
      os << "# exact height marginal over |h| <= " << c.hmax << "; omitted_mass_bound = "
         << num(tab.omitted_mass_bound) << "\nconfig";
      for (std::size_t i = 0; i < v.size(); ++i) os << ",h_" << i + 1;
      os << ",prob\n";
      for (std::size_t k = 0; k < tab.prob.size(); ++k) {
        os << k;
        for (int h : tab.config(k)) os << ',' << h;
        os << ',' << num(tab.prob[k]) << '\n';
      }
    } else {
      std::map<std::pair<std::size_t, int>, long> counts;
      long samples = 0;
      Rng rng(hash_words({seed, 0x5C}));
      nu_mcmc(*cs, f, rng, chain_params(c), [&](const HeightConfig& h) {
        for (std::size_t i = 0; i < v.size(); ++i) ++counts[{i, h[i]}];
        ++samples;
      });
      os << "# Monte Carlo single-site marginals, " << samples << " samples\nsite";
      site_header(os, v.dim);
      os << ",h,frequency\n";
      for (const auto& [key, n] : counts) {
        os << key.first;
        site_cols(os, v.sites[key.first], v.dim);
        os << ',' << key.second << ',' << num(static_cast<double>(n) / samples) << '\n';
      }
    }
    finish(os, path);
    lines[t] = "wrote " + path.string() + "\n";
  });
  for (const std::string& l : lines) log << l;
  return kExitOk;
}

int cmd_contours(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const Volume v = make_box(c.dimension, c.side);
  const CouplingSet cs = couplings(v, c.q, c.mstar, c.support_cutoff);
  const PeierlsConstants pc = peierls_constants(c.dimension, c.q, c.mstar, c.disorder.delta_d);
  const std::vector<std::uint64_t> seeds = seeds_of(c, o);
  std::vector<std::string> lines(seeds.size());
  bool negative = false;
  std::vector<char> neg(seeds.size(), 0);
  parallel_for(seeds.size(), o.threads, [&](std::size_t t) {
    const std::uint64_t seed = seeds[t];
    const DisorderField f(params_for(c, seed));
    Rng rng(hash_words({seed, 0x5D}));
    std::map<std::size_t, long> size_hist;
    std::map<long, long> es_hist;
    const fs::path csv = dir / ("contours_seed" + std::to_string(seed) + ".csv");
    std::ofstream os = open_out(csv);
    os << config_echo(c) << "# seed: " << seed << "\n# beta = " << num(pc.beta) << ", tau1 = " << num(pc.tau1)
       << ", r = " << pc.range_r << "\n# margin = log_bound - log(rho_lt)\n"
       << "sample,component,support_size,E_s,rho_lt,log_bound,margin\n";
    long k = 0;
    nu_mcmc(cs, f, rng, chain_params(c), [&](const HeightConfig& h) {
      const std::vector<Contour> comps = components(lt_support(v, h, pc));
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const Contour& g = comps[i];
        const long es = surface_energy(g);
        const double rho = lt_activity(cs, f, g, pc);
        const double lb = peierls_log_bound(g, pc.beta, pc.tau1);
        const double margin = lb - std::log(rho);
        if (margin < -1e-12) neg[t] = 1;
        os << k << ',' << i << ',' << g.size() << ',' << es << ',' << num(rho) << ',' << num(lb) << ','
           << num(margin) << '\n';
        ++size_hist[g.size()];
        ++es_hist[es];
      }
      ++k;
    });
    finish(os, csv);
    const fs::path txt = dir / ("contour_hist_seed" + std::to_string(seed) + ".txt");
    std::ofstream hs = open_out(txt);
    hs << config_echo(c) << "samples = " << k << "\n[support_size]\n";
    for (const auto& [s, n] : size_hist) hs << s << " = " << n << '\n';
    hs << "[surface_energy]\n";
    for (const auto& [s, n] : es_hist) hs << s << " = " << n << '\n';
    finish(hs, txt);
    lines[t] = "wrote " + csv.string() + ", " + txt.string() + "\n";

    // Small volumes also get the enumerated representation table.
    const double count = std::pow(2.0 * c.hmax + 1.0, static_cast<double>(v.size()));
    if (v.size() <= 12 && count <= 1e4) {
      RepresentationCutoffs cut;
      cut.polymer_size = c.polymer_size;
      cut.support_cutoff = c.support_cutoff;
      const Representation rep = assemble_representation(v, f, c.q, c.hmax, cut);
      const fs::path tp = dir / ("representation_seed" + std::to_string(seed) + ".csv");
      std::ofstream ts = open_out(tp);
      ts << config_echo(c) << "# log_K = " << num(rep.log_k) << ", max_log_K_deviation = "
         << num(rep.audit.max_log_k_deviation) << "\n# bound is log of exp(-beta E_s - tilde_beta |support|)\n"
         << "config,support_size,E_s,rho0,bound,margin\n";
      for (const Rho0Entry& e : rep.rho0) {
        const double margin = e.value > 0.0 ? e.log_bound - std::log(e.value) : INFINITY;
        if (margin < -1e-12) neg[t] = 1;
        ts << e.config << ',' << e.support_size << ',' << e.surface_energy << ',' << num(e.value) << ','
           << num(e.log_bound) << ',' << num(margin) << '\n';
      }
      finish(ts, tp);
      lines[t] += "wrote " + tp.string() + "\n";
    }
  });
  for (const std::string& l : lines) log << l;
  for (char b : neg) negative = negative || b;
  if (negative) {
    log << "negative activity margin found\n";
    return kExitAudit;
  }
  return kExitOk;
}

int cmd_potential_dump(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const std::uint64_t seed = c.seeds.front() + o.seed_offset;
  const DisorderField f(params_for(c, seed));
  const Site x{};
  const fs::path path = dir / "potential.csv";
  std::ofstream os = open_out(path);
  os << config_echo(c) << "# seed: " << seed << ", site at the origin\nm,V";
  for (int h = -3; h <= 3; ++h) os << ",T_" << h;
  os << '\n';
  for (int i = 0; i <= 600; ++i) {
    const double m = c.mstar * (-3.0 + i / 100.0);
    const KernelEval ke = kernel(f, x, m, c.window);
    os << num(m) << ',' << num(potential_value(f, x, m, c.window).value);
    for (int h = -3; h <= 3; ++h) os << ',' << num(ke.prob(h));
    os << '\n';
  }
  finish(os, path);
  log << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_disorder_audit(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const fs::path dir = output_dir(c, o);
  fs::create_directories(dir);
  const Volume v = make_box(c.dimension, c.side);
  const std::vector<std::uint64_t> seeds = seeds_of(c, o);
  std::vector<std::string> lines(seeds.size());
  std::vector<char> ok(seeds.size(), 1);
  parallel_for(seeds.size(), o.threads, [&](std::size_t t) {
    const std::uint64_t seed = seeds[t];
    const DisorderParams p = params_for(c, seed);
    const DisorderAudit a = audit_conditions(p, c.audit_samples);
    ok[t] = a.passed();
    const fs::path txt = dir / ("disorder_audit_seed" + std::to_string(seed) + ".txt");
    std::ofstream os = open_out(txt);
    os << config_echo(c) << "seed = " << seed << "\nsamples = " << a.n_samples
       << "\neta_bound_violations = " << a.eta_bound_violations << "\nd_bound_violations = " << a.d_bound_violations
       << "\neta_scale = " << num(a.eta_scale) << "\nd_scale = " << num(a.d_scale) << "\nmean_d2 = " << num(a.mean_d2)
       << "\npassed = " << (a.passed() ? "true" : "false") << "\n";
    for (const auto& [label, set] : {std::pair{"eta_tail", &a.eta_tail}, std::pair{"d_tail", &a.d_tail}}) {
      os << "[" << label << "]\n";
      for (const TailCheck& tc : *set)
        os << "t = " << num(tc.t) << ", empirical = " << num(tc.empirical) << ", bound = " << num(tc.bound)
           << ", ok = " << (tc.ok ? "true" : "false") << '\n';
    }
    finish(os, txt);
    const fs::path csv = dir / ("disorder_snapshot_seed" + std::to_string(seed) + ".csv");
    std::ofstream ss = open_out(csv);
    ss << config_echo(c);
    export_snapshot(ss, DisorderField(p), v, c.hmax);
    finish(ss, csv);
    lines[t] = "wrote " + txt.string() + ", " + csv.string() + "\n";
  });
  for (const std::string& l : lines) log << l;
  for (char b : ok)
    if (!b) return kExitAudit;
  return kExitOk;
}

}  // namespace sosf::app
