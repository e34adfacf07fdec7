#include "audits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "contours.hpp"
#include "gibbs.hpp"
#include "heights.hpp"
#include "pool.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace sosf::app {

namespace {

DisorderParams reseeded(const DisorderParams& p, std::uint64_t tag, std::uint64_t k) {
  DisorderParams out = p;
  out.seed = hash_words({p.seed, tag, k});
  return out;
}

}  // namespace

AuditResult audit_normalization(const DisorderParams& p, int draws, int grid, int window) {
  AuditResult r;
  r.name = "normalization_identity";
  double worst = 0.0, margin = std::numeric_limits<double>::infinity(), sum_dev = 0.0;
  for (int k = 0; k < draws; ++k) {
    const DisorderField f(reseeded(p, 0xA1, k));
    const Site x{k, 0, 0};
    for (int i = 0; i < grid; ++i) {
      const double m = p.mstar * (-1.5 + 3.0 * i / (grid - 1.0));
      const KernelEval ke = kernel(f, x, m, window);
      const PotentialValue pv = potential_value(f, x, m, window);
      const double err = std::abs(ke.norm * std::exp(pv.value) - 1.0);
      const double tol = 1e-10 + pv.tail_bar + ke.tail_mass_bound;
      double s = 0.0;
      for (double pr : ke.probs) s += pr;
      sum_dev = std::max(sum_dev, std::abs(s - 1.0));
      worst = std::max(worst, err);
      margin = std::min(margin, tol - err);
    }
  }
  r.passed = margin >= 0.0 && sum_dev <= 1e-12;
  r.margin = margin;
  r.metric("max_identity_error", worst);
  r.metric("max_prob_sum_deviation", sum_dev);
  r.metric("points", static_cast<double>(draws) * grid);
  return r;
}

AuditResult audit_resolvent_walks(double q, int max_len) {
  AuditResult r;
  r.name = "resolvent_walk_decomposition";
  double margin = std::numeric_limits<double>::infinity(), worst = 0.0, max_tail = 0.0;
  for (const Volume& v : {make_box(1, 4), make_box(2, 2)}) {
    const std::size_t n = v.size();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n), tails = Eigen::MatrixXd::Zero(n, n);
    for (const auto& c : connected_subsets(v, 1, n)) {
      std::vector<Site> pts;
      for (std::size_t i : c) pts.push_back(v.sites[i]);
      double tail = 0.0;
      const Eigen::MatrixXd R = walk_resolvent_matrix(v.dim, pts, q, max_len, &tail);
      for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = 0; b < c.size(); ++b) {
          sum(c[a], c[b]) += R(a, b);
          tails(c[a], c[b]) += tail;
        }
    }
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) {
        const double exact = resolvent_entry(v, q, v.sites[x], v.sites[y]);
        const double err = std::abs(sum(x, y) - exact);
        worst = std::max(worst, err);
        max_tail = std::max(max_tail, tails(x, y));
        margin = std::min(margin, tails(x, y) + 1e-15 - err);
      }
  }
  r.passed = margin >= 0.0 && max_tail <= 1e-6;
  r.margin = margin;
  r.metric("max_abs_error", worst);
  r.metric("max_summed_tail", max_tail);
  r.metric("max_len", max_len);
  return r;
}

namespace {

// Minimizes the joint energy using only its values: for a quadratic, unit-step differences give the
// gradient and Hessian exactly, and Newton steps then reach the minimum.
double minimized_joint_energy(const Volume& v, const DisorderField& f, double q, const HeightConfig& h) {
  const RealConfig bc = zero_bc(v);
  const Eigen::Index n = static_cast<Eigen::Index>(v.size());
  auto e = [&](const RealConfig& m) { return joint_energy(v, f, q, bc, h, m); };
  RealConfig m = RealConfig::Zero(n);
  for (int step = 0; step < 3; ++step) {
    const double e0 = e(m);
    Eigen::VectorXd g(n), ep(n);
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      RealConfig a = m, b = m;
      a[i] += 1.0;
      b[i] -= 1.0;
      ep[i] = e(a);
      g[i] = 0.5 * (ep[i] - e(b));
      H(i, i) = ep[i] - 2.0 * e0 + e(b);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        RealConfig c = m;
        c[i] += 1.0;
        c[j] += 1.0;
        H(i, j) = H(j, i) = e(c) - ep[i] - ep[j] + e0;
      }
    m -= H.fullPivLu().solve(g);
  }
  return e(m);
}

}  // namespace

AuditResult audit_energy_triple(int dim, int side, double q, const DisorderParams& p, int count) {
  AuditResult r;
  r.name = "effective_energy_triple";
  const Volume v = make_box(dim, side);
  const CouplingSet cs = couplings(v, q, p.mstar);
  Rng rng(hash_words({p.seed, 0xA3}));
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    const DisorderField f(reseeded(p, 0xA3, k));
    HeightConfig h(v.size());
    for (int& x : h) x = rng.below(5) - 2;
    const double e1 = effective_energy(v, f, q, h);
    const RealConfig bc = zero_bc(v);
    const double e2 = minimized_joint_energy(v, f, q, h);
    const double e2c = joint_energy(v, f, q, bc, h, gaussian_center(v, f, q, bc, h));
    const double e3 = ferro_energy(cs, f, h);
    const double scale = std::max(1.0, std::abs(e1));
    worst = std::max({worst, std::abs(e1 - e2) / scale, std::abs(e1 - e2c) / scale, std::abs(e1 - e3) / scale});
  }
  r.passed = worst <= 1e-8;
  r.margin = 1e-8 - worst;
  r.metric("max_relative_disagreement", worst);
  r.metric("configurations", count);
  return r;
}

AuditResult audit_factorization(double q, const DisorderParams& p, int hmax, int nodes, int threads) {
  AuditResult r;
  r.name = "factorization";
  const Volume v = make_box(2, 2);
  const DisorderField f(p);
  const NuTable table = nu_exact(v, f, q, hmax);
  const std::size_t total = table.prob.size();
  std::vector<double> logm(total);
  parallel_for(total, threads, [&](std::size_t k) {
    logm[k] = joint_quadrature(v, f, q, table.config(k), nodes, false).log_mass;
  });
  const double mx = *std::max_element(logm.begin(), logm.end());
  double z = 0.0;
  for (double l : logm) z += std::exp(l - mx);
  double tv = 0.0;
  for (std::size_t k = 0; k < total; ++k) tv += 0.5 * std::abs(std::exp(logm[k] - mx) / z - table.prob[k]);
  // Conditional moments for two height configurations.
  const Eigen::MatrixXd G = green_matrix(v, q);
  double mom = 0.0;
  HeightConfig h2(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) h2[i] = std::clamp(static_cast<int>(i % 3) - 1, -hmax, hmax);
  for (const HeightConfig& h : {HeightConfig(v.size(), 0), h2}) {
    const JointQuadrature jq = joint_quadrature(v, f, q, h, nodes, true);
    const RealConfig c = gaussian_center(v, f, q, zero_bc(v), h);
    const Eigen::MatrixXd cov = jq.second - jq.mean * jq.mean.transpose();
    mom = std::max({mom, (jq.mean - c).cwiseAbs().maxCoeff(), (cov - G).cwiseAbs().maxCoeff()});
  }
  const double tol = 1e-6 + table.omitted_mass_bound;
  r.passed = tv <= tol && mom <= 1e-8;
  r.margin = std::min(tol - tv, 1e-8 - mom);
  r.metric("total_variation", tv);
  r.metric("omitted_mass_bound", table.omitted_mass_bound);
  r.metric("max_moment_error", mom);
  r.metric("configurations", static_cast<double>(total));
  r.metric("nodes", nodes);
  return r;
}

AuditResult audit_representation(double q, const DisorderParams& p, int threads) {
  AuditResult r;
  r.name = "contour_representation";
  RepresentationCutoffs cut;
  cut.threads = threads;
  double k_margin = std::numeric_limits<double>::infinity(), dev = 0.0, pmargin = std::numeric_limits<double>::infinity();
  long violations = 0;
  bool nonneg = true;
  double sub = 0.0;
  for (int dim : {2, 1}) {
    const Volume v = dim == 2 ? make_box(2, 2) : make_box(1, 5);
    const DisorderField f(p);
    const Representation rep = assemble_representation(v, f, q, 1, cut);
    dev = std::max(dev, rep.audit.max_log_k_deviation);
    k_margin = std::min(k_margin, 1e-6 + rep.audit.bar - rep.audit.max_log_k_deviation);
    violations += rep.audit.peierls_violations;
    pmargin = std::min(pmargin, rep.audit.worst_peierls_margin);
    nonneg = nonneg && rep.audit.rho_nonneg;
    sub = std::max(sub, rep.audit.max_subtraction_error);
  }
  // Two far components on an interval: m* = 4 gives range 2.
  DisorderParams p4 = p;
  p4.mstar = 4.0;
  const DisorderField f4(p4);
  const Volume line = make_box(1, 7);
  const Representation rep = assemble_representation(line, f4, q, 1, cut);
  double ferr = 0.0;
  long cases = 0;
  for (std::size_t k = 0; k < rep.audit.configurations; ++k) {
    const HeightConfig h = rep.config(k);
    if (components(lt_support(line, h, rep.pc)).size() < 2) continue;
    try {
      ferr = std::max(ferr, factorization_error(rep, h));
      ++cases;
    } catch (const DomainError&) {
    }
  }
  dev = std::max(dev, rep.audit.max_log_k_deviation);
  nonneg = nonneg && rep.audit.rho_nonneg;
  violations += rep.audit.peierls_violations;
  r.passed = k_margin >= 0.0 && nonneg && violations == 0 && cases > 0 && ferr <= 1e-10 && sub <= 1e-10;
  r.margin = std::min({k_margin, pmargin, 1e-10 - ferr}) + 0.0;
  r.metric("max_log_K_deviation", dev);
  r.metric("peierls_violations", static_cast<double>(violations));
  r.metric("worst_peierls_margin", pmargin);
  r.metric("factorization_cases", static_cast<double>(cases));
  r.metric("max_factorization_error", ferr);
  r.metric("max_subtraction_error", sub);
  r.metric("rho0_nonnegative", nonneg ? 1.0 : 0.0);
  return r;
}

AuditResult audit_peierls(double q, const DisorderParams& p) {
  AuditResult r;
  r.name = "peierls_exhaustive";
  const CouplingSet cs = couplings(make_box(2, 3), q, p.mstar);
  const PeierlsConstants pc = peierls_constants(2, q, p.mstar, p.delta_d);
  const PeierlsAudit a = peierls_exhaustive(cs, DisorderField(p), pc, 1);
  r.passed = a.violations == 0;
  r.margin = a.worst_margin;
  r.metric("configurations", static_cast<double>(a.configurations));
  r.metric("contours", static_cast<double>(a.contours));
  r.metric("violations", static_cast<double>(a.violations));
  r.metric("worst_log_margin", a.worst_margin);
  return r;
}

AuditResult audit_gradient_volume(int dim, double q, double mstar, double delta_d, long configs, std::uint64_t seed) {
  AuditResult r;
  r.name = "cube_patch_estimate";
  const PeierlsConstants pc = peierls_constants(dim, q, mstar, delta_d);
  const GradientVolumeSummary s = gradient_volume_random_audit(pc, configs, seed);
  r.passed = s.violations == 0;
  r.margin = s.worst_ratio - 1.0;
  r.metric("configurations", static_cast<double>(s.configurations));
  r.metric("components", static_cast<double>(s.components));
  r.metric("violations", static_cast<double>(s.violations));
  r.metric("worst_ratio", s.worst_ratio);
  return r;
}

AuditResult audit_gaussian_bounds(long draws, int observables, std::uint64_t seed) {
  AuditResult r;
  r.name = "gaussian_bounds";
  Rng rng(hash_words({seed, 0xA7}));
  auto random_cov = [&] {
    Eigen::Matrix2d a;
    a << 0.5 + rng.uniform(), 0.4 * (rng.uniform() - 0.5), 0.0, 0.5 + rng.uniform();
    return Eigen::Matrix2d(a.transpose() * a);
  };
  double coincide = 0.0;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd a(2);
    a << 3.0 * (rng.uniform() - 0.5), 3.0 * (rng.uniform() - 0.5);
    const double tr = random_cov().trace(), lam = rng.uniform();
    const ExpMomentBounds b = gauss_exp_moment_bound(a, tr, lam, a.norm() + lam * tr);
    coincide = std::max(coincide, std::abs(b.moment_bound - b.tail_bound) / b.moment_bound);
  }
  // Monte Carlo domination of both exponential-moment bounds.
  Eigen::VectorXd a(2);
  a << 0.5, -0.3;
  Eigen::Matrix2d sig;
  sig << 1.0, 0.3, 0.3, 0.5;
  const double lam = 0.7;
  const Eigen::Matrix2d L = sig.llt().matrixL();
  const double smin = a.norm() + lam * sig.trace();
  const std::vector<double> S = {smin, smin + 1.0, smin + 2.0};
  double mom = 0.0;
  std::vector<double> tail(S.size(), 0.0);
  for (long i = 0; i < draws; ++i) {
    Eigen::Vector2d z(rng.normal(), rng.normal());
    const double nm = (a + L * z).norm();
    const double e = std::exp(lam * nm);
    mom += e;
    for (std::size_t s = 0; s < S.size(); ++s)
      if (nm >= S[s]) tail[s] += e;
  }
  double mc_margin = std::log(gauss_exp_moment_bound(a, sig.trace(), lam, smin).moment_bound / (mom / draws));
  for (std::size_t s = 0; s < S.size(); ++s) {
    const double b = gauss_exp_moment_bound(a, sig.trace(), lam, S[s]).tail_bound;
    if (tail[s] > 0.0) mc_margin = std::min(mc_margin, std::log(b / (tail[s] / draws)));
  }
  // Comparison bound against tensor Gauss-Hermite quadrature, |f| <= 1 so lambda = 0.
  const GaussHermite gh = gauss_hermite(40);
  auto expect = [&](const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, auto&& fn) {
    const Eigen::Matrix2d l = cov.llt().matrixL();
    double s = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      for (std::size_t j = 0; j < gh.nodes.size(); ++j)
        s += gh.weights[i] * gh.weights[j] * fn(mean + l * Eigen::Vector2d(gh.nodes[i], gh.nodes[j]));
    return s;
  };
  double cmp_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < observables; ++k) {
    Eigen::Vector2d a1(rng.uniform() - 0.5, rng.uniform() - 0.5);
    Eigen::Vector2d a2 = a1 + 0.1 * Eigen::Vector2d(rng.uniform() - 0.5, rng.uniform() - 0.5);
    const Eigen::Matrix2d s1 = random_cov();
    const Eigen::Matrix2d s2 = s1 + 0.05 * rng.uniform() * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d w(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    const double phi = 6.283185307179586 * rng.uniform();
    const bool use_tanh = k % 2;
    auto fn = [&](const Eigen::Vector2d& m) {
      const double t = w.dot(m) + phi;
      return use_tanh ? std::tanh(t) : std::cos(t);
    };
    const double diff = std::abs(expect(a1, s1, fn) - expect(a2, s2, fn));
    const double Smin = std::max(a1.norm(), a2.norm());
    const double bound = gauss_comparison_bound(a1, a2, s1, s2, 0.0, Smin + 3.0);
    cmp_margin = std::min(cmp_margin, bound - diff);
  }
  r.passed = coincide <= 1e-12 && mc_margin >= 0.0 && cmp_margin >= 0.0;
  r.margin = std::min({1e-12 - coincide, mc_margin, cmp_margin});
  r.metric("coincidence_relative_gap", coincide);
  r.metric("mc_log_margin", mc_margin);
  r.metric("comparison_margin", cmp_margin);
  r.metric("draws", static_cast<double>(draws));
  return r;
}

AuditResult audit_disorder(const DisorderParams& p, long samples) {
  AuditResult r;
  r.name = "disorder_conditions";
  const DisorderAudit a = audit_conditions(p, samples);
  r.passed = a.passed();
  double margin = std::numeric_limits<double>::infinity();
  for (const auto* set : {&a.eta_tail, &a.d_tail})
    for (const TailCheck& t : *set) margin = std::min(margin, t.bound - t.empirical);
  r.margin = std::isfinite(margin) ? margin : 0.0;
  r.metric("samples", static_cast<double>(a.n_samples));
  r.metric("eta_bound_violations", static_cast<double>(a.eta_bound_violations));
  r.metric("d_bound_violations", static_cast<double>(a.d_bound_violations));
  r.metric("d_scale", a.d_scale);
  r.metric("mean_d2", a.mean_d2);
  return r;
}

}  // namespace sosf::app
