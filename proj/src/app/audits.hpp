#ifndef SOSF_APP_AUDITS_HPP
#define SOSF_APP_AUDITS_HPP

#include <string>
#include <utility>
#include <vector>

#include "disorder.hpp"

namespace sosf::app {

struct AuditResult {
  std::string name;
  bool passed = true;
  double margin = 0.0;  // >= 0 when passed; in the audit's own units
  std::vector<std::pair<std::string, double>> metrics;
  std::string detail;
  void metric(const std::string& k, double v) { metrics.emplace_back(k, v); }
};

// |Norm(m) e^{V(m)} - 1| against 1e-10 plus truncation bars, over `grid` points on three periods.
AuditResult audit_normalization(const DisorderParams& p, int draws, int grid, int window);

// Sum over connected C of R(x->y;C) against the matrix inverse on a 1x4 interval and a 2x2 box.
AuditResult audit_resolvent_walks(double q, int max_len);

// Effective energy, minimized joint energy and ferromagnetic form on random (h, disorder).
AuditResult audit_energy_triple(int dim, int side, double q, const DisorderParams& p, int count);

// Exact nu against Gauss-Hermite quadrature of mu T on a 2x2 box, plus conditional moments.
AuditResult audit_factorization(double q, const DisorderParams& p, int hmax, int nodes, int threads);

// K_Lambda constancy, rho0 >= 0, activity bound on 2x2 and 1x5; factorization on 1x7.
AuditResult audit_representation(double q, const DisorderParams& p, int threads);

// Exhaustive LT activity bound on a 3x3 box with |h| <= 1.
AuditResult audit_peierls(double q, const DisorderParams& p);

AuditResult audit_gradient_volume(int dim, double q, double mstar, double delta_d, long configs, std::uint64_t seed);

// Coincidence point, Monte Carlo domination, and the comparison bound against quadrature.
AuditResult audit_gaussian_bounds(long draws, int observables, std::uint64_t seed);

AuditResult audit_disorder(const DisorderParams& p, long samples);

}  // namespace sosf::app

#endif
