#include "potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sosf {

namespace {

struct WellSum {
  int l0 = 0;
  double lse = 0.0;       // log of the truncated sum
  double log_tail = 0.0;  // log of the bound on the omitted mass
};

double log_sum_exp(const std::vector<double>& e) {
  if (e.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(e.begin(), e.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : e) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_omitted(const DisorderParams& p, int window) {
  std::vector<double> e;
  for (int k = window + 1; k <= window + 60; ++k) {
    const double gap = p.mstar * (k - 0.5 - p.delta_d);
    e.push_back(std::log(2.0) - 0.5 * gap * gap + p.delta_eta);
  }
  return log_sum_exp(e);
}

double exponent(const DisorderField& f, const Site& x, int l, double m) {
  const double dm = m - f.center(x, l);
  return -0.5 * dm * dm + f.eta(x, l);
}

WellSum well_sum(const DisorderField& f, const Site& x, double m, int window) {
  WellSum w;
  w.l0 = static_cast<int>(std::lround(m / f.params().mstar));
  std::vector<double> e;
  e.reserve(2 * window + 1);
  for (int l = w.l0 - window; l <= w.l0 + window; ++l) e.push_back(exponent(f, x, l, m));
  w.lse = log_sum_exp(e);
  w.log_tail = log_omitted(f.params(), window);
  return w;
}

}  // namespace

PotentialValue potential_value(const DisorderField& f, const Site& x, double m, int window) {
  if (window < 3) throw DomainError("window must be at least 3");
  const WellSum w = well_sum(f, x, m, window);
  PotentialValue v;
  v.value = -w.lse;
  v.tail_bar = std::log1p(std::exp(w.log_tail - w.lse));
  return v;
}

double KernelEval::prob(int h) const {
  const int k = h - h_lo;
  if (k < 0 || k >= static_cast<int>(probs.size())) return 0.0;
  return probs[k];
}

KernelEval kernel(const DisorderField& f, const Site& x, double m, int window) {
  if (window < 3) throw DomainError("window must be at least 3");
  KernelEval k;
  k.site = x;
  k.m = m;
  k.window = window;
  const int l0 = static_cast<int>(std::lround(m / f.params().mstar));
  k.h_lo = l0 - window;
  std::vector<double> terms;
  for (int l = l0 - window; l <= l0 + window; ++l) terms.push_back(std::exp(exponent(f, x, l, m)));
  k.norm = 0.0;
  for (double t : terms) k.norm += t;
  for (double t : terms) k.probs.push_back(t / k.norm);
  k.tail_mass_bound = std::exp(log_omitted(f.params(), window)) / k.norm;
  return k;
}

double log_kernel(const DisorderField& f, const Site& x, int h, double m, int window) {
  const WellSum w = well_sum(f, x, m, window);
  return exponent(f, x, h, m) - w.lse;
}

double kernel_maximizer(const DisorderField& f, const Site& x, int h, int window) {
  if (window < 1) throw DomainError("window must be positive");
  const double ch = f.center(x, h);
  const double eh = f.eta(x, h);
  std::vector<double> a, b;
  for (int l = h - window; l <= h + window; ++l) {
    if (l == h) continue;
    const double al = f.center(x, l) - ch;
    a.push_back(al);
    b.push_back(-0.5 * al * al + f.eta(x, l) - eh);
  }
  // Sign of F'(y) for F(y) = sum_l exp(a_l y + b_l), y = m - c_h.
  auto slope_sign = [&](double y) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = a[i] * y + b[i] + std::log(std::abs(a[i]));
      (a[i] > 0 ? pos : neg).push_back(e);
    }
    return log_sum_exp(pos) - log_sum_exp(neg);
  };
  double lo = -f.params().mstar, hi = f.params().mstar;
  for (int it = 0; it < 60 && slope_sign(lo) > 0; ++it) lo *= 2;
  for (int it = 0; it < 60 && slope_sign(hi) < 0; ++it) hi *= 2;
  if (!(slope_sign(lo) <= 0 && slope_sign(hi) >= 0)) throw Error("kernel maximizer bracket failed");
  const double tol = 1e-13 * std::max(1.0, f.params().mstar);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (slope_sign(mid) < 0 ? lo : hi) = mid;
  }
  return ch + 0.5 * (lo + hi);
}

double pair_maximizer_formula(double mstar, int h, double d_minus, double d_zero, double d_plus,
                              double eta_minus, double eta_zero, double eta_plus) {
  (void)eta_zero;
  const double hh = static_cast<double>(h);
  const double num = std::log((hh - d_minus + d_zero) / (hh + d_plus - d_zero)) +
                     0.5 * mstar * mstar * (2.0 * hh * (d_plus + d_minus) + d_plus * d_plus - d_minus * d_minus) -
                     eta_plus + eta_minus;
  return num / (mstar * (2.0 * hh + d_plus - d_minus));
}

double maximizer_radius_bound(double mstar, double delta_d, double delta_eta) {
  return mstar * (4.0 * delta_d + delta_d * delta_d) / (4.0 * (1.0 - delta_d)) +
         (std::log((1.0 + 2.0 * delta_d) / (1.0 - 2.0 * delta_d)) + 2.0 * delta_eta) / (2.0 * mstar * (1.0 - delta_d));
}

SandwichRatios sandwich_audit(const DisorderField& f, const Site& x, int h, const std::vector<double>& m_grid,
                              int window) {
  if (m_grid.empty()) throw DomainError("empty grid");
  SandwichRatios r;
  r.lower = std::numeric_limits<double>::infinity();
  r.upper = 0.0;
  const double eh = f.eta(x, h);
  for (double m : m_grid) {
    // T(h|m) / exp(-(m - c_h)^2 / 2) = exp(eta_h) / Norm(m) = exp(eta_h + V(m)).
    const double ratio = std::exp(eh + potential_value(f, x, m, window).value);
    r.lower = std::min(r.lower, ratio);
    r.upper = std::max(r.upper, ratio);
  }
  return r;
}

}  // namespace sosf
