#ifndef SOSF_POTENTIAL_HPP
#define SOSF_POTENTIAL_HPP

#include <vector>

#include "disorder.hpp"

namespace sosf {

inline constexpr int kDefaultWindow = 8;

struct PotentialValue {
  double value = 0.0;
  double tail_bar = 0.0;  // bound on |V_true - value|
};

PotentialValue potential_value(const DisorderField& f, const Site& x, double m, int window = kDefaultWindow);

struct KernelEval {
  Site site{};
  double m = 0.0;
  int window = kDefaultWindow;
  int h_lo = 0;  // probs[k] is T(h_lo + k | m)
  std::vector<double> probs;
  double norm = 0.0;             // truncated sum, direct (no log-sum-exp)
  double tail_mass_bound = 0.0;  // omitted mass relative to norm
  double prob(int h) const;
};

KernelEval kernel(const DisorderField& f, const Site& x, double m, int window = kDefaultWindow);

// log T(h|m) without forming the full kernel.
double log_kernel(const DisorderField& f, const Site& x, int h, double m, int window = kDefaultWindow);

double kernel_maximizer(const DisorderField& f, const Site& x, int h, int window = kDefaultWindow);

// Stationary point of f_h + f_{-h} relative to the well at 0 (corrected closed form).
double pair_maximizer_formula(double mstar, int h, double d_minus, double d_zero, double d_plus,
                              double eta_minus, double eta_zero, double eta_plus);

double maximizer_radius_bound(double mstar, double delta_d, double delta_eta);

struct SandwichRatios {
  double lower = 0.0;
  double upper = 0.0;
};

SandwichRatios sandwich_audit(const DisorderField& f, const Site& x, int h, const std::vector<double>& m_grid,
                              int window = kDefaultWindow);

}  // namespace sosf

#endif
