#ifndef SOSF_QUADRATURE_HPP
#define SOSF_QUADRATURE_HPP

#include <vector>

namespace sosf {

// Probabilists' Gauss-Hermite rule: sum_i w_i g(t_i) ~ E g(Z), Z ~ N(0,1). Weights sum to 1.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermite gauss_hermite(int n);

}  // namespace sosf

#endif
