#include "quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace sosf {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be positive");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  GaussHermite g;
  for (int i = 0; i < n; ++i) {
    g.nodes.push_back(es.eigenvalues()[i]);
    const double v0 = es.eigenvectors()(0, i);
    g.weights.push_back(v0 * v0);
  }
  return g;
}

}  // namespace sosf
