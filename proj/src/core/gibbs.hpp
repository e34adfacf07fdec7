#ifndef SOSF_GIBBS_HPP
#define SOSF_GIBBS_HPP

#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "disorder.hpp"
#include "lattice.hpp"
#include "potential.hpp"
#include "rng.hpp"

namespace sosf {

// Zero boundary configuration for v.
RealConfig zero_bc(const Volume& v);

double energy(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const RealConfig& m,
              int window = kDefaultWindow);

double joint_energy(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const HeightConfig& h,
                    const RealConfig& m);

// m*_x(h_x) for every site.
RealConfig wells(const Volume& v, const DisorderField& f, const HeightConfig& h);

RealConfig gaussian_center(const Volume& v, const DisorderField& f, double q, const RealConfig& bc,
                           const HeightConfig& h);

struct GaussianSpec {
  Volume volume;
  RealConfig center;
  double q = 0.0;
};

// Exact draws from N[center, (1 - q Delta)^{-1}] via a Cholesky factor of the precision.
class GaussianSampler {
 public:
  GaussianSampler(const Volume& v, double q, std::size_t dense_threshold = kDenseThreshold);
  RealConfig draw(const RealConfig& center, Rng& rng) const;

 private:
  Volume vol_;
  bool dense_;
  Eigen::MatrixXd upper_;  // dense: U with U^T U = P
  std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> sparse_;
};

RealConfig sample_conditional(const GaussianSpec& spec, Rng& rng);

struct JointState {
  HeightConfig h;
  RealConfig m;
};

struct ExpMomentBounds {
  double moment_bound = 0.0;
  double tail_bound = 0.0;
};

// Exponential moment bounds for N[a, Sigma], direct and tail forms.
// The tail branch needs S >= |a| + lambda tr(Sigma).
ExpMomentBounds gauss_exp_moment_bound(const Eigen::VectorXd& a, double trace_sigma, double lambda, double S);

// Bound on |E e^{<v,X>} - E e^{<v,X'>}| for two Gaussians, with g(x) = x e^x.
double gauss_comparison_bound(const Eigen::VectorXd& a, const Eigen::VectorXd& a2, const Eigen::MatrixXd& sigma,
                              const Eigen::MatrixXd& sigma2, double lambda, double S);

struct JointQuadrature {
  double log_mass = 0.0;  // log of int e^{-E(m)} prod_x T(h_x|m_x) dm
  Eigen::VectorXd mean;
  Eigen::MatrixXd second;  // E[m m^T]
};

// Tensor Gauss-Hermite quadrature of mu * T for one height configuration, zero boundary.
JointQuadrature joint_quadrature(const Volume& v, const DisorderField& f, double q, const HeightConfig& h,
                                 int nodes = 40, bool moments = false, int window = kDefaultWindow);

}  // namespace sosf

#endif
