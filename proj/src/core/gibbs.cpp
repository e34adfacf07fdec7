#include "gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "quadrature.hpp"

namespace sosf {

RealConfig zero_bc(const Volume& v) { return RealConfig::Zero(static_cast<Eigen::Index>(v.boundary.size())); }

namespace {

// (q/2) sum over nn pairs in Lambda plus (q/2) sum over Lambda-boundary pairs.
double gradient_part(const Volume& v, double q, const RealConfig& bc, const RealConfig& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int k = 0; k < v.dim; ++k) {
      for (int step : {-1, 1}) {
        const Site y = offset(v.sites[i], k, step);
        if (auto j = v.index(y)) {
          if (*j > i) s += (m[i] - m[*j]) * (m[i] - m[*j]);
        } else {
          const double b = bc[*v.boundary_index(y)];
          s += (m[i] - b) * (m[i] - b);
        }
      }
    }
  }
  return 0.5 * q * s;
}

}  // namespace

double energy(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const RealConfig& m,
              int window) {
  check_domain(v, m);
  check_boundary(v, bc);
  double e = gradient_part(v, q, bc, m);
  for (std::size_t i = 0; i < v.size(); ++i) e += potential_value(f, v.sites[i], m[i], window).value;
  return e;
}

double joint_energy(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const HeightConfig& h,
                    const RealConfig& m) {
  check_domain(v, m);
  check_domain(v, h);
  check_boundary(v, bc);
  double e = gradient_part(v, q, bc, m);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double dm = m[i] - f.center(v.sites[i], h[i]);
    e += 0.5 * dm * dm - f.eta(v.sites[i], h[i]);
  }
  return e;
}

RealConfig wells(const Volume& v, const DisorderField& f, const HeightConfig& h) {
  check_domain(v, h);
  RealConfig c(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) c[i] = f.center(v.sites[i], h[i]);
  return c;
}

RealConfig gaussian_center(const Volume& v, const DisorderField& f, double q, const RealConfig& bc,
                           const HeightConfig& h) {
  return resolvent_solve(v, q, wells(v, f, h) + boundary_field(v, q, bc), 1e-13);
}

GaussianSampler::GaussianSampler(const Volume& v, double q, std::size_t dense_threshold)
    : vol_(v), dense_(v.size() <= dense_threshold) {
  const Eigen::SparseMatrix<double> p = precision_matrix(v, q);
  if (dense_) {
    Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(p)};
    if (llt.info() != Eigen::Success) throw SolverError("precision factorization failed", NAN);
    upper_ = llt.matrixU();
  } else {
    sparse_ = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(p);
    if (sparse_->info() != Eigen::Success) throw SolverError("precision factorization failed", NAN);
  }
}

RealConfig GaussianSampler::draw(const RealConfig& center, Rng& rng) const {
  check_domain(vol_, center);
  RealConfig z(center.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // Cov(U^{-1} z) = (U^T U)^{-1} = P^{-1}.
  if (dense_) return center + upper_.triangularView<Eigen::Upper>().solve(z);
  RealConfig x = sparse_->matrixU().solve(z);
  return center + sparse_->permutationPinv() * x;
}

RealConfig sample_conditional(const GaussianSpec& spec, Rng& rng) {
  return GaussianSampler(spec.volume, spec.q).draw(spec.center, rng);
}

ExpMomentBounds gauss_exp_moment_bound(const Eigen::VectorXd& a, double trace_sigma, double lambda, double S) {
  if (!(trace_sigma > 0) || !(lambda >= 0)) throw DomainError("need trace > 0 and lambda >= 0");
  const double na = a.norm();
  const double smin = na + lambda * trace_sigma;
  if (S < smin * (1.0 - 1e-14)) throw DomainError("S below the admissible range of the tail bound");
  const double lv = static_cast<double>(a.size()) * std::log(2.0);
  ExpMomentBounds b;
  b.moment_bound = std::exp(lv + lambda * na + 0.5 * lambda * lambda * trace_sigma);
  b.tail_bound = std::exp(lv + lambda * S - (S - na) * (S - na) / (2.0 * trace_sigma));
  return b;
}

double gauss_comparison_bound(const Eigen::VectorXd& a, const Eigen::VectorXd& a2, const Eigen::MatrixXd& sigma,
                              const Eigen::MatrixXd& sigma2, double lambda, double S) {
  if (a.size() != a2.size() || sigma.rows() != a.size() || sigma2.rows() != a.size())
    throw DomainError("dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> l1(sigma), l2(sigma2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) throw DomainError("covariances must be SPD");
  const double tr1 = sigma.trace(), tr2 = sigma2.trace();
  if (S < std::max(a.norm() + lambda * tr1, a2.norm() + lambda * tr2) * (1.0 - 1e-14))
    throw DomainError("S below the admissible range");
  const Eigen::MatrixXd inv1 = l1.solve(Eigen::MatrixXd::Identity(a.size(), a.size()));
  const Eigen::MatrixXd inv2 = l2.solve(Eigen::MatrixXd::Identity(a.size(), a.size()));
  auto op_norm = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    return es.eigenvalues().cwiseAbs().maxCoeff();
  };
  const double det_ratio = std::sqrt(sigma.determinant() / sigma2.determinant());
  const double x = (2.0 * S + a.norm() + a2.norm()) * op_norm(inv1) * (a - a2).norm() +
                   2.0 * (S * S + a2.squaredNorm()) * op_norm(inv1 - inv2);
  const double g = x * std::exp(x);
  const double pre = std::pow(2.0, static_cast<double>(a.size()));
  const double body = pre * std::exp(lambda * a.norm() + 0.5 * lambda * lambda * tr1) *
                      (std::abs(1.0 - det_ratio) + det_ratio * g);
  const double tails = pre * std::exp(lambda * S - (S - a.norm()) * (S - a.norm()) / (2.0 * tr1)) +
                       pre * std::exp(lambda * S - (S - a2.norm()) * (S - a2.norm()) / (2.0 * tr2));
  return body + tails;
}

JointQuadrature joint_quadrature(const Volume& v, const DisorderField& f, double q, const HeightConfig& h, int nodes,
                                 bool moments, int window) {
  check_domain(v, h);
  const std::size_t n = v.size();
  if (std::pow(static_cast<double>(nodes), static_cast<double>(n)) > 2e8) throw DomainError("quadrature grid too large");
  const GaussHermite gh = gauss_hermite(nodes);
  const double mstar = f.params().mstar;
  std::vector<std::vector<double>> pts(n), sf(n);
  double log_shift = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const Site& s = v.sites[x];
    std::vector<double> lf;
    for (int i = 0; i < nodes; ++i) {
      const double t = gh.nodes[i];
      const double m = mstar * h[x] + t;
      pts[x].push_back(m);
      const double tv = kernel(f, s, m, window).prob(h[x]);
      const double vv = potential_value(f, s, m, window).value;
      lf.push_back(std::log(gh.weights[i]) + 0.5 * std::log(2.0 * M_PI) + 0.5 * t * t - vv -
                   0.5 * q * v.boundary_degree(x) * m * m + std::log(tv));
    }
    const double mx = *std::max_element(lf.begin(), lf.end());
    log_shift += mx;
    for (double l : lf) sf[x].push_back(std::exp(l - mx));
  }
  // Pair tables for nn pairs (j < k), shifted by their maxima.
  struct PairTable {
    std::size_t j;
    std::vector<double> g;
  };
  std::vector<std::vector<PairTable>> pairs(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j : v.neighbours(k)) {
      if (j >= k) continue;
      PairTable t{j, std::vector<double>(static_cast<std::size_t>(nodes) * nodes)};
      double mn = std::numeric_limits<double>::infinity();
      for (int a = 0; a < nodes; ++a)
        for (int b = 0; b < nodes; ++b) mn = std::min(mn, std::abs(pts[j][a] - pts[k][b]));
      for (int a = 0; a < nodes; ++a) {
        for (int b = 0; b < nodes; ++b) {
          const double dm = pts[j][a] - pts[k][b];
          t.g[a * nodes + b] = std::exp(-0.5 * q * (dm * dm - mn * mn));
        }
      }
      log_shift += -0.5 * q * mn * mn;
      pairs[k].push_back(std::move(t));
    }
  }
  std::vector<int> idx(n, 0);
  std::vector<double> partial(n + 1, 1.0);
  double mass = 0.0;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> mv(n);
  auto rec = [&](auto&& self, std::size_t k) -> void {
    if (k == n) {
      const double p = partial[n];
      mass += p;
      if (moments) {
        for (std::size_t a = 0; a < n; ++a) {
          m1[a] += p * mv[a];
          for (std::size_t b = a; b < n; ++b) m2(a, b) += p * mv[a] * mv[b];
        }
      }
      return;
    }
    for (int i = 0; i < nodes; ++i) {
      double p = partial[k] * sf[k][i];
      for (const PairTable& t : pairs[k]) p *= t.g[idx[t.j] * nodes + i];
      idx[k] = i;
      mv[k] = pts[k][i];
      partial[k + 1] = p;
      self(self, k + 1);
    }
  };
  rec(rec, 0);
  JointQuadrature out;
  out.log_mass = log_shift + std::log(mass);
  if (moments) {
    out.mean = m1 / mass;
    const Eigen::MatrixXd full = m2.selfadjointView<Eigen::Upper>();
    out.second = full / mass;
  }
  return out;
}

}  // namespace sosf
