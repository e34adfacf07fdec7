#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "audits.hpp"
#include "gibbs.hpp"
#include "heights.hpp"

using namespace sosf;

namespace {

DisorderParams zero_disorder(double mstar) { return DisorderParams{0.0, 0.0, 0.0, 0.0, mstar, 1}; }
DisorderParams small_disorder(double mstar, std::uint64_t seed) {
  return DisorderParams{0.02, 0.01, 0.05, 0.02, mstar, seed};
}

}  // namespace

TEST_SUITE("gibbs") {

TEST_CASE("energy examples") {
  const DisorderField f(zero_disorder(5.0));
  const Volume v = make_box(2, 3);
  const double v0 = potential_value(f, {0, 0, 0}, 0.0).value;
  CHECK(energy(v, f, 0.1, zero_bc(v), RealConfig::Zero(9)) == doctest::Approx(9.0 * v0).epsilon(1e-12));

  // Single site on a line: two boundary bonds of (q/2) m^2 each.
  const Volume one = make_box(1, 1);
  const double v1 = 0.5 - std::log(1.0 + std::exp(-7.5) + std::exp(-17.5) + std::exp(-40.0));
  CHECK(v1 == doctest::Approx(0.5 - 5.5308e-4).epsilon(1e-6));
  CHECK(energy(one, f, 0.1, zero_bc(one), RealConfig::Ones(1)) == doctest::Approx(0.1 + v1).epsilon(1e-12));

  // Joint shift of m and the boundary by m*.
  Rng rng(1);
  RealConfig m(9), bc(static_cast<Eigen::Index>(v.boundary.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = 6.0 * rng.uniform() - 3.0;
  for (Eigen::Index i = 0; i < bc.size(); ++i) bc[i] = rng.uniform();
  const double e0 = energy(v, f, 0.1, bc, m);
  const double e1 = energy(v, f, 0.1, (bc.array() + 5.0).matrix(), (m.array() + 5.0).matrix());
  CHECK(e1 == doctest::Approx(e0).epsilon(1e-11));
}

TEST_CASE("joint energy at the wells with q = 0") {
  const DisorderField f(small_disorder(10.0, 2));
  const Volume v = make_box(2, 2);
  const HeightConfig h = {1, 0, -1, 2};
  double eta = 0.0;
  for (std::size_t i = 0; i < 4; ++i) eta += f.eta(v.sites[i], h[i]);
  CHECK(joint_energy(v, f, 0.0, zero_bc(v), h, wells(v, f, h)) == doctest::Approx(-eta).epsilon(1e-14));
}

TEST_CASE("Hessian of the joint energy is the precision operator") {
  const DisorderField f(small_disorder(10.0, 3));
  const Volume v = make_box(2, 3);
  const HeightConfig h(9, 0);
  const RealConfig bc = zero_bc(v);
  const Eigen::MatrixXd P = Eigen::MatrixXd(precision_matrix(v, 0.1));
  const RealConfig m0 = RealConfig::Constant(9, 0.3);
  const double e0 = joint_energy(v, f, 0.1, bc, h, m0);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      RealConfig a = m0, b = m0, c = m0;
      a[i] += 1.0;
      b[j] += 1.0;
      c[i] += 1.0;
      c[j] += 1.0;
      // Exact for a quadratic: E(m + e_i + e_j) - E(m + e_i) - E(m + e_j) + E(m).
      const double hij = joint_energy(v, f, 0.1, bc, h, c) - joint_energy(v, f, 0.1, bc, h, a) -
                         joint_energy(v, f, 0.1, bc, h, b) + e0;
      CHECK(hij == doctest::Approx(P(i, j)).epsilon(1e-9));
    }
}

TEST_CASE("joint energy equals the mu density times the kernel") {
  const DisorderField f(small_disorder(4.0, 4));
  const Volume v = make_box(2, 2);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    HeightConfig h(4);
    RealConfig m(4);
    for (int i = 0; i < 4; ++i) {
      h[i] = rng.below(5) - 2;
      m[i] = 4.0 * h[i] + 2.0 * rng.normal();
    }
    double lhs = -joint_energy(v, f, 0.1, zero_bc(v), h, m);
    double rhs = -energy(v, f, 0.1, zero_bc(v), m);
    double bar = 0.0;
    for (int i = 0; i < 4; ++i) {
      const KernelEval k = kernel(f, v.sites[i], m[i]);
      rhs += std::log(k.prob(h[i]));
      bar += k.tail_mass_bound + potential_value(f, v.sites[i], m[i]).tail_bar;
    }
    CHECK(std::abs(lhs - rhs) <= 1e-10 + 2.0 * bar);
  }
}

TEST_CASE("gaussian center examples") {
  const Volume v = make_box(2, 3);
  const DisorderField z(zero_disorder(10.0));
  CHECK(gaussian_center(v, z, 0.1, zero_bc(v), HeightConfig(9, 0)).cwiseAbs().maxCoeff() == 0.0);
  const Volume one = make_box(2, 1);
  CHECK(gaussian_center(one, z, 0.1, zero_bc(one), {1})[0] == doctest::Approx(10.0 / 1.4).epsilon(1e-13));

  const DisorderField f(small_disorder(10.0, 5));
  const HeightConfig h = {0, 1, 1, -1, 0, 2, 0, 0, 1};
  RealConfig bc = RealConfig::Constant(static_cast<Eigen::Index>(v.boundary.size()), 3.0);
  const RealConfig c = gaussian_center(v, f, 0.1, bc, h);
  for (int i = 0; i < 9; ++i) {
    RealConfig a = c, b = c;
    a[i] += 1e-4;
    b[i] -= 1e-4;
    const double grad = (joint_energy(v, f, 0.1, bc, h, a) - joint_energy(v, f, 0.1, bc, h, b)) / 2e-4;
    CHECK(std::abs(grad) <= 1e-8);
  }
}

TEST_CASE("exact conditional sampler moments") {
  const Volume v = make_box(2, 2);
  const double q = 0.1;
  const Eigen::MatrixXd G = green_matrix(v, q);
  RealConfig center(4);
  center << 1.0, -2.0, 0.5, 3.0;
  Rng rng(21);
  const GaussianSampler gs(v, q);
  const int n = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(4, 4);
  for (int k = 0; k < n; ++k) {
    const RealConfig m = gs.draw(center, rng) - center;
    mean += m;
    second += m * m.transpose();
  }
  mean /= n;
  const Eigen::MatrixXd cov = second / n - mean * mean.transpose();
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(mean[i]) <= 3.0 * std::sqrt(G(i, i) / n));
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((G(i, i) * G(j, j) + G(i, j) * G(i, j)) / n);
      CHECK(std::abs(cov(i, j) - G(i, j)) <= 3.0 * se);
    }
  }
  // q = 0: unit normals.
  const GaussianSampler g0(v, 0.0);
  double s2 = 0.0;
  for (int k = 0; k < 20000; ++k) s2 += g0.draw(RealConfig::Zero(4), rng).squaredNorm();
  CHECK(s2 / 80000.0 == doctest::Approx(1.0).epsilon(0.03));
  // Sparse factor path: same marginal variances.
  const GaussianSampler sparse(v, q, 1);
  Eigen::VectorXd v2 = Eigen::VectorXd::Zero(4);
  for (int k = 0; k < 40000; ++k) v2 += (sparse.draw(center, rng) - center).cwiseAbs2();
  for (int i = 0; i < 4; ++i) CHECK(v2[i] / 40000.0 == doctest::Approx(G(i, i)).epsilon(0.03));
  Rng r1(5), r2(5);
  CHECK((gs.draw(center, r1) - sample_conditional(GaussianSpec{v, center, q}, r2)).norm() == 0.0);
}

TEST_CASE("two-stage sampler at strong coupling") {
  const Volume v = make_box(2, 2);
  const DisorderField f(zero_disorder(10.0));
  const CouplingSet cs = couplings(v, 0.1, 10.0);
  const Eigen::MatrixXd G = green_matrix(v, 0.1);
  Rng rng(8);
  MCMCParams p;
  p.sweeps = 50;
  p.burn_in = 10;
  double s2 = 0.0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    const JointState js = sample_gibbs(cs, f, rng, p);
    for (int h : js.h) CHECK(h == 0);
    s2 += js.m[0] * js.m[0];
  }
  CHECK(s2 / n == doctest::Approx(G(0, 0)).epsilon(0.08));
  Rng a(3), b(3);
  const JointState ja = sample_gibbs(cs, f, a, p), jb = sample_gibbs(cs, f, b, p);
  CHECK(ja.h == jb.h);
  CHECK((ja.m - jb.m).norm() == 0.0);
}

TEST_CASE("re-kernelization reproduces the height marginal") {
  const Volume v = make_box(2, 2);
  const double q = 0.1, ms = 3.0;
  const DisorderField f(small_disorder(ms, 10));
  const NuTable tab = nu_exact(v, f, q, 3);
  std::vector<double> cdf(tab.prob.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cdf.size(); ++k) cdf[k] = (acc += tab.prob[k]);
  // Exact site marginals.
  std::vector<std::array<double, 7>> exact(4);
  for (std::size_t k = 0; k < tab.prob.size(); ++k) {
    const HeightConfig h = tab.config(k);
    for (int i = 0; i < 4; ++i) exact[i][h[i] + 3] += tab.prob[k];
  }
  const GaussianSampler gs(v, q);
  Rng rng(77);
  const int n = 100000;
  std::vector<std::array<double, 7>> counts(4);
  for (int s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    const std::size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const JointState js = sample_gibbs(v, f, q, zero_bc(v), tab.config(std::min(k, cdf.size() - 1)), gs, rng);
    for (int i = 0; i < 4; ++i) {
      const KernelEval ke = kernel(f, v.sites[i], js.m[i]);
      double w = rng.uniform(), c = 0.0;
      int hp = ke.h_lo + static_cast<int>(ke.probs.size()) - 1;
      for (std::size_t j = 0; j < ke.probs.size(); ++j)
        if ((c += ke.probs[j]) >= w) {
          hp = ke.h_lo + static_cast<int>(j);
          break;
        }
      if (std::abs(hp) <= 3) counts[i][hp + 3] += 1.0;
    }
  }
  for (int i = 0; i < 4; ++i)
    for (int h = 0; h < 7; ++h) {
      const double p = exact[i][h];
      const double se = std::sqrt(p * (1.0 - p) / n) + 1.0 / n;
      CHECK(std::abs(counts[i][h] / n - p) <= 4.0 * se + tab.omitted_mass_bound);
    }
}

TEST_CASE("exponential moment bounds") {
  Eigen::VectorXd a(3);
  a << 0.3, -1.0, 2.0;
  const ExpMomentBounds b0 = gauss_exp_moment_bound(a, 1.5, 0.0, a.norm());
  CHECK(b0.moment_bound == doctest::Approx(8.0).epsilon(1e-15));
  for (double lam : {0.1, 0.5, 2.0}) {
    const double s = a.norm() + lam * 1.5;
    const ExpMomentBounds b = gauss_exp_moment_bound(a, 1.5, lam, s);
    CHECK(std::abs(b.moment_bound - b.tail_bound) <= 1e-12 * b.moment_bound);
  }
  CHECK_THROWS_AS(gauss_exp_moment_bound(a, 1.5, 0.5, a.norm()), DomainError);
}

TEST_CASE("comparison bound structure") {
  Eigen::VectorXd a(2), a2(2);
  a << 0.4, -0.2;
  Eigen::MatrixXd s(2, 2);
  s << 1.0, 0.2, 0.2, 0.7;
  const double S = a.norm() + 0.3 * s.trace() + 1.0;
  // Identical laws: the two tail terms only.
  const double tails = 2.0 * 4.0 * std::exp(0.3 * S - (S - a.norm()) * (S - a.norm()) / (2.0 * s.trace()));
  CHECK(gauss_comparison_bound(a, a, s, s, 0.3, S) == doctest::Approx(tails).epsilon(1e-13));
  double prev = 0.0;
  for (double shift = 0.0; shift <= 0.5; shift += 0.05) {
    a2 << 0.4 + shift, -0.2;
    const double b = gauss_comparison_bound(a, a2, s, s, 0.3, S + shift);
    const double b_fixed_s = gauss_comparison_bound(a, a2, s, s, 0.3, S + 0.5);
    CHECK(b >= 0.0);
    CHECK(b_fixed_s >= prev);
    prev = b_fixed_s;
  }
  CHECK_THROWS_AS(gauss_comparison_bound(a, a, s, s, 0.3, 0.1), DomainError);
}

TEST_CASE("Gaussian bound audits") {
  const app::AuditResult r = app::audit_gaussian_bounds(100000, 100, 3);
  CHECK(r.passed);
}

TEST_CASE("factorization identity and marginal consistency") {
  const app::AuditResult r = app::audit_factorization(0.1, small_disorder(10.0, 1), 2, 24, 1);
  CHECK(r.passed);
  for (const auto& [k, val] : r.metrics)
    if (k == "total_variation") CHECK(val <= 1e-8);
}

}  // TEST_SUITE
