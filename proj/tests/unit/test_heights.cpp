#include <doctest.h>

#include <cmath>
#include <map>

#include "heights.hpp"

using namespace sosf;

namespace {

DisorderParams zero_disorder(double mstar) { return DisorderParams{0.0, 0.0, 0.0, 0.0, mstar, 1}; }
DisorderParams small_disorder(double mstar, std::uint64_t seed) {
  return DisorderParams{0.02, 0.01, 0.05, 0.02, mstar, seed};
}

HeightConfig random_heights(Rng& rng, std::size_t n, int hmax) {
  HeightConfig h(n);
  for (int& x : h) x = rng.below(2 * hmax + 1) - hmax;
  return h;
}

}  // namespace

TEST_SUITE("heights") {

TEST_CASE("coupling bounds") {
  CHECK(j_nn_lower_bound(2, 0.1, 10.0) == doctest::Approx(1.28205).epsilon(1e-5));
  const Volume v = make_box(2, 9);
  const CouplingSet cs = couplings(v, 0.1, 10.0, 64);
  const std::size_t c = v.at({4, 4, 0}), e = v.at({4, 5, 0});
  CHECK(cs.J(c, e) >= j_nn_lower_bound(2, 0.1, 10.0));
  CHECK(cs.J.minCoeff() >= 0.0);
  CHECK(cs.K.minCoeff() >= 0.0);
  CHECK(cs.solver_bar < 1e-12);
  CHECK(cs.J.diagonal().cwiseAbs().maxCoeff() == 0.0);
  // Geometric decay along a row from the center.
  for (int r = 1; r <= 4; ++r) {
    const double jr = cs.J(c, v.at({4, 4 + r, 0}));
    CHECK(jr <= j_decay_bound(2, 0.1, 10.0, r) * (1.0 + 1e-9));
    if (r > 1) CHECK(jr < cs.J(c, v.at({4, 3 + r, 0})));
  }
  CHECK(cs.J(c, v.at({4, 8, 0})) / cs.J(c, v.at({4, 7, 0})) <= 1.0 / 3.5 * 1.5);
}

TEST_CASE("small coupling cutoff is refused") {
  const Volume v = make_box(2, 9);
  try {
    (void)couplings(v, 0.1, 10.0, 3);
    FAIL("expected a DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("use at least 18") != std::string::npos);
  }
  CHECK_THROWS_AS(couplings(v, 0.1, 10.0, 1), DomainError);
  CHECK_NOTHROW(couplings(v, 0.1, 10.0, 18));
}

TEST_CASE("energy examples") {
  const Volume one = make_box(2, 1);
  const DisorderField z(zero_disorder(10.0));
  for (int h = -2; h <= 2; ++h)
    CHECK(effective_energy(one, z, 0.1, {h}) == doctest::Approx(50.0 * (1.0 - 1.0 / 1.4) * h * h).epsilon(1e-12));
  const Volume v = make_box(2, 3);
  CHECK(effective_energy(v, z, 0.1, HeightConfig(9, 1)) > effective_energy(v, z, 0.1, HeightConfig(9, 0)));
  CHECK(effective_energy(v, z, 0.1, HeightConfig(9, 0)) == 0.0);
}

TEST_CASE("three energy forms agree") {
  const Volume v = make_box(2, 3);
  const CouplingSet cs = couplings(v, 0.1, 10.0);
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const DisorderField f(small_disorder(10.0, 100 + t));
    const HeightConfig h = random_heights(rng, 9, 2);
    const double e = effective_energy(v, f, 0.1, h);
    const double ej = joint_energy(v, f, 0.1, zero_bc(v), h, gaussian_center(v, f, 0.1, zero_bc(v), h));
    const double ef = ferro_energy(cs, f, h);
    const double scale = 1.0 + std::abs(e);
    CHECK(std::abs(e - ej) <= 1e-10 * scale);
    CHECK(std::abs(e - ef) <= 1e-10 * scale);
  }
}

TEST_CASE("shift covariance with a shifted boundary") {
  const Volume v = make_box(2, 3);
  const DisorderField z(zero_disorder(4.0));
  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const HeightConfig h = random_heights(rng, 9, 2);
    for (int k : {-2, 1, 3}) {
      HeightConfig hk = h;
      for (int& x : hk) x += k;
      const RealConfig bc = RealConfig::Constant(static_cast<Eigen::Index>(v.boundary.size()), 4.0 * k);
      const double e0 = effective_energy(v, z, 0.1, h);
      CHECK(effective_energy(v, z, 0.1, hk, bc) == doctest::Approx(e0).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("exact height marginal") {
  const Volume one = make_box(2, 1);
  const NuTable t1 = nu_exact(one, DisorderField(zero_disorder(10.0)), 0.1, 2);
  CHECK(t1.prob[t1.index({0})] == doctest::Approx(0.99999875).epsilon(1e-8));
  CHECK(t1.prob[t1.index({1})] == doctest::Approx(std::exp(-50.0 / 1.4 * 0.4)).epsilon(1e-6));

  const Volume v = make_box(2, 2);
  const NuTable t = nu_exact(v, DisorderField(zero_disorder(3.0)), 0.1, 2);
  double sum = 0.0;
  for (std::size_t k = 0; k < t.prob.size(); ++k) {
    sum += t.prob[k];
    HeightConfig neg = t.config(k);
    for (int& x : neg) x = -x;
    CHECK(t.prob[t.index(neg)] == doctest::Approx(t.prob[k]).epsilon(1e-12));
    CHECK(t.index(t.config(k)) == k);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(t.omitted_mass_bound < 0.02);
  CHECK_THROWS_AS(nu_exact(v, DisorderField(zero_disorder(3.0)), 0.1, -1), DomainError);
}

TEST_CASE("chain matches the exact marginal") {
  const Volume v = make_box(2, 2);
  const DisorderField f(small_disorder(3.0, 9));
  const NuTable t = nu_exact(v, f, 0.1, 2);
  const CouplingSet cs = couplings(v, 0.1, 3.0);
  MCMCParams p;
  p.sweeps = 1000000;
  p.burn_in = 1000;
  p.thin = 1;
  p.hmax = 2;
  std::vector<double> freq(t.prob.size(), 0.0);
  Rng rng(31);
  const ChainDiagnostics d = nu_mcmc(cs, f, rng, p, [&](const HeightConfig& h) { freq[t.index(h)] += 1.0; });
  CHECK(d.samples == p.sweeps);
  double tv = 0.0;
  for (std::size_t k = 0; k < freq.size(); ++k) tv += std::abs(freq[k] / d.samples - t.prob[k]);
  CHECK(0.5 * tv <= 0.01);
  CHECK(d.change_rate > 0.0);
}

TEST_CASE("chain symmetry and determinism") {
  const Volume v = make_box(2, 3);
  const DisorderField z(zero_disorder(3.0));
  const CouplingSet cs = couplings(v, 0.1, 3.0);
  MCMCParams p;
  p.sweeps = 200000;
  p.burn_in = 1000;
  p.thin = 1;
  double mean = 0.0, sq = 0.0;
  Rng rng(5);
  const ChainDiagnostics d = nu_mcmc(cs, z, rng, p, [&](const HeightConfig& h) {
    mean += h[4];
    sq += h[4] * h[4];
  });
  mean /= d.samples;
  sq /= d.samples;
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(sq * d.tau_int / d.samples) + 1e-3);

  std::vector<HeightConfig> a, b;
  p.sweeps = 500;
  Rng r1(77), r2(77);
  nu_mcmc(cs, z, r1, p, [&](const HeightConfig& h) { a.push_back(h); });
  nu_mcmc(cs, z, r2, p, [&](const HeightConfig& h) { b.push_back(h); });
  CHECK(a == b);

  HeightChain chain(cs, z, p);
  CHECK_THROWS_AS(HeightChain(cs, z, MCMCParams{1, 0, 0, 0, 1, -1}), DomainError);
  CHECK(chain.energy() == 0.0);
}

TEST_CASE("integrated autocorrelation") {
  CHECK(integrated_autocorrelation({1.0, 2.0}) == 1.0);
  std::vector<double> iid, ar;
  Rng rng(3);
  double x = 0.0;
  for (int i = 0; i < 20000; ++i) {
    iid.push_back(rng.normal());
    x = 0.9 * x + rng.normal();
    ar.push_back(x);
  }
  CHECK(integrated_autocorrelation(iid) < 1.3);
  // AR(1) with rho: tau = (1 + rho) / (1 - rho) = 19.
  CHECK(integrated_autocorrelation(ar) == doctest::Approx(19.0).epsilon(0.35));
}

TEST_CASE("roughness decomposition") {
  const Volume v = make_box(2, 3);
  const DisorderField z(zero_disorder(10.0));
  const RoughnessReport r0 = roughness(v, z, 0.1, std::vector<HeightConfig>(50, HeightConfig(9, 0)), {1, 1, 0});
  CHECK(r0.centering_part == 0.0);
  CHECK(r0.total == doctest::Approx(green_matrix(v, 0.1)(4, 4)).epsilon(1e-12));
  CHECK(r0.summability == 0.0);

  const Volume one = make_box(2, 1);
  const RoughnessReport r1 = roughness(one, z, 0.1, std::vector<HeightConfig>(40, {1}), {0, 0, 0});
  CHECK(r1.gaussian_part == doctest::Approx(1.0 / 1.4).epsilon(1e-13));
  CHECK(r1.centering_part == doctest::Approx(100.0 / 1.96).epsilon(1e-12));
  CHECK(r1.centering_se == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r1.summability == doctest::Approx(1.0 / 1.4).epsilon(1e-12));
  CHECK(roughness(one, z, 0.1, {}, {0, 0, 0}).total == doctest::Approx(1.0 / 1.4));
}

}  // TEST_SUITE
