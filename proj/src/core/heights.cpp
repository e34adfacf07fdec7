#include "heights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace sosf {

double j_nn_lower_bound(int dim, double q, double mstar) {
  const double a = 1.0 + 2.0 * dim * q;
  return q * mstar * mstar / (4.0 * (a * a - q * q));
}

double j_pair_decay_bound(int dim, double q, double mstar, int dist) {
  if (q <= 0.0) return 0.0;
  return 0.25 * mstar * mstar * (1.0 + 2.0 * dim * q) * std::pow(1.0 + 1.0 / (2.0 * dim * q), -dist);
}

double j_decay_bound(int dim, double q, double mstar, int dist) {
  if (q <= 0.0) return 0.0;
  return 0.5 * mstar * mstar * std::pow(1.0 + 1.0 / (2.0 * dim * q), -dist);
}

CouplingSet couplings(const Volume& v, double q, double mstar, int support_cutoff) {
  if (!(q >= 0.0) || !(mstar > 0.0)) throw DomainError("couplings need q >= 0 and m* > 0");
  if (support_cutoff < 2) throw DomainError("support_cutoff must be at least 2");
  if (v.size() > kDenseThreshold) throw DomainError("coupling set is dense; volume too large");
  const std::size_t n = v.size();
  const double m2 = mstar * mstar;
  CouplingSet cs;
  cs.volume = v;
  cs.q = q;
  cs.mstar = mstar;
  cs.support_cutoff = support_cutoff;
  cs.G = green_matrix(v, q);
  {
    const Eigen::MatrixXd p = Eigen::MatrixXd(precision_matrix(v, q));
    cs.solver_bar = (p * cs.G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  }
  cs.J = 0.5 * m2 * cs.G;
  cs.J.diagonal().setZero();

  const double jnn = j_nn_lower_bound(v.dim, q, mstar);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int r = dist1(v.sites[i], v.sites[j]);
      double& c = cs.J(i, j);
      if (c < 0.0) c = 0.0;  // roundoff only; G is entrywise positive
      if (r >= support_cutoff) {
        cs.truncation_bar = std::max(cs.truncation_bar, j_decay_bound(v.dim, q, mstar, r));
        c = 0.0;
      }
      cs.J(j, i) = c;
      if (c > j_decay_bound(v.dim, q, mstar, r) * (1.0 + 1e-9) + 1e-300 ||
          0.5 * c > j_pair_decay_bound(v.dim, q, mstar, r) * (1.0 + 1e-9) + 1e-300)
        throw Error("coupling decay bound violated");
      if (r == 1 && c < jnn * (1.0 - 1e-9)) throw Error("nearest-neighbour coupling below its lower bound");
    }
  }
  if (cs.truncation_bar > 1e-8) {
    const double alpha2 = std::log(1.0 + 1.0 / (2.0 * v.dim * q));
    const int need = static_cast<int>(std::ceil(std::log(0.5 * m2 * 1e8) / alpha2));
    throw DomainError("support_cutoff too small; use at least " + std::to_string(need));
  }

  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b[i] = v.boundary_degree(i);
  cs.K = 0.5 * m2 * q * (cs.G * b);
  cs.K = cs.K.cwiseMax(0.0);

  cs.nearest_boundary.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t k = 0; k < v.boundary.size(); ++k) {
      const int r = dist1(v.sites[i], v.boundary[k]);
      if (r < best) {
        best = r;
        cs.nearest_boundary[i] = k;
      }
    }
  }
  return cs;
}

double effective_energy(const Volume& v, const DisorderField& f, double q, const HeightConfig& h) {
  return effective_energy(v, f, q, h, zero_bc(v));
}

double effective_energy(const Volume& v, const DisorderField& f, double q, const HeightConfig& h,
                        const RealConfig& bc) {
  check_domain(v, h);
  check_boundary(v, bc);
  const RealConfig a = wells(v, f, h);
  const RealConfig ab = a + boundary_field(v, q, bc);
  const RealConfig w = resolvent_solve(v, q, ab, 1e-13);
  double bpart = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t k = 0; k < v.boundary.size(); ++k)
      if (dist1(v.sites[i], v.boundary[k]) == 1) bpart += bc[k] * bc[k];
  }
  double e = 0.5 * a.squaredNorm() - 0.5 * ab.dot(w) + 0.5 * q * bpart;
  for (std::size_t i = 0; i < v.size(); ++i) e -= f.eta(v.sites[i], h[i]);
  return e;
}

double ferro_energy(const CouplingSet& cs, const DisorderField& f, const HeightConfig& h) {
  const Volume& v = cs.volume;
  check_domain(v, h);
  const std::size_t n = v.size();
  std::vector<double> u(n);
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = h[i] + f.dshift(v.sites[i], h[i]);
    e += cs.K[i] * u[i] * u[i] - f.eta(v.sites[i], h[i]);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e += cs.J(i, j) * (u[i] - u[j]) * (u[i] - u[j]);
  return e;
}

HeightConfig NuTable::config(std::size_t k) const {
  const std::size_t base = 2 * hmax + 1;
  HeightConfig h(sites);
  for (std::size_t i = sites; i-- > 0;) {
    h[i] = static_cast<int>(k % base) - hmax;
    k /= base;
  }
  return h;
}

std::size_t NuTable::index(const HeightConfig& h) const {
  if (h.size() != sites) throw DomainError("configuration size mismatch");
  const std::size_t base = 2 * hmax + 1;
  std::size_t k = 0;
  for (int x : h) {
    if (std::abs(x) > hmax) throw DomainError("height outside the enumerated range");
    k = k * base + static_cast<std::size_t>(x + hmax);
  }
  return k;
}

NuTable nu_exact(const Volume& v, const DisorderField& f, double q, int hmax) {
  if (hmax < 0) throw DomainError("hmax must be non-negative");
  const std::size_t n = v.size();
  const double count = std::pow(2.0 * hmax + 1.0, static_cast<double>(n));
  if (count > 1e7) throw DomainError("enumeration exceeds 1e7 configurations");
  const double mstar = f.params().mstar;
  const Eigen::MatrixXd G = green_matrix(v, q);
  // E = (m*^2/2) u^T (I - G) u - sum eta at zero boundary.
  const Eigen::MatrixXd M = 0.5 * mstar * mstar * (Eigen::MatrixXd::Identity(n, n) - G);
  const int base = 2 * hmax + 1;
  std::vector<double> dt(n * base), et(n * base);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = -hmax; k <= hmax; ++k) {
      dt[i * base + k + hmax] = k + f.dshift(v.sites[i], k);
      et[i * base + k + hmax] = f.eta(v.sites[i], k);
    }

  NuTable t;
  t.sites = n;
  t.hmax = hmax;
  const std::size_t total = static_cast<std::size_t>(count);
  std::vector<double> logw(total);
  std::vector<int> idx(n, 0);
  Eigen::VectorXd u(n), mu;
  double seta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = dt[i * base];
    seta += et[i * base];
  }
  mu = M * u;
  double quad = u.dot(mu);
  for (std::size_t k = 0;; ++k) {
    logw[k] = -(quad - seta);
    if (k + 1 == total) break;
    // Odometer step: last site fastest.
    std::size_t i = n;
    while (i-- > 0) {
      const int old = idx[i];
      const int nw = (old + 1 == base) ? 0 : old + 1;
      const double du = dt[i * base + nw] - u[i];
      quad += 2.0 * du * mu[i] + du * du * M(i, i);
      mu += du * M.col(static_cast<Eigen::Index>(i));
      u[i] += du;
      seta += et[i * base + nw] - et[i * base + old];
      idx[i] = nw;
      if (nw != 0) break;
    }
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double l : logw) z += std::exp(l - mx);
  t.log_z = mx + std::log(z);
  t.prob.resize(total);
  for (std::size_t k = 0; k < total; ++k) t.prob[k] = std::exp(logw[k] - t.log_z);

  // e^{-E} <= e^{n delta_eta} prod_x exp(-c (|h_x| - delta_d)_+^2), c = (m*^2/2) lambda_min(I - G).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lmin = 1.0 - es.eigenvalues().maxCoeff();
  const double c = 0.5 * mstar * mstar * lmin;
  const double dd = f.params().delta_d;
  double s_in = 0.0, tail = 0.0;
  for (int k = -hmax; k <= hmax; ++k) {
    const double a = std::max(0.0, std::abs(k) - dd);
    s_in += std::exp(-c * a * a);
  }
  for (int k = hmax + 1; k <= hmax + 200; ++k) tail += 2.0 * std::exp(-c * (k - dd) * (k - dd));
  const double log_omit = n * f.params().delta_eta + n * std::log(s_in) +
                          std::log(std::expm1(n * std::log1p(tail / s_in)));
  t.omitted_mass_bound = std::exp(log_omit - t.log_z);
  return t;
}

HeightChain::HeightChain(const CouplingSet& cs, const DisorderField& f, const MCMCParams& p, HeightConfig init)
    : cs_(cs), f_(f), p_(p), h_(std::move(init)) {
  if (p_.window < 1) throw DomainError("MCMC window must be at least 1");
  const std::size_t n = cs.volume.size();
  if (h_.empty()) h_.assign(n, 0);
  check_domain(cs.volume, h_);
  for (int x : h_)
    if (!allowed(x)) throw DomainError("initial state violates the truncation");
  const int w = 2 * kTable + 1;
  dtab_.resize(n * w);
  etab_.resize(n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = -kTable; k <= kTable; ++k) {
      dtab_[i * w + k + kTable] = f.dshift(cs.volume.sites[i], k);
      etab_[i * w + k + kTable] = f.eta(cs.volume.sites[i], k);
    }
  u_.resize(n);
  for (std::size_t i = 0; i < n; ++i) u_[i] = h_[i] + d_at(i, h_[i]);
  s_ = cs.J * u_;
  diag_ = cs.J.rowwise().sum() + cs.K;
}

double HeightChain::d_at(std::size_t x, int k) const {
  if (std::abs(k) <= kTable) return dtab_[x * (2 * kTable + 1) + k + kTable];
  return f_.dshift(cs_.volume.sites[x], k);
}

double HeightChain::eta_at(std::size_t x, int k) const {
  if (std::abs(k) <= kTable) return etab_[x * (2 * kTable + 1) + k + kTable];
  return f_.eta(cs_.volume.sites[x], k);
}

double HeightChain::energy() const { return ferro_energy(cs_, f_, h_); }

void HeightChain::update_site(std::size_t x, Rng& rng) {
  const int span = 2 * p_.window + 1;
  const int lo = h_[x] - rng.below(span);
  const double u0 = u_[x];
  const double e0 = eta_at(x, h_[x]);
  double logw[64];
  double uc[64];
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < span; ++j) {
    const int k = lo + j;
    if (!allowed(k)) {
      logw[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double u1 = k + d_at(x, k);
    uc[j] = u1;
    // Delta E = (u1^2 - u0^2) (sum_y J_xy + K_x) - 2 (u1 - u0) s_x - (eta(k) - eta(h)).
    const double de = (u1 * u1 - u0 * u0) * diag_[x] - 2.0 * (u1 - u0) * s_[x] - (eta_at(x, k) - e0);
    logw[j] = -de;
    mx = std::max(mx, logw[j]);
  }
  double tot = 0.0;
  for (int j = 0; j < span; ++j) tot += std::exp(logw[j] - mx);
  double r = rng.uniform() * tot;
  int pick = span - 1;
  for (int j = 0; j < span; ++j) {
    const double w = std::exp(logw[j] - mx);
    if (r < w && w > 0.0) {
      pick = j;
      break;
    }
    r -= w;
  }
  while (!std::isfinite(logw[pick])) --pick;  // roundoff guard
  ++updates_;
  const int k = lo + pick;
  if (k == h_[x]) return;
  ++changes_;
  const double du = uc[pick] - u0;
  h_[x] = k;
  u_[x] = uc[pick];
  s_ += du * cs_.J.col(static_cast<Eigen::Index>(x));
}

void HeightChain::shift_move(Rng& rng) {
  const int step = rng.uniform() < 0.5 ? -1 : 1;
  HeightConfig trial = h_;
  for (int& x : trial) {
    x += step;
    if (!allowed(x)) return;
  }
  ++shifts_;
  const double e0 = ferro_energy(cs_, f_, h_);
  const double e1 = ferro_energy(cs_, f_, trial);
  if (e1 <= e0 || rng.uniform() < std::exp(e0 - e1)) {
    ++shift_acc_;
    h_ = std::move(trial);
    for (std::size_t i = 0; i < h_.size(); ++i) u_[i] = h_[i] + d_at(i, h_[i]);
    s_ = cs_.J * u_;
  }
}

void HeightChain::sweep(Rng& rng) {
  if (2 * p_.window + 1 > 64) throw DomainError("MCMC window too wide");
  for (std::size_t x = 0; x < h_.size(); ++x) update_site(x, rng);
  ++sweeps_done_;
  if (p_.shift_every > 0 && sweeps_done_ % p_.shift_every == 0) shift_move(rng);
}

double integrated_autocorrelation(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double c0 = 0.0;
  for (double x : series) c0 += (x - mean) * (x - mean);
  c0 /= n;
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double c = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) c += (series[i] - mean) * (series[i + t] - mean);
    tau += 2.0 * c / (n * c0);
    if (static_cast<double>(t) >= 5.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

ChainDiagnostics nu_mcmc(const CouplingSet& cs, const DisorderField& f, Rng& rng, const MCMCParams& p,
                         const std::function<void(const HeightConfig&)>& sink) {
  if (p.sweeps < 1 || p.burn_in < 0 || p.thin < 1) throw DomainError("bad MCMC schedule");
  HeightChain chain(cs, f, p);
  for (long s = 0; s < p.burn_in; ++s) chain.sweep(rng);
  std::vector<double> obs;
  ChainDiagnostics d;
  for (long s = 0; s < p.sweeps; ++s) {
    chain.sweep(rng);
    if ((s + 1) % p.thin == 0) {
      const HeightConfig& h = chain.state();
      obs.push_back(std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size()));
      if (sink) sink(h);
      ++d.samples;
    }
  }
  d.sweeps = p.sweeps;
  d.change_rate = chain.change_rate();
  d.shift_acceptance = chain.shift_acceptance();
  d.tau_int = integrated_autocorrelation(obs);
  return d;
}

RoughnessEstimator::RoughnessEstimator(const Volume& v, const DisorderField& f, double q, const Site& x0)
    : vol_(v), f_(f), x0_(x0) {
  const std::size_t i0 = v.at(x0);
  RealConfig e = RealConfig::Zero(static_cast<Eigen::Index>(v.size()));
  e[i0] = 1.0;
  g_ = resolvent_solve(v, q, e, 1e-13);
  gaussian_ = q > 0.0 ? resolvent_entry(v, q, x0, x0) / q : 1.0;
  abs_sum_.assign(v.size(), 0.0);
}

void RoughnessEstimator::add(const HeightConfig& h) {
  check_domain(vol_, h);
  const double mstar = f_.params().mstar;
  double c = 0.0;
  for (std::size_t y = 0; y < h.size(); ++y) {
    c += g_[y] * mstar * (h[y] + f_.dshift(vol_.sites[y], h[y]));
    abs_sum_[y] += std::abs(h[y]);
  }
  values_.push_back(c * c);
}

RoughnessReport RoughnessEstimator::report() const {
  RoughnessReport r;
  r.x0 = x0_;
  r.samples = static_cast<long>(values_.size());
  r.gaussian_part = gaussian_;
  if (values_.empty()) {
    r.total = gaussian_;
    return r;
  }
  const double n = static_cast<double>(values_.size());
  r.centering_part = std::accumulate(values_.begin(), values_.end(), 0.0) / n;
  // Batch means over 20 batches when there are enough samples.
  const std::size_t nb = values_.size() >= 40 ? 20 : values_.size();
  const std::size_t bs = values_.size() / nb;
  std::vector<double> means;
  for (std::size_t b = 0; b < nb; ++b) {
    double s = 0.0;
    for (std::size_t i = b * bs; i < (b + 1) * bs; ++i) s += values_[i];
    means.push_back(s / bs);
  }
  const double mb = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double var = 0.0;
  for (double m : means) var += (m - mb) * (m - mb);
  if (means.size() > 1) var /= (means.size() - 1);
  r.centering_se = std::sqrt(var / means.size());
  r.total = r.gaussian_part + r.centering_part;
  for (std::size_t y = 0; y < abs_sum_.size(); ++y) r.summability += g_[y] * abs_sum_[y] / n;
  return r;
}

RoughnessReport roughness(const Volume& v, const DisorderField& f, double q, const std::vector<HeightConfig>& samples,
                          const Site& x0) {
  RoughnessEstimator est(v, f, q, x0);
  for (const HeightConfig& h : samples) est.add(h);
  return est.report();
}

JointState sample_gibbs(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const HeightConfig& h,
                        const GaussianSampler& gs, Rng& rng) {
  JointState s;
  s.h = h;
  s.m = gs.draw(gaussian_center(v, f, q, bc, h), rng);
  return s;
}

JointState sample_gibbs(const CouplingSet& cs, const DisorderField& f, Rng& rng, const MCMCParams& p) {
  HeightChain chain(cs, f, p);
  for (long s = 0; s < p.burn_in + p.sweeps; ++s) chain.sweep(rng);
  GaussianSampler gs(cs.volume, cs.q);
  return sample_gibbs(cs.volume, f, cs.q, zero_bc(cs.volume), chain.state(), gs, rng);
}

}  // namespace sosf
