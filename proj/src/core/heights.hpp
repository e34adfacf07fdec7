#ifndef SOSF_HEIGHTS_HPP
#define SOSF_HEIGHTS_HPP

#include <functional>
#include <vector>

#include "disorder.hpp"
#include "gibbs.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace sosf {

// Effective couplings of the integer-height model, zero boundary condition:
// E(h) = sum_{x<y} J_xy (u_x - u_y)^2 + sum_x K_x u_x^2 - sum_x eta_x(h_x),  u = h + d(h).
// J is the per-unordered-pair coefficient (m*^2/2q) R(x,y).
struct CouplingSet {
  Volume volume;
  double q = 0.0;
  double mstar = 0.0;
  int support_cutoff = 0;
  Eigen::MatrixXd G;  // (1 - q Delta)^{-1}
  Eigen::MatrixXd J;  // zero diagonal
  Eigen::VectorXd K;
  std::vector<std::size_t> nearest_boundary;  // y(x), index into volume.boundary
  double truncation_bar = 0.0;                // largest dropped coupling bound
  double solver_bar = 0.0;                    // max |P G - I|
};

double j_nn_lower_bound(int dim, double q, double mstar);
// Decay bound in the ordered-pair normalization, i.e. for J/2.
double j_pair_decay_bound(int dim, double q, double mstar, int dist);
// Walk-count bound for the stored J.
double j_decay_bound(int dim, double q, double mstar, int dist);

CouplingSet couplings(const Volume& v, double q, double mstar, int support_cutoff = 64);

double effective_energy(const Volume& v, const DisorderField& f, double q, const HeightConfig& h);
double effective_energy(const Volume& v, const DisorderField& f, double q, const HeightConfig& h,
                        const RealConfig& bc);

// Ferromagnetic form built from the coupling set (no additive constant at zero bc).
double ferro_energy(const CouplingSet& cs, const DisorderField& f, const HeightConfig& h);

struct NuTable {
  std::size_t sites = 0;
  int hmax = 0;
  std::vector<double> prob;  // mixed-radix index, first site most significant
  double log_z = 0.0;        // log sum exp(-E) over the enumerated set
  double omitted_mass_bound = 0.0;
  HeightConfig config(std::size_t k) const;
  std::size_t index(const HeightConfig& h) const;
};

NuTable nu_exact(const Volume& v, const DisorderField& f, double q, int hmax);

struct MCMCParams {
  long sweeps = 20000;
  long burn_in = 2000;
  int window = 2;
  int shift_every = 10;
  int thin = 10;
  int hmax = -1;  // truncation |h| <= hmax when >= 0
};

struct ChainDiagnostics {
  long sweeps = 0;
  long samples = 0;
  double change_rate = 0.0;
  double shift_acceptance = 0.0;
  double tau_int = 1.0;
};

class HeightChain {
 public:
  HeightChain(const CouplingSet& cs, const DisorderField& f, const MCMCParams& p, HeightConfig init = {});
  void sweep(Rng& rng);
  const HeightConfig& state() const { return h_; }
  double energy() const;
  double change_rate() const { return updates_ ? double(changes_) / double(updates_) : 0.0; }
  double shift_acceptance() const { return shifts_ ? double(shift_acc_) / double(shifts_) : 0.0; }

 private:
  double d_at(std::size_t x, int k) const;
  double eta_at(std::size_t x, int k) const;
  void update_site(std::size_t x, Rng& rng);
  void shift_move(Rng& rng);
  bool allowed(int k) const { return p_.hmax < 0 || std::abs(k) <= p_.hmax; }

  const CouplingSet& cs_;
  const DisorderField& f_;
  MCMCParams p_;
  HeightConfig h_;
  Eigen::VectorXd u_, s_, diag_;
  static constexpr int kTable = 16;
  std::vector<double> dtab_, etab_;
  long sweeps_done_ = 0, updates_ = 0, changes_ = 0, shifts_ = 0, shift_acc_ = 0;
};

double integrated_autocorrelation(const std::vector<double>& series);

ChainDiagnostics nu_mcmc(const CouplingSet& cs, const DisorderField& f, Rng& rng, const MCMCParams& p,
                         const std::function<void(const HeightConfig&)>& sink);

struct RoughnessReport {
  Site x0{};
  long samples = 0;
  double gaussian_part = 0.0;
  double centering_part = 0.0;
  double centering_se = 0.0;
  double total = 0.0;
  double summability = 0.0;  // sum_y G(x0,y) <|h_y|>
};

class RoughnessEstimator {
 public:
  RoughnessEstimator(const Volume& v, const DisorderField& f, double q, const Site& x0);
  void add(const HeightConfig& h);
  RoughnessReport report() const;

 private:
  Volume vol_;
  const DisorderField& f_;
  Site x0_;
  RealConfig g_;
  double gaussian_ = 0.0;
  std::vector<double> values_;
  std::vector<double> abs_sum_;
};

RoughnessReport roughness(const Volume& v, const DisorderField& f, double q, const std::vector<HeightConfig>& samples,
                          const Site& x0);

// Two-stage exact draw given an h sample: m ~ N[center(h), (1 - q Delta)^{-1}].
JointState sample_gibbs(const Volume& v, const DisorderField& f, double q, const RealConfig& bc, const HeightConfig& h,
                        const GaussianSampler& gs, Rng& rng);
// Runs a chain for the height marginal, then draws m.
JointState sample_gibbs(const CouplingSet& cs, const DisorderField& f, Rng& rng, const MCMCParams& p);

}  // namespace sosf

#endif
