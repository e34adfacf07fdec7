#ifndef SOSF_CONTOURS_HPP
#define SOSF_CONTOURS_HPP

#include <cstdint>
#include <vector>

#include "disorder.hpp"
#include "heights.hpp"
#include "lattice.hpp"

namespace sosf {

struct PeierlsConstants {
  int dim = 1;
  double q = 0.0;
  double mstar = 0.0;
  double delta_d = 0.0;
  double alpha = 0.0;
  int range_r = 1;
  double tau_nn = 0.0;
  double beta = 0.0;
  double K_vol = 0.0;
  double tau1 = 0.0;
  double tilde_beta = 0.0;  // volume constant of the full activity bound, min(alpha, beta, tau1)
};

PeierlsConstants peierls_constants(int dim, double q, double mstar, double delta_d);

// Extended height: h inside the volume, 0 elsewhere.
int height_at(const Volume& v, const HeightConfig& h, const Site& z);

struct SitePair {
  Site x{}, y{};
};

struct DangerousEdges {
  std::vector<SitePair> e1;  // dist <= r, heights differ
  std::vector<SitePair> e2;  // dist > r, gap >= exp(alpha dist / 2)
};

// Pairs with at least one endpoint in v; x is the lexicographically smaller site.
DangerousEdges dangerous_edges(const Volume& v, const HeightConfig& h, const PeierlsConstants& pc);

// Q({x,y}): corner at the componentwise minimum, side |x - y|_inf.
std::vector<Site> patch_cube(const Site& x, const Site& y, int dim);

// Nearest-neighbour path from the lexicographically smaller endpoint, axis 1 first.
std::vector<Site> staircase(const Site& x, const Site& y, int dim);

struct Contour {
  Volume volume;
  std::vector<char> support;  // per site of volume
  HeightConfig heights;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

Contour lt_support(const Volume& v, const HeightConfig& h, const PeierlsConstants& pc);

// Extended heights constant on every connected component of the complement (box plus collar).
bool complement_constant(const Contour& c);

std::vector<Contour> components(const Contour& c);

// Sum of |h_x - h_y| over nn pairs with an endpoint in the support.
long surface_energy(const Contour& c);

struct GradientVolumeReport {
  long components = 0;
  long violations = 0;
  double worst_ratio = 0.0;  // min over components of sum|dh| / (K_vol |gamma|)
  bool vacuous = true;
};

// Cube-patched E2 set on a finite patch (pairs inside the patch only).
GradientVolumeReport gradient_volume_audit(const Volume& patch, const HeightConfig& h, const PeierlsConstants& pc);

struct GradientVolumeSummary {
  long configurations = 0;
  long components = 0;
  long violations = 0;
  double worst_ratio = 0.0;
};

GradientVolumeSummary gradient_volume_random_audit(const PeierlsConstants& pc, long configurations, std::uint64_t seed);

// c2 = (m*^2/4q) 2 R_nn 2 E[d^2]: mean of a flat nearest-neighbour small field.
double flat_pair_mean(int dim, double q, double mstar, double mean_d2);

// exp(-sum of dangerous pair terms) times exp(c2 #non-flat nn pairs) for one component.
double lt_activity(const CouplingSet& cs, const DisorderField& f, const Contour& comp, const PeierlsConstants& pc);

// log of exp(-beta E_s - tau |support|).
double peierls_log_bound(const Contour& c, double beta, double tau);

struct PeierlsAudit {
  long configurations = 0;
  long contours = 0;
  long violations = 0;
  double worst_margin = 0.0;  // min of log bound - log activity
};

PeierlsAudit peierls_exhaustive(const CouplingSet& cs, const DisorderField& f, const PeierlsConstants& pc, int hmax);

struct HTTerm {
  std::vector<Site> path;
  Site x{}, y{};
  bool boundary = false;  // y is the nearest boundary site of x
  double value = 0.0;     // S_g
  double bound = 0.0;     // B_g
};

struct HTTerms {
  std::vector<HTTerm> terms;
  double omitted_bound = 0.0;  // sum of B over longer polymers
};

HTTerms ht_terms(const CouplingSet& cs, const DisorderField& f, const HeightConfig& h, const PeierlsConstants& pc,
                 int size_cutoff);

struct SmallFieldTerm {
  enum class Kind { local, pair, multi, boundary };
  std::vector<Site> support;
  int height = 0;
  double value = 0.0;
  double bound = 0.0;
  Kind kind = Kind::local;
};

// Bound on |beta S~_C| for a connected set of the given size.
double small_field_bound(int dim, double q, double mstar, double delta_d, double alpha, std::size_t size);
double boundary_field_bound(int dim, double q, double mstar, double delta_d);

// Connected subsets of v with lo <= |C| <= hi, as sorted index lists.
std::vector<std::vector<std::size_t>> connected_subsets(const Volume& v, std::size_t lo, std::size_t hi,
                                                        std::size_t limit = 1000000);

std::vector<SmallFieldTerm> small_fields(const CouplingSet& cs, const DisorderField& f, int hmax, int size_cutoff);

struct RepresentationCutoffs {
  int polymer_size = 12;
  int support_cutoff = 64;
  int threads = 1;
};

struct Rho0Entry {
  std::size_t config = 0;  // NuTable-style mixed-radix index
  std::uint64_t mask = 0;  // support
  double value = 0.0;
  double log_bound = 0.0;
  long surface_energy = 0;
  int support_size = 0;
};

struct RepresentationAudit {
  std::size_t configurations = 0;
  std::size_t ht1_polymers = 0;
  std::size_t ht2_polymers = 0;
  std::size_t small_field_sets = 0;
  double max_log_k_deviation = 0.0;
  double bar = 0.0;  // combined truncation bar on |log K_h - log K|
  double max_subtraction_error = 0.0;
  bool rho_nonneg = true;
  long peierls_violations = 0;
  double worst_peierls_margin = 0.0;
  bool k_constant(double rel_tol) const { return max_log_k_deviation <= rel_tol + bar; }
};

struct Representation {
  Volume volume;
  int hmax = 0;
  PeierlsConstants pc;
  double log_k = 0.0;
  double K_Lambda = 0.0;
  std::vector<Rho0Entry> rho0;  // sorted by (config, mask)
  std::vector<double> small_field_energy;  // W(h) per config
  std::vector<double> energy;              // E(h) per config
  RepresentationAudit audit;

  HeightConfig config(std::size_t k) const;
  std::size_t index(const HeightConfig& h) const;
  // rho0 at (h, support mask), 0 when absent.
  double rho0_at(const HeightConfig& h, std::uint64_t mask) const;
  double rho0_sum(const HeightConfig& h) const;
};

Representation assemble_representation(const Volume& v, const DisorderField& f, double q, int hmax,
                                       const RepresentationCutoffs& cut = {});

std::uint64_t support_mask(const Contour& c);

// |rho0(LT support; h) - prod_i rho0(component_i; h_i)| / rho0(LT support; h).
double factorization_error(const Representation& rep, const HeightConfig& h);

}  // namespace sosf

#endif
