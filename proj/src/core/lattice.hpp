#ifndef SOSF_LATTICE_HPP
#define SOSF_LATTICE_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace sosf {

// Unused trailing coordinates are 0.
using Site = std::array<int, 3>;
using RealConfig = Eigen::VectorXd;
using HeightConfig = std::vector<int>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error {
  using Error::Error;
};

struct SolverError : Error {
  double residual;
  SolverError(const std::string& what, double res) : Error(what), residual(res) {}
};

inline constexpr std::size_t kDenseThreshold = 4096;

int dist1(const Site& a, const Site& b);
int dist_inf(const Site& a, const Site& b);
Site offset(const Site& s, int axis, int step);

struct Volume {
  int dim = 1;
  Site lo{}, hi{};
  std::vector<Site> sites;     // lexicographic, first axis slowest
  std::vector<Site> boundary;  // lexicographic

  std::size_t size() const { return sites.size(); }
  bool contains(const Site& s) const;
  std::optional<std::size_t> index(const Site& s) const;
  std::size_t at(const Site& s) const;
  std::optional<std::size_t> boundary_index(const Site& s) const;
  // Number of nearest neighbours of site i lying in the boundary.
  int boundary_degree(std::size_t i) const;
  std::vector<std::size_t> neighbours(std::size_t i) const;
  bool same_box(const Volume& o) const { return dim == o.dim && lo == o.lo && hi == o.hi; }
};

Volume make_box(int dim, int side);
Volume make_box(int dim, const Site& lo, const Site& hi);

void check_domain(const Volume& v, const RealConfig& u);
void check_domain(const Volume& v, const HeightConfig& h);
void check_boundary(const Volume& v, const RealConfig& bc);

// (1 - q Delta) with the Dirichlet diagonal 2d kept everywhere.
Eigen::SparseMatrix<double> precision_matrix(const Volume& v, double q);

RealConfig laplacian_apply(const Volume& v, double q, const RealConfig& u);

// Solves (1 - q Delta) u = rhs. Dense LLT up to kDenseThreshold sites, CG above.
class ResolventSolver {
 public:
  ResolventSolver(const Volume& v, double q, std::size_t dense_threshold = kDenseThreshold);
  RealConfig solve(const RealConfig& rhs, double tol = 1e-12) const;
  bool dense() const { return dense_; }

 private:
  Volume vol_;
  double q_;
  bool dense_;
  Eigen::SparseMatrix<double> a_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

RealConfig resolvent_solve(const Volume& v, double q, const RealConfig& rhs, double tol = 1e-12);

// (1 - q Delta)^{-1} as a dense matrix.
Eigen::MatrixXd green_matrix(const Volume& v, double q);

// R = (q^{-1} - Delta)^{-1} = q (1 - q Delta)^{-1}.
double resolvent_entry(const Volume& v, double q, const Site& x, const Site& y);

bool is_connected(const std::vector<Site>& c);

struct WalkTerm {
  Site x{}, y{};
  std::vector<Site> support;
  double value = 0.0;
  int walk_cutoff = 0;
  double tail_bound = 0.0;
};

double walk_tail_bound(int dim, double q, int max_len);

// Sum over nearest-neighbour walks x -> y visiting exactly c, weight (1/q + 2d)^{-(len+1)}.
WalkTerm walk_resolvent(int dim, const Site& x, const Site& y, const std::vector<Site>& c,
                        double q, int max_len);

// All endpoints at once: result(i, j) = R(c[i] -> c[j]; c).
Eigen::MatrixXd walk_resolvent_matrix(int dim, const std::vector<Site>& c, double q, int max_len,
                                      double* tail_bound = nullptr);

RealConfig boundary_field(const Volume& v, double q, const RealConfig& bc);

}  // namespace sosf

#endif
