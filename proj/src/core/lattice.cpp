#include "lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>

#include <Eigen/IterativeLinearSolvers>

namespace sosf {

int dist1(const Site& a, const Site& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

int dist_inf(const Site& a, const Site& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

Site offset(const Site& s, int axis, int step) {
  Site t = s;
  t[axis] += step;
  return t;
}

bool Volume::contains(const Site& s) const {
  for (int k = 0; k < 3; ++k) {
    if (s[k] < lo[k] || s[k] > hi[k]) return false;
  }
  return true;
}

std::optional<std::size_t> Volume::index(const Site& s) const {
  if (!contains(s)) return std::nullopt;
  std::size_t idx = 0;
  for (int k = 0; k < dim; ++k) {
    idx = idx * static_cast<std::size_t>(hi[k] - lo[k] + 1) + static_cast<std::size_t>(s[k] - lo[k]);
  }
  return idx;
}

std::size_t Volume::at(const Site& s) const {
  auto i = index(s);
  if (!i) throw DomainError("site outside volume");
  return *i;
}

std::optional<std::size_t> Volume::boundary_index(const Site& s) const {
  auto it = std::lower_bound(boundary.begin(), boundary.end(), s);
  if (it == boundary.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - boundary.begin());
}

int Volume::boundary_degree(std::size_t i) const {
  const Site& s = sites[i];
  int n = 0;
  for (int k = 0; k < dim; ++k) {
    if (s[k] == lo[k]) ++n;
    if (s[k] == hi[k]) ++n;
  }
  return n;
}

std::vector<std::size_t> Volume::neighbours(std::size_t i) const {
  std::vector<std::size_t> out;
  for (int k = 0; k < dim; ++k) {
    for (int step : {-1, 1}) {
      if (auto j = index(offset(sites[i], k, step))) out.push_back(*j);
    }
  }
  return out;
}

Volume make_box(int dim, const Site& lo, const Site& hi) {
  if (dim < 1 || dim > 3) throw DomainError("dimension must be 1, 2 or 3");
  Volume v;
  v.dim = dim;
  v.lo = lo;
  v.hi = hi;
  for (int k = dim; k < 3; ++k) v.lo[k] = v.hi[k] = 0;
  for (int k = 0; k < dim; ++k) {
    if (v.hi[k] < v.lo[k]) throw DomainError("empty box");
  }
  Site s = v.lo;
  while (true) {
    v.sites.push_back(s);
    int k = dim - 1;
    while (k >= 0 && s[k] == v.hi[k]) {
      s[k] = v.lo[k];
      --k;
    }
    if (k < 0) break;
    ++s[k];
  }
  for (const Site& x : v.sites) {
    for (int k = 0; k < dim; ++k) {
      for (int step : {-1, 1}) {
        Site y = offset(x, k, step);
        if (!v.contains(y)) v.boundary.push_back(y);
      }
    }
  }
  std::sort(v.boundary.begin(), v.boundary.end());
  v.boundary.erase(std::unique(v.boundary.begin(), v.boundary.end()), v.boundary.end());
  return v;
}

Volume make_box(int dim, int side) {
  if (side < 1) throw DomainError("side must be positive");
  Site hi{};
  for (int k = 0; k < dim && k < 3; ++k) hi[k] = side - 1;
  return make_box(dim, Site{}, hi);
}

void check_domain(const Volume& v, const RealConfig& u) {
  if (static_cast<std::size_t>(u.size()) != v.size()) throw DomainError("real config does not match volume");
}

void check_domain(const Volume& v, const HeightConfig& h) {
  if (h.size() != v.size()) throw DomainError("height config does not match volume");
}

void check_boundary(const Volume& v, const RealConfig& bc) {
  if (static_cast<std::size_t>(bc.size()) != v.boundary.size()) throw DomainError("boundary config does not match volume");
}

Eigen::SparseMatrix<double> precision_matrix(const Volume& v, double q) {
  if (!(q >= 0.0)) throw DomainError("q must be nonnegative");
  const auto n = static_cast<Eigen::Index>(v.size());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(v.size() * (1 + 2 * v.dim));
  for (std::size_t i = 0; i < v.size(); ++i) {
    t.emplace_back(i, i, 1.0 + 2.0 * v.dim * q);
    for (std::size_t j : v.neighbours(i)) t.emplace_back(i, j, -q);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

RealConfig laplacian_apply(const Volume& v, double q, const RealConfig& u) {
  check_domain(v, u);
  return precision_matrix(v, q) * u;
}

ResolventSolver::ResolventSolver(const Volume& v, double q, std::size_t dense_threshold)
    : vol_(v), q_(q), dense_(v.size() <= dense_threshold), a_(precision_matrix(v, q)) {
  if (dense_) {
    llt_.compute(Eigen::MatrixXd(a_));
    if (llt_.info() != Eigen::Success) throw SolverError("dense factorization failed", NAN);
  }
}

RealConfig ResolventSolver::solve(const RealConfig& rhs, double tol) const {
  check_domain(vol_, rhs);
  if (!(tol > 0)) throw DomainError("tol must be positive");
  const double scale = rhs.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return RealConfig::Zero(rhs.size());
  RealConfig u;
  if (dense_) {
    u = llt_.solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(std::min(tol, 1e-10) * 1e-2);
    cg.setMaxIterations(10 * static_cast<int>(vol_.size()) + 100);
    cg.compute(a_);
    u = cg.solve(rhs);
  }
  const double res = (a_ * u - rhs).lpNorm<Eigen::Infinity>();
  if (!(res <= tol * scale)) throw SolverError("resolvent solve did not converge", res / scale);
  return u;
}

RealConfig resolvent_solve(const Volume& v, double q, const RealConfig& rhs, double tol) {
  return ResolventSolver(v, q).solve(rhs, tol);
}

Eigen::MatrixXd green_matrix(const Volume& v, double q) {
  Eigen::MatrixXd a(precision_matrix(v, q));
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw SolverError("dense factorization failed", NAN);
  Eigen::MatrixXd g = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  return 0.5 * (g + g.transpose());
}

double resolvent_entry(const Volume& v, double q, const Site& x, const Site& y) {
  const std::size_t i = v.at(x), j = v.at(y);
  RealConfig e = RealConfig::Zero(static_cast<Eigen::Index>(v.size()));
  e[static_cast<Eigen::Index>(j)] = 1.0;
  return q * resolvent_solve(v, q, e, 1e-13)[static_cast<Eigen::Index>(i)];
}

bool is_connected(const std::vector<Site>& c) {
  if (c.empty()) return false;
  std::vector<char> seen(c.size(), 0);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!todo.empty()) {
    std::size_t a = todo.front();
    todo.pop();
    for (std::size_t b = 0; b < c.size(); ++b) {
      if (!seen[b] && dist1(c[a], c[b]) == 1) {
        seen[b] = 1;
        ++count;
        todo.push(b);
      }
    }
  }
  return count == c.size();
}

double walk_tail_bound(int dim, double q, int max_len) {
  if (q == 0.0) return 0.0;
  const double w = 1.0 / (1.0 / q + 2.0 * dim);
  const double rho = 2.0 * dim * w;
  return w * std::pow(rho, max_len + 1) / (1.0 - rho);
}

Eigen::MatrixXd walk_resolvent_matrix(int dim, const std::vector<Site>& c, double q, int max_len,
                                      double* tail_bound) {
  const std::size_t n = c.size();
  if (n == 0 || n > 24) throw DomainError("walk support must have 1..24 sites");
  if (!is_connected(c)) throw DomainError("walk support is not connected");
  if (max_len < static_cast<int>(n) - 1) throw DomainError("max_len shorter than |C|-1");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (tail_bound) *tail_bound = walk_tail_bound(dim, q, max_len);
  if (q == 0.0) return out;
  const double w = 1.0 / (1.0 / q + 2.0 * dim);
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (dist1(c[a], c[b]) == 1) nb[a].push_back(b);
    }
  }
  const std::size_t nmask = std::size_t{1} << n;
  const std::size_t full = nmask - 1;
  std::vector<double> cur(n * nmask), nxt(n * nmask);
  for (std::size_t start = 0; start < n; ++start) {
    std::fill(cur.begin(), cur.end(), 0.0);
    cur[start * nmask + (std::size_t{1} << start)] = w;
    for (int len = 0; len <= max_len; ++len) {
      for (std::size_t s = 0; s < n; ++s) out(start, s) += cur[s * nmask + full];
      if (len == max_len) break;
      std::fill(nxt.begin(), nxt.end(), 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        const double* row = &cur[s * nmask];
        for (std::size_t m = 0; m < nmask; ++m) {
          const double val = row[m];
          if (val == 0.0) continue;
          for (std::size_t t : nb[s]) nxt[t * nmask + (m | (std::size_t{1} << t))] += val * w;
        }
      }
      std::swap(cur, nxt);
    }
  }
  return out;
}

WalkTerm walk_resolvent(int dim, const Site& x, const Site& y, const std::vector<Site>& c, double q,
                        int max_len) {
  auto ix = std::find(c.begin(), c.end(), x);
  auto iy = std::find(c.begin(), c.end(), y);
  if (ix == c.end() || iy == c.end()) throw DomainError("walk endpoints must lie in C");
  WalkTerm t;
  t.x = x;
  t.y = y;
  t.support = c;
  t.walk_cutoff = max_len;
  Eigen::MatrixXd m = walk_resolvent_matrix(dim, c, q, max_len, &t.tail_bound);
  t.value = m(ix - c.begin(), iy - c.begin());
  return t;
}

RealConfig boundary_field(const Volume& v, double q, const RealConfig& bc) {
  check_boundary(v, bc);
  RealConfig out = RealConfig::Zero(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int k = 0; k < v.dim; ++k) {
      for (int step : {-1, 1}) {
        if (auto b = v.boundary_index(offset(v.sites[i], k, step))) out[i] += q * bc[*b];
      }
    }
  }
  return out;
}

}  // namespace sosf
