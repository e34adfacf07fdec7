#include "contours.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <thread>

namespace sosf {

namespace {

Site add(const Site& a, const Site& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

// Offsets o != 0 with |o|_1 <= r.
std::vector<Site> ball_offsets(int dim, int r) {
  std::vector<Site> out;
  const int ry = dim >= 2 ? r : 0, rz = dim >= 3 ? r : 0;
  for (int a = -r; a <= r; ++a)
    for (int b = -ry; b <= ry; ++b)
      for (int c = -rz; c <= rz; ++c) {
        const int n = std::abs(a) + std::abs(b) + std::abs(c);
        if (n > 0 && n <= r) out.push_back({a, b, c});
      }
  return out;
}

bool far_gap(int gap, int dist, double alpha) { return std::abs(gap) >= std::exp(0.5 * alpha * dist); }

void mark_cube(const Volume& v, const Site& x, const Site& y, std::vector<char>& mark) {
  int side = dist_inf(x, y);
  Site lo{}, hi{};
  for (int k = 0; k < 3; ++k) {
    if (k < v.dim) {
      const int m = std::min(x[k], y[k]);
      lo[k] = std::max(m, v.lo[k]);
      hi[k] = std::min(m + side, v.hi[k]);
      if (lo[k] > hi[k]) return;
    }
  }
  Site s{};
  for (s[0] = lo[0]; s[0] <= hi[0]; ++s[0])
    for (s[1] = lo[1]; s[1] <= hi[1]; ++s[1])
      for (s[2] = lo[2]; s[2] <= hi[2]; ++s[2]) mark[*v.index(s)] = 1;
}

std::vector<char> support_of(const Volume& v, const HeightConfig& h, const PeierlsConstants& pc,
                             const std::vector<Site>& ball, const std::vector<Site>& far) {
  const std::size_t n = v.size();
  std::vector<char> s(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Site& o : ball) {
      if (height_at(v, h, add(v.sites[i], o)) != h[i]) {
        s[i] = 1;
        break;
      }
    }
  }
  const double thr = std::exp(0.5 * pc.alpha * (pc.range_r + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int gap = h[i] - h[j];
      if (std::abs(gap) < thr) continue;
      const int r = dist1(v.sites[i], v.sites[j]);
      if (r > pc.range_r && far_gap(gap, r, pc.alpha)) mark_cube(v, v.sites[i], v.sites[j], s);
    }
    if (std::abs(h[i]) < thr) continue;
    for (const Site& o : far) {
      const Site z = add(v.sites[i], o);
      if (v.contains(z)) continue;
      const int r = dist1(v.sites[i], z);
      if (far_gap(h[i], r, pc.alpha)) mark_cube(v, v.sites[i], z, s);
    }
  }
  return s;
}

// Offsets with r < |o|_1 <= L where L is the largest distance reachable by any height in h.
std::vector<Site> far_offsets(int dim, const HeightConfig& h, const PeierlsConstants& pc) {
  int hm = 0;
  for (int x : h) hm = std::max(hm, std::abs(x));
  if (hm < 2) return {};
  const int lmax = static_cast<int>(std::floor(2.0 * std::log(static_cast<double>(hm)) / pc.alpha)) + 1;
  if (lmax <= pc.range_r) return {};
  std::vector<Site> out;
  for (const Site& o : ball_offsets(dim, lmax))
    if (std::abs(o[0]) + std::abs(o[1]) + std::abs(o[2]) > pc.range_r) out.push_back(o);
  return out;
}

std::vector<std::vector<std::size_t>> mark_components(const Volume& v, const std::vector<char>& mark) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<char> seen(v.size(), 0);
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (!mark[s] || seen[s]) continue;
    std::vector<std::size_t> comp;
    std::deque<std::size_t> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      const std::size_t a = queue.front();
      queue.pop_front();
      comp.push_back(a);
      for (std::size_t b : v.neighbours(a))
        if (mark[b] && !seen[b]) {
          seen[b] = 1;
          queue.push_back(b);
        }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

long surface_energy_mark(const Volume& v, const HeightConfig& h, const std::vector<char>& mark) {
  long e = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int k = 0; k < v.dim; ++k) {
      for (int step : {-1, 1}) {
        const Site z = offset(v.sites[i], k, step);
        auto j = v.index(z);
        if (j && *j < i) continue;  // counted from the other side
        if (!mark[i] && !(j && mark[*j])) continue;
        e += std::abs(h[i] - (j ? h[*j] : 0));
      }
    }
  }
  return e;
}

double path_coef_bound(double coef, int dist, double alpha, double delta_d) {
  const double a = std::exp(0.5 * alpha * dist) + 2.0 * delta_d;
  return coef * a * a;
}

int walk_length_for(int dim, double q, std::size_t size) {
  int len = std::max(static_cast<int>(size) - 1, 8);
  while (len < 400 && walk_tail_bound(dim, q, len) > 1e-18) len += 4;
  return len;
}

}  // namespace

PeierlsConstants peierls_constants(int dim, double q, double mstar, double delta_d) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0, 1)");
  if (dim < 1 || dim > 3) throw DomainError("dimension must be 1, 2 or 3");
  if (!(mstar > 0.0) || !(delta_d >= 0.0 && delta_d < 0.5)) throw DomainError("bad m* or delta_d");
  PeierlsConstants pc;
  pc.dim = dim;
  pc.q = q;
  pc.mstar = mstar;
  pc.delta_d = delta_d;
  const double a = 1.0 + 2.0 * dim * q;
  pc.alpha = 0.5 * std::log(1.0 + 1.0 / (2.0 * dim * q));
  const double lr = std::log(mstar * mstar * a / 4.0) / pc.alpha;
  pc.range_r = std::max(1, static_cast<int>(std::floor(lr)) + 1);
  pc.tau_nn = (1.0 - 2.0 * delta_d) * (1.0 - 2.0 * delta_d) * j_nn_lower_bound(dim, q, mstar);
  pc.beta = pc.tau_nn / 3.0;
  const double lstar = 2.0 * dim / pc.alpha;
  const double L = std::max(lstar, static_cast<double>(pc.range_r));
  pc.K_vol = std::exp(0.5 * pc.alpha * L) / std::pow(3.0 * L, dim);
  pc.tau1 = pc.beta * std::min(std::pow(2.0 * pc.range_r + 1.0, -dim), pc.K_vol);
  pc.tilde_beta = std::min({pc.alpha, pc.beta, pc.tau1});
  return pc;
}

int height_at(const Volume& v, const HeightConfig& h, const Site& z) {
  auto i = v.index(z);
  return i ? h[*i] : 0;
}

DangerousEdges dangerous_edges(const Volume& v, const HeightConfig& h, const PeierlsConstants& pc) {
  check_domain(v, h);
  DangerousEdges out;
  auto ordered = [](const Site& a, const Site& b) { return a < b ? SitePair{a, b} : SitePair{b, a}; };
  const std::vector<Site> ball = ball_offsets(v.dim, pc.range_r);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Site& x = v.sites[i];
    for (const Site& o : ball) {
      const Site z = add(x, o);
      auto j = v.index(z);
      if (j && *j < i) continue;
      if (height_at(v, h, z) != h[i]) out.e1.push_back(ordered(x, z));
    }
  }
  const std::vector<Site> far = far_offsets(v.dim, h, pc);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const int r = dist1(v.sites[i], v.sites[j]);
      if (r > pc.range_r && far_gap(h[i] - h[j], r, pc.alpha)) out.e2.push_back({v.sites[i], v.sites[j]});
    }
    for (const Site& o : far) {
      const Site z = add(v.sites[i], o);
      if (!v.contains(z) && far_gap(h[i], dist1(v.sites[i], z), pc.alpha))
        out.e2.push_back(ordered(v.sites[i], z));
    }
  }
  return out;
}

std::vector<Site> patch_cube(const Site& x, const Site& y, int dim) {
  const int side = dist_inf(x, y);
  Site lo{}, hi{};
  for (int k = 0; k < dim; ++k) {
    lo[k] = std::min(x[k], y[k]);
    hi[k] = lo[k] + side;
  }
  std::vector<Site> out;
  Site s{};
  for (s[0] = lo[0]; s[0] <= hi[0]; ++s[0])
    for (s[1] = lo[1]; s[1] <= hi[1]; ++s[1])
      for (s[2] = lo[2]; s[2] <= hi[2]; ++s[2]) out.push_back(s);
  return out;
}

std::vector<Site> staircase(const Site& x, const Site& y, int dim) {
  Site a = std::min(x, y);
  const Site b = std::max(x, y);
  std::vector<Site> out{a};
  for (int k = 0; k < dim; ++k) {
    while (a[k] != b[k]) {
      a[k] += a[k] < b[k] ? 1 : -1;
      out.push_back(a);
    }
  }
  return out;
}

std::size_t Contour::size() const { return static_cast<std::size_t>(std::count(support.begin(), support.end(), 1)); }

Contour lt_support(const Volume& v, const HeightConfig& h, const PeierlsConstants& pc) {
  check_domain(v, h);
  Contour c;
  c.volume = v;
  c.heights = h;
  c.support = support_of(v, h, pc, ball_offsets(v.dim, pc.range_r), far_offsets(v.dim, h, pc));
  if (!complement_constant(c)) throw Error("extracted contour violates complement constancy");
  return c;
}

namespace {

// Box with a one-site collar; the callback gets (site, extended height, in_support).
struct Collar {
  Volume box;
  std::vector<int> height;
  std::vector<char> blocked;
};

Collar collar_of(const Contour& c, const std::vector<char>& blocked_in_volume) {
  const Volume& v = c.volume;
  Site lo = v.lo, hi = v.hi;
  for (int k = 0; k < v.dim; ++k) {
    --lo[k];
    ++hi[k];
  }
  Collar col;
  col.box = make_box(v.dim, lo, hi);
  col.height.resize(col.box.size());
  col.blocked.assign(col.box.size(), 0);
  for (std::size_t i = 0; i < col.box.size(); ++i) {
    auto j = v.index(col.box.sites[i]);
    col.height[i] = j ? c.heights[*j] : 0;
    if (j && blocked_in_volume[*j]) col.blocked[i] = 1;
  }
  return col;
}

}  // namespace

bool complement_constant(const Contour& c) {
  check_domain(c.volume, c.heights);
  const Collar col = collar_of(c, c.support);
  for (std::size_t i = 0; i < col.box.size(); ++i) {
    if (col.blocked[i]) continue;
    for (std::size_t j : col.box.neighbours(i))
      if (!col.blocked[j] && col.height[i] != col.height[j]) return false;
  }
  return true;
}

std::vector<Contour> components(const Contour& c) {
  std::vector<Contour> out;
  for (const auto& comp : mark_components(c.volume, c.support)) {
    Contour k;
    k.volume = c.volume;
    k.support.assign(c.volume.size(), 0);
    for (std::size_t i : comp) k.support[i] = 1;
    // Each region of the complement of this component takes the value seen across its rim.
    const Collar col = collar_of(c, k.support);
    std::vector<int> region(col.box.size(), -1);
    std::vector<int> value;
    for (std::size_t s = 0; s < col.box.size(); ++s) {
      if (col.blocked[s] || region[s] >= 0) continue;
      const int id = static_cast<int>(value.size());
      int val = 0;
      bool have = false;
      std::deque<std::size_t> queue{s};
      region[s] = id;
      while (!queue.empty()) {
        const std::size_t a = queue.front();
        queue.pop_front();
        for (std::size_t b : col.box.neighbours(a)) {
          if (col.blocked[b]) {
            if (have && val != col.height[a]) throw Error("component heights ambiguous");
            val = col.height[a];
            have = true;
          } else if (region[b] < 0) {
            region[b] = id;
            queue.push_back(b);
          }
        }
      }
      value.push_back(val);
    }
    k.heights = c.heights;
    for (std::size_t i = 0; i < col.box.size(); ++i) {
      if (col.blocked[i]) continue;
      if (auto j = c.volume.index(col.box.sites[i])) k.heights[*j] = value[region[i]];
    }
    out.push_back(std::move(k));
  }
  return out;
}

long surface_energy(const Contour& c) {
  check_domain(c.volume, c.heights);
  return surface_energy_mark(c.volume, c.heights, c.support);
}

GradientVolumeReport gradient_volume_audit(const Volume& patch, const HeightConfig& h, const PeierlsConstants& pc) {
  check_domain(patch, h);
  const std::size_t n = patch.size();
  std::vector<char> mark(n, 0);
  GradientVolumeReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    if (h[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || (h[j] != 0 && j < i)) continue;
      const int r = dist1(patch.sites[i], patch.sites[j]);
      if (r > pc.range_r && far_gap(h[i] - h[j], r, pc.alpha)) {
        mark_cube(patch, patch.sites[i], patch.sites[j], mark);
        rep.vacuous = false;
      }
    }
  }
  rep.worst_ratio = std::numeric_limits<double>::infinity();
  for (const auto& comp : mark_components(patch, mark)) {
    long e = 0;
    for (std::size_t a : comp)
      for (std::size_t b : patch.neighbours(a))
        if (b > a && mark[b]) e += std::abs(h[a] - h[b]);
    const double ratio = static_cast<double>(e) / (pc.K_vol * static_cast<double>(comp.size()));
    ++rep.components;
    if (ratio < 1.0) ++rep.violations;
    rep.worst_ratio = std::min(rep.worst_ratio, ratio);
  }
  if (rep.vacuous) rep.worst_ratio = 0.0;
  return rep;
}

GradientVolumeSummary gradient_volume_random_audit(const PeierlsConstants& pc, long configurations, std::uint64_t seed) {
  Rng rng(seed);
  const int side = 2 * (pc.range_r + 6) + 4;
  const Volume patch = make_box(pc.dim, side);
  GradientVolumeSummary s;
  s.worst_ratio = std::numeric_limits<double>::infinity();
  for (long c = 0; c < configurations; ++c) {
    HeightConfig h(patch.size(), 0);
    const int objects = 1 + rng.below(4);
    for (int o = 0; o < objects; ++o) {
      Site lo{}, ext{};
      for (int k = 0; k < pc.dim; ++k) {
        ext[k] = rng.below(3);
        lo[k] = rng.below(side - ext[k]);
      }
      const int L = pc.range_r + 1 + rng.below(6);
      const int H = static_cast<int>(std::ceil(std::exp(0.5 * pc.alpha * L))) * (rng.uniform() < 0.5 ? -1 : 1);
      for (std::size_t i = 0; i < patch.size(); ++i) {
        bool in = true;
        for (int k = 0; k < pc.dim; ++k)
          in = in && patch.sites[i][k] >= lo[k] && patch.sites[i][k] <= lo[k] + ext[k];
        if (in) h[i] += H;
      }
    }
    const GradientVolumeReport r = gradient_volume_audit(patch, h, pc);
    ++s.configurations;
    s.components += r.components;
    s.violations += r.violations;
    if (!r.vacuous) s.worst_ratio = std::min(s.worst_ratio, r.worst_ratio);
  }
  if (!std::isfinite(s.worst_ratio)) s.worst_ratio = 0.0;
  return s;
}

double flat_pair_mean(int dim, double q, double mstar, double mean_d2) {
  if (q <= 0.0) return 0.0;
  const double a = 1.0 / q + 2.0 * dim;
  const double r_nn = 1.0 / (a * a - 1.0);
  return mstar * mstar / (4.0 * q) * 2.0 * r_nn * 2.0 * mean_d2;
}

namespace {

// Pair carrying a coefficient in the ferromagnetic energy: (i, j) inside, or (i, y(i)) to the boundary.
struct CoupledPair {
  std::size_t i = 0, j = 0;
  bool boundary = false;
  int dist = 0;
  double coef = 0.0;
  double bound = 0.0;  // B_g
  std::vector<std::size_t> path;  // staircase sites inside the volume
};

std::vector<CoupledPair> coupled_pairs(const CouplingSet& cs, const PeierlsConstants& pc) {
  const Volume& v = cs.volume;
  std::vector<CoupledPair> out;
  auto path_of = [&](const Site& a, const Site& b) {
    std::vector<std::size_t> p;
    for (const Site& s : staircase(a, b, v.dim))
      if (auto k = v.index(s)) p.push_back(*k);
    return p;
  };
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (cs.J(i, j) <= 0.0) continue;
      CoupledPair p;
      p.i = i;
      p.j = j;
      p.dist = dist1(v.sites[i], v.sites[j]);
      p.coef = cs.J(i, j);
      p.bound = path_coef_bound(p.coef, p.dist, pc.alpha, pc.delta_d);
      p.path = path_of(v.sites[i], v.sites[j]);
      out.push_back(std::move(p));
    }
    if (cs.K[i] > 0.0) {
      const Site& y = v.boundary[cs.nearest_boundary[i]];
      CoupledPair p;
      p.i = i;
      p.j = cs.nearest_boundary[i];
      p.boundary = true;
      p.dist = dist1(v.sites[i], y);
      p.coef = cs.K[i];
      p.bound = path_coef_bound(p.coef, p.dist, pc.alpha, pc.delta_d);
      p.path = path_of(v.sites[i], y);
      out.push_back(std::move(p));
    }
  }
  return out;
}

struct PairState {
  bool flat = true;
  bool dangerous = false;
  double term = 0.0;  // t_p
};

PairState classify(const CoupledPair& p, const Volume& v, const DisorderField& f, const HeightConfig& h,
                   const PeierlsConstants& pc) {
  PairState s;
  const int hi = h[p.i];
  const int hj = p.boundary ? 0 : h[p.j];
  if (hi == hj) return s;
  s.flat = false;
  s.dangerous = p.dist <= pc.range_r || far_gap(hi - hj, p.dist, pc.alpha);
  const double di = f.dshift(v.sites[p.i], hi);
  if (p.boundary) {
    s.term = p.coef * (hi * hi + 2.0 * hi * di);
  } else {
    const double u = hi - hj + di - f.dshift(v.sites[p.j], hj);
    s.term = p.coef * u * u;
  }
  return s;
}

// Per component: sum of dangerous terms and count of non-flat nn pairs.
void lt_sums(const CouplingSet& cs, const std::vector<CoupledPair>& pairs, const DisorderField& f,
             const HeightConfig& h, const PeierlsConstants& pc, const std::vector<int>& comp_of,
             std::vector<double>& term_sum, std::vector<long>& nn_count, std::vector<PairState>* states) {
  const Volume& v = cs.volume;
  if (states) states->resize(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const CoupledPair& p = pairs[k];
    const PairState s = classify(p, v, f, h, pc);
    if (states) (*states)[k] = s;
    if (s.flat || !s.dangerous) continue;
    const int ci = comp_of[p.i];
    const int cj = p.boundary ? ci : comp_of[p.j];
    if (ci != cj) throw Error("dangerous pair straddles components");
    if (ci < 0) continue;
    term_sum[ci] += s.term;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (comp_of[i] < 0) continue;
    for (std::size_t j : v.neighbours(i))
      if (j > i && h[j] != h[i]) ++nn_count[comp_of[i]];
  }
}

}  // namespace

double lt_activity(const CouplingSet& cs, const DisorderField& f, const Contour& comp, const PeierlsConstants& pc) {
  const Volume& v = cs.volume;
  if (!v.same_box(comp.volume)) throw DomainError("contour and couplings live on different volumes");
  check_domain(v, comp.heights);
  std::vector<int> comp_of(v.size(), -1);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (comp.support[i]) comp_of[i] = 0;
  // Dangerous pairs touching other components are ignored; those touching this one must lie inside it.
  const std::vector<CoupledPair> pairs = coupled_pairs(cs, pc);
  double sum = 0.0;
  for (const CoupledPair& p : pairs) {
    const bool in_i = comp.support[p.i];
    const bool in_j = p.boundary ? in_i : static_cast<bool>(comp.support[p.j]);
    if (!in_i && !in_j) continue;
    const PairState s = classify(p, v, f, comp.heights, pc);
    if (s.flat || !s.dangerous) continue;
    if (in_i != in_j) throw Error("dangerous pair straddles components");
    sum += s.term;
  }
  long nn = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!comp.support[i]) continue;
    for (std::size_t j : v.neighbours(i))
      if (j > i && comp.heights[j] != comp.heights[i]) ++nn;
  }
  const double c2 = flat_pair_mean(v.dim, cs.q, cs.mstar, f.mean_d2());
  return std::exp(-sum + c2 * static_cast<double>(nn));
}

double peierls_log_bound(const Contour& c, double beta, double tau) {
  return -beta * static_cast<double>(surface_energy(c)) - tau * static_cast<double>(c.size());
}

PeierlsAudit peierls_exhaustive(const CouplingSet& cs, const DisorderField& f, const PeierlsConstants& pc, int hmax) {
  const Volume& v = cs.volume;
  const std::size_t n = v.size();
  const double count = std::pow(2.0 * hmax + 1.0, static_cast<double>(n));
  if (count > 2e6) throw DomainError("exhaustive Peierls audit too large");
  const std::vector<Site> ball = ball_offsets(v.dim, pc.range_r);
  const std::vector<CoupledPair> pairs = coupled_pairs(cs, pc);
  const double c2 = flat_pair_mean(v.dim, cs.q, cs.mstar, f.mean_d2());
  PeierlsAudit a;
  a.worst_margin = std::numeric_limits<double>::infinity();
  NuTable idx;
  idx.sites = n;
  idx.hmax = hmax;
  for (std::size_t k = 0; k < static_cast<std::size_t>(count); ++k) {
    const HeightConfig h = idx.config(k);
    ++a.configurations;
    const std::vector<char> supp = support_of(v, h, pc, ball, far_offsets(v.dim, h, pc));
    const auto comps = mark_components(v, supp);
    if (comps.empty()) continue;
    std::vector<int> comp_of(n, -1);
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (std::size_t i : comps[c]) comp_of[i] = static_cast<int>(c);
    std::vector<double> sums(comps.size(), 0.0);
    std::vector<long> nn(comps.size(), 0);
    lt_sums(cs, pairs, f, h, pc, comp_of, sums, nn, nullptr);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      std::vector<char> mark(n, 0);
      for (std::size_t i : comps[c]) mark[i] = 1;
      const double log_rho = -sums[c] + c2 * static_cast<double>(nn[c]);
      const double log_b = -pc.beta * static_cast<double>(surface_energy_mark(v, h, mark)) -
                           pc.tau1 * static_cast<double>(comps[c].size());
      ++a.contours;
      const double margin = log_b - log_rho;
      if (margin < -1e-12) ++a.violations;
      a.worst_margin = std::min(a.worst_margin, margin);
    }
  }
  if (!std::isfinite(a.worst_margin)) a.worst_margin = 0.0;
  return a;
}

HTTerms ht_terms(const CouplingSet& cs, const DisorderField& f, const HeightConfig& h, const PeierlsConstants& pc,
                 int size_cutoff) {
  if (size_cutoff < pc.range_r) throw DomainError("polymer size cutoff must be at least r");
  const Volume& v = cs.volume;
  check_domain(v, h);
  HTTerms out;
  for (const CoupledPair& p : coupled_pairs(cs, pc)) {
    if (p.dist <= pc.range_r) continue;
    const PairState s = classify(p, v, f, h, pc);
    if (s.flat || s.dangerous) continue;
    if (s.term < 0.0 || s.term > p.bound * (1.0 + 1e-12)) throw Error("HT term outside [0, B_g]");
    if (p.dist + 1 > size_cutoff) {
      out.omitted_bound += p.bound;
      continue;
    }
    HTTerm t;
    t.x = v.sites[p.i];
    t.y = p.boundary ? v.boundary[p.j] : v.sites[p.j];
    t.boundary = p.boundary;
    t.path = staircase(t.x, t.y, v.dim);
    t.value = s.term;
    t.bound = p.bound;
    out.terms.push_back(std::move(t));
  }
  return out;
}

double small_field_bound(int dim, double q, double mstar, double delta_d, double alpha, std::size_t size) {
  const double a = 1.0 + 2.0 * dim * q;
  return 4.0 * delta_d * delta_d * q * mstar * mstar * (2.0 * dim / a) *
         std::exp(-alpha * (static_cast<double>(size) - 2.0));
}

double boundary_field_bound(int dim, double q, double mstar, double delta_d) {
  return q * mstar * mstar * dim * delta_d * delta_d / (1.0 + 2.0 * dim * q);
}

std::vector<std::vector<std::size_t>> connected_subsets(const Volume& v, std::size_t lo, std::size_t hi,
                                                        std::size_t limit) {
  std::vector<std::vector<std::size_t>> out;
  std::set<std::vector<std::size_t>> level;
  for (std::size_t i = 0; i < v.size(); ++i) level.insert({i});
  std::size_t total = 0;
  for (std::size_t k = 1; k <= hi && !level.empty(); ++k) {
    if (k >= lo) out.insert(out.end(), level.begin(), level.end());
    if (k == hi) break;
    std::set<std::vector<std::size_t>> next;
    for (const auto& c : level) {
      for (std::size_t a : c) {
        for (std::size_t b : v.neighbours(a)) {
          if (std::binary_search(c.begin(), c.end(), b)) continue;
          std::vector<std::size_t> d = c;
          d.insert(std::upper_bound(d.begin(), d.end(), b), b);
          next.insert(std::move(d));
        }
      }
    }
    total += next.size();
    if (total > limit) throw DomainError("too many connected subsets; lower the size cutoff");
    level = std::move(next);
  }
  return out;
}

namespace {

struct FieldSet {
  std::vector<std::size_t> sites;
  std::uint64_t mask = 0;
  Eigen::MatrixXd R;
  double tail = 0.0;
  double bound = 0.0;
};

std::vector<FieldSet> field_sets(const CouplingSet& cs, std::size_t cutoff, const PeierlsConstants& pc) {
  const Volume& v = cs.volume;
  std::vector<FieldSet> out;
  for (auto& c : connected_subsets(v, 2, std::min(cutoff, v.size()))) {
    FieldSet s;
    std::vector<Site> pts;
    for (std::size_t i : c) {
      pts.push_back(v.sites[i]);
      if (i < 64) s.mask |= std::uint64_t{1} << i;
    }
    s.R = walk_resolvent_matrix(v.dim, pts, cs.q, walk_length_for(v.dim, cs.q, c.size()), &s.tail);
    s.bound = small_field_bound(v.dim, cs.q, cs.mstar, pc.delta_d, pc.alpha, c.size());
    s.sites = std::move(c);
    out.push_back(std::move(s));
  }
  return out;
}

// (m*^2/4q) sum over ordered x != y in C with equal heights of R(x->y;C)(d_x - d_y)^2.
double flat_pair_sum(const FieldSet& s, const Volume& v, const DisorderField& f, const HeightConfig& h, double q,
                     double mstar) {
  double acc = 0.0;
  for (std::size_t a = 0; a < s.sites.size(); ++a) {
    for (std::size_t b = 0; b < s.sites.size(); ++b) {
      if (a == b) continue;
      const std::size_t x = s.sites[a], y = s.sites[b];
      if (h[x] != h[y]) continue;
      const double dd = f.dshift(v.sites[x], h[x]) - f.dshift(v.sites[y], h[y]);
      acc += s.R(a, b) * dd * dd;
    }
  }
  return mstar * mstar / (4.0 * q) * acc;
}

double pair_centering(const FieldSet& s, const DisorderField& f, double q, double mstar) {
  return mstar * mstar / (4.0 * q) * (s.R(0, 1) + s.R(1, 0)) * 2.0 * f.mean_d2();
}

bool flat_on(const FieldSet& s, const HeightConfig& h) {
  for (std::size_t i : s.sites)
    if (h[i] != h[s.sites[0]]) return false;
  return true;
}

}  // namespace

std::vector<SmallFieldTerm> small_fields(const CouplingSet& cs, const DisorderField& f, int hmax, int size_cutoff) {
  if (hmax < 0 || size_cutoff < 1) throw DomainError("bad small-field cutoffs");
  const Volume& v = cs.volume;
  const double dd = f.params().delta_d;
  const PeierlsConstants pc = peierls_constants(v.dim, cs.q, cs.mstar, dd);
  std::vector<SmallFieldTerm> out;
  if (size_cutoff >= 2) {
    for (const FieldSet& s : field_sets(cs, static_cast<std::size_t>(size_cutoff), pc)) {
      std::vector<Site> pts;
      for (std::size_t i : s.sites) pts.push_back(v.sites[i]);
      for (int l = -hmax; l <= hmax; ++l) {
        const HeightConfig h(v.size(), l);
        SmallFieldTerm t;
        t.support = pts;
        t.height = l;
        t.value = flat_pair_sum(s, v, f, h, cs.q, cs.mstar);
        if (s.sites.size() == 2) t.value -= pair_centering(s, f, cs.q, cs.mstar);
        t.bound = s.bound;
        t.kind = s.sites.size() == 2 ? SmallFieldTerm::Kind::pair : SmallFieldTerm::Kind::multi;
        if (std::abs(t.value) > t.bound * (1.0 + 1e-9) + 1e-300) throw Error("small field exceeds its bound");
        out.push_back(std::move(t));
      }
    }
  }
  const double bb = boundary_field_bound(v.dim, cs.q, cs.mstar, dd);
  for (std::size_t x = 0; x < v.size(); ++x) {
    for (int l = -hmax; l <= hmax; ++l) {
      const double d = f.dshift(v.sites[x], l);
      const double et = -cs.K[x] * (d * d - f.mean_d2());
      if (std::abs(et) > bb * (1.0 + 1e-9) + 1e-300) throw Error("boundary field exceeds its bound");
      SmallFieldTerm b;
      b.support = {v.sites[x]};
      b.height = l;
      b.value = et;
      b.bound = bb;
      b.kind = SmallFieldTerm::Kind::boundary;
      SmallFieldTerm loc = b;
      loc.value = f.eta(v.sites[x], l) + et;
      loc.bound = f.params().delta_eta + bb;
      loc.kind = SmallFieldTerm::Kind::local;
      out.push_back(std::move(loc));
      out.push_back(std::move(b));
    }
  }
  return out;
}

std::uint64_t support_mask(const Contour& c) {
  if (c.volume.size() > 64) throw DomainError("support masks need at most 64 sites");
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < c.volume.size(); ++i)
    if (c.support[i]) m |= std::uint64_t{1} << i;
  return m;
}

HeightConfig Representation::config(std::size_t k) const {
  NuTable t;
  t.sites = volume.size();
  t.hmax = hmax;
  return t.config(k);
}

std::size_t Representation::index(const HeightConfig& h) const {
  NuTable t;
  t.sites = volume.size();
  t.hmax = hmax;
  return t.index(h);
}

double Representation::rho0_at(const HeightConfig& h, std::uint64_t mask) const {
  const std::size_t k = index(h);
  auto it = std::lower_bound(rho0.begin(), rho0.end(), std::make_pair(k, mask),
                             [](const Rho0Entry& e, const std::pair<std::size_t, std::uint64_t>& key) {
                               return std::make_pair(e.config, e.mask) < key;
                             });
  if (it == rho0.end() || it->config != k || it->mask != mask) return 0.0;
  return it->value;
}

double Representation::rho0_sum(const HeightConfig& h) const {
  const std::size_t k = index(h);
  double s = 0.0;
  for (const Rho0Entry& e : rho0)
    if (e.config == k) s += e.value;
  return s;
}

namespace {

struct Polymer {
  std::uint64_t mask = 0;
  double bound = 0.0;
  int pair = -1;  // index into coupled pairs (HT1) or -1
  int set = -1;   // index into field sets (HT2) or -1
};

struct ConfigResult {
  double energy = 0.0;
  double w = 0.0;
  double log_k = 0.0;
  double subtraction_error = 0.0;
  bool nonneg = true;
  std::vector<Rho0Entry> entries;
};

}  // namespace

Representation assemble_representation(const Volume& v, const DisorderField& f, double q, int hmax,
                                       const RepresentationCutoffs& cut) {
  const std::size_t n = v.size();
  if (n > 64) throw DomainError("representation needs at most 64 sites");
  if (hmax < 0) throw DomainError("hmax must be non-negative");
  const double count = std::pow(2.0 * hmax + 1.0, static_cast<double>(n));
  if (count > 1e5) throw DomainError("enumeration exceeds 1e5 height configurations");
  const double mstar = f.params().mstar;
  const double dd = f.params().delta_d;
  const CouplingSet cs = couplings(v, q, mstar, cut.support_cutoff);
  const PeierlsConstants pc = peierls_constants(v.dim, q, mstar, dd);

  Representation rep;
  rep.volume = v;
  rep.hmax = hmax;
  rep.pc = pc;

  const std::vector<CoupledPair> pairs = coupled_pairs(cs, pc);
  const std::vector<FieldSet> sets = field_sets(cs, static_cast<std::size_t>(cut.polymer_size), pc);
  std::vector<Polymer> polymers;
  double bar = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].dist <= pc.range_r) continue;
    if (pairs[k].dist + 1 > cut.polymer_size) {
      bar += pairs[k].bound;
      continue;
    }
    Polymer p;
    for (std::size_t i : pairs[k].path) p.mask |= std::uint64_t{1} << i;
    p.bound = pairs[k].bound;
    p.pair = static_cast<int>(k);
    polymers.push_back(p);
    ++rep.audit.ht1_polymers;
  }
  // Walk-sum completeness: sum_C R(x->y;C) against q G(x,y).
  Eigen::MatrixXd rsum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const FieldSet& s = sets[k];
    for (std::size_t a = 0; a < s.sites.size(); ++a)
      for (std::size_t b = 0; b < s.sites.size(); ++b)
        if (a != b) rsum(s.sites[a], s.sites[b]) += s.R(a, b);
    bar += mstar * mstar / (4.0 * q) * s.tail * static_cast<double>(s.sites.size() * s.sites.size()) * 4.0 * dd * dd;
    if (s.sites.size() >= 3) {
      Polymer p;
      p.mask = s.mask;
      p.bound = s.bound;
      p.set = static_cast<int>(k);
      polymers.push_back(p);
      ++rep.audit.ht2_polymers;
    }
  }
  rep.audit.small_field_sets = sets.size();
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y)
      bar += mstar * mstar / (2.0 * q) * std::abs(q * cs.G(x, y) - rsum(x, y)) * 4.0 * dd * dd;
  rep.audit.bar = bar + 1e-12;

  const double c2 = flat_pair_mean(v.dim, q, mstar, f.mean_d2());
  long nn_total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : v.neighbours(i))
      if (j > i) ++nn_total;
  rep.log_k = -c2 * static_cast<double>(nn_total) - cs.K.sum() * f.mean_d2();
  rep.K_Lambda = std::exp(rep.log_k);

  const std::vector<Site> ball = ball_offsets(v.dim, pc.range_r);
  const std::size_t total = static_cast<std::size_t>(count);
  std::vector<ConfigResult> results(total);

  auto work = [&](std::size_t k) {
    ConfigResult& res = results[k];
    const HeightConfig h = rep.config(k);
    res.energy = ferro_energy(cs, f, h);
    double w = 0.0;
    for (const FieldSet& s : sets) {
      if (!flat_on(s, h)) continue;
      w += flat_pair_sum(s, v, f, h, q, mstar);
      if (s.sites.size() == 2) w -= pair_centering(s, f, q, mstar);
    }
    for (std::size_t x = 0; x < n; ++x) {
      const double d = f.dshift(v.sites[x], h[x]);
      w -= f.eta(v.sites[x], h[x]) - cs.K[x] * (d * d - f.mean_d2());
    }
    res.w = w;

    const std::vector<char> supp = support_of(v, h, pc, ball, far_offsets(v.dim, h, pc));
    const auto comps = mark_components(v, supp);
    std::vector<int> comp_of(n, -1);
    std::vector<std::uint64_t> cmask(comps.size(), 0);
    std::uint64_t lt_mask = 0;
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (std::size_t i : comps[c]) {
        comp_of[i] = static_cast<int>(c);
        cmask[c] |= std::uint64_t{1} << i;
        lt_mask |= std::uint64_t{1} << i;
      }
    std::vector<double> sums(comps.size(), 0.0);
    std::vector<long> nn(comps.size(), 0);
    std::vector<PairState> states;
    lt_sums(cs, pairs, f, h, pc, comp_of, sums, nn, &states);

    double log_base = 0.0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      log_base += -sums[c] + c2 * static_cast<double>(nn[c]);
      for (const Polymer& p : polymers)
        if (p.mask & cmask[c]) log_base -= p.bound;  // r(gamma), r2(gamma)
    }
    // Residual exponents t = n(Gamma, g) B - S.
    std::vector<std::pair<std::uint64_t, double>> active;
    double s_total = 0.0, t_total = 0.0, log_r = log_base;
    for (std::size_t c = 0; c < comps.size(); ++c) log_r -= -sums[c] + c2 * static_cast<double>(nn[c]);
    for (const Polymer& p : polymers) {
      double S = 0.0;
      if (p.pair >= 0) {
        const PairState& st = states[p.pair];
        if (!st.flat && !st.dangerous) S = st.term;
      } else if (!flat_on(sets[p.set], h)) {
        S = flat_pair_sum(sets[p.set], v, f, h, q, mstar);
      }
      int hits = 0;
      for (std::uint64_t m : cmask)
        if (p.mask & m) ++hits;
      double t = hits * p.bound - S;
      if (t < -1e-12 * std::max(1.0, S)) res.nonneg = false;
      t = std::max(t, 0.0);
      s_total += S;
      t_total += t;
      if (t > 0.0) active.emplace_back(p.mask, t);
    }
    res.subtraction_error = std::abs(-s_total - (log_r + t_total)) / std::max(1.0, s_total);

    std::map<std::uint64_t, double> table{{lt_mask, std::exp(log_base)}};
    for (const auto& [mask, t] : active) {
      const double factor = std::expm1(t);
      std::map<std::uint64_t, double> next = table;
      for (const auto& [m, val] : table) next[m | mask] += val * factor;
      table = std::move(next);
    }
    double sum = 0.0;
    for (const auto& [m, val] : table) {
      sum += val;
      if (!(val >= 0.0)) res.nonneg = false;
      Rho0Entry e;
      e.config = k;
      e.mask = m;
      e.value = val;
      std::vector<char> mark(n, 0);
      for (std::size_t i = 0; i < n; ++i) mark[i] = (m >> i) & 1;
      e.surface_energy = surface_energy_mark(v, h, mark);
      e.support_size = static_cast<int>(std::count(mark.begin(), mark.end(), 1));
      e.log_bound = -pc.beta * static_cast<double>(e.surface_energy) - pc.tilde_beta * e.support_size;
      res.entries.push_back(e);
    }
    res.log_k = -res.energy + res.w - std::log(sum);
  };

  const int threads = std::max(1, cut.threads);
  if (threads == 1) {
    for (std::size_t k = 0; k < total; ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < total; k += threads) work(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  rep.audit.configurations = total;
  rep.audit.worst_peierls_margin = std::numeric_limits<double>::infinity();
  for (ConfigResult& r : results) {
    rep.energy.push_back(r.energy);
    rep.small_field_energy.push_back(r.w);
    rep.audit.max_log_k_deviation = std::max(rep.audit.max_log_k_deviation, std::abs(r.log_k - rep.log_k));
    rep.audit.max_subtraction_error = std::max(rep.audit.max_subtraction_error, r.subtraction_error);
    rep.audit.rho_nonneg = rep.audit.rho_nonneg && r.nonneg;
    for (Rho0Entry& e : r.entries) {
      if (e.value > 0.0) {
        const double margin = e.log_bound - std::log(e.value);
        if (margin < -1e-12) ++rep.audit.peierls_violations;
        rep.audit.worst_peierls_margin = std::min(rep.audit.worst_peierls_margin, margin);
      }
      rep.rho0.push_back(e);
    }
  }
  return rep;
}

double factorization_error(const Representation& rep, const HeightConfig& h) {
  const Contour c = lt_support(rep.volume, h, rep.pc);
  const std::vector<Contour> parts = components(c);
  if (parts.size() < 2) throw DomainError("configuration has fewer than two components");
  const double whole = rep.rho0_at(h, support_mask(c));
  double prod = 1.0;
  for (const Contour& p : parts) {
    if (support_mask(lt_support(rep.volume, p.heights, rep.pc)) != support_mask(p))
      throw DomainError("components are not far apart");
    prod *= rep.rho0_at(p.heights, support_mask(p));
  }
  if (!(whole > 0.0)) throw Error("missing representation entry");
  return std::abs(whole - prod) / whole;
}

}  // namespace sosf
