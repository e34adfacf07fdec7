#include "disorder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "rng.hpp"

namespace sosf {

namespace {

const boost::math::normal_distribution<double> kStd(0.0, 1.0);

double upper_q(double z) { return boost::math::cdf(boost::math::complement(kStd, z)); }

double truncated_draw(double u, double s, double b) {
  if (s <= 0.0 || b <= 0.0) return 0.0;
  const double zb = b / s;
  // Symmetric inversion around the median keeps precision for small truncation.
  const double half_mass = 0.5 - upper_q(zb);
  const double p = (u - 0.5) * 2.0 * half_mass;
  double z;
  if (p >= 0) {
    z = boost::math::quantile(boost::math::complement(kStd, 0.5 - p));
  } else {
    z = -boost::math::quantile(boost::math::complement(kStd, 0.5 + p));
  }
  return std::clamp(s * z, -b, b);
}

std::vector<double> tail_grid(double hi, int n) {
  std::vector<double> g;
  for (int i = 1; i <= n; ++i) g.push_back(hi * i / n);
  return g;
}

}  // namespace

void validate(const DisorderParams& p) {
  if (!(p.sigma_eta >= 0 && p.sigma_d >= 0 && p.delta_eta >= 0 && p.delta_d >= 0))
    throw DomainError("disorder scales must be nonnegative");
  if (!(p.delta_d <= 0.25)) throw DomainError("delta_d must not exceed 1/4");
  if (!(p.mstar > 0)) throw DomainError("mstar must be positive");
}

double truncated_normal_tail(double s, double b, double u) {
  if (u <= 0.0) return 1.0;
  if (u > b || s <= 0.0) return 0.0;
  const double qb = upper_q(b / s);
  return std::max(0.0, (upper_q(u / s) - qb) / (0.5 - qb));
}

double truncated_normal_second_moment(double s, double b) {
  if (s <= 0.0 || b <= 0.0) return 0.0;
  const double z = b / s;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const double mass = 1.0 - 2.0 * upper_q(z);
  return s * s * (1.0 - 2.0 * z * phi / mass);
}

double choose_d_scale(double sigma_d, double delta_d) {
  if (sigma_d <= 0.0 || delta_d <= 0.0) return 0.0;
  const auto grid = tail_grid(delta_d * delta_d, 400);
  auto ok = [&](double s) {
    for (double t : grid) {
      const double bound = std::exp(-t * t / (2.0 * sigma_d * sigma_d));
      const double target = bound <= 0.5 ? 0.5 * bound : bound;
      if (truncated_normal_tail(s, delta_d, std::sqrt(t)) > target) return false;
    }
    return true;
  };
  if (ok(delta_d)) return delta_d;
  double lo = 0.0, hi = delta_d;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

DisorderField::DisorderField(const DisorderParams& p)
    : DisorderField(p, p.sigma_eta, choose_d_scale(p.sigma_d, p.delta_d)) {}

DisorderField::DisorderField(const DisorderParams& p, double eta_scale, double d_scale)
    : params_(p), eta_scale_(eta_scale), d_scale_(d_scale), cache_(std::make_shared<Cache>()) {
  validate(p);
  mean_d2_ = truncated_normal_second_moment(d_scale_, params_.delta_d);
}

double DisorderField::draw(Channel c, const Site& x, int h) const {
  const bool is_eta = c == Channel::eta;
  const double s = is_eta ? eta_scale_ : d_scale_;
  const double b = is_eta ? params_.delta_eta : params_.delta_d;
  if (s <= 0.0 || b <= 0.0) return 0.0;
  auto w = [](int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); };
  const std::uint64_t bits =
      hash_words({params_.seed, static_cast<std::uint64_t>(c), w(x[0]), w(x[1]), w(x[2]), w(h)});
  return truncated_draw(to_unit(bits), s, b);
}

double DisorderField::value(Channel c, const Site& x, int h) const {
  const Key key{static_cast<int>(c), x[0], x[1], x[2], h};
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->values.find(key);
    if (it != cache_->values.end()) return it->second;
  }
  const double v = draw(c, x, h);
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->values.emplace(key, v);
  return v;
}

DisorderAudit audit_conditions(const DisorderField& f, long n_samples) {
  if (n_samples < 10000) throw DomainError("audit needs at least 1e4 samples");
  const DisorderParams& p = f.params();
  DisorderAudit rep;
  rep.n_samples = n_samples;
  rep.eta_scale = f.eta_scale();
  rep.d_scale = f.d_scale();
  rep.mean_d2 = f.mean_d2();
  std::vector<double> eta_abs, d_sq;
  eta_abs.reserve(n_samples);
  d_sq.reserve(n_samples);
  for (long k = 0; k < n_samples; ++k) {
    const Site x{static_cast<int>(k % 1000), static_cast<int>(k / 1000), 0};
    const int h = static_cast<int>(k % 5) - 2;
    const double e = f.draw(Channel::eta, x, h);
    const double d = f.draw(Channel::d, x, h);
    if (std::abs(e) > p.delta_eta) ++rep.eta_bound_violations;
    if (std::abs(d) > p.delta_d) ++rep.d_bound_violations;
    eta_abs.push_back(std::abs(e));
    d_sq.push_back(d * d);
  }
  std::sort(eta_abs.begin(), eta_abs.end());
  std::sort(d_sq.begin(), d_sq.end());
  const double n = static_cast<double>(n_samples);
  auto frac_ge = [&](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t)) / n;
  };
  // Binomial slack: 4 standard errors plus one count.
  auto check = [&](const std::vector<double>& v, double t, double sigma, std::vector<TailCheck>& out,
                   bool& all_ok, double& worst_t, double& worst_excess) {
    TailCheck c;
    c.t = t;
    c.empirical = frac_ge(v, t);
    c.bound = sigma > 0 ? std::exp(-t * t / (2.0 * sigma * sigma)) : 0.0;
    const double slack = 4.0 * std::sqrt(c.bound * (1.0 - c.bound) / n) + 1.0 / n;
    c.ok = c.empirical <= c.bound + slack;
    if (c.empirical - c.bound > worst_excess) {
      worst_excess = c.empirical - c.bound;
      worst_t = t;
    }
    all_ok = all_ok && c.ok;
    out.push_back(c);
  };
  double worst = -1.0;
  if (p.delta_eta > 0 && f.eta_scale() > 0) {
    for (double t : tail_grid(std::min(p.delta_eta, 4.0 * std::max(p.sigma_eta, 1e-300)), 40))
      check(eta_abs, t, p.sigma_eta, rep.eta_tail, rep.eta_tail_ok, rep.worst_eta_t, worst);
  }
  worst = -1.0;
  if (p.delta_d > 0 && f.d_scale() > 0) {
    for (double t : tail_grid(p.delta_d * p.delta_d, 40))
      check(d_sq, t, p.sigma_d, rep.d_tail, rep.d_tail_ok, rep.worst_d_t, worst);
  }
  return rep;
}

DisorderAudit audit_conditions(const DisorderParams& p, long n_samples) {
  return audit_conditions(DisorderField(p), n_samples);
}

void export_snapshot(std::ostream& os, const DisorderField& f, const Volume& v, int hmax) {
  for (int k = 1; k <= v.dim; ++k) os << "x_" << k << ',';
  os << "h,eta,d\n";
  os << std::setprecision(17);
  for (const Site& x : v.sites) {
    for (int h = -hmax; h <= hmax; ++h) {
      for (int k = 0; k < v.dim; ++k) os << x[k] << ',';
      os << h << ',' << f.eta(x, h) << ',' << f.dshift(x, h) << '\n';
    }
  }
}

std::vector<SnapshotRow> import_snapshot(std::istream& is, int dim) {
  std::vector<SnapshotRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != dim + 3) throw DomainError("malformed snapshot row: " + line);
    SnapshotRow r;
    for (int k = 0; k < dim; ++k) r.x[k] = std::stoi(cells[k]);
    r.h = std::stoi(cells[dim]);
    r.eta = std::stod(cells[dim + 1]);
    r.d = std::stod(cells[dim + 2]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sosf
