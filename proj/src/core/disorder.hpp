#ifndef SOSF_DISORDER_HPP
#define SOSF_DISORDER_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "lattice.hpp"

namespace sosf {

struct DisorderParams {
  double sigma_eta = 0.0;
  double sigma_d = 0.0;
  double delta_eta = 0.0;
  double delta_d = 0.0;
  double mstar = 1.0;
  std::uint64_t seed = 0;
};

void validate(const DisorderParams& p);

// Largest truncated-normal scale for d meeting condition (iii) with margin.
double choose_d_scale(double sigma_d, double delta_d);

// P[|X| >= u] for a centred normal of scale s truncated to [-b, b].
double truncated_normal_tail(double s, double b, double u);
// E[X^2] for the same law.
double truncated_normal_second_moment(double s, double b);

enum class Channel : std::uint64_t { eta = 1, d = 2 };

class DisorderField {
 public:
  explicit DisorderField(const DisorderParams& p);
  // Explicit generator scales; used for negative controls.
  DisorderField(const DisorderParams& p, double eta_scale, double d_scale);

  double eta(const Site& x, int h) const { return value(Channel::eta, x, h); }
  double dshift(const Site& x, int h) const { return value(Channel::d, x, h); }
  double center(const Site& x, int h) const { return params_.mstar * (h + dshift(x, h)); }

  const DisorderParams& params() const { return params_; }
  double eta_scale() const { return eta_scale_; }
  double d_scale() const { return d_scale_; }
  double mean_d2() const { return mean_d2_; }

  // Raw generator output, no cache.
  double draw(Channel c, const Site& x, int h) const;

 private:
  double value(Channel c, const Site& x, int h) const;

  DisorderParams params_;
  double eta_scale_ = 0.0;
  double d_scale_ = 0.0;
  double mean_d2_ = 0.0;

  using Key = std::tuple<int, int, int, int, int>;
  struct Cache {
    std::mutex mu;
    std::map<Key, double> values;
  };
  std::shared_ptr<Cache> cache_;
};

struct TailCheck {
  double t = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  bool ok = true;
};

struct DisorderAudit {
  long n_samples = 0;
  long eta_bound_violations = 0;
  long d_bound_violations = 0;
  std::vector<TailCheck> eta_tail;  // condition (i)
  std::vector<TailCheck> d_tail;    // condition (iii)
  bool eta_tail_ok = true;
  bool d_tail_ok = true;
  double worst_eta_t = 0.0;
  double worst_d_t = 0.0;
  double eta_scale = 0.0;
  double d_scale = 0.0;
  double mean_d2 = 0.0;
  bool passed() const {
    return eta_bound_violations == 0 && d_bound_violations == 0 && eta_tail_ok && d_tail_ok;
  }
};

DisorderAudit audit_conditions(const DisorderField& f, long n_samples);
DisorderAudit audit_conditions(const DisorderParams& p, long n_samples);

// Snapshot table with columns x_1..x_d,h,eta,d.
void export_snapshot(std::ostream& os, const DisorderField& f, const Volume& v, int hmax);

struct SnapshotRow {
  Site x{};
  int h = 0;
  double eta = 0.0;
  double d = 0.0;
};
std::vector<SnapshotRow> import_snapshot(std::istream& is, int dim);

}  // namespace sosf

#endif
