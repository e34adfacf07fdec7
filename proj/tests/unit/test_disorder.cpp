#include <doctest.h>

#include <cmath>
#include <sstream>

#include "disorder.hpp"

using namespace sosf;

namespace {

DisorderParams small_disorder(std::uint64_t seed, double mstar = 10.0) {
  return DisorderParams{0.02, 0.01, 0.05, 0.02, mstar, seed};
}

}  // namespace

TEST_SUITE("disorder") {

TEST_CASE("zero scales give zero fields") {
  const DisorderField f(DisorderParams{0.0, 0.0, 0.0, 0.0, 5.0, 1});
  for (int h = -3; h <= 3; ++h) {
    CHECK(f.eta({1, 2, 0}, h) == 0.0);
    CHECK(f.dshift({1, 2, 0}, h) == 0.0);
  }
  CHECK(f.mean_d2() == 0.0);
  const DisorderAudit a = audit_conditions(f.params(), 10000);
  CHECK(a.passed());
  CHECK(a.eta_tail.empty());
  CHECK(a.d_tail.empty());
}

TEST_CASE("queries are deterministic and order independent") {
  const DisorderField f(small_disorder(42));
  const DisorderField g(small_disorder(42));
  const double late = g.eta({7, -3, 0}, 5);
  for (int x = -3; x <= 3; ++x)
    for (int h = -2; h <= 2; ++h) {
      CHECK(f.eta({x, 0, 0}, h) == f.eta({x, 0, 0}, h));
      CHECK(f.eta({x, 0, 0}, h) == g.eta({x, 0, 0}, h));
      CHECK(f.dshift({x, 1, 0}, h) == g.draw(Channel::d, {x, 1, 0}, h));
    }
  CHECK(f.eta({7, -3, 0}, 5) == late);
  const DisorderField other(small_disorder(43));
  CHECK(other.eta({0, 0, 0}, 0) != f.eta({0, 0, 0}, 0));
}

TEST_CASE("hard bounds hold on every query") {
  DisorderParams p{0.5, 0.5, 0.3, 0.25, 4.0, 9};
  const DisorderField f(p);
  for (int x = 0; x < 200; ++x)
    for (int h = -5; h <= 5; ++h) {
      CHECK(std::abs(f.eta({x, 0, 0}, h)) <= 0.3);
      CHECK(std::abs(f.dshift({x, 0, 0}, h)) <= 0.25);
    }
}

TEST_CASE("center examples") {
  const DisorderField flat(DisorderParams{0.0, 0.0, 0.0, 0.0, 5.0, 1});
  CHECK(flat.center({0, 0, 0}, 3) == 15.0);
  const DisorderField f(DisorderParams{0.02, 0.05, 0.05, 0.25, 10.0, 3});
  for (int x = 0; x < 50; ++x)
    for (int h = -4; h < 4; ++h) {
      const Site s{x, 0, 0};
      CHECK(f.center(s, h) == doctest::Approx(10.0 * (h + f.dshift(s, h))).epsilon(1e-15));
      CHECK(f.center(s, h + 1) - f.center(s, h) >= 10.0 * (1.0 - 2.0 * 0.25) - 1e-12);
    }
}

TEST_CASE("validation rejects bad parameters") {
  CHECK_THROWS_AS(validate(DisorderParams{-1.0, 0.0, 0.0, 0.0, 1.0, 0}), DomainError);
  CHECK_THROWS_AS(validate(DisorderParams{0.0, 0.0, 0.0, 0.3, 1.0, 0}), DomainError);
  CHECK_THROWS_AS(validate(DisorderParams{0.0, 0.0, 0.0, 0.0, 0.0, 0}), DomainError);
}

TEST_CASE("audit passes for the default law") {
  const DisorderAudit a = audit_conditions(small_disorder(5), 200000);
  CHECK(a.eta_bound_violations == 0);
  CHECK(a.d_bound_violations == 0);
  CHECK(a.eta_tail_ok);
  CHECK(a.d_tail_ok);
  CHECK_FALSE(a.eta_tail.empty());
  CHECK_FALSE(a.d_tail.empty());
}

TEST_CASE("mis-scaled generator is flagged") {
  const DisorderParams p = small_disorder(5);
  const DisorderField loose(p, 10.0 * p.sigma_eta, DisorderField(p).d_scale());
  const DisorderAudit a = audit_conditions(loose, 100000);
  CHECK_FALSE(a.eta_tail_ok);
  CHECK_FALSE(a.passed());
  CHECK(a.worst_eta_t > 0.0);
}

TEST_CASE("closed form second moment matches sampling") {
  const DisorderParams p{0.0, 0.05, 0.0, 0.1, 1.0, 17};
  const DisorderField f(p);
  double s = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double d = f.draw(Channel::d, {k, 0, 0}, 0);
    s += d * d;
  }
  const double se = f.mean_d2() * std::sqrt(2.0 / n);
  CHECK(std::abs(s / n - f.mean_d2()) <= 4.0 * se);
  CHECK(truncated_normal_second_moment(1.0, 50.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("snapshot round trip") {
  const DisorderField f(small_disorder(8));
  const Volume v = make_box(2, 2);
  std::stringstream ss;
  export_snapshot(ss, f, v, 1);
  const std::vector<SnapshotRow> rows = import_snapshot(ss, 2);
  CHECK(rows.size() == v.size() * 3);
  for (const SnapshotRow& r : rows) {
    CHECK(r.eta == f.eta(r.x, r.h));
    CHECK(r.d == f.dshift(r.x, r.h));
  }
}

}  // TEST_SUITE
