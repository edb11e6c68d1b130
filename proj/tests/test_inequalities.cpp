#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mixlap/inequalities.hpp"
#include "mixlap/parallel.hpp"
#include "mixlap/params.hpp"

using namespace mixlap;

namespace {

using Vec = std::vector<double>;

FuzzConfig small_config(std::uint64_t samples) {
  FuzzConfig c;
  c.samples = samples;
  c.seed = 99;
  c.block_size = 4096;
  return c;
}

}  // namespace

TEST_CASE("inequality I examples") {
  const Vec a{1.0, 0.0}, b{0.0, 0.0};
  const auto r = check_ineq_I(a, b, 3.0);
  CHECK(r.lhs == doctest::Approx(1.0));
  CHECK(r.rhs == doctest::Approx(0.5));
  CHECK(r.ok);
}

TEST_CASE("p = 2 is an equality for I and V") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> G;
  for (int t = 0; t < 100; ++t) {
    const Vec a{G(rng), G(rng)}, b{G(rng), G(rng)};
    const double d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
    const auto i = check_ineq_I(a, b, 2.0);
    const auto v = check_ineq_V(a, b, 2.0);
    CHECK(i.lhs == doctest::Approx(d2).epsilon(1e-12));
    CHECK(i.rhs == doctest::Approx(d2).epsilon(1e-12));
    CHECK(v.lhs == doctest::Approx(d2).epsilon(1e-12));
    CHECK(v.rhs == doctest::Approx(d2).epsilon(1e-12));
    const auto vi = check_ineq_VI(a, b, 2.0);
    CHECK(vi.lhs == doctest::Approx(std::sqrt(d2)).epsilon(1e-12));
    CHECK(vi.rhs == doctest::Approx(2.0 * std::sqrt(d2)).epsilon(1e-12));
    CHECK(vi.ok);
  }
}

TEST_CASE("closed forms at a = 0") {
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const Vec a{0.0, 0.0}, b{0.6, -0.8};  // |b| = 1
    const Vec b2{1.2, -1.6};             // |b| = 2
    const auto v = check_ineq_V(a, b2, p);
    CHECK(v.lhs == doctest::Approx(std::pow(2.0, p)).epsilon(1e-12));
    CHECK(v.rhs == doctest::Approx(4.0 / (p * p) * std::pow(2.0, p)).epsilon(1e-12));
    CHECK(v.ok);
    const auto vi = check_ineq_VI(a, b2, p);
    CHECK(vi.lhs == doctest::Approx(std::pow(2.0, p - 1.0)).epsilon(1e-12));
    // At p = 2 the weight |a|^0 is 1, so the right side is 2|b|.
    const double rhs = p == 2.0 ? 4.0 : (p - 1.0) * std::pow(2.0, p - 1.0);
    CHECK(vi.rhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(vi.ok);
    CHECK(check_ineq_I(a, b, p).ok);
  }
}

TEST_CASE("power test examples") {
  const auto deg = check_powertest(0.3, 0.3, -1.2, -1.2, 3.0, 2.0);
  CHECK(deg.product == 0.0);
  CHECK(deg.power_term == 0.0);
  CHECK(deg.ratio == 0.0);

  const auto one = check_powertest(1.0, 0.0, 0.0, 0.0, 2.0, 1.0);
  CHECK(one.product == doctest::Approx(1.0));
  CHECK(one.power_term == doctest::Approx(1.0));
  CHECK(one.ratio == doctest::Approx(1.0));
}

TEST_CASE("p below 2 is rejected") {
  const Vec a{1.0, 0.0}, b{-1.0, 0.0};
  CHECK_THROWS_AS(check_ineq_I(a, b, 1.2), Error);
  CHECK_THROWS_AS(check_ineq_V(a, b, 1.5), Error);
  CHECK_THROWS_AS(check_powertest(1.0, 0.0, 0.0, 0.0, 2.0, 0.5), Error);
}

TEST_CASE("small fuzz campaign: no violations, finite ratios") {
  const auto rep = run_fuzz(small_config(20000));
  CHECK(rep.total_violations() == 0);
  CHECK(rep.records.size() == 3 * 4 + 4 * 3);
  for (const auto& r : rep.records) {
    CHECK(r.samples == 20000);
    if (r.inequality == "powertest") {
      CHECK(std::isfinite(r.max_ratio));
      CHECK(r.max_ratio > 0.0);
    }
  }
}

TEST_CASE("fuzz results do not depend on the thread count") {
  set_thread_count(1);
  const auto a = to_json(run_fuzz(small_config(30000))).dump();
  set_thread_count(4);
  const auto b = to_json(run_fuzz(small_config(30000))).dump();
  set_thread_count(1);
  CHECK(a == b);
  auto other = small_config(30000);
  other.seed = 100;
  CHECK(to_json(run_fuzz(other)).dump() != a);
}

TEST_CASE("fuzz config json") {
  FuzzConfig c = small_config(10);
  c.p_values = {2.0, 3.5};
  const nlohmann::json j = c;
  const auto back = j.get<FuzzConfig>();
  CHECK(back.samples == 10);
  CHECK(back.seed == 99);
  CHECK(back.p_values == c.p_values);
  CHECK(back.magnitude_lo == c.magnitude_lo);
  CHECK(back.magnitude_hi == c.magnitude_hi);

  FuzzConfig bad;
  bad.samples = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  FuzzConfig bad_p;
  bad_p.p_values = {1.5};
  CHECK_THROWS_AS(bad_p.validate(), Error);

  const auto rep = to_json(run_fuzz(small_config(100)));
  CHECK(rep.at("total_violations").get<std::uint64_t>() == 0);
  CHECK(rep.at("inequalities").size() == 4);
}
