#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mixlap/descriptor.hpp"
#include "mixlap/lattice.hpp"

using namespace mixlap;

namespace {

Params params_1d() {
  Params P;
  P.p = 2.0;
  P.s = 0.5;
  P.N = 1;
  return P;
}

std::shared_ptr<const ExteriorClosure> zero_closure(const Lattice& L, const Params& P, double r_trunc = 4.0) {
  auto an = std::make_shared<const Annulus>(L, r_trunc);
  return std::make_shared<const ExteriorClosure>(an, std::vector<double>(an->cells().size(), 0.0), TailModel::zero(), P);
}

}  // namespace

TEST_CASE("make_lattice examples") {
  const auto a = make_lattice(1, {0.0, 0.0}, 1.0, 3);
  CHECK(a.size() == 3);
  CHECK(a.h() == 1.0);
  CHECK(a.point(std::size_t{0})[0] == -1.0);
  CHECK(a.point(std::size_t{1})[0] == 0.0);
  CHECK(a.point(std::size_t{2})[0] == 1.0);

  CHECK(make_lattice(1, {0.0, 0.0}, 1.0, 5).h() == 0.5);

  const auto c = make_lattice(2, {0.0, 0.0}, 1.0, 5);
  CHECK(c.size() == 25);
  CHECK(c.h() == 0.5);
}

TEST_CASE("make_lattice rejects even or small node counts") {
  CHECK_THROWS_AS(make_lattice(1, {0.0, 0.0}, 1.0, 4), Error);
  CHECK_THROWS_AS(make_lattice(1, {0.0, 0.0}, 1.0, 1), Error);
  CHECK_THROWS_AS(make_lattice(2, {0.0, 0.0}, -1.0, 5), Error);
}

TEST_CASE("lexicographic enumeration, first axis slowest") {
  const auto L = make_lattice(2, {1.0, -2.0}, 1.0, 3);
  CHECK(L.multi_index(1) == MultiIndex{0, 1});
  CHECK(L.multi_index(3) == MultiIndex{1, 0});
  const auto x = L.point(std::size_t{4});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(-2.0));
  for (std::size_t k = 0; k < L.size(); ++k) CHECK(L.node_at(L.point(k)) == k);
}

TEST_CASE("sample examples") {
  const auto P = params_1d();
  const auto L = make_lattice(1, {0.0, 0.0}, 1.0, 3);
  const auto cl = zero_closure(L, P);

  const auto one = sample(FunctionSpec::constant(1.0), L, cl);
  for (double v : one.values()) CHECK(v == 1.0);

  const auto pw = sample(FunctionSpec::power(1.0, 0.7), L, cl);
  CHECK(pw[0] == 1.0);
  CHECK(pw[1] == 0.0);
  CHECK(pw[2] == 1.0);

  const auto L5 = make_lattice(1, {0.0, 0.0}, 1.0, 5);
  const auto af = sample(FunctionSpec::affine({3.0, 0.0}, -0.5), L5, zero_closure(L5, P));
  for (std::size_t k = 0; k < L5.size(); ++k) CHECK(af[k] == doctest::Approx(3.0 * L5.point(k)[0] - 0.5).epsilon(1e-15));
}

TEST_CASE("sampling a non-finite value names the point") {
  const auto P = params_1d();
  const auto L = make_lattice(1, {0.0, 0.0}, 1.0, 3);
  try {
    sample(FunctionSpec::power(1.0, -1.0), L, zero_closure(L, P));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("round trip of sampled closed forms") {
  const auto P = params_1d();
  const auto L = make_lattice(2, {0.2, 0.1}, 1.0, 9);
  const auto fn = FunctionSpec::gaussian(2.0, 0.3, {0.1, 0.0});
  P.validate();
  Params P2 = P;
  P2.N = 2;
  auto an = std::make_shared<const Annulus>(L, 3.0);
  auto cl = std::make_shared<const ExteriorClosure>(sample_closure(fn, an, TailModel::zero(), P2));
  const auto u = sample(fn, L, cl);
  for (std::size_t k = 0; k < L.size(); ++k) CHECK(u[k] == fn(L.point(k), 2));
  for (std::size_t k = 0; k < L.size(); ++k) CHECK(u.evaluate(L.point(k)) == u[k]);
}

TEST_CASE("exterior evaluation beyond the annulus is the power law") {
  Params P;
  P.p = 2.0;
  P.s = 0.6;
  P.N = 2;
  const auto L = make_lattice(2, {0.0, 0.0}, 1.0, 9);
  const auto fn = FunctionSpec::power(1.5, 0.5);
  auto an = std::make_shared<const Annulus>(L, 4.0);
  const ExteriorClosure cl = sample_closure(fn, an, TailModel::power_law(1.5, 0.5), P);
  for (double r : {an->outer() * 1.3, 20.0, 1e3}) {
    const Point x{r * 0.6, r * 0.8};
    CHECK(cl.evaluate(x) == doctest::Approx(1.5 * std::pow(r, 0.5)).epsilon(1e-14));
  }
}

TEST_CASE("closure rejects tails outside the tail space") {
  Params P;
  P.p = 3.0;
  P.s = 0.5;  // sp = 1.5, need 2 t < 1.5
  P.N = 1;
  const auto L = make_lattice(1, {0.0, 0.0}, 1.0, 9);
  auto an = std::make_shared<const Annulus>(L, 4.0);
  std::vector<double> v(an->cells().size(), 0.0);
  CHECK_NOTHROW(ExteriorClosure(an, v, TailModel::power_law(1.0, 0.7), P));
  CHECK_THROWS_AS(ExteriorClosure(an, v, TailModel::power_law(1.0, 0.75), P), Error);
  CHECK_THROWS_AS(ExteriorClosure(an, v, TailModel::power_law(1.0, 2.0), P), Error);
}

TEST_CASE("mask partition: interior, collar and exterior are disjoint and cover") {
  const auto L = make_lattice(2, {0.0, 0.0}, 1.5, 13);
  const Region dom = Region::ball({0.1, 0.0}, 1.0);
  int counts[3] = {0, 0, 0};
  for (int i = -40; i <= 40; ++i) {
    for (int j = -40; j <= 40; ++j) {
      const Point x{0.05 * i, 0.05 * j};
      const auto c = classify(L, dom, x);
      const bool in_dom = dom.contains(x, 2);
      const bool in_box = L.in_cell_box(x);
      if (c == PointClass::Interior) CHECK(in_dom);
      if (c == PointClass::Collar) CHECK((!in_dom && in_box));
      if (c == PointClass::Exterior) CHECK((!in_dom && !in_box));
      ++counts[static_cast<int>(c)];
    }
  }
  CHECK(counts[0] + counts[1] + counts[2] == 81 * 81);
  CHECK(counts[0] > 0);
  CHECK(counts[1] > 0);
  CHECK(counts[2] > 0);
}

TEST_CASE("region membership is strict") {
  const Region b = Region::ball({0.0, 0.0}, 1.0);
  CHECK_FALSE(b.contains({1.0, 0.0}, 2));
  CHECK(b.contains({0.999, 0.0}, 2));
  const Region q = Region::box({0.0, 0.0}, 1.0);
  CHECK_FALSE(q.contains({1.0, 0.5}, 2));
  CHECK(q.contains({0.99, -0.99}, 2));
}

TEST_CASE("annulus cells tile the shell between the cell box and r_trunc") {
  for (int dim : {1, 2}) {
    const auto L = make_lattice(dim, {0.0, 0.0}, 1.0, 9);
    const Annulus an(L, 5.0);
    double vol = 0.0;
    for (const auto& c : an.cells()) vol += c.volume;
    const double b0 = L.cell_box_half_width(), B = an.outer();
    const double expected = dim == 1 ? 2.0 * (B - b0) : 4.0 * (B * B - b0 * b0);
    CHECK(vol == doctest::Approx(expected).epsilon(1e-12));
    CHECK(B >= 5.0);
  }
}

TEST_CASE("csv round trip") {
  const auto P = params_1d();
  Params P2 = P;
  P2.N = 2;
  const auto L = make_lattice(2, {0.0, 0.0}, 1.0, 5);
  auto an = std::make_shared<const Annulus>(L, 3.0);
  auto cl = std::make_shared<const ExteriorClosure>(an, std::vector<double>(an->cells().size(), 0.0),
                                                    TailModel::zero(), P2);
  const auto u = sample(FunctionSpec::gaussian(1.0, 0.37), L, cl);
  std::stringstream ss;
  write_csv(ss, u);
  const auto back = read_csv(ss, L);
  for (std::size_t k = 0; k < L.size(); ++k) CHECK(back[k] == u[k]);
}

TEST_CASE("lattice functions reject non-finite values and size mismatches") {
  const auto P = params_1d();
  const auto L = make_lattice(1, {0.0, 0.0}, 1.0, 3);
  auto cl = zero_closure(L, P);
  CHECK_THROWS_AS(LatticeFunction(L, {0.0, NAN, 0.0}, cl), Error);
  CHECK_THROWS_AS(LatticeFunction(L, {0.0, 0.0}, cl), Error);
}
