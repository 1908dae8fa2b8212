#include <cmath>

#include "doctest.h"
#include "secondclass/model.hpp"

using namespace secondclass;

namespace {

std::map<std::string, double> default_params(const std::string& name) {
  if (name == "asep") return {{"p", 0.75}};
  if (name == "two_type" || name == "sym_two_type") return {{"c", 0.25}};
  if (name == "bricklayers_exp") return {{"beta", 1}};
  if (name == "k_exclusion") return {{"K", 3}};
  return {};
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("every catalogue model is attractive and non-degenerate") {
    for (const auto& name : model_names()) {
      CAPTURE(name);
      auto m = build_model(name, default_params(name));
      CHECK(check_attractiveness(m.kernel).pass);
      CHECK(check_non_degeneracy(m.kernel).pass);
      if (m.misanthrope) {
        auto v = check_misanthrope(m.kernel, m.misanthrope->f, m.misanthrope->s_p,
                                   m.misanthrope->s_q);
        CHECK_MESSAGE(v.pass, v.detail);
      }
      if (m.gradient) {
        auto v = check_gradient(m);
        CHECK_MESSAGE(v.pass, v.detail);
      }
      CHECK(m.symmetric() == (name.rfind("sym_", 0) == 0));
    }
  }

  TEST_CASE("simple exclusion rates") {
    auto m = build_model("asep", {{"p", 0.75}});
    CHECK(m.kernel.p(1, 0) == doctest::Approx(0.75));
    CHECK(m.kernel.q(0, 1) == doctest::Approx(0.25));
    CHECK(m.kernel.p(1, 1) == 0);
    CHECK(m.kernel.p(0, 0) == 0);
    CHECK(m.kernel.q(1, 0) == 0);
    auto t = build_model("tasep", {});
    CHECK(t.kernel.p(1, 0) == 1);
    CHECK(t.kernel.q_identically_zero());
  }

  TEST_CASE("zero range truncation defaults and overrides") {
    auto zc = build_model("zr_const", {});
    CHECK(zc.kernel.range().sim_cap == 200);
    CHECK_FALSE(zc.kernel.range().bounded_above());
    CHECK(zc.kernel.p(5, 3) == 1);
    CHECK(zc.kernel.p(0, 3) == 0);
    auto zl = build_model("zr_linear", {}, Truncation{std::nullopt, 30});
    CHECK(zl.kernel.range().sim_cap == 30);
    CHECK(zl.kernel.p(4, 0) == 4);
    CHECK(zl.kernel.p(31, 0) == 0);  // outside the truncated support
  }

  TEST_CASE("bricklayers rates and the f(x) f(1-x) = 1 relation") {
    const double beta = 0.7;
    auto m = build_model("bricklayers_exp", {{"beta", beta}});
    auto f = [&](int x) { return std::exp(beta * (x - 0.5)); };
    for (int a = -3; a <= 3; ++a) {
      CHECK(f(a) * f(1 - a) == doctest::Approx(1.0));
      for (int b = -3; b <= 3; ++b) CHECK(m.kernel.p(a, b) == doctest::Approx(f(a) + f(-b)));
    }
  }

  TEST_CASE("bad parameters are rejected") {
    CHECK_THROWS_AS(build_model("nope", {}), Error);
    CHECK_THROWS_AS(build_model("asep", {}), Error);
    CHECK_THROWS_AS(build_model("asep", {{"p", 0.4}}), Error);
    CHECK_THROWS_AS(build_model("tasep", {{"x", 1}}), Error);
    CHECK_THROWS_AS(build_model("two_type", {{"c", 0.6}}), Error);
    CHECK_THROWS_AS(build_model("zr_const", {}, Truncation{std::nullopt, 0}), Error);
  }

  TEST_CASE("attractiveness violation is reported with a witness") {
    // p decreasing in its first argument between 1 and 2
    RateKernel k(OccupancyRange::bounded(0, 2),
                 [](int a, int b) { return a == 1 && b < 2 ? 2.0 : (a == 2 && b < 2 ? 1.0 : 0.0); },
                 [](int, int) { return 0.0; });
    auto v = check_attractiveness(k);
    CHECK_FALSE(v.pass);
    REQUIRE(v.witness.size() == 4);
    CHECK(k.p(v.witness[2], v.witness[3]) < k.p(v.witness[0], v.witness[1]));
  }

  TEST_CASE("non-degeneracy violation") {
    RateKernel k(OccupancyRange::bounded(0, 2),
                 [](int a, int b) { return a > 0 && b < 2 && !(a == 1 && b == 1) ? 1.0 : 0.0; },
                 [](int, int) { return 0.0; });
    auto v = check_non_degeneracy(k);
    CHECK_FALSE(v.pass);
    CHECK(v.witness == std::vector<int>{1, 1});
  }

  TEST_CASE("three-site identity failure is detected") {
    auto m = build_model("two_type", {{"c", 0.25}});
    auto bad_s = [](int a, int b) { return a == -1 || b == -1 ? 0.0 : 1.0 + 0.1 * a * b; };
    auto v = check_misanthrope(m.kernel, m.misanthrope->f, bad_s, m.misanthrope->s_q);
    CHECK_FALSE(v.pass);
  }

  TEST_CASE("gradient identity fails for an asymmetric-difference kernel") {
    auto m = build_model("sym_two_type", {{"c", 0.25}});
    GradientFunction wrong{1, [](std::span<const int> w) { return 2.0 * w[0]; }, "2 w0"};
    ModelSpec broken{m.name, m.parameters, m.kernel, wrong, m.misanthrope};
    CHECK_FALSE(check_gradient(broken).pass);
  }
}
