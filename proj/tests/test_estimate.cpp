#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "secondclass/estimate.hpp"
#include "secondclass/rng.hpp"

using namespace secondclass;

TEST_SUITE("estimate") {
  TEST_CASE("Wilson interval") {
    auto e = proportion_estimate(30, 100);
    const double z = 1.959963984540054, n = 100, p = 0.3;
    double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
    double half = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
    CHECK(e.value == doctest::Approx(0.3));
    CHECK(e.lo == doctest::Approx(centre - half));
    CHECK(e.hi == doctest::Approx(centre + half));
    CHECK(e.std_error == doctest::Approx(std::sqrt(0.21 / 100)));
    auto zero = proportion_estimate(0, 50);
    CHECK(zero.lo == 0);
    CHECK(zero.hi > 0);
  }

  TEST_CASE("mean with normal interval and abort bookkeeping") {
    std::vector<double> v{1, 2, 3, 4};
    auto e = mean_estimate(v, 1);
    CHECK(e.value == doctest::Approx(2.5));
    CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
    CHECK(e.hi - e.value == doctest::Approx(kZ95 * e.std_error));
    CHECK(e.replicas == 4);
    CHECK(e.aborted == 1);
    CHECK(e.abort_fraction() == doctest::Approx(0.2));
  }

  TEST_CASE("streams depend on seed, experiment and replica only") {
    auto a = make_stream(1, 2, 3), b = make_stream(1, 2, 3), c = make_stream(1, 2, 4);
    CHECK(a() == b());
    CHECK(make_stream(1, 2, 3)() != c());
    CHECK(experiment_key("x") != experiment_key("y"));
    for (int i = 0; i < 1000; ++i) {
      double u = uniform01(a);
      CHECK((u >= 0 && u < 1));
    }
  }

  TEST_CASE("replica results do not depend on the worker count") {
    auto collect = [](unsigned workers) {
      set_worker_count(workers);
      std::vector<double> out(500);
      run_replicas(out.size(), 11, experiment_key("workers"),
                   [&](std::size_t i, Rng& rng) { out[i] = exponential(rng, 2.0); });
      set_worker_count(0);
      return out;
    };
    CHECK(collect(1) == collect(4));
  }

  TEST_CASE("worker failures propagate") {
    set_worker_count(3);
    CHECK_THROWS(run_replicas(100, 1, 1, [](std::size_t i, Rng&) {
      if (i == 37) throw std::runtime_error("boom");
    }));
    set_worker_count(0);
  }

  TEST_CASE("estimate treats NaN as an abort") {
    auto e = estimate([](std::size_t i, Rng&) { return i % 10 == 0 ? NAN : double(i % 2); }, 100, 1,
                      "nan", true);
    CHECK(e.aborted == 10);
    CHECK(e.replicas == 90);
    CHECK(e.value == doctest::Approx(50.0 / 90));  // the aborted replicas are all even
  }

  TEST_CASE("exponential waiting times have the right mean") {
    auto rng = make_stream(2, 2, 2);
    double s = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) s += exponential(rng, 4.0);
    CHECK(s / n == doctest::Approx(0.25).epsilon(0.01));
  }
}
