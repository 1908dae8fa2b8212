#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "secondclass/rng.hpp"

namespace secondclass {

/// Monte Carlo estimate with a 95% interval. `aborted` counts replicas that
/// were dropped as truncation events and are not part of `replicas`.
struct Estimate {
  double value = 0;
  double std_error = 0;
  double lo = 0;
  double hi = 0;
  std::size_t replicas = 0;
  std::size_t aborted = 0;

  double abort_fraction() const {
    std::size_t n = replicas + aborted;
    return n == 0 ? 0.0 : static_cast<double>(aborted) / static_cast<double>(n);
  }
};

inline constexpr double kZ95 = 1.959963984540054;

/// Sample mean with a normal interval.
Estimate mean_estimate(std::span<const double> values, std::size_t aborted = 0);
/// Proportion with a Wilson score interval.
Estimate proportion_estimate(std::size_t successes, std::size_t trials,
                             std::size_t aborted = 0);

/// Number of worker threads used by run_replicas (at least 1).
unsigned worker_count();
void set_worker_count(unsigned workers);  // 0 restores the hardware default

/// Calls body(replica, rng) for replica in [0, count), each with its own
/// stream make_stream(seed, experiment, replica). Replicas are spread over
/// worker threads; callers store results by replica index so that the merge
/// order, and therefore every reported number, does not depend on scheduling.
void run_replicas(std::size_t count, std::uint64_t seed, std::uint64_t experiment,
                  const std::function<void(std::size_t, Rng&)>& body);

/// Observable evaluated once per replica; a NaN return marks a truncation
/// abort. Probability observables must return 0 or 1.
Estimate estimate(const std::function<double(std::size_t, Rng&)>& observable,
                  std::size_t replicas, std::uint64_t seed, std::string_view label,
                  bool probability = false);

}  // namespace secondclass
