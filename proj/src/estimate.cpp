#include "secondclass/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "secondclass/model.hpp"

namespace secondclass {

Estimate mean_estimate(std::span<const double> values, std::size_t aborted) {
  Estimate e;
  e.replicas = values.size();
  e.aborted = aborted;
  if (values.empty()) return e;
  // two-pass for accuracy
  double sum = 0;
  for (double v : values) sum += v;
  double mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double var = values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;
  e.value = mean;
  e.std_error = std::sqrt(var / static_cast<double>(values.size()));
  e.lo = mean - kZ95 * e.std_error;
  e.hi = mean + kZ95 * e.std_error;
  return e;
}

Estimate proportion_estimate(std::size_t successes, std::size_t trials,
                             std::size_t aborted) {
  if (successes > trials) throw Error("more successes than trials");
  Estimate e;
  e.replicas = trials;
  e.aborted = aborted;
  if (trials == 0) return e;
  double n = static_cast<double>(trials);
  double p = static_cast<double>(successes) / n;
  e.value = p;
  e.std_error = std::sqrt(p * (1 - p) / n);
  double z2 = kZ95 * kZ95;
  double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  double half = kZ95 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  e.lo = std::max(0.0, centre - half);
  e.hi = std::min(1.0, centre + half);
  // the Wilson centre is shrunk toward 1/2; keep the point estimate inside
  e.lo = std::min(e.lo, p);
  e.hi = std::max(e.hi, p);
  return e;
}

namespace {
std::atomic<unsigned> g_workers{0};
}

unsigned worker_count() {
  unsigned w = g_workers.load();
  if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
  return w;
}

void set_worker_count(unsigned workers) { g_workers.store(workers); }

void run_replicas(std::size_t count, std::uint64_t seed, std::uint64_t experiment,
                  const std::function<void(std::size_t, Rng&)>& body) {
  unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(worker_count(), std::max<std::size_t>(count, 1)));
  auto one = [&](std::size_t i) {
    Rng rng = make_stream(seed, experiment, i);
    body(i, rng);
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) one(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        one(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Estimate estimate(const std::function<double(std::size_t, Rng&)>& observable,
                  std::size_t replicas, std::uint64_t seed, std::string_view label,
                  bool probability) {
  if (replicas < 2) throw Error("an estimate needs at least two replicas");
  std::vector<double> values(replicas);
  run_replicas(replicas, seed, experiment_key(label),
               [&](std::size_t i, Rng& rng) { values[i] = observable(i, rng); });
  std::vector<double> kept;
  kept.reserve(replicas);
  std::size_t aborted = 0;
  for (double v : values) {
    if (std::isnan(v))
      ++aborted;
    else
      kept.push_back(v);
  }
  if (!probability) return mean_estimate(kept, aborted);
  std::size_t hits = 0;
  for (double v : kept) {
    if (v != 0.0 && v != 1.0) throw Error("probability observable must return 0 or 1");
    hits += v == 1.0;
  }
  return proportion_estimate(hits, kept.size(), aborted);
}

}  // namespace secondclass
