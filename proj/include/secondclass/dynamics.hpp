#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "secondclass/measures.hpp"
#include "secondclass/model.hpp"
#include "secondclass/rng.hpp"

namespace secondclass {

/// Finite window [-L, L] of a configuration. Bond k joins sites k-1 and k,
/// for k in [-L+1, L]; height(k) starts at the height function normalized by
/// height(1) = 0 with height(k) - height(k+1) = occ(k), and moves by +1 for
/// every right jump across bond k and -1 for every left jump.
struct Configuration {
  int half_width = 0;
  std::vector<int> occ;
  std::vector<long long> heights;
  double time = 0;

  static Configuration from_occupancies(int half_width, std::vector<int> occ);

  int sites() const { return 2 * half_width + 1; }
  int at(int site) const { return occ[static_cast<std::size_t>(site + half_width)]; }
  int& at(int site) { return occ[static_cast<std::size_t>(site + half_width)]; }
  long long height(int k) const {
    return heights[static_cast<std::size_t>(k + half_width - 1)];
  }
  long long total_mass() const;
};

/// Upper (omega-hat) and lower (eta-hat) configurations on a common window,
/// with a maintained ledger of the sites where they differ.
struct CoupledState {
  Configuration upper;
  Configuration lower;
  std::vector<int> discrepant_sites;  // unordered
  long long total_discrepancy = 0;    // sum of |upper - lower|

  static CoupledState from_pair(Configuration upper, Configuration lower);
  int difference(int site) const { return upper.at(site) - lower.at(site); }
  double time() const { return upper.time; }
  /// Recompute the ledger from scratch (used by tests to audit updates).
  void rebuild_ledger();
};

/// Site of the lone second class particle; throws when there is not exactly
/// one discrepancy of size one.
int track_Q(const CoupledState& state);

enum class RunStatus { ok, truncated };

struct RunResult {
  RunStatus status = RunStatus::ok;
  std::uint64_t events = 0;
  bool ok() const { return status == RunStatus::ok; }
};

struct CouplingChecks {
  bool order = false;     // lower <= upper at every event
  bool monotone = false;  // total discrepancy never increases
};

/// Binary tree of partial sums over bond rates.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves = 0);
  void assign(std::span<const double> values);
  void set(std::size_t leaf, double value);
  double total() const { return tree_[1]; }
  double leaf(std::size_t i) const { return tree_[capacity_ + i]; }
  /// Leaf whose cumulative interval contains u in [0, total); u becomes the
  /// offset inside that leaf.
  std::size_t find(double& u) const;
  std::size_t size() const { return leaves_; }

 private:
  std::size_t leaves_ = 0;
  std::size_t capacity_ = 1;
  std::vector<double> tree_;
};

/// Exact event-driven simulation for one kernel. Holds only immutable data;
/// one instance can drive any number of concurrent replicas.
class Dynamics {
 public:
  explicit Dynamics(RateKernel kernel);

  const RateKernel& kernel() const { return kernel_; }
  bool attractive() const { return attractive_; }

  /// Advance to t_end. Jumps over the two window edges never happen. A jump
  /// that would leave [sim_floor, sim_cap] stops the run as truncated.
  RunResult evolve(Configuration& state, double t_end, Rng& rng) const;

  /// Basic coupling: shared jumps at min rate, compensating jumps at the
  /// positive and negative parts. Requires an attractive kernel.
  RunResult evolve(CoupledState& state, double t_end, Rng& rng,
                   CouplingChecks checks = {}) const;

  double p(int a, int b) const { return p_[idx(a, b)]; }
  double q(int a, int b) const { return q_[idx(a, b)]; }

 private:
  std::size_t idx(int a, int b) const {
    return static_cast<std::size_t>(a - lo_) * n_ + static_cast<std::size_t>(b - lo_);
  }
  bool fits(int v) const { return v >= lo_ && v <= hi_; }

  RateKernel kernel_;
  bool attractive_ = false;
  int lo_ = 0;
  int hi_ = 0;
  std::size_t n_ = 0;
  std::vector<double> p_;
  std::vector<double> q_;
};

/// Step initial data built from one marginal family.
class StepInitialCondition {
 public:
  StepInitialCondition(const MarginalFamily& family, double rho, double lambda);

  double rho() const { return rho_; }
  double lambda() const { return lambda_; }
  const SiteDistribution& left() const { return left_; }
  const SiteDistribution& right() const { return right_; }
  /// Law of eta-hat at the origin (omega-hat = eta-hat + 1 there).
  const SiteDistribution& origin_lower() const;

  /// Sites <= 0 from nu^rho and sites >= 1 from nu^lambda.
  Configuration sample_single(int half_width, Rng& rng) const;
  /// Diagonal nu^{rho,rho} left of 0, hat nu at 0, diagonal nu^{lambda,lambda}
  /// right of 0.
  CoupledState sample_coupled(int half_width, Rng& rng) const;

 private:
  double rho_;
  double lambda_;
  SiteDistribution left_;
  SiteDistribution right_;
  std::optional<SiteDistribution> origin_lower_;
};

struct WindowPlan {
  int half_width = 0;
  double rate_bound = 0;   // R used in the rule
  double tail_bound = 0;   // chance that edge effects reach the central sites
  bool diffusive = false;
  int occupancy_lo = 0;    // occupancy range the rate bound was taken over
  int occupancy_hi = 0;
};

/// Window half width for a run to time t. Ballistic rule
/// L = ceil(R t + 6 sqrt(R t)) + margin, diffusive rule for symmetric kernels
/// L = ceil(6 sqrt(R t)) + margin. For unbounded occupancies R is the largest
/// bond rate over the occupancies both initial marginals reach with
/// probability above `quantile`.
WindowPlan plan_window(const RateKernel& kernel, const SiteDistribution& left,
                       const SiteDistribution& right, double t, int margin = 10,
                       double quantile = 1e-4);

/// Deterministic pair of the collision experiment: lower is the maximal step
/// (omax left of 1, omin from 1 on); upper = lower - delta_0 + delta_1.
CoupledState collision_initial_state(const RateKernel& kernel, int half_width);

struct CollisionSample {
  RunStatus status = RunStatus::ok;
  bool survived = false;
  std::vector<double> lower_bond_drift;  // p - q of lower at bond (0,1) per sample time
};

CollisionSample run_collision(const Dynamics& dynamics, double t_end,
                              int half_width, Rng& rng,
                              std::span<const double> sample_times);

}  // namespace secondclass
