#include "secondclass/dynamics.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <sstream>

namespace secondclass {

Configuration Configuration::from_occupancies(int half_width, std::vector<int> occ) {
  if (half_width < 1) throw Error("window half width must be at least 1");
  if (occ.size() != static_cast<std::size_t>(2 * half_width + 1))
    throw Error("occupancy vector does not match the window");
  Configuration c;
  c.half_width = half_width;
  c.occ = std::move(occ);
  c.heights.assign(static_cast<std::size_t>(2 * half_width), 0);
  auto h = [&](int k) -> long long& {
    return c.heights[static_cast<std::size_t>(k + half_width - 1)];
  };
  h(1) = 0;
  for (int k = 2; k <= half_width; ++k) h(k) = h(k - 1) - c.at(k - 1);
  for (int k = 0; k >= -half_width + 1; --k) h(k) = h(k + 1) + c.at(k);
  return c;
}

long long Configuration::total_mass() const {
  long long s = 0;
  for (int v : occ) s += v;
  return s;
}

CoupledState CoupledState::from_pair(Configuration upper, Configuration lower) {
  if (upper.half_width != lower.half_width)
    throw Error("coupled configurations need a common window");
  CoupledState s{std::move(upper), std::move(lower), {}, 0};
  s.lower.time = s.upper.time;
  s.rebuild_ledger();
  return s;
}

void CoupledState::rebuild_ledger() {
  discrepant_sites.clear();
  total_discrepancy = 0;
  for (int i = -upper.half_width; i <= upper.half_width; ++i) {
    int d = difference(i);
    if (d != 0) {
      discrepant_sites.push_back(i);
      total_discrepancy += std::abs(d);
    }
  }
}

int track_Q(const CoupledState& state) {
  if (state.discrepant_sites.size() != 1 || state.total_discrepancy != 1) {
    std::ostringstream os;
    os << "expected a single second class particle, found "
       << state.discrepant_sites.size() << " discrepant sites with total "
       << state.total_discrepancy;
    throw Error(os.str());
  }
  return state.discrepant_sites.front();
}

SumTree::SumTree(std::size_t leaves) : leaves_(leaves) {
  while (capacity_ < std::max<std::size_t>(leaves, 1)) capacity_ <<= 1;
  tree_.assign(2 * capacity_, 0.0);
}

void SumTree::assign(std::span<const double> values) {
  std::fill(tree_.begin(), tree_.end(), 0.0);
  std::copy(values.begin(), values.end(), tree_.begin() + static_cast<std::ptrdiff_t>(capacity_));
  for (std::size_t i = capacity_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

void SumTree::set(std::size_t leaf, double value) {
  std::size_t i = capacity_ + leaf;
  tree_[i] = value;
  for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

std::size_t SumTree::find(double& u) const {
  std::size_t i = 1;
  while (i < capacity_) {
    double left = tree_[2 * i];
    if (u < left) {
      i = 2 * i;
    } else {
      u -= left;
      i = 2 * i + 1;
    }
  }
  std::size_t leaf = i - capacity_;
  if (leaf >= leaves_) leaf = leaves_ - 1;
  return leaf;
}

Dynamics::Dynamics(RateKernel kernel)
    : kernel_(std::move(kernel)),
      attractive_(check_attractiveness(kernel_).pass),
      lo_(kernel_.range().sim_floor),
      hi_(kernel_.range().sim_cap),
      n_(static_cast<std::size_t>(kernel_.range().size())),
      p_(kernel_.p_table().begin(), kernel_.p_table().end()),
      q_(kernel_.q_table().begin(), kernel_.q_table().end()) {}

namespace {

void require_in_range(const Configuration& c, int lo, int hi) {
  for (int v : c.occ)
    if (v < lo || v > hi)
      throw Error("configuration has occupancy " + std::to_string(v) +
                  " outside the truncated support");
}

}  // namespace

RunResult Dynamics::evolve(Configuration& s, double t_end, Rng& rng) const {
  if (t_end < s.time) throw Error("cannot evolve backwards in time");
  require_in_range(s, lo_, hi_);
  RunResult res;
  const auto nb = static_cast<std::size_t>(2 * s.half_width);
  auto bond_rate = [&](std::size_t b) {
    std::size_t k = idx(s.occ[b], s.occ[b + 1]);
    return p_[k] + q_[k];
  };
  std::vector<double> rates(nb);
  for (std::size_t b = 0; b < nb; ++b) rates[b] = bond_rate(b);
  SumTree tree(nb);
  tree.assign(rates);

  while (true) {
    double total = tree.total();
    if (!(total > 0)) break;
    double dt = exponential(rng, total);
    if (s.time + dt > t_end) break;
    s.time += dt;
    double u = uniform01(rng) * total;
    std::size_t b = tree.find(u);
    int& a = s.occ[b];
    int& c = s.occ[b + 1];
    std::size_t k = idx(a, c);
    if (p_[k] + q_[k] <= 0) continue;  // rounding landed on an idle bond
    if (u < p_[k]) {
      if (!fits(a - 1) || !fits(c + 1)) return {RunStatus::truncated, res.events};
      --a;
      ++c;
      ++s.heights[b];
    } else {
      if (!fits(a + 1) || !fits(c - 1)) return {RunStatus::truncated, res.events};
      ++a;
      --c;
      --s.heights[b];
    }
    ++res.events;
    if (b > 0) tree.set(b - 1, bond_rate(b - 1));
    tree.set(b, bond_rate(b));
    if (b + 1 < nb) tree.set(b + 1, bond_rate(b + 1));
  }
  s.time = t_end;
  return res;
}

RunResult Dynamics::evolve(CoupledState& s, double t_end, Rng& rng,
                           CouplingChecks checks) const {
  if (!attractive_) throw Error("basic coupling needs an attractive kernel");
  if (t_end < s.time()) throw Error("cannot evolve backwards in time");
  require_in_range(s.upper, lo_, hi_);
  require_in_range(s.lower, lo_, hi_);
  if (checks.order)
    for (int i = -s.upper.half_width; i <= s.upper.half_width; ++i)
      if (s.difference(i) < 0) throw Error("coupled pair is not ordered at start");

  RunResult res;
  auto& U = s.upper.occ;
  auto& W = s.lower.occ;
  const auto nb = static_cast<std::size_t>(2 * s.upper.half_width);
  auto bond_rate = [&](std::size_t b) {
    std::size_t ku = idx(U[b], U[b + 1]);
    std::size_t kl = idx(W[b], W[b + 1]);
    return std::max(p_[ku], p_[kl]) + std::max(q_[ku], q_[kl]);
  };
  std::vector<double> rates(nb);
  for (std::size_t b = 0; b < nb; ++b) rates[b] = bond_rate(b);
  SumTree tree(nb);
  tree.assign(rates);

  const int L = s.upper.half_width;
  auto ledger_update = [&](std::size_t pos, int before) {
    int site = static_cast<int>(pos) - L;
    int after = U[pos] - W[pos];
    if (before == after) return;
    s.total_discrepancy += std::abs(after) - std::abs(before);
    if (before == 0) {
      s.discrepant_sites.push_back(site);
    } else if (after == 0) {
      auto it = std::find(s.discrepant_sites.begin(), s.discrepant_sites.end(), site);
      *it = s.discrepant_sites.back();
      s.discrepant_sites.pop_back();
    }
  };

  double time = s.time();
  while (true) {
    double total = tree.total();
    if (!(total > 0)) break;
    double dt = exponential(rng, total);
    if (time + dt > t_end) break;
    time += dt;
    double u = uniform01(rng) * total;
    std::size_t b = tree.find(u);
    std::size_t ku = idx(U[b], U[b + 1]);
    std::size_t kl = idx(W[b], W[b + 1]);
    double pu = p_[ku], pl = p_[kl], qu = q_[ku], ql = q_[kl];
    double pmax = std::max(pu, pl);
    if (pmax + std::max(qu, ql) <= 0) continue;

    bool up_moves = false, low_moves = false;
    int dir = +1;
    if (u < pmax) {
      if (u < std::min(pu, pl)) {
        up_moves = low_moves = true;
      } else if (pu > pl) {
        up_moves = true;
      } else {
        low_moves = true;
      }
    } else {
      u -= pmax;
      dir = -1;
      if (u < std::min(qu, ql)) {
        up_moves = low_moves = true;
      } else if (qu > ql) {
        up_moves = true;
      } else {
        low_moves = true;
      }
    }

    int before_a = U[b] - W[b];
    int before_c = U[b + 1] - W[b + 1];
    long long total_before = s.total_discrepancy;
    auto apply = [&](std::vector<int>& occ, std::vector<long long>& heights) {
      int na = occ[b] - dir, nc = occ[b + 1] + dir;
      if (!fits(na) || !fits(nc)) return false;
      occ[b] = na;
      occ[b + 1] = nc;
      heights[b] += dir;
      return true;
    };
    if (up_moves && !apply(U, s.upper.heights)) {
      s.upper.time = s.lower.time = time;
      return {RunStatus::truncated, res.events};
    }
    if (low_moves && !apply(W, s.lower.heights)) {
      s.upper.time = s.lower.time = time;
      return {RunStatus::truncated, res.events};
    }
    ++res.events;
    ledger_update(b, before_a);
    ledger_update(b + 1, before_c);

    if (checks.order && (U[b] < W[b] || U[b + 1] < W[b + 1]))
      throw Error("coupled order broken at t=" + std::to_string(time));
    if (checks.monotone && s.total_discrepancy > total_before)
      throw Error("total discrepancy increased at t=" + std::to_string(time));

    if (b > 0) tree.set(b - 1, bond_rate(b - 1));
    tree.set(b, bond_rate(b));
    if (b + 1 < nb) tree.set(b + 1, bond_rate(b + 1));
  }
  s.upper.time = s.lower.time = t_end;
  return res;
}

StepInitialCondition::StepInitialCondition(const MarginalFamily& family,
                                           double rho, double lambda)
    : rho_(rho), lambda_(lambda), left_(family.at(rho)), right_(family.at(lambda)) {
  if (rho < lambda)
    throw Error("step data with lambda > rho is not supported");
  if (rho > lambda) {
    auto hat = hat_nu(family, rho, lambda);
    origin_lower_ = SiteDistribution::from_weights(hat.lo, hat.shifted);
  }
}

const SiteDistribution& StepInitialCondition::origin_lower() const {
  if (!origin_lower_) throw Error("coupled step data needs rho > lambda");
  return *origin_lower_;
}

Configuration StepInitialCondition::sample_single(int half_width, Rng& rng) const {
  std::vector<int> occ(static_cast<std::size_t>(2 * half_width + 1));
  for (int i = -half_width; i <= half_width; ++i)
    occ[static_cast<std::size_t>(i + half_width)] =
        (i <= 0 ? left_ : right_).sample_at(uniform01(rng));
  return Configuration::from_occupancies(half_width, std::move(occ));
}

CoupledState StepInitialCondition::sample_coupled(int half_width, Rng& rng) const {
  const auto& origin = origin_lower();
  std::vector<int> up(static_cast<std::size_t>(2 * half_width + 1));
  std::vector<int> low(up.size());
  for (int i = -half_width; i <= half_width; ++i) {
    auto k = static_cast<std::size_t>(i + half_width);
    if (i == 0) {
      low[k] = origin.sample_at(uniform01(rng));
      up[k] = low[k] + 1;
    } else {
      low[k] = up[k] = (i < 0 ? left_ : right_).sample_at(uniform01(rng));
    }
  }
  return CoupledState::from_pair(Configuration::from_occupancies(half_width, std::move(up)),
                                 Configuration::from_occupancies(half_width, std::move(low)));
}

namespace {

int lower_quantile(const SiteDistribution& d, double q) {
  for (int y = d.lo; y <= d.hi(); ++y)
    if (d.cdf(y) > q) return y;
  return d.hi();
}

int upper_quantile(const SiteDistribution& d, double q) {
  for (int y = d.hi(); y >= d.lo; --y)
    if (d.sf(y - 1) > q) return y;
  return d.lo;
}

}  // namespace

WindowPlan plan_window(const RateKernel& kernel, const SiteDistribution& left,
                       const SiteDistribution& right, double t, int margin,
                       double quantile) {
  if (t < 0) throw Error("negative time horizon");
  const auto& r = kernel.range();
  WindowPlan plan;
  plan.occupancy_lo = r.bounded_below()
                          ? r.sim_floor
                          : std::min(lower_quantile(left, quantile), lower_quantile(right, quantile));
  plan.occupancy_hi = r.bounded_above()
                          ? r.sim_cap
                          : std::max(upper_quantile(left, quantile), upper_quantile(right, quantile));
  plan.rate_bound = kernel.max_bond_rate(plan.occupancy_lo, plan.occupancy_hi);
  plan.diffusive = kernel.symmetric();
  double rt = plan.rate_bound * t;
  double reach = plan.diffusive ? 6 * std::sqrt(rt) : rt + 6 * std::sqrt(rt);
  plan.half_width = static_cast<int>(std::ceil(reach)) + margin;
  plan.half_width = std::max(plan.half_width, 1);
  double gap = plan.half_width - margin;
  if (rt <= 0) {
    plan.tail_bound = 0;
  } else if (plan.diffusive) {
    plan.tail_bound = std::erfc(gap / std::sqrt(2 * rt));
  } else {
    plan.tail_bound = gap <= 0 ? 1.0 : boost::math::gamma_p(gap, rt);
  }
  return plan;
}

CoupledState collision_initial_state(const RateKernel& kernel, int half_width) {
  const auto& r = kernel.range();
  if (!r.is_bounded()) throw Error("the collision experiment needs finite occupancy bounds");
  std::vector<int> low(static_cast<std::size_t>(2 * half_width + 1));
  for (int i = -half_width; i <= half_width; ++i)
    low[static_cast<std::size_t>(i + half_width)] = i <= 0 ? *r.omax : *r.omin;
  auto up = low;
  up[static_cast<std::size_t>(half_width)] -= 1;
  up[static_cast<std::size_t>(half_width + 1)] += 1;
  return CoupledState::from_pair(Configuration::from_occupancies(half_width, std::move(up)),
                                 Configuration::from_occupancies(half_width, std::move(low)));
}

CollisionSample run_collision(const Dynamics& dynamics, double t_end, int half_width,
                              Rng& rng, std::span<const double> sample_times) {
  auto state = collision_initial_state(dynamics.kernel(), half_width);
  CollisionSample out;
  CouplingChecks checks{false, true};
  for (double ts : sample_times) {
    if (ts > t_end) break;
    auto r = dynamics.evolve(state, ts, rng, checks);
    if (!r.ok()) {
      out.status = r.status;
      return out;
    }
    int a = state.lower.at(0), b = state.lower.at(1);
    out.lower_bond_drift.push_back(dynamics.p(a, b) - dynamics.q(a, b));
  }
  auto r = dynamics.evolve(state, t_end, rng, checks);
  out.status = r.status;
  out.survived = state.total_discrepancy == 2;
  return out;
}

}  // namespace secondclass
