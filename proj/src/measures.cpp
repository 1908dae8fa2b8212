#include "secondclass/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace secondclass {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

SiteDistribution SiteDistribution::from_weights(int lo,
                                                std::vector<double> weights) {
  if (weights.empty()) throw Error("empty distribution");
  double total = 0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw Error("invalid distribution weight");
    total += w;
  }
  if (!(total > 0)) throw Error("distribution has no mass");
  SiteDistribution d;
  d.lo = lo;
  d.pmf = std::move(weights);
  for (double& w : d.pmf) w /= total;
  const std::size_t n = d.pmf.size();
  d.cdf_table.resize(n);
  d.sf_table.resize(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) d.cdf_table[i] = (acc += d.pmf[i]);
  acc = 0;
  for (std::size_t i = n; i-- > 0;) {
    d.sf_table[i] = acc;
    acc += d.pmf[i];
  }
  // sf is exact from above; use it to pin the cdf where it is the smaller one
  for (std::size_t i = 0; i < n; ++i)
    if (d.sf_table[i] < 0.5) d.cdf_table[i] = 1.0 - d.sf_table[i];
  d.cdf_table.back() = 1.0;
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m += d.pmf[i] * (lo + static_cast<double>(i));
  double v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = lo + static_cast<double>(i) - m;
    v += d.pmf[i] * dx * dx;
  }
  d.mean = m;
  d.variance = v;
  return d;
}

double SiteDistribution::prob(int y) const {
  if (y < lo || y > hi()) return 0.0;
  return pmf[static_cast<std::size_t>(y - lo)];
}

double SiteDistribution::cdf(int y) const {
  if (y < lo) return 0.0;
  if (y >= hi()) return 1.0;
  return cdf_table[static_cast<std::size_t>(y - lo)];
}

double SiteDistribution::sf(int y) const {
  if (y < lo) return 1.0;
  if (y >= hi()) return 0.0;
  return sf_table[static_cast<std::size_t>(y - lo)];
}

int SiteDistribution::sample_at(double u) const {
  auto it = std::upper_bound(cdf_table.begin(), cdf_table.end(), u);
  if (it == cdf_table.end()) --it;
  // skip zero-probability states that share a cdf value
  auto idx = static_cast<std::size_t>(it - cdf_table.begin());
  while (idx + 1 < pmf.size() && pmf[idx] == 0.0) ++idx;
  return lo + static_cast<int>(idx);
}

MarginalFamily MarginalFamily::gibbs(std::string id, OccupancyRange range,
                                     Energy E) {
  MarginalFamily fam;
  fam.id_ = std::move(id);
  fam.mode_ = FamilyMode::gibbs;
  fam.range_ = range;
  const int width = range.size();
  int lo = range.bounded_below() ? range.sim_floor : range.sim_floor - width;
  int hi = range.bounded_above() ? range.sim_cap : range.sim_cap + width;
  fam.ext_lo_ = lo;
  fam.energy_.resize(static_cast<std::size_t>(hi - lo + 1));
  for (int x = lo; x <= hi; ++x) {
    double e = E(x);
    if (std::isnan(e)) throw Error("energy is NaN at " + std::to_string(x));
    fam.energy_[static_cast<std::size_t>(x - lo)] = e;
  }
  return fam;
}

MarginalFamily MarginalFamily::explicit_table(
    std::string id, OccupancyRange range,
    std::vector<std::pair<double, std::vector<double>>> tables) {
  if (tables.empty()) throw Error("explicit family needs at least one table");
  std::sort(tables.begin(), tables.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto n = static_cast<std::size_t>(range.size());
  for (auto& [rho, pmf] : tables) {
    if (pmf.size() != n)
      throw Error("explicit table at density " + fmt(rho) +
                  " does not cover the truncated support");
    auto d = SiteDistribution::from_weights(range.sim_floor, pmf);
    if (std::abs(d.mean - rho) > 1e-10)
      throw Error("explicit table at density " + fmt(rho) + " has mean " +
                  fmt(d.mean));
    pmf = d.pmf;
  }
  for (std::size_t k = 1; k < tables.size(); ++k) {
    if (tables[k].first == tables[k - 1].first)
      throw Error("duplicate density in explicit family");
    auto lower = SiteDistribution::from_weights(range.sim_floor, tables[k - 1].second);
    auto upper = SiteDistribution::from_weights(range.sim_floor, tables[k].second);
    for (int y = range.sim_floor; y <= range.sim_cap; ++y)
      if (lower.cdf(y) < upper.cdf(y) - 1e-12)
        throw Error("explicit family violates stochastic dominance between "
                    "densities " + fmt(tables[k - 1].first) + " and " +
                    fmt(tables[k].first) + " at y=" + std::to_string(y));
  }
  MarginalFamily fam;
  fam.id_ = std::move(id);
  fam.mode_ = FamilyMode::explicit_table;
  fam.range_ = range;
  fam.tables_ = std::move(tables);
  return fam;
}

std::pair<double, double> MarginalFamily::density_domain() const {
  if (mode_ == FamilyMode::explicit_table)
    return {tables_.front().first, tables_.back().first};
  return {double(range_.sim_floor), double(range_.sim_cap)};
}

double MarginalFamily::log_weight(double theta, int x) const {
  return theta * x + energy_[static_cast<std::size_t>(x - ext_lo_)];
}

SiteDistribution MarginalFamily::gibbs_at_theta(double theta) const {
  const int lo = range_.sim_floor;
  const int hi = range_.sim_cap;
  const int ext_hi = ext_lo_ + static_cast<int>(energy_.size()) - 1;
  double peak = -kInf;
  for (int x = ext_lo_; x <= ext_hi; ++x) peak = std::max(peak, log_weight(theta, x));
  std::vector<double> w(static_cast<std::size_t>(hi - lo + 1));
  double inside = 0;
  double outside = 0;
  for (int x = ext_lo_; x <= ext_hi; ++x) {
    double v = std::exp(log_weight(theta, x) - peak);
    if (x < lo || x > hi)
      outside += v;
    else
      inside += (w[static_cast<std::size_t>(x - lo)] = v);
  }
  if (!(inside > 0)) throw Error("Gibbs weights vanish on the truncated support");
  auto d = SiteDistribution::from_weights(lo, std::move(w));
  d.theta = theta;
  d.tail_mass = outside / (inside + outside);
  return d;
}

double MarginalFamily::theta_of_rho(double rho) const {
  if (mode_ != FamilyMode::gibbs) throw Error("theta is only defined for Gibbs families");
  auto [dmin, dmax] = density_domain();
  if (!(rho >= dmin && rho <= dmax))
    throw Error("density " + fmt(rho) + " outside the attainable range [" +
                fmt(dmin) + ", " + fmt(dmax) + "]");
  if (rho == dmin) return -kInf;
  if (rho == dmax) return kInf;
  auto mean_at = [&](double th) { return gibbs_at_theta(th).mean; };
  double a = -1, b = 1;
  while (mean_at(a) > rho) {
    a *= 2;
    if (a < -1e6) throw Error("cannot bracket theta for density " + fmt(rho));
  }
  while (mean_at(b) < rho) {
    b *= 2;
    if (b > 1e6) throw Error("cannot bracket theta for density " + fmt(rho));
  }
  // run to machine resolution; the mean is monotone in theta
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if (mean_at(m) < rho)
      a = m;
    else
      b = m;
  }
  double ma = mean_at(a), mb = mean_at(b);
  return std::abs(ma - rho) <= std::abs(mb - rho) ? a : b;
}

SiteDistribution MarginalFamily::at(double rho) const {
  auto [dmin, dmax] = density_domain();
  if (mode_ == FamilyMode::explicit_table) {
    for (const auto& [r, pmf] : tables_)
      if (std::abs(r - rho) <= 1e-12) {
        auto d = SiteDistribution::from_weights(range_.sim_floor, pmf);
        d.theta = std::numeric_limits<double>::quiet_NaN();
        return d;
      }
    throw Error("explicit family " + id_ + " has no table at density " + fmt(rho));
  }
  double theta = theta_of_rho(rho);
  if (std::isinf(theta)) {
    std::vector<double> w(static_cast<std::size_t>(range_.size()), 0.0);
    w[theta < 0 ? 0 : w.size() - 1] = 1.0;
    auto d = SiteDistribution::from_weights(range_.sim_floor, std::move(w));
    d.theta = theta;
    if ((theta < 0 && !range_.bounded_below()) || (theta > 0 && !range_.bounded_above()))
      throw Error("density " + fmt(rho) + " sits on a truncation bound");
    return d;
  }
  auto d = gibbs_at_theta(theta);
  if (d.tail_mass > kTailMassLimit)
    throw Error("density " + fmt(rho) + " of family " + id_ +
                " loses tail mass " + fmt(d.tail_mass) +
                " to the truncation; raise the cap");
  (void)dmin;
  (void)dmax;
  return d;
}

MarginalFamily stationary_family(const ModelSpec& model) {
  if (!model.misanthrope)
    throw Error("model " + model.name + " has no known product stationary measure");
  auto f = model.misanthrope->f;
  const auto& range = model.kernel.range();
  // E(x) = sum_{y=x+1}^{0} log f(y) - sum_{z=1}^{x} log f(z), with f = 1 off I.
  auto fI = [f, range](int y) { return range.in_state_space(y) ? f(y) : 1.0; };
  auto E = [fI](int x) {
    double e = 0;
    for (int y = x + 1; y <= 0; ++y) e += std::log(fI(y));
    for (int z = 1; z <= x; ++z) e -= std::log(fI(z));
    return e;
  };
  return MarginalFamily::gibbs(model.name, range, E);
}

MarginalFamily geometric_family(int cap) {
  return MarginalFamily::gibbs("geometric", OccupancyRange::make(0, std::nullopt, 0, cap),
                               [](int) { return 0.0; });
}

MarginalFamily poisson_family(int cap) {
  return MarginalFamily::gibbs("poisson", OccupancyRange::make(0, std::nullopt, 0, cap),
                               [](int x) { return -std::lgamma(x + 1.0); });
}

MarginalFamily bernoulli_family() {
  return MarginalFamily::gibbs("bernoulli", OccupancyRange::bounded(0, 1),
                               [](int) { return 0.0; });
}

MarginalFamily discrete_gaussian_family(double beta, int floor, int cap) {
  return MarginalFamily::gibbs(
      "discrete_gaussian",
      OccupancyRange::make(std::nullopt, std::nullopt, floor, cap),
      [beta](int x) { return -0.5 * beta * x * x; });
}

MarginalFamily flat_family(const OccupancyRange& range) {
  return MarginalFamily::gibbs("flat", range, [](int) { return 0.0; });
}

const char* to_string(PairKind kind) {
  switch (kind) {
    case PairKind::hat: return "hat";
    case PairKind::bar: return "bar";
    case PairKind::diagonal: return "diagonal";
  }
  return "?";
}

double PairMarginal::weight(int x, int y) const {
  if (y < lo || y > hi()) return 0.0;
  auto i = static_cast<std::size_t>(y - lo);
  if (x == y) return diag[i];
  if (x == y + 1) return shifted[i];
  return 0.0;
}

double PairMarginal::mass() const {
  return std::accumulate(diag.begin(), diag.end(), 0.0) + shifted_mass();
}

double PairMarginal::shifted_mass() const {
  return std::accumulate(shifted.begin(), shifted.end(), 0.0);
}

double PairMarginal::first_marginal(int x) const {
  return weight(x, x) + weight(x, x - 1);
}

double PairMarginal::second_marginal(int y) const {
  return weight(y, y) + weight(y + 1, y);
}

namespace {

void require_order(double rho, double lambda) {
  if (!(rho > lambda))
    throw Error("coupled measures need rho > lambda (got rho=" + fmt(rho) +
                ", lambda=" + fmt(lambda) + ")");
}

}  // namespace

PairMarginal hat_nu(const MarginalFamily& family, double rho, double lambda) {
  require_order(rho, lambda);
  auto nr = family.at(rho);
  auto nl = family.at(lambda);
  const int lo = family.range().sim_floor;
  const auto n = static_cast<std::size_t>(family.range().size());
  PairMarginal pm{PairKind::hat, lo, std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    int y = lo + static_cast<int>(i);
    // CDF_l(y) - CDF_r(y) = SF_r(y) - SF_l(y); take the better conditioned one
    double diff = nr.sf(y) < 0.5 ? nr.sf(y) - nl.sf(y) : nl.cdf(y) - nr.cdf(y);
    pm.shifted[i] = std::max(0.0, diff) / (rho - lambda);
  }
  return pm;
}

PairMarginal bar_nu(const MarginalFamily& family, double rho, double lambda) {
  require_order(rho, lambda);
  auto nr = family.at(rho);
  auto nl = family.at(lambda);
  const int lo = family.range().sim_floor;
  const auto n = static_cast<std::size_t>(family.range().size());
  PairMarginal pm{PairKind::bar, lo, std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    int y = lo + static_cast<int>(i);
    pm.diag[i] = nr.cdf(y) - nl.cdf(y - 1);
    if (i + 1 < n) pm.shifted[i] = nl.cdf(y) - nr.cdf(y);
  }
  return pm;
}

PairMarginal diagonal_nu(const MarginalFamily& family, double rho) {
  auto d = family.at(rho);
  const auto n = d.pmf.size();
  return PairMarginal{PairKind::diagonal, d.lo, d.pmf, std::vector<double>(n, 0.0)};
}

PairMarginal hat_nu_prime(const MarginalFamily& family, double rho) {
  auto d = family.at(rho);
  if (!(d.variance > 0)) throw Error("hat_nu_prime needs positive variance");
  const auto n = d.pmf.size();
  PairMarginal pm{PairKind::hat, d.lo, std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
  double acc = 0;
  for (std::size_t i = n; i-- > 0;) {
    // shifted[i] = sum_{z > y} (z - rho) Gamma(z) / Var
    pm.shifted[i] = acc / d.variance;
    acc += (d.lo + static_cast<double>(i) - d.mean) * d.pmf[i];
  }
  return pm;
}

CouplingVerdict coupling_exists(const MarginalFamily& family, double rho,
                                double lambda) {
  if (!(lambda < rho && rho - 1 <= lambda + 1e-12))
    throw Error("coupling_exists needs rho - 1 <= lambda < rho");
  auto nr = family.at(rho);
  auto nl = family.at(lambda);
  for (int y = family.range().sim_floor; y <= family.range().sim_cap; ++y) {
    // CDF_r(y) >= CDF_l(y-1)  <=>  SF_r(y) <= SF_l(y-1)
    double gap = std::min(nr.cdf(y) - nl.cdf(y - 1), nl.sf(y - 1) - nr.sf(y));
    if (gap < -kCouplingTolerance) return CouplingVerdict{false, y};
  }
  return CouplingVerdict{true, std::nullopt};
}

int find_violation_everywhere(ClassicFamily kind, double rho, double lambda) {
  if (!(rho > lambda && lambda >= 0))
    throw Error("find_violation_everywhere needs rho > lambda >= 0");
  auto family = kind == ClassicFamily::geometric ? geometric_family() : poisson_family();
  auto nr = family.at(rho);
  auto nl = family.at(lambda);
  for (int y = 0; y <= family.range().sim_cap; ++y) {
    // CDF_r(y) < CDF_l(y-1) written with survival functions to keep precision
    if (nr.sf(y) > nl.sf(y - 1)) return y;
  }
  throw Error("no violation found below the truncation bound " +
              std::to_string(family.range().sim_cap));
}

bool dominates(const MarginalFamily& family, double rho, double lambda,
               double tolerance) {
  auto nr = family.at(rho);
  auto nl = family.at(lambda);
  for (int y = family.range().sim_floor; y <= family.range().sim_cap; ++y)
    if (nl.cdf(y) < nr.cdf(y) - tolerance) return false;
  return true;
}

}  // namespace secondclass
