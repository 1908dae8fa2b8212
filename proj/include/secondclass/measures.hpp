#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "secondclass/model.hpp"

namespace secondclass {

/// One normalized site distribution on [lo, lo + pmf.size() - 1].
struct SiteDistribution {
  int lo = 0;
  std::vector<double> pmf;
  std::vector<double> cdf_table;  // P(X <= lo + i)
  std::vector<double> sf_table;   // P(X > lo + i), summed from the top
  double mean = 0;
  double variance = 0;
  double theta = 0;      // chemical potential, +-inf at boundary densities
  double tail_mass = 0;  // untruncated mass discarded by the truncation

  static SiteDistribution from_weights(int lo, std::vector<double> weights);

  int hi() const { return lo + static_cast<int>(pmf.size()) - 1; }
  double prob(int y) const;
  double cdf(int y) const;
  double sf(int y) const;
  /// Inverse-CDF draw for u in [0, 1).
  int sample_at(double u) const;
};

enum class FamilyMode { gibbs, explicit_table };

/// Density-parametrized one-site family. Gibbs mode tilts exp(E(x)) by
/// exp(theta x) and inverts the mean; explicit mode stores user marginals at
/// listed densities. Instances are immutable.
class MarginalFamily {
 public:
  using Energy = std::function<double(int)>;

  static MarginalFamily gibbs(std::string id, OccupancyRange range, Energy E);
  static MarginalFamily explicit_table(
      std::string id, OccupancyRange range,
      std::vector<std::pair<double, std::vector<double>>> tables);

  const std::string& id() const { return id_; }
  FamilyMode mode() const { return mode_; }
  const OccupancyRange& range() const { return range_; }

  /// Closed interval of densities the family can represent; for unbounded
  /// sides this is the attainable-mean interval of the truncated family.
  std::pair<double, double> density_domain() const;

  double theta_of_rho(double rho) const;
  SiteDistribution at(double rho) const;
  double cdf(double rho, int y) const { return at(rho).cdf(y); }

  /// Explicit tables in (rho, pmf) form; empty in Gibbs mode.
  const std::vector<std::pair<double, std::vector<double>>>& tables() const {
    return tables_;
  }

 private:
  MarginalFamily() = default;
  SiteDistribution gibbs_at_theta(double theta) const;
  double log_weight(double theta, int x) const;

  std::string id_;
  FamilyMode mode_ = FamilyMode::gibbs;
  OccupancyRange range_;
  // Gibbs: E tabulated over an extended window for the tail estimate.
  int ext_lo_ = 0;
  std::vector<double> energy_;
  std::vector<std::pair<double, std::vector<double>>> tables_;
};

/// Refuse truncated distributions discarding more than this much mass.
inline constexpr double kTailMassLimit = 1e-9;

MarginalFamily stationary_family(const ModelSpec& model);
MarginalFamily geometric_family(int cap = 200);
MarginalFamily poisson_family(int cap = 60);
MarginalFamily bernoulli_family();
MarginalFamily discrete_gaussian_family(double beta, int floor = -25, int cap = 25);
/// Gibbs family with E = 0 on the model's (truncated) range.
MarginalFamily flat_family(const OccupancyRange& range);

enum class PairKind { hat, bar, diagonal };
const char* to_string(PairKind kind);

/// Weight table on pairs (x, y) supported on x - y in {0, 1}.
/// diag[i] = w(lo+i, lo+i), shifted[i] = w(lo+i+1, lo+i).
struct PairMarginal {
  PairKind kind = PairKind::diagonal;
  int lo = 0;
  std::vector<double> diag;
  std::vector<double> shifted;

  int hi() const { return lo + static_cast<int>(diag.size()) - 1; }
  double weight(int x, int y) const;
  double mass() const;
  double first_marginal(int x) const;
  double second_marginal(int y) const;
  double shifted_mass() const;
};

PairMarginal hat_nu(const MarginalFamily& family, double rho, double lambda);
PairMarginal bar_nu(const MarginalFamily& family, double rho, double lambda);
PairMarginal diagonal_nu(const MarginalFamily& family, double rho);
PairMarginal hat_nu_prime(const MarginalFamily& family, double rho);

struct CouplingVerdict {
  bool exists = true;
  std::optional<int> witness;  // smallest y with CDF_rho(y) < CDF_lambda(y-1)
};

/// Tolerance below which a CDF comparison counts as equality.
inline constexpr double kCouplingTolerance = 1e-12;

CouplingVerdict coupling_exists(const MarginalFamily& family, double rho,
                                double lambda);

enum class ClassicFamily { geometric, poisson };
int find_violation_everywhere(ClassicFamily kind, double rho, double lambda);

/// Stochastic dominance CDF_lambda >= CDF_rho on the support (lambda < rho).
bool dominates(const MarginalFamily& family, double rho, double lambda,
               double tolerance = 1e-12);

}  // namespace secondclass
