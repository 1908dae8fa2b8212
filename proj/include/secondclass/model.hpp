#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace secondclass {

/// Raised for invalid arguments, violated preconditions and invariant breaches.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-site state space I = {omin, ..., omax} together with the finite window
/// [sim_floor, sim_cap] used whenever a side of I is infinite.
struct OccupancyRange {
  std::optional<int> omin;  // empty: -infinity
  std::optional<int> omax;  // empty: +infinity
  int sim_floor = 0;
  int sim_cap = 1;

  static OccupancyRange bounded(int lo, int hi);
  static OccupancyRange make(std::optional<int> omin, std::optional<int> omax,
                             int sim_floor, int sim_cap);

  int size() const { return sim_cap - sim_floor + 1; }
  bool bounded_below() const { return omin.has_value(); }
  bool bounded_above() const { return omax.has_value(); }
  bool is_bounded() const { return omin && omax; }
  bool contains(int x) const { return x >= sim_floor && x <= sim_cap; }
  bool in_state_space(int x) const {
    return (!omin || x >= *omin) && (!omax || x <= *omax);
  }
};

using RateFn = std::function<double(int, int)>;

/// Nearest-neighbour jump rates p (right) and q (left) tabulated on the
/// truncated support. Immutable after construction.
class RateKernel {
 public:
  RateKernel(OccupancyRange range, const RateFn& p, const RateFn& q);

  const OccupancyRange& range() const { return range_; }

  /// Rates are zero outside the truncated support.
  double p(int a, int b) const {
    return inside(a, b) ? p_[index(a, b)] : 0.0;
  }
  double q(int a, int b) const {
    return inside(a, b) ? q_[index(a, b)] : 0.0;
  }

  bool p_identically_zero() const { return p_zero_; }
  bool q_identically_zero() const { return q_zero_; }
  bool symmetric() const;

  /// Largest p + q over pairs in [lo, hi]^2 (clipped to the support).
  double max_bond_rate(int lo, int hi) const;
  double max_bond_rate() const {
    return max_bond_rate(range_.sim_floor, range_.sim_cap);
  }

  /// Row-major tables indexed by (a - sim_floor) * size + (b - sim_floor).
  std::span<const double> p_table() const { return p_; }
  std::span<const double> q_table() const { return q_; }

 private:
  bool inside(int a, int b) const {
    return range_.contains(a) && range_.contains(b);
  }
  std::size_t index(int a, int b) const {
    return static_cast<std::size_t>(a - range_.sim_floor) * n_ +
           static_cast<std::size_t>(b - range_.sim_floor);
  }

  OccupancyRange range_;
  std::size_t n_;
  std::vector<double> p_;
  std::vector<double> q_;
  bool p_zero_ = true;
  bool q_zero_ = true;
};

/// Cylinder function g of `width` consecutive sites, used in the gradient
/// condition p(w_i, w_{i+1}) - p(w_{i+1}, w_i) = g(tau_i w) - g(tau_{i+1} w).
struct GradientFunction {
  int width = 1;
  std::function<double(std::span<const int>)> eval;
  std::string description;
};

/// Misanthrope decomposition p(a,b) = s_p(a,b+1) f(a), q(a,b) = s_q(a+1,b) f(b).
/// s_p and s_q are only consulted on I x I; callers may return anything
/// outside, the checker substitutes zero.
struct MisanthropeForm {
  std::function<double(int)> f;
  std::function<double(int, int)> s_p;
  std::function<double(int, int)> s_q;
};

struct ModelSpec {
  std::string name;
  std::map<std::string, double> parameters;
  RateKernel kernel;
  std::optional<GradientFunction> gradient;
  std::optional<MisanthropeForm> misanthrope;

  bool symmetric() const { return kernel.symmetric(); }
  double parameter(const std::string& key) const;
};

struct Truncation {
  std::optional<int> sim_floor;
  std::optional<int> sim_cap;
};

/// Names accepted by build_model.
const std::vector<std::string>& model_names();

ModelSpec build_model(const std::string& name,
                      const std::map<std::string, double>& parameters,
                      const Truncation& truncation = {});

/// Outcome of a structural check. `witness` holds the occupancies of the
/// first violation found (meaning documented per check).
struct Verdict {
  bool pass = true;
  std::string detail;
  std::vector<int> witness;

  explicit operator bool() const { return pass; }
};

/// p non-decreasing in its first and non-increasing in its second argument,
/// q the reverse. The scan runs over p-first, p-second, q-first, q-second and,
/// inside each, over base pairs in lexicographic order. On failure the witness
/// is {a, b, a', b'}: the rate at (a', b') breaks monotonicity against (a, b).
Verdict check_attractiveness(const RateKernel& kernel);

/// p(a,b) > 0 iff a > omin and b < omax (q mirrored), unless p or q vanishes
/// identically. Witness {a, b}.
Verdict check_non_degeneracy(const RateKernel& kernel);

/// Decomposition and three-site identity on the truncated support, both to
/// `tolerance`. Witness {a, b} for decomposition/symmetry failures, {a, b, c}
/// for the three-site identity.
Verdict check_misanthrope(const RateKernel& kernel,
                          const std::function<double(int)>& f,
                          const std::function<double(int, int)>& s_p,
                          const std::function<double(int, int)>& s_q,
                          double tolerance = 1e-12);

/// Gradient identity over all (width + 1)-site blocks of the truncated support.
Verdict check_gradient(const ModelSpec& model, double tolerance = 1e-12);

}  // namespace secondclass
