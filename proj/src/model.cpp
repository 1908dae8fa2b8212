#include "secondclass/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace secondclass {

OccupancyRange OccupancyRange::bounded(int lo, int hi) {
  return make(lo, hi, lo, hi);
}

OccupancyRange OccupancyRange::make(std::optional<int> omin,
                                    std::optional<int> omax, int sim_floor,
                                    int sim_cap) {
  if (omin && omax && *omin >= *omax)
    throw Error("occupancy range needs omin < omax");
  if (omin) sim_floor = *omin;
  if (omax) sim_cap = *omax;
  if (sim_floor >= sim_cap)
    throw Error("truncation window needs sim_floor < sim_cap");
  return OccupancyRange{omin, omax, sim_floor, sim_cap};
}

RateKernel::RateKernel(OccupancyRange range, const RateFn& p, const RateFn& q)
    : range_(range), n_(static_cast<std::size_t>(range.size())) {
  p_.resize(n_ * n_);
  q_.resize(n_ * n_);
  for (int a = range_.sim_floor; a <= range_.sim_cap; ++a) {
    for (int b = range_.sim_floor; b <= range_.sim_cap; ++b) {
      double pv = p(a, b);
      double qv = q(a, b);
      if (!std::isfinite(pv) || !std::isfinite(qv) || pv < 0 || qv < 0) {
        std::ostringstream os;
        os << "rate at (" << a << ',' << b << ") is negative or not finite";
        throw Error(os.str());
      }
      p_[index(a, b)] = pv;
      q_[index(a, b)] = qv;
      if (pv != 0) p_zero_ = false;
      if (qv != 0) q_zero_ = false;
    }
  }
}

bool RateKernel::symmetric() const {
  for (int a = range_.sim_floor; a <= range_.sim_cap; ++a)
    for (int b = range_.sim_floor; b <= range_.sim_cap; ++b)
      if (q(a, b) != p(b, a)) return false;
  return true;
}

double RateKernel::max_bond_rate(int lo, int hi) const {
  lo = std::max(lo, range_.sim_floor);
  hi = std::min(hi, range_.sim_cap);
  double best = 0;
  for (int a = lo; a <= hi; ++a)
    for (int b = lo; b <= hi; ++b) best = std::max(best, p(a, b) + q(a, b));
  return best;
}

double ModelSpec::parameter(const std::string& key) const {
  auto it = parameters.find(key);
  if (it == parameters.end()) throw Error("model has no parameter '" + key + "'");
  return it->second;
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {
      "asep",           "tasep",         "k_exclusion",  "two_type",
      "zr_const",       "zr_linear",     "bricklayers_exp", "sym_exclusion",
      "sym_two_type",   "sym_zr_const",  "sym_zr_linear"};
  return names;
}

namespace {

using Params = std::map<std::string, double>;

double require(const Params& params, const std::string& model,
               const std::string& key) {
  auto it = params.find(key);
  if (it == params.end())
    throw Error("model " + model + " needs parameter '" + key + "'");
  return it->second;
}

double optional_param(const Params& params, const std::string& key,
                      double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown(const Params& params, const std::string& model,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : params) {
    bool ok = std::any_of(allowed.begin(), allowed.end(),
                          [&](const char* a) { return k == a; });
    if (!ok) throw Error("model " + model + " has no parameter '" + k + "'");
  }
}

OccupancyRange half_line(const Truncation& tr, int default_cap) {
  return OccupancyRange::make(0, std::nullopt, 0,
                              tr.sim_cap.value_or(default_cap));
}

GradientFunction site_value_gradient() {
  return GradientFunction{
      1, [](std::span<const int> w) { return static_cast<double>(w[0]); },
      "w0"};
}

}  // namespace

ModelSpec build_model(const std::string& name, const Params& params,
                      const Truncation& tr) {
  auto zero = [](int, int) { return 0.0; };

  if (name == "asep" || name == "tasep") {
    double pbar = 1.0;
    if (name == "asep") {
      reject_unknown(params, name, {"p"});
      pbar = require(params, name, "p");
      if (!(pbar > 0.5 && pbar <= 1.0))
        throw Error("asep needs 1/2 < p <= 1");
    } else {
      reject_unknown(params, name, {});
    }
    double qbar = 1.0 - pbar;
    auto range = OccupancyRange::bounded(0, 1);
    RateKernel k(
        range, [=](int a, int b) { return pbar * a * (1 - b); },
        [=](int a, int b) { return qbar * b * (1 - a); });
    MisanthropeForm m{
        [](int x) { return static_cast<double>(x); },
        [=](int a, int b) { return a == 1 && b == 1 ? pbar : 0.0; },
        [=](int a, int b) { return a == 1 && b == 1 ? qbar : 0.0; }};
    Params stored = {{"p", pbar}};
    return ModelSpec{name, stored, std::move(k), std::nullopt, m};
  }

  if (name == "k_exclusion") {
    reject_unknown(params, name, {"K", "p"});
    double kval = require(params, name, "K");
    int K = static_cast<int>(std::lround(kval));
    if (K < 1 || std::abs(kval - K) > 0) throw Error("K must be a positive integer");
    double pbar = optional_param(params, "p", 1.0);
    if (!(pbar > 0.5 && pbar <= 1.0)) throw Error("k_exclusion needs 1/2 < p <= 1");
    double qbar = 1.0 - pbar;
    RateKernel k(
        OccupancyRange::bounded(0, K),
        [=](int a, int b) { return a > 0 && b < K ? pbar : 0.0; },
        [=](int a, int b) { return b > 0 && a < K ? qbar : 0.0; });
    std::optional<MisanthropeForm> m;
    if (K == 1)
      m = MisanthropeForm{
          [](int x) { return static_cast<double>(x); },
          [=](int a, int b) { return a == 1 && b == 1 ? pbar : 0.0; },
          [=](int a, int b) { return a == 1 && b == 1 ? qbar : 0.0; }};
    return ModelSpec{name, {{"K", double(K)}, {"p", pbar}}, std::move(k),
                     std::nullopt, m};
  }

  if (name == "two_type") {
    reject_unknown(params, name, {"c"});
    double c = require(params, name, "c");
    if (!(c > 0)) throw Error("two_type needs c > 0");
    if (c > 0.5) throw Error("two_type is not attractive for c > 1/2");
    RateKernel k(
        OccupancyRange::bounded(-1, 1),
        [=](int a, int b) {
          if (a == 0 && b == 0) return c;
          if (a == 0 && b == -1) return 0.5;
          if (a == 1 && b == 0) return 0.5;
          if (a == 1 && b == -1) return 1.0;
          return 0.0;
        },
        zero);
    MisanthropeForm m{
        [=](int x) { return x == 0 ? c : 1.0; },
        [=](int a, int b) {
          if (a == -1 || b == -1) return 0.0;
          if (a == 0 && b == 0) return 1.0 / (2 * c);
          if (a == 1 && b == 1) return 0.5;
          return 1.0;
        },
        [](int, int) { return 0.0; }};
    return ModelSpec{name, {{"c", c}}, std::move(k), std::nullopt, m};
  }

  if (name == "zr_const" || name == "zr_linear" || name == "sym_zr_const" ||
      name == "sym_zr_linear") {
    bool symmetric = name.rfind("sym_", 0) == 0;
    bool linear = name.ends_with("linear");
    double pbar = 1.0;
    if (symmetric) {
      reject_unknown(params, name, {});
    } else {
      reject_unknown(params, name, {"p"});
      pbar = optional_param(params, "p", 1.0);
      if (!(pbar > 0.5 && pbar <= 1.0)) throw Error(name + " needs 1/2 < p <= 1");
    }
    double qbar = symmetric ? 1.0 : 1.0 - pbar;
    auto f = linear ? std::function<double(int)>(
                          [](int x) { return x > 0 ? double(x) : 0.0; })
                    : std::function<double(int)>(
                          [](int x) { return x > 0 ? 1.0 : 0.0; });
    RateKernel k(
        half_line(tr, linear ? 60 : 200),
        [=](int a, int) { return pbar * f(a); },
        [=](int, int b) { return qbar * f(b); });
    MisanthropeForm m{f, [=](int, int) { return pbar; },
                      [=](int, int) { return qbar; }};
    std::optional<GradientFunction> g;
    if (symmetric) {
      if (linear)
        g = site_value_gradient();
      else
        g = GradientFunction{
            1, [](std::span<const int> w) { return w[0] > 0 ? 1.0 : 0.0; },
            "1{w0>0}"};
    }
    Params stored;
    if (!symmetric) stored["p"] = pbar;
    return ModelSpec{name, stored, std::move(k), g, m};
  }

  if (name == "bricklayers_exp") {
    reject_unknown(params, name, {"beta", "p"});
    double beta = require(params, name, "beta");
    if (!(beta > 0)) throw Error("bricklayers_exp needs beta > 0");
    double pbar = optional_param(params, "p", 1.0);
    if (!(pbar > 0.5 && pbar <= 1.0))
      throw Error("bricklayers_exp needs 1/2 < p <= 1");
    double qbar = 1.0 - pbar;
    auto f = [=](int x) { return std::exp(beta * (x - 0.5)); };
    auto range = OccupancyRange::make(std::nullopt, std::nullopt,
                                      tr.sim_floor.value_or(-25),
                                      tr.sim_cap.value_or(25));
    RateKernel k(
        range, [=](int a, int b) { return pbar * (f(a) + f(-b)); },
        [=](int a, int b) { return qbar * (f(-a) + f(b)); });
    // f(x) f(1-x) = 1 gives f(a) + f(-b) = f(a) (1 + 1/(f(a) f(b+1))).
    MisanthropeForm m{
        f, [=](int a, int b) { return pbar * (1 + 1 / (f(a) * f(b))); },
        [=](int a, int b) { return qbar * (1 + 1 / (f(a) * f(b))); }};
    return ModelSpec{name, {{"beta", beta}, {"p", pbar}}, std::move(k),
                     std::nullopt, m};
  }

  if (name == "sym_exclusion") {
    reject_unknown(params, name, {});
    RateKernel k(
        OccupancyRange::bounded(0, 1),
        [](int a, int b) { return double(a * (1 - b)); },
        [](int a, int b) { return double(b * (1 - a)); });
    MisanthropeForm m{[](int x) { return double(x); },
                      [](int a, int b) { return a == 1 && b == 1 ? 1.0 : 0.0; },
                      [](int a, int b) { return a == 1 && b == 1 ? 1.0 : 0.0; }};
    return ModelSpec{name, {}, std::move(k), site_value_gradient(), m};
  }

  if (name == "sym_two_type") {
    reject_unknown(params, name, {"c"});
    double c = require(params, name, "c");
    if (!(c > 0 && c <= 1)) throw Error("sym_two_type needs 0 < c <= 1");
    auto p = [=](int a, int b) {
      if (a == 0 && b == 0) return c;
      if (a == 1 && b == -1) return 2.0;
      if ((a == 0 && b == -1) || (a == 1 && b == 0)) return 1.0;
      return 0.0;
    };
    RateKernel k(OccupancyRange::bounded(-1, 1), p,
                 [=](int a, int b) { return p(b, a); });
    auto s = [=](int a, int b) {
      if (a == -1 || b == -1) return 0.0;
      if (a == 0 && b == 0) return 2.0 / c;
      if (a == 1 && b == 1) return 1.0;
      return 2.0;
    };
    MisanthropeForm m{[=](int x) { return x == 0 ? c / 2 : 1.0; }, s, s};
    return ModelSpec{name, {{"c", c}}, std::move(k), site_value_gradient(), m};
  }

  throw Error("unknown model '" + name + "'");
}

namespace {

std::string pair_text(int a, int b) {
  std::ostringstream os;
  os << '(' << a << ',' << b << ')';
  return os.str();
}

Verdict fail(std::string detail, std::vector<int> witness) {
  return Verdict{false, std::move(detail), std::move(witness)};
}

}  // namespace

Verdict check_attractiveness(const RateKernel& kernel) {
  const int lo = kernel.range().sim_floor;
  const int hi = kernel.range().sim_cap;

  struct Pass {
    const char* label;
    bool use_p;
    bool move_first;
    bool increasing;
  };
  // p up in the first argument and down in the second; q the reverse.
  const Pass passes[] = {
      {"p not non-decreasing in its first argument", true, true, true},
      {"p not non-increasing in its second argument", true, false, false},
      {"q not non-increasing in its first argument", false, true, false},
      {"q not non-decreasing in its second argument", false, false, true},
  };
  for (const auto& ps : passes) {
    for (int a = lo; a <= hi; ++a) {
      for (int b = lo; b <= hi; ++b) {
        int a2 = ps.move_first ? a + 1 : a;
        int b2 = ps.move_first ? b : b + 1;
        if (a2 > hi || b2 > hi) continue;
        double r1 = ps.use_p ? kernel.p(a, b) : kernel.q(a, b);
        double r2 = ps.use_p ? kernel.p(a2, b2) : kernel.q(a2, b2);
        bool bad = ps.increasing ? r2 < r1 : r2 > r1;
        if (bad) {
          std::ostringstream os;
          os << ps.label << ": " << (ps.use_p ? 'p' : 'q') << pair_text(a, b)
             << '=' << r1 << " vs " << (ps.use_p ? 'p' : 'q')
             << pair_text(a2, b2) << '=' << r2;
          return fail(os.str(), {a, b, a2, b2});
        }
      }
    }
  }
  return Verdict{true, "attractive", {}};
}

Verdict check_non_degeneracy(const RateKernel& kernel) {
  const auto& r = kernel.range();
  for (int a = r.sim_floor; a <= r.sim_cap; ++a) {
    for (int b = r.sim_floor; b <= r.sim_cap; ++b) {
      bool p_allowed = (!r.omin || a > *r.omin) && (!r.omax || b < *r.omax);
      bool q_allowed = (!r.omin || b > *r.omin) && (!r.omax || a < *r.omax);
      if (!kernel.p_identically_zero() && (kernel.p(a, b) > 0) != p_allowed)
        return fail("p" + pair_text(a, b) +
                        (p_allowed ? " vanishes inside the state space"
                                   : " is positive at a blocked pair"),
                    {a, b});
      if (!kernel.q_identically_zero() && (kernel.q(a, b) > 0) != q_allowed)
        return fail("q" + pair_text(a, b) +
                        (q_allowed ? " vanishes inside the state space"
                                   : " is positive at a blocked pair"),
                    {a, b});
    }
  }
  return Verdict{true, "non-degenerate", {}};
}

Verdict check_misanthrope(const RateKernel& kernel,
                          const std::function<double(int)>& f,
                          const std::function<double(int, int)>& s_p,
                          const std::function<double(int, int)>& s_q,
                          double tolerance) {
  const auto& r = kernel.range();
  const int lo = r.sim_floor;
  const int hi = r.sim_cap;
  // s is only meaningful on I x I; beyond the true state space it is zero,
  // beyond the truncation it is extended by the supplied formula.
  auto sp = [&](int a, int b) {
    return r.in_state_space(a) && r.in_state_space(b) ? s_p(a, b) : 0.0;
  };
  auto sq = [&](int a, int b) {
    return r.in_state_space(a) && r.in_state_space(b) ? s_q(a, b) : 0.0;
  };
  auto close = [&](double x, double y) {
    return std::abs(x - y) <= tolerance * std::max(1.0, std::max(std::abs(x), std::abs(y)));
  };

  for (int a = lo; a <= hi; ++a) {
    for (int b = lo; b <= hi; ++b) {
      if (!close(sp(a, b), sp(b, a)))
        return fail("s_p not symmetric at " + pair_text(a, b), {a, b});
      if (!close(sq(a, b), sq(b, a)))
        return fail("s_q not symmetric at " + pair_text(a, b), {a, b});
      double p_expected = sp(a, b + 1) * f(a);
      double q_expected = sq(a + 1, b) * f(b);
      if (!close(kernel.p(a, b), p_expected)) {
        std::ostringstream os;
        os << "p" << pair_text(a, b) << '=' << kernel.p(a, b)
           << " but s_p(a,b+1) f(a)=" << p_expected;
        return fail(os.str(), {a, b});
      }
      if (!close(kernel.q(a, b), q_expected)) {
        std::ostringstream os;
        os << "q" << pair_text(a, b) << '=' << kernel.q(a, b)
           << " but s_q(a+1,b) f(b)=" << q_expected;
        return fail(os.str(), {a, b});
      }
    }
  }

  auto rate = [&](int a, int b) { return kernel.p(a, b) + kernel.q(a, b); };
  for (int a = lo; a <= hi; ++a) {
    for (int b = lo; b <= hi; ++b) {
      for (int c = lo; c <= hi; ++c) {
        double forward = rate(a, b) + rate(b, c) + rate(c, a);
        double backward = rate(a, c) + rate(c, b) + rate(b, a);
        if (!close(forward, backward)) {
          std::ostringstream os;
          os << "three-site identity fails at (" << a << ',' << b << ','
             << c << "): " << forward << " vs " << backward;
          return fail(os.str(), {a, b, c});
        }
      }
    }
  }
  return Verdict{true, "misanthrope decomposition holds", {}};
}

Verdict check_gradient(const ModelSpec& model, double tolerance) {
  if (!model.gradient) throw Error("model " + model.name + " has no gradient function");
  if (!model.symmetric()) throw Error("model " + model.name + " is not symmetric");
  const auto& g = *model.gradient;
  const auto& k = model.kernel;
  const int lo = k.range().sim_floor;
  const int hi = k.range().sim_cap;
  const int w = g.width;
  if (w < 1) throw Error("gradient width must be positive");

  // Enumerate blocks (w_0, ..., w_w); the bond is (w_0, w_1), g(tau_0) reads
  // w_0..w_{w-1} and g(tau_1) reads w_1..w_w.
  const int sites = w + 1;
  std::vector<int> block(static_cast<std::size_t>(sites), lo);
  while (true) {
    double lhs = k.p(block[0], block[1]) - k.p(block[1], block[0]);
    double rhs = g.eval(std::span<const int>(block.data(), w)) -
                 g.eval(std::span<const int>(block.data() + 1, w));
    if (std::abs(lhs - rhs) > tolerance * std::max(1.0, std::abs(lhs))) {
      std::ostringstream os;
      os << "gradient identity fails at block";
      for (int v : block) os << ' ' << v;
      os << ": " << lhs << " vs " << rhs;
      return fail(os.str(), block);
    }
    int i = sites - 1;
    while (i >= 0 && block[i] == hi) block[i--] = lo;
    if (i < 0) break;
    ++block[i];
  }
  return Verdict{true, "gradient identity holds with g = " + g.description, {}};
}

}  // namespace secondclass
