#include "secondclass/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace secondclass {

double FluxTable::at(double u) const {
  const std::size_t n = grid.size();
  if (n == 0) throw Error("empty flux table");
  if (u <= grid.front()) return values.front();
  if (u >= grid.back()) return values.back();
  double h = (grid.back() - grid.front()) / static_cast<double>(n - 1);
  auto i = static_cast<std::size_t>((u - grid.front()) / h);
  if (i >= n - 1) i = n - 2;
  double w = (u - grid[i]) / (grid[i + 1] - grid[i]);
  return values[i] + w * (values[i + 1] - values[i]);
}

double FluxTable::max_slope() const {
  double m = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    m = std::max(m, std::abs((values[i] - values[i - 1]) / (grid[i] - grid[i - 1])));
  return m;
}

FluxTable tabulate(const std::function<double(double)>& fn, double lo, double hi,
                   std::size_t points, std::string provenance) {
  if (!(hi > lo)) throw Error("table needs lo < hi");
  if (points < 2) throw Error("table needs at least two points");
  FluxTable t;
  t.provenance = std::move(provenance);
  t.grid.resize(points);
  t.values.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    double u = i + 1 == points
                   ? hi
                   : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    t.grid[i] = u;
    t.values[i] = fn(u);
    if (!std::isfinite(t.values[i])) throw Error("table value not finite");
  }
  return t;
}

double flux_G(const ModelSpec& model, const MarginalFamily& family, double rho) {
  auto nu = family.at(rho);
  const auto& k = model.kernel;
  double g = 0;
  for (int a = nu.lo; a <= nu.hi(); ++a) {
    double pa = nu.prob(a);
    if (pa == 0) continue;
    for (int b = nu.lo; b <= nu.hi(); ++b) {
      double pb = nu.prob(b);
      if (pb == 0) continue;
      g += (k.p(a, b) - k.q(a, b)) * pa * pb;
    }
  }
  return g;
}

double diffusivity_d(const ModelSpec& model, const MarginalFamily& family, double rho) {
  if (!model.gradient) throw Error("model " + model.name + " has no gradient function");
  auto nu = family.at(rho);
  const int w = model.gradient->width;
  const double states = static_cast<double>(nu.pmf.size());
  if (std::pow(states, w) > 5e6) throw Error("gradient function too wide to enumerate");
  std::vector<int> block(static_cast<std::size_t>(w), nu.lo);
  double d = 0;
  while (true) {
    double weight = 1;
    for (int v : block) weight *= nu.prob(v);
    if (weight != 0) d += weight * model.gradient->eval(block);
    int i = w - 1;
    while (i >= 0 && block[static_cast<std::size_t>(i)] == nu.hi())
      block[static_cast<std::size_t>(i--)] = nu.lo;
    if (i < 0) break;
    ++block[static_cast<std::size_t>(i)];
  }
  return d;
}

FluxTable flux_table(const ModelSpec& model, const MarginalFamily& family, double lo,
                     double hi, std::size_t points) {
  auto t = tabulate([&](double r) { return flux_G(model, family, r); }, lo, hi, points,
                    model.name + "/" + family.id());
  t.formal = family.id() != model.name;
  return t;
}

FluxTable diffusivity_table(const ModelSpec& model, const MarginalFamily& family,
                            double lo, double hi, std::size_t points) {
  auto t = tabulate([&](double r) { return diffusivity_d(model, family, r); }, lo, hi,
                    points, model.name + "/" + family.id());
  t.formal = family.id() != model.name;
  return t;
}

double SimilarityProfile::value(double q) const {
  if (xi.empty() || q < xi.front()) return rho;
  if (q > xi.back()) return lambda;
  auto it = std::lower_bound(xi.begin(), xi.end(), q);
  auto k = static_cast<std::size_t>(it - xi.begin());
  if (xi[k] == q || k == 0) return u[k];
  double w = (q - xi[k - 1]) / (xi[k] - xi[k - 1]);
  return u[k - 1] + w * (u[k] - u[k - 1]);
}

double SimilarityProfile::similarity_variable(double x, double t) const {
  if (!(t > 0)) throw Error("limit law needs t > 0");
  return kind == ProfileKind::hyperbolic ? x / t : x / std::sqrt(t);
}

const Shock* SimilarityProfile::shock_at(double q, double tolerance) const {
  for (const auto& s : shocks)
    if (std::abs(s.xi - q) <= tolerance) return &s;
  return nullptr;
}

Envelope concave_envelope(const FluxTable& flux, double lambda, double rho) {
  if (!(rho > lambda)) throw Error("envelope needs rho > lambda");
  const double tol = 1e-9 * (flux.hi() - flux.lo());
  if (lambda < flux.lo() - tol || rho > flux.hi() + tol)
    throw Error("densities outside the flux table");
  std::vector<double> us{lambda};
  for (double g : flux.grid)
    if (g > lambda + tol && g < rho - tol) us.push_back(g);
  us.push_back(rho);
  if (us.size() < 3) throw Error("flux grid too coarse on [lambda, rho]");

  Envelope env;
  for (double x : us) {
    double y = flux.at(x);
    while (env.u.size() >= 2) {
      std::size_t m = env.u.size();
      double ox = env.u[m - 2], oy = env.g[m - 2];
      double ax = env.u[m - 1], ay = env.g[m - 1];
      double cross = (ax - ox) * (y - oy) - (ay - oy) * (x - ox);
      double scale = std::abs((ax - ox) * (y - oy)) + std::abs((ay - oy) * (x - ox));
      // drop the middle point when it is on or below the chord
      if (cross >= -64 * std::numeric_limits<double>::epsilon() * scale) {
        env.u.pop_back();
        env.g.pop_back();
      } else {
        break;
      }
    }
    env.u.push_back(x);
    env.g.push_back(y);
  }
  return env;
}

SimilarityProfile riemann_solve(const FluxTable& flux, double rho, double lambda) {
  if (!(rho > lambda)) throw Error("riemann_solve needs rho > lambda");
  auto env = concave_envelope(flux, lambda, rho);
  // map hull vertices back to the grid to spot segments that skip nodes
  const double h = (flux.hi() - flux.lo()) / static_cast<double>(flux.grid.size() - 1);
  auto node_pos = [&](double u) { return (u - flux.lo()) / h; };

  SimilarityProfile prof;
  prof.kind = ProfileKind::hyperbolic;
  prof.rho = rho;
  prof.lambda = lambda;
  const std::size_t m = env.u.size() - 1;  // segments
  for (std::size_t j = m; j >= 1; --j) {
    double ul = env.u[j - 1], ur = env.u[j];
    double slope = (env.g[j] - env.g[j - 1]) / (ur - ul);
    // a segment spanning more than one grid cell jumps over a node
    bool shock = node_pos(ur) - node_pos(ul) > 1.0 + 1e-6;
    if (shock) {
      prof.xi.push_back(slope);
      prof.u.push_back(ur);
      prof.xi.push_back(slope);
      prof.u.push_back(ul);
      prof.shocks.push_back(Shock{slope, ur, ul});
    } else {
      double v = j == m ? ur : (j == 1 ? ul : 0.5 * (ul + ur));
      prof.xi.push_back(slope);
      prof.u.push_back(v);
    }
  }
  return prof;
}

std::variant<double, Atom> scp_limit_cdf(const SimilarityProfile& p, double x, double t) {
  if (!(p.rho > p.lambda)) throw Error("limit law needs rho > lambda");
  double q = p.similarity_variable(x, t);
  const double span = p.rho - p.lambda;
  if (const Shock* s = p.shock_at(q)) {
    return Atom{s->xi, s->gap() / span, (p.rho - s->u_left) / span,
                (p.rho - s->u_right) / span};
  }
  double v = std::clamp(p.value(q), p.lambda, p.rho);
  return (p.rho - v) / span;
}

double scp_limit_cdf_right(const SimilarityProfile& p, double x, double t) {
  auto r = scp_limit_cdf(p, x, t);
  if (auto* a = std::get_if<Atom>(&r)) return a->cdf_above;
  return std::get<double>(r);
}

namespace {

std::vector<double> explicit_diffusion(const FluxTable& d, double rho, double lambda,
                                       double t, double h, int half_nodes,
                                       double max_slope) {
  // nodes x_k = k h, k = -half_nodes..half_nodes; the step sits on node 0
  const auto n = static_cast<std::size_t>(2 * half_nodes + 1);
  std::vector<double> u(n), D(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    int k = static_cast<int>(i) - half_nodes;
    u[i] = k < 0 ? rho : (k > 0 ? lambda : 0.5 * (rho + lambda));
  }
  double dt_max = h * h / (2 * max_slope);
  auto steps = static_cast<std::size_t>(std::ceil(t / dt_max));
  double dt = t / static_cast<double>(steps);
  double c = dt / (2 * h * h);
  if (c * max_slope > 0.5 + 1e-12) throw Error("parabolic step violates the stability bound");
  const double d_left = d.at(rho), d_right = d.at(lambda);
  for (std::size_t s = 0; s < steps; ++s) {
    D[0] = d_left;
    D[n + 1] = d_right;
    for (std::size_t i = 0; i < n; ++i) D[i + 1] = d.at(u[i]);
    for (std::size_t i = 0; i < n; ++i) u[i] += c * (D[i + 2] - 2 * D[i + 1] + D[i]);
  }
  return u;
}

}  // namespace

SimilarityProfile parabolic_solve(const FluxTable& d, double rho, double lambda, double t,
                                  ParabolicOptions opt) {
  if (rho < lambda) throw Error("parabolic_solve needs rho >= lambda");
  if (!(t > 0)) throw Error("parabolic_solve needs t > 0");
  SimilarityProfile prof;
  prof.kind = ProfileKind::parabolic;
  prof.rho = rho;
  prof.lambda = lambda;
  if (rho == lambda) {
    prof.xi = {-opt.half_width, opt.half_width};
    prof.u = {rho, rho};
    return prof;
  }
  double max_slope = 0;
  for (std::size_t i = 1; i < d.grid.size(); ++i) {
    if (d.grid[i] < lambda - 1e-12 || d.grid[i - 1] > rho + 1e-12) continue;
    double s = (d.values[i] - d.values[i - 1]) / (d.grid[i] - d.grid[i - 1]);
    if (s < -1e-12) throw Error("diffusivity is not non-decreasing on [lambda, rho]");
    max_slope = std::max(max_slope, s);
  }
  if (!(max_slope > 0)) throw Error("diffusivity is flat on [lambda, rho]");

  const double root_t = std::sqrt(t);
  const int half_nodes = static_cast<int>(std::ceil(opt.half_width / opt.dx));
  const double h = opt.dx * root_t;
  auto coarse = explicit_diffusion(d, rho, lambda, t, h, half_nodes, max_slope);
  std::vector<double> result = coarse;
  if (opt.richardson) {
    auto fine = explicit_diffusion(d, rho, lambda, t, h / 2, 2 * half_nodes, max_slope);
    for (std::size_t i = 0; i < coarse.size(); ++i)
      result[i] = (4 * fine[2 * i] - coarse[i]) / 3;
  }
  prof.xi.resize(result.size());
  prof.u.resize(result.size());
  double running = rho;
  for (std::size_t i = 0; i < result.size(); ++i) {
    prof.xi[i] = (static_cast<double>(i) - half_nodes) * opt.dx;
    running = std::min(running, std::clamp(result[i], lambda, rho));
    prof.u[i] = running;
  }
  return prof;
}

namespace {

double std_normal_pdf(double y) { return std::exp(-0.5 * y * y) / std::sqrt(2 * std::numbers::pi); }
double std_normal_cdf(double y) { return 0.5 * std::erfc(-y / std::numbers::sqrt2); }

}  // namespace

ClosedFormValue closed_form_sym_zr(double rho, double lambda, double x, double t) {
  if (!(rho >= lambda && lambda >= 0)) throw Error("closed form needs rho >= lambda >= 0");
  if (!(t > 0)) throw Error("closed form needs t > 0");
  const double a = 1 / (1 + rho);
  const double b = 1 / (1 + lambda) - a;
  auto hfun = [&](double y) { return a * y + b * (std_normal_pdf(y) + y * std_normal_cdf(y)); };
  auto hprime = [&](double y) { return a + b * std_normal_cdf(y); };
  if (rho == lambda) {
    // the limit law degenerates to a unit step at 0
    return ClosedFormValue{x >= 0 ? 1.0 : 0.0, 0.0};
  }
  double target = x / std::sqrt(t);
  double lo = -1, hi = 1;
  while (hfun(lo) > target) lo *= 2;
  while (hfun(hi) < target) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (hfun(mid) < target ? lo : hi) = mid;
  }
  double w = 0.5 * (lo + hi);
  double hp = hprime(w);
  ClosedFormValue v;
  v.cdf = (rho + 1) / (rho - lambda) - 1 / ((rho - lambda) * hp);
  v.density = std_normal_pdf(w) / (std::sqrt(t) * (1 + rho) * (1 + lambda) * hp * hp * hp);
  v.cdf = std::clamp(v.cdf, 0.0, 1.0);
  return v;
}

namespace {

/// Range min/max over the table nodes, used for the exact Godunov flux of a
/// piecewise linear G.
class RangeExtrema {
 public:
  explicit RangeExtrema(const std::vector<double>& v) {
    std::size_t n = v.size();
    lg_.assign(n + 1, 0);
    for (std::size_t i = 2; i <= n; ++i) lg_[i] = lg_[i / 2] + 1;
    std::size_t levels = lg_[n] + 1;
    mn_.assign(levels, v);
    mx_.assign(levels, v);
    for (std::size_t k = 1; k < levels; ++k)
      for (std::size_t i = 0; i + (std::size_t{1} << k) <= n; ++i) {
        std::size_t j = i + (std::size_t{1} << (k - 1));
        mn_[k][i] = std::min(mn_[k - 1][i], mn_[k - 1][j]);
        mx_[k][i] = std::max(mx_[k - 1][i], mx_[k - 1][j]);
      }
  }
  // inclusive node range [i, j], i <= j
  double min(std::size_t i, std::size_t j) const {
    std::size_t k = lg_[j - i + 1];
    return std::min(mn_[k][i], mn_[k][j + 1 - (std::size_t{1} << k)]);
  }
  double max(std::size_t i, std::size_t j) const {
    std::size_t k = lg_[j - i + 1];
    return std::max(mx_[k][i], mx_[k][j + 1 - (std::size_t{1} << k)]);
  }

 private:
  std::vector<std::size_t> lg_;
  std::vector<std::vector<double>> mn_, mx_;
};

}  // namespace

GodunovResult godunov_evolve(const FluxTable& flux, std::vector<double> x,
                             std::vector<double> u, double t, double cfl) {
  if (x.size() != u.size() || x.size() < 2) throw Error("godunov grid mismatch");
  if (!(cfl > 0 && cfl <= 1)) throw Error("CFL number must lie in (0, 1]");
  const double dx = x[1] - x[0];
  const double speed = flux.max_slope();
  GodunovResult res;
  res.dx = dx;
  RangeExtrema ext(flux.values);
  const double h = (flux.hi() - flux.lo()) / static_cast<double>(flux.grid.size() - 1);
  const std::size_t last = flux.grid.size() - 1;
  // nodes strictly inside (a, b)
  auto inner = [&](double a, double b, std::size_t& i, std::size_t& j) {
    double fa = (a - flux.lo()) / h, fb = (b - flux.lo()) / h;
    double ia = std::floor(fa) + 1, jb = std::ceil(fb) - 1;
    if (ia < 0) ia = 0;
    if (jb > static_cast<double>(last)) jb = static_cast<double>(last);
    if (ia > jb) return false;
    i = static_cast<std::size_t>(ia);
    j = static_cast<std::size_t>(jb);
    return true;
  };
  auto numerical_flux = [&](double ul, double ur) {
    if (ul == ur) return flux.at(ul);
    std::size_t i, j;
    if (ul > ur) {
      double m = std::max(flux.at(ul), flux.at(ur));
      if (inner(ur, ul, i, j)) m = std::max(m, ext.max(i, j));
      return m;
    }
    double m = std::min(flux.at(ul), flux.at(ur));
    if (inner(ul, ur, i, j)) m = std::min(m, ext.min(i, j));
    return m;
  };

  if (t <= 0 || speed == 0) {
    res.x = std::move(x);
    res.u = std::move(u);
    return res;
  }
  const double dt_max = cfl * dx / speed;
  res.steps = static_cast<std::size_t>(std::ceil(t / dt_max));
  res.dt = t / static_cast<double>(res.steps);
  const std::size_t n = u.size();
  std::vector<double> F(n + 1);
  for (std::size_t s = 0; s < res.steps; ++s) {
    F[0] = flux.at(u[0]);
    F[n] = flux.at(u[n - 1]);
    for (std::size_t i = 1; i < n; ++i) F[i] = numerical_flux(u[i - 1], u[i]);
    double before = 0, after = 0;
    for (double v : u) before += v;
    for (std::size_t i = 0; i < n; ++i) u[i] -= res.dt / dx * (F[i + 1] - F[i]);
    for (double v : u) after += v;
    double defect = std::abs((after - before) * dx - res.dt * (F[0] - F[n]));
    res.max_mass_defect = std::max(res.max_mass_defect, defect);
  }
  res.x = std::move(x);
  res.u = std::move(u);
  return res;
}

GodunovResult godunov_oracle(const FluxTable& flux, double rho, double lambda, double t,
                             double dx, double cfl) {
  if (!(dx > 0)) throw Error("godunov needs dx > 0");
  double reach = flux.max_slope() * t + 0.25;
  auto half_cells = static_cast<std::size_t>(std::ceil(reach / dx));
  std::vector<double> x(2 * half_cells), u(2 * half_cells);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (static_cast<double>(i) - static_cast<double>(half_cells) + 0.5) * dx;
    u[i] = x[i] < 0 ? rho : lambda;
  }
  return godunov_evolve(flux, std::move(x), std::move(u), t, cfl);
}

double l1_distance(const SimilarityProfile& profile, const GodunovResult& oracle, double t) {
  double s = 0;
  for (std::size_t i = 0; i < oracle.x.size(); ++i)
    s += std::abs(oracle.u[i] - profile.value(oracle.x[i] / t));
  return s * oracle.dx;
}

}  // namespace secondclass
