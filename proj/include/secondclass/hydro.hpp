#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "secondclass/measures.hpp"
#include "secondclass/model.hpp"

namespace secondclass {

/// A scalar function of the density sampled on a uniform grid; linear
/// interpolation in between. Houses both the flux G and the diffusivity d.
struct FluxTable {
  std::vector<double> grid;
  std::vector<double> values;
  std::string provenance;
  bool formal = false;  // built from a family not known to be stationary

  double lo() const { return grid.front(); }
  double hi() const { return grid.back(); }
  double at(double u) const;
  /// Largest |slope| between neighbouring nodes.
  double max_slope() const;
};

inline constexpr std::size_t kFluxGridPoints = 2001;

FluxTable tabulate(const std::function<double(double)>& fn, double lo, double hi,
                   std::size_t points = kFluxGridPoints, std::string provenance = {});

/// Mean signed jump rate across a bond under the product measure nu^rho.
double flux_G(const ModelSpec& model, const MarginalFamily& family, double rho);
/// Expectation of the gradient function under the product measure nu^rho.
double diffusivity_d(const ModelSpec& model, const MarginalFamily& family, double rho);

FluxTable flux_table(const ModelSpec& model, const MarginalFamily& family, double lo,
                     double hi, std::size_t points = kFluxGridPoints);
FluxTable diffusivity_table(const ModelSpec& model, const MarginalFamily& family,
                            double lo, double hi, std::size_t points = kFluxGridPoints);

enum class ProfileKind { hyperbolic, parabolic };

struct Shock {
  double xi = 0;
  double u_left = 0;
  double u_right = 0;
  double gap() const { return u_left - u_right; }
};

/// Non-increasing self-similar profile v(xi), xi = x/t (hyperbolic) or
/// xi = x/sqrt(t) (parabolic). Knots are linearly interpolated; a shock
/// appears as two knots at the same xi.
struct SimilarityProfile {
  ProfileKind kind = ProfileKind::hyperbolic;
  double rho = 0;
  double lambda = 0;
  std::vector<double> xi;
  std::vector<double> u;
  std::vector<Shock> shocks;

  /// Left-continuous evaluation; rho left of the first knot, lambda right of
  /// the last.
  double value(double xi_query) const;
  double similarity_variable(double x, double t) const;
  const Shock* shock_at(double xi_query, double tolerance = 1e-12) const;
};

/// Upper concave envelope of the table restricted to [lambda, rho].
struct Envelope {
  std::vector<double> u;  // hull vertices, increasing
  std::vector<double> g;
};
Envelope concave_envelope(const FluxTable& flux, double lambda, double rho);

/// Entropy solution of u_t + G(u)_x = 0 from the step (rho left, lambda right).
SimilarityProfile riemann_solve(const FluxTable& flux, double rho, double lambda);

/// Point mass of the limit law at a shock.
struct Atom {
  double xi = 0;
  double mass = 0;
  double cdf_below = 0;  // limit CDF just left of the atom
  double cdf_above = 0;  // and just right of it
};

/// (rho - u(x,t)) / (rho - lambda); an Atom when x sits on a shock.
std::variant<double, Atom> scp_limit_cdf(const SimilarityProfile& profile, double x,
                                         double t);
/// Same, taking the right limit at shocks (the CDF value including the atom).
double scp_limit_cdf_right(const SimilarityProfile& profile, double x, double t);

struct ParabolicOptions {
  double dx = 0.01;          // spatial step on the sqrt(t)-scaled domain
  bool richardson = true;    // combine dx and dx/2 runs
  double half_width = 8.0;   // domain [-8 sqrt(t), 8 sqrt(t)]
};

/// Solves u_t = (1/2) (d(u))_xx from the step by an explicit conservative
/// scheme and returns U(y) = u(y sqrt(t), t).
SimilarityProfile parabolic_solve(const FluxTable& d_table, double rho, double lambda,
                                  double t, ParabolicOptions options = {});

struct ClosedFormValue {
  double cdf = 0;
  double density = 0;
};
/// Limit law of the symmetric constant-rate zero-range second class particle,
/// for the equation u_t = (1/2) ((1+u)^-2 u_x)_x.
ClosedFormValue closed_form_sym_zr(double rho, double lambda, double x, double t);

struct GodunovResult {
  std::vector<double> x;  // cell centres
  std::vector<double> u;
  double dx = 0;
  double dt = 0;
  std::size_t steps = 0;
  double max_mass_defect = 0;  // worst per-step conservation residual
};

/// First-order Godunov evolution of the step datum to time t.
GodunovResult godunov_oracle(const FluxTable& flux, double rho, double lambda, double t,
                             double dx, double cfl = 0.9);
GodunovResult godunov_evolve(const FluxTable& flux, std::vector<double> x,
                             std::vector<double> u0, double t, double cfl = 0.9);

/// Riemann-profile L1 distance sum |u_i - v(x_i/t)| dx over the oracle grid.
double l1_distance(const SimilarityProfile& profile, const GodunovResult& oracle, double t);

}  // namespace secondclass
