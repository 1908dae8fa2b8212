#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "secondclass/dynamics.hpp"
#include "secondclass/estimate.hpp"
#include "secondclass/harness.hpp"
#include "secondclass/hydro.hpp"

using namespace secondclass;
using nlohmann::json;

namespace {

struct ModelArgs {
  std::string name = "tasep";
  std::string file;
  std::vector<std::string> params;  // key=value
  std::optional<int> floor;
  std::optional<int> cap;
  std::string family = "stationary";

  void attach(CLI::App* app) {
    app->add_option("--model", name, "built-in model name");
    app->add_option("--model-file", file, "model JSON {name, parameters, truncation}");
    app->add_option("--param", params, "model parameter key=value (repeatable)");
    app->add_option("--sim-floor", floor, "truncation floor for unbounded-below models");
    app->add_option("--sim-cap", cap, "truncation cap for unbounded-above models");
    app->add_option("--family", family,
                    "stationary | geometric | poisson | bernoulli | discrete_gaussian | flat");
  }

  ExperimentConfig config() const {
    ExperimentConfig c;
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw Error("cannot open " + file);
      std::stringstream ss;
      ss << in.rdbuf();
      json j = json::parse(ss.str());
      c.model = j.at("name").get<std::string>();
      if (j.contains("parameters"))
        for (auto& [k, v] : j["parameters"].items()) c.parameters[k] = v.get<double>();
      if (j.contains("truncation")) {
        if (j["truncation"].contains("sim_floor")) c.truncation.sim_floor = j["truncation"]["sim_floor"].get<int>();
        if (j["truncation"].contains("sim_cap")) c.truncation.sim_cap = j["truncation"]["sim_cap"].get<int>();
      }
    } else {
      c.model = name;
    }
    for (const auto& kv : params) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("parameter '" + kv + "' is not key=value");
      c.parameters[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    if (floor) c.truncation.sim_floor = floor;
    if (cap) c.truncation.sim_cap = cap;
    c.family = family;
    return c;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(12);
  return out;
}

std::string sidecar_path(const std::string& csv) {
  auto dot = csv.rfind('.');
  auto slash = csv.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return csv + ".json";
  return csv.substr(0, dot) + ".json";
}

void print_verdict(const char* what, const Verdict& v) {
  std::cout << std::left << std::setw(18) << what << (v.pass ? "pass" : "FAIL");
  if (!v.detail.empty()) std::cout << "  " << v.detail;
  if (!v.pass && !v.witness.empty()) {
    std::cout << "  witness";
    for (int w : v.witness) std::cout << ' ' << w;
  }
  std::cout << '\n';
}

int model_check(const std::string& path) {
  auto m = load_model_file(path);
  std::cout << "model " << m.name << '\n';
  bool ok = true;
  auto a = check_attractiveness(m.kernel);
  auto n = check_non_degeneracy(m.kernel);
  print_verdict("attractiveness", a);
  print_verdict("non-degeneracy", n);
  ok = a.pass && n.pass;
  if (m.misanthrope) {
    auto v = check_misanthrope(m.kernel, m.misanthrope->f, m.misanthrope->s_p, m.misanthrope->s_q);
    print_verdict("misanthrope", v);
    ok = ok && v.pass;
  }
  if (m.gradient) {
    auto v = check_gradient(m);
    print_verdict("gradient", v);
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}

int measure_table(const ModelArgs& margs, double rho, std::optional<double> lambda,
                  const std::string& out_path, const std::string& json_path) {
  auto cfg = margs.config();
  auto model = resolve_model(cfg);
  auto fam = resolve_family(cfg, model);
  auto top = fam.at(rho);
  auto out = open_out(out_path);
  if (!lambda) {
    out << "y,pmf,cdf\n";
    for (int y = top.lo; y <= top.hi(); ++y) out << y << ',' << top.prob(y) << ',' << top.cdf(y) << '\n';
  } else {
    auto bottom = fam.at(*lambda);
    auto hat = hat_nu(fam, rho, *lambda);
    auto bar = bar_nu(fam, rho, *lambda);
    out << "y,nu_rho,nu_lambda,hat_shifted,bar_diagonal,bar_shifted\n";
    for (int y = top.lo; y <= top.hi(); ++y)
      out << y << ',' << top.prob(y) << ',' << bottom.prob(y) << ',' << hat.weight(y + 1, y) << ','
          << bar.weight(y, y) << ',' << bar.weight(y + 1, y) << '\n';
    auto v = coupling_exists(fam, rho, *lambda);
    std::cout << "coupling " << (v.exists ? "exists" : "does not exist");
    if (v.witness) std::cout << " (witness y=" << *v.witness << ")";
    std::cout << '\n';
  }
  if (!json_path.empty()) {
    // explicit-table form, loadable as a config family
    json tables = json::array();
    std::vector<double> densities{rho};
    if (lambda) densities.push_back(*lambda);
    for (double d : densities) tables.push_back({{"rho", d}, {"pmf", fam.at(d).pmf}});
    auto jo = open_out(json_path);
    jo << json{{"name", "explicit"}, {"tables", tables}}.dump(2) << '\n';
  }
  return 0;
}

int simulate_scp(const ModelArgs& margs, double rho, double lambda, double t,
                 std::size_t replicas, std::optional<int> window, std::uint64_t seed,
                 const std::string& out_path) {
  auto cfg = margs.config();
  auto model = resolve_model(cfg);
  auto fam = resolve_family(cfg, model);
  Dynamics dyn(model.kernel);
  StepInitialCondition ic(fam, rho, lambda);
  auto plan = plan_window(model.kernel, ic.left(), ic.right(), t);
  int L = window.value_or(plan.half_width);
  std::vector<std::optional<int>> qs(replicas);
  run_replicas(replicas, seed, experiment_key("simulate/" + model.name), [&](std::size_t i, Rng& rng) {
    auto s = ic.sample_coupled(L, rng);
    if (dyn.evolve(s, t, rng).ok()) qs[i] = track_Q(s);
  });
  std::map<int, std::size_t> hist;
  std::size_t aborted = 0;
  for (const auto& q : qs) {
    if (q)
      ++hist[*q];
    else
      ++aborted;
  }
  std::size_t kept = replicas - aborted;
  auto out = open_out(out_path);
  out << "n,count,phat,wilson_lo,wilson_hi\n";
  for (const auto& [n, c] : hist) {
    auto e = proportion_estimate(c, kept);
    out << n << ',' << c << ',' << e.value << ',' << e.lo << ',' << e.hi << '\n';
  }
  json meta{{"model", model.name},
            {"parameters", model.parameters},
            {"family", fam.id()},
            {"rho", rho},
            {"lambda", lambda},
            {"t", t},
            {"replicas", replicas},
            {"seed", seed},
            {"window", L},
            {"planned_window", plan.half_width},
            {"rate_bound", plan.rate_bound},
            {"edge_tail_bound", plan.tail_bound},
            {"truncation_aborts", aborted},
            {"abort_fraction", double(aborted) / double(replicas)}};
  auto side = open_out(sidecar_path(out_path));
  side << meta.dump(2) << '\n';
  std::cout << "kept " << kept << " of " << replicas << " replicas, window " << L << '\n';
  return 0;
}

int hydro_riemann(const ModelArgs& margs, double rho, double lambda, double t,
                  const std::string& out_path) {
  auto cfg = margs.config();
  auto model = resolve_model(cfg);
  auto fam = resolve_family(cfg, model);
  auto flux = flux_table(model, fam, std::min(rho, lambda), std::max(rho, lambda));
  auto p = riemann_solve(flux, rho, lambda);
  auto out = open_out(out_path);
  out << "xi,x,u,atom,atom_mass\n";
  for (std::size_t i = 0; i < p.xi.size(); ++i) {
    const Shock* s = p.shock_at(p.xi[i]);
    double mass = s ? s->gap() / (rho - lambda) : 0.0;
    out << p.xi[i] << ',' << p.xi[i] * t << ',' << p.u[i] << ',' << (s ? 1 : 0) << ',' << mass << '\n';
  }
  for (const auto& s : p.shocks)
    std::cout << "shock at xi=" << s.xi << " from " << s.u_left << " to " << s.u_right << '\n';
  return 0;
}

int hydro_parabolic(const ModelArgs& margs, double rho, double lambda, double t, double dx,
                    bool doubled, const std::string& out_path) {
  auto cfg = margs.config();
  auto model = resolve_model(cfg);
  auto fam = resolve_family(cfg, model);
  if (!model.gradient) throw Error("model " + model.name + " has no gradient function");
  auto d = diffusivity_table(model, fam, std::min(rho, lambda), std::max(rho, lambda));
  double ts = doubled ? 2 * t : t;
  ParabolicOptions opt;
  opt.dx = dx;
  auto p = parabolic_solve(d, rho, lambda, ts, opt);
  auto out = open_out(out_path);
  out << "y,x,u,cdf\n";
  for (std::size_t i = 0; i < p.xi.size(); ++i) {
    double x = p.xi[i] * std::sqrt(ts);
    out << p.xi[i] << ',' << x << ',' << p.u[i] << ',' << (rho - p.u[i]) / (rho - lambda) << '\n';
  }
  return 0;
}

int experiment(const std::string& name, const std::string& config_path, const std::string& csv,
               const std::string& json_out) {
  auto c = load_config_file(config_path);
  if (c.experiment.empty()) c.experiment = name;
  if (c.experiment != name)
    throw Error("config is for experiment '" + c.experiment + "', not '" + name + "'");
  if (!csv.empty()) c.csv_path = csv;
  if (!json_out.empty()) c.json_path = json_out;
  auto r = run_experiment(c);
  std::cout << r.experiment << " [" << r.model << "]: " << (r.pass ? "PASS" : "FAIL") << '\n';
  std::cout << "  max |z| = " << r.max_abs_z << ", sup distance = " << r.sup_distance
            << ", abort fraction = " << r.abort_fraction << ", replicas = " << r.replicas << '\n';
  for (const auto& [k, v] : r.metrics)
    if (k.find("exact_stationary") == std::string::npos) std::cout << "  " << k << " = " << v << '\n';
  for (const auto& f : r.failures) std::cout << "  failure: " << f << '\n';
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"second class particle simulator and hydrodynamic predictions"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware default)");

  auto* model = app.add_subcommand("model", "model definitions");
  model->require_subcommand(1);
  auto* check = model->add_subcommand("check", "print structural verdicts for a model file");
  std::string model_file;
  check->add_option("file", model_file)->required();
  auto* list = model->add_subcommand("list", "list built-in models");

  ModelArgs margs;
  double rho = 1, lambda = 0, t = 1;
  std::optional<double> opt_lambda;
  std::string out;

  auto* measure = app.add_subcommand("measure", "marginal families");
  measure->require_subcommand(1);
  auto* table = measure->add_subcommand("table", "weight tables of nu, hat nu and bar nu");
  margs.attach(table);
  std::string table_json;
  table->add_option("--rho", rho)->required();
  table->add_option("--lambda", opt_lambda);
  table->add_option("--out", out)->required();
  table->add_option("--json", table_json, "also write the marginals as an explicit family");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs");
  simulate->require_subcommand(1);
  auto* scp = simulate->add_subcommand("scp", "histogram of Q(t) from coupled step data");
  margs.attach(scp);
  std::size_t replicas = 10000;
  std::optional<int> window;
  std::uint64_t seed = 1;
  scp->add_option("--rho", rho)->required();
  scp->add_option("--lambda", lambda)->required();
  scp->add_option("--t", t)->required();
  scp->add_option("--replicas", replicas);
  scp->add_option("--window", window, "half width override");
  scp->add_option("--seed", seed);
  scp->add_option("--out", out)->required();

  auto* hydro = app.add_subcommand("hydro", "macroscopic profiles");
  hydro->require_subcommand(1);
  auto* riemann = hydro->add_subcommand("riemann", "entropy solution of the Riemann problem");
  margs.attach(riemann);
  riemann->add_option("--rho", rho)->required();
  riemann->add_option("--lambda", lambda)->required();
  riemann->add_option("--t", t);
  riemann->add_option("--out", out)->required();
  auto* parabolic = hydro->add_subcommand("parabolic", "self-similar solution of u_t = (1/2)(d(u))_xx");
  margs.attach(parabolic);
  double dx = 0.01;
  bool doubled = false;
  parabolic->add_option("--rho", rho)->required();
  parabolic->add_option("--lambda", lambda)->required();
  parabolic->add_option("--t", t);
  parabolic->add_option("--dx", dx);
  parabolic->add_flag("--lattice-time", doubled,
                      "evaluate at time 2t, matching unit-rate symmetric lattice dynamics");
  parabolic->add_option("--out", out)->required();

  auto* exp = app.add_subcommand("experiment", "run a configured cross-check");
  std::string exp_name, config, csv, json_out;
  exp->add_option("name", exp_name)->required()->check(
      CLI::IsMember({"identity", "limit_asym", "limit_sym", "background", "collision", "measure_audit"}));
  exp->add_option("--config", config)->required();
  exp->add_option("--csv", csv, "report rows (overrides the config)");
  exp->add_option("--json", json_out, "report summary (overrides the config)");

  CLI11_PARSE(app, argc, argv);
  set_worker_count(threads);

  try {
    if (*check) return model_check(model_file);
    if (*list) {
      for (const auto& n : model_names()) std::cout << n << '\n';
      return 0;
    }
    if (*table) return measure_table(margs, rho, opt_lambda, out, table_json);
    if (*scp) return simulate_scp(margs, rho, lambda, t, replicas, window, seed, out);
    if (*riemann) return hydro_riemann(margs, rho, lambda, t, out);
    if (*parabolic) return hydro_parabolic(margs, rho, lambda, t, dx, doubled, out);
    if (*exp) return experiment(exp_name, config, csv, json_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
