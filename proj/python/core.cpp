#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <variant>

#include "secondclass/dynamics.hpp"
#include "secondclass/estimate.hpp"
#include "secondclass/harness.hpp"
#include "secondclass/hydro.hpp"
#include "secondclass/measures.hpp"
#include "secondclass/model.hpp"

namespace py = pybind11;
using namespace secondclass;

namespace {

ModelSpec make_model(const std::string& name, const std::map<std::string, double>& parameters,
                     std::optional<int> sim_floor, std::optional<int> sim_cap) {
  return build_model(name, parameters, Truncation{sim_floor, sim_cap});
}

MarginalFamily family_for(const ModelSpec& model, const std::string& family) {
  ExperimentConfig c;
  c.family = family;
  return resolve_family(c, model);
}

py::dict site_dict(const SiteDistribution& d) {
  py::dict out;
  out["lo"] = d.lo;
  out["pmf"] = d.pmf;
  out["mean"] = d.mean;
  out["variance"] = d.variance;
  out["theta"] = d.theta;
  out["tail_mass"] = d.tail_mass;
  return out;
}

py::dict pair_dict(const PairMarginal& p) {
  py::dict out;
  out["kind"] = std::string(to_string(p.kind));
  out["lo"] = p.lo;
  out["diag"] = p.diag;
  out["shifted"] = p.shifted;
  return out;
}

// Histogram of Q(t) over coupled runs from the step initial condition.
py::dict simulate_scp(const ModelSpec& model, double rho, double lambda, double t,
                      std::size_t replicas, std::uint64_t seed, std::optional<int> window,
                      const std::string& family) {
  auto fam = family_for(model, family);
  Dynamics dyn(model.kernel);
  StepInitialCondition ic(fam, rho, lambda);
  auto plan = plan_window(model.kernel, ic.left(), ic.right(), t);
  int L = window.value_or(plan.half_width);
  std::vector<std::optional<int>> qs(replicas);
  {
    py::gil_scoped_release release;
    run_replicas(replicas, seed, experiment_key("simulate/" + model.name),
                 [&](std::size_t i, Rng& rng) {
                   auto s = ic.sample_coupled(L, rng);
                   if (dyn.evolve(s, t, rng).ok()) qs[i] = track_Q(s);
                 });
  }
  std::map<int, std::size_t> hist;
  std::size_t aborted = 0;
  for (const auto& q : qs) {
    if (q)
      ++hist[*q];
    else
      ++aborted;
  }
  py::dict out;
  out["histogram"] = hist;
  out["aborted"] = aborted;
  out["window"] = L;
  out["rate_bound"] = plan.rate_bound;
  out["edge_tail_bound"] = plan.tail_bound;
  return out;
}

py::dict profile_dict(const SimilarityProfile& p) {
  py::dict out;
  out["xi"] = p.xi;
  out["u"] = p.u;
  py::list shocks;
  for (const auto& s : p.shocks) {
    py::dict d;
    d["xi"] = s.xi;
    d["u_left"] = s.u_left;
    d["u_right"] = s.u_right;
    shocks.append(d);
  }
  out["shocks"] = shocks;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Second class particles in attractive one-dimensional particle systems";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("model_names", &model_names);

  py::class_<ModelSpec>(m, "Model")
      .def(py::init(&make_model), py::arg("name"),
           py::arg("parameters") = std::map<std::string, double>{},
           py::arg("sim_floor") = std::nullopt, py::arg("sim_cap") = std::nullopt)
      .def_readonly("name", &ModelSpec::name)
      .def_readonly("parameters", &ModelSpec::parameters)
      .def_property_readonly("symmetric", &ModelSpec::symmetric)
      .def_property_readonly("support",
                             [](const ModelSpec& s) {
                               const auto& r = s.kernel.range();
                               return py::make_tuple(r.omin, r.omax, r.sim_floor, r.sim_cap);
                             })
      .def("p", [](const ModelSpec& s, int a, int b) { return s.kernel.p(a, b); })
      .def("q", [](const ModelSpec& s, int a, int b) { return s.kernel.q(a, b); })
      .def("check",
           [](const ModelSpec& s) {
             py::dict out;
             auto put = [&](const char* key, const Verdict& v) {
               out[key] = py::make_tuple(v.pass, v.detail, v.witness);
             };
             put("attractiveness", check_attractiveness(s.kernel));
             put("non_degeneracy", check_non_degeneracy(s.kernel));
             if (s.misanthrope)
               put("misanthrope", check_misanthrope(s.kernel, s.misanthrope->f,
                                                    s.misanthrope->s_p, s.misanthrope->s_q));
             if (s.gradient) put("gradient", check_gradient(s));
             return out;
           })
      .def("__repr__", [](const ModelSpec& s) { return "<Model " + s.name + ">"; });

  m.def("marginal",
        [](const ModelSpec& model, double rho, const std::string& family) {
          return site_dict(family_for(model, family).at(rho));
        },
        py::arg("model"), py::arg("rho"), py::arg("family") = "stationary");
  m.def("hat_nu",
        [](const ModelSpec& model, double rho, double lambda, const std::string& family) {
          return pair_dict(hat_nu(family_for(model, family), rho, lambda));
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("family") = "stationary");
  m.def("bar_nu",
        [](const ModelSpec& model, double rho, double lambda, const std::string& family) {
          return pair_dict(bar_nu(family_for(model, family), rho, lambda));
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("family") = "stationary");
  m.def("coupling_exists",
        [](const ModelSpec& model, double rho, double lambda, const std::string& family) {
          auto v = coupling_exists(family_for(model, family), rho, lambda);
          return py::make_tuple(v.exists, v.witness);
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("family") = "stationary");
  m.def("violation_witness",
        [](const std::string& kind, double rho, double lambda) {
          if (kind != "geometric" && kind != "poisson") throw Error("kind is geometric or poisson");
          return find_violation_everywhere(
              kind == "geometric" ? ClassicFamily::geometric : ClassicFamily::poisson, rho, lambda);
        },
        py::arg("kind"), py::arg("rho"), py::arg("lambda_"));

  m.def("simulate_scp", &simulate_scp, py::arg("model"), py::arg("rho"), py::arg("lambda_"),
        py::arg("t"), py::arg("replicas") = 1000, py::arg("seed") = 1,
        py::arg("window") = std::nullopt, py::arg("family") = "stationary");

  m.def("flux",
        [](const ModelSpec& model, double rho, const std::string& family) {
          return flux_G(model, family_for(model, family), rho);
        },
        py::arg("model"), py::arg("rho"), py::arg("family") = "stationary");
  m.def("riemann",
        [](const ModelSpec& model, double rho, double lambda, const std::string& family) {
          auto fam = family_for(model, family);
          return profile_dict(riemann_solve(flux_table(model, fam, lambda, rho), rho, lambda));
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("family") = "stationary");
  m.def("scp_limit_cdf",
        [](const ModelSpec& model, double rho, double lambda, double x, double t,
           const std::string& family) {
          auto fam = family_for(model, family);
          auto prof = riemann_solve(flux_table(model, fam, lambda, rho), rho, lambda);
          return scp_limit_cdf_right(prof, x, t);
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("x"), py::arg("t") = 1.0,
        py::arg("family") = "stationary");
  m.def("parabolic",
        [](const ModelSpec& model, double rho, double lambda, double t, double dx,
           const std::string& family) {
          auto fam = family_for(model, family);
          ParabolicOptions opt;
          opt.dx = dx;
          return profile_dict(parabolic_solve(diffusivity_table(model, fam, lambda, rho), rho,
                                              lambda, t, opt));
        },
        py::arg("model"), py::arg("rho"), py::arg("lambda_"), py::arg("t") = 1.0,
        py::arg("dx") = 0.01, py::arg("family") = "stationary");
  m.def("closed_form_sym_zr",
        [](double rho, double lambda, double x, double t) {
          auto v = closed_form_sym_zr(rho, lambda, x, t);
          return py::make_tuple(v.cdf, v.density);
        },
        py::arg("rho"), py::arg("lambda_"), py::arg("x"), py::arg("t") = 1.0);

  m.def("run_experiment",
        [](const std::string& config_json) {
          auto config = config_from_json(config_json);
          ComparisonReport r;
          {
            py::gil_scoped_release release;
            r = run_experiment(config);
          }
          return r.to_json();
        },
        py::arg("config_json"),
        "Runs an experiment from a JSON config and returns the report as JSON text.");
  m.def("set_threads", &set_worker_count, py::arg("workers"));
}
