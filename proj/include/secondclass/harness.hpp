#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "secondclass/measures.hpp"
#include "secondclass/model.hpp"

namespace secondclass {

/// Model document {name, parameters, truncation: {sim_floor, sim_cap}}.
ModelSpec model_from_json(std::string_view text);
ModelSpec load_model_file(const std::string& path);

/// Everything one experiment run needs. Field names match the JSON keys.
struct ExperimentConfig {
  std::string experiment;  // identity | limit_asym | limit_sym | background | collision | measure_audit
  std::string model = "tasep";
  std::map<std::string, double> parameters;
  Truncation truncation;
  // stationary | geometric | poisson | bernoulli | discrete_gaussian | flat | explicit
  std::string family = "stationary";
  std::vector<std::pair<double, std::vector<double>>> family_tables;  // pmf from sim_floor

  double rho = 1;
  double lambda = 0;
  std::vector<double> times{1.0};   // t, a t-grid, or collision sample times
  std::vector<int> scales{100};     // N grid of the limit experiments
  std::size_t replicas = 10000;
  std::uint64_t seed = 1;
  std::optional<int> window;        // half width override

  int n_min = -10;                  // identity rows
  int n_max = 10;
  std::optional<double> x_min;      // limit comparison range (scaled units)
  std::optional<double> x_max;
  double edge_exclusion = 0;        // skip |x - fan edge| below this
  double shock_exclusion = 2;       // in units of 1/N around shocks
  double atom_window = 5;           // in units of 1/N around shocks

  double z_limit = 3;
  double sup_tolerance = 0.05;
  double atom_tolerance = 0.05;
  double abort_limit = 1e-3;
  double significance = 0.05;
  double algebra_tolerance = 1e-12;
  std::vector<std::pair<double, double>> density_pairs;  // measure audit grid

  std::string csv_path;
  std::string json_path;
};

ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

struct ReportRow {
  std::string series;
  double x = 0;
  double estimate = 0;
  double lo = 0;
  double hi = 0;
  double std_error = 0;
  double predicted = 0;
  double predicted_error = 0;
  double z = 0;  // NaN where no z-score applies
  bool ok = true;
};

using Histogram = std::map<long long, std::size_t>;

struct ComparisonReport {
  std::string experiment;
  std::string model;
  std::vector<ReportRow> rows;
  double max_abs_z = 0;
  double sup_distance = 0;
  double abort_fraction = 0;
  std::size_t replicas = 0;
  std::size_t aborted = 0;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> metadata;
  std::map<std::string, Histogram> histograms;
  std::vector<std::string> failures;
  bool pass = false;

  std::string to_csv() const;
  std::string to_json() const;
  void write(const std::string& csv_path, const std::string& json_path) const;
};

/// Resolves the family named in the config against the model.
MarginalFamily resolve_family(const ExperimentConfig& config, const ModelSpec& model);
ModelSpec resolve_model(const ExperimentConfig& config);

ComparisonReport run_identity(const ExperimentConfig& config);
ComparisonReport run_limit_asym(const ExperimentConfig& config);
ComparisonReport run_limit_sym(const ExperimentConfig& config);
ComparisonReport run_background(const ExperimentConfig& config);
ComparisonReport run_collision(const ExperimentConfig& config);
ComparisonReport run_measure_audit(const ExperimentConfig& config);

/// Dispatches on config.experiment and writes the outputs named in the config.
ComparisonReport run_experiment(const ExperimentConfig& config);

/// Sup distance between the empirical CDF of scale * sample and a reference
/// CDF, evaluated on both sides of every jump inside [x_min, x_max] and at the
/// two range ends. `reference` returns {left limit, value} at x; points where
/// `skip` is true are ignored.
struct SupDistance {
  double value = 0;
  double at = 0;
  std::size_t points = 0;
};
using CdfReference = std::function<std::pair<double, double>(double)>;
SupDistance empirical_sup_distance(const Histogram& hist, double scale, double x_min,
                                   double x_max, const CdfReference& reference,
                                   const std::function<bool(double)>& skip = {});

}  // namespace secondclass
