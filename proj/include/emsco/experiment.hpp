#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "emsco/baselines.hpp"
#include "emsco/cascade.hpp"
#include "emsco/data.hpp"
#include "emsco/evolution.hpp"
#include "emsco/oracle.hpp"
#include "emsco/stage_classifier.hpp"

namespace emsco {

/// Resolved run configuration. Every artifact echoes it.
struct RunConfig {
  std::string csv_path;
  std::string cost_path;

  SyntheticSpec synth{30, 1000, 3, 25, 0, 1.5};
  int synth_cost_buckets = 5;
  CostScaling synth_scaling = CostScaling::Linear100;

  SplitSpec split;
  EvolutionConfig evolution;
  bool max_stages_explicit = false;  // otherwise max(ceil(n/2), 10), capped at n
  double lambda = 1.0;

  double lasso_step = 0.1;
  double lasso_max = 100.0;

  int oracle_k = 3;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  bool force_enumeration = false;

  std::string neighborhood_chromosome;
  std::string global_front_path;  // optional input for neighborhood / report
  std::string run_report_path;
  std::string baselines_path;
  std::string external_rows_path; // CSV rows from third-party methods

  std::uint64_t seed = 0;
  int runs = 1;
  std::string out_dir = "out";
  bool record_elites = true;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  void validate() const;
};

/// Applies "a.b.c=value" to a JSON document; the value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

/// Loaded, split, imputed and standardized data with trained-model caches.
class Experiment {
 public:
  explicit Experiment(const RunConfig& cfg);
  Experiment(Dataset data, CostSchema costs, const RunConfig& cfg);
  // Evaluators hold references into the owned datasets.
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const RunConfig& config() const { return cfg_; }
  const EvolutionConfig& evolution() const { return evolution_; }
  const Dataset& train() const { return std::get<0>(sets_); }
  const Dataset& validation() const { return std::get<1>(sets_); }
  const Dataset& test() const { return std::get<2>(sets_); }
  const CostSchema& costs() const { return costs_; }
  std::size_t num_features() const { return costs_.size(); }

  ClassifierCache& cache() { return *cache_; }
  CascadeEvaluator& validation_evaluator() { return *validation_eval_; }
  CascadeEvaluator& test_evaluator() { return *test_eval_; }

  ObjectiveFn validation_objectives();

 private:
  void prepare(Dataset data);

  RunConfig cfg_;
  EvolutionConfig evolution_;
  CostSchema costs_;
  std::tuple<Dataset, Dataset, Dataset> sets_;
  std::unique_ptr<ClassifierCache> cache_;
  std::unique_ptr<CascadeEvaluator> validation_eval_;
  std::unique_ptr<CascadeEvaluator> test_eval_;
};

/// Default k: max(ceil(n/2), 10), capped at n.
int default_max_stages(std::size_t num_features);

/// Key under which the only non-deterministic value of a report is stored.
inline constexpr const char* kTimestampKey = "generated_at";

struct RunSummary {
  std::uint64_t seed = 0;
  RunResult result;
  ObjectiveVector best_test;  // top-fitness chromosome on the test split
};

/// Runs cfg.runs independent seeds (base seed + index) across worker threads.
std::vector<RunSummary> run_experiment(Experiment& exp, const std::vector<Chromosome>& planted = {});

nlohmann::ordered_json run_report_json(const Experiment& exp, const std::vector<RunSummary>& runs);

struct MeanInterval {
  std::size_t count = 0;
  double mean = 0.0;
  double margin = 0.0;  // half-width of the 95% Student-t interval
};

/// Order-independent: samples are sorted before summation.
MeanInterval mean_interval(std::vector<double> samples, double confidence = 0.95);

/// Aggregates run reports, baseline rows and external rows into CSV tables.
struct ComparisonTables {
  std::string comparison_csv;
  std::string curves_csv;
};

ComparisonTables build_report(const nlohmann::json& run_report, const std::optional<GlobalFront>& front,
                              const std::vector<nlohmann::json>& baseline_rows,
                              const std::string& external_rows_csv);

std::string current_timestamp();

}  // namespace emsco
