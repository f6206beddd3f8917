#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emsco/cascade.hpp"
#include "emsco/data.hpp"
#include "emsco/stage_classifier.hpp"

namespace emsco {

struct BaselineResult {
  std::string method;
  double g1 = 0.0;
  double g2 = 0.0;
  double g3_raw = 0.0;
  double aggregate = 0.0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// g1 + g2 + (1 - g3_raw / total_cost). Not clamped.
double aggregate_metric(double g1, double g2, double g3_raw, double total_cost);

/// Full-feature classifier with no reject option: g1 = 1, g2 = accuracy,
/// g3_raw = sum of all costs.
BaselineResult single_stage(ClassifierCache& cache, const Dataset& eval, const CostSchema& costs);

/// One stage per distinct cost class, cheapest first.
Chromosome cost_ordered_chromosome(const CostSchema& costs);

/// Cost-ordered cascade with the terminal reject at the evaluator's p-hat.
BaselineResult cost_ordered(CascadeEvaluator& evaluator);

struct LassoPoint {
  double lambda = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double cost = 0.0;
  double aggregate = 0.0;
  std::vector<int> selected;
};

/// 0, step, 2*step, ..., upper (inclusive, computed as i*step).
std::vector<double> lambda_grid(double step = 0.1, double upper = 100.0);

/// Features with any class coefficient above 1e-8 in magnitude.
std::vector<int> selected_features(const SubsetClassifier& model);

/// Single-stage L1 model on all features with a terminal reject at p_hat,
/// charged for every selected feature.
LassoPoint evaluate_lasso(const Dataset& train, const Dataset& eval, const CostSchema& costs, double p_hat,
                          double lambda, const TrainOptions& options = {});

struct LassoSweep {
  BaselineResult result;          // test-set metrics at the chosen lambda
  std::vector<LassoPoint> path;   // validation metrics per lambda
};

/// Picks lambda maximizing the validation aggregate (lowest lambda on ties)
/// and reports test metrics there.
LassoSweep cact_lasso(const Dataset& train, const Dataset& validation, const Dataset& test,
                      const CostSchema& costs, double p_hat, const std::vector<double>& grid,
                      const TrainOptions& options = {});

nlohmann::ordered_json to_json(const BaselineResult& r);

}  // namespace emsco
