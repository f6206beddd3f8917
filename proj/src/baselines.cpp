#include "emsco/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace emsco {

double aggregate_metric(double g1, double g2, double g3_raw, double total_cost) {
  if (!(total_cost > 0.0)) throw Error("total cost must be positive");
  return g1 + g2 + (1.0 - g3_raw / total_cost);
}

BaselineResult single_stage(ClassifierCache& cache, const Dataset& eval, const CostSchema& costs) {
  const std::size_t n = costs.size();
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
  const auto model = cache.get_or_train(all);

  std::size_t correct = 0;
  std::vector<double> proba(static_cast<std::size_t>(model->num_classes()));
  for (std::size_t r = 0; r < eval.size(); ++r) {
    model->predict_proba(eval.features.row(r), proba);
    if (argmax_class(proba) == eval.labels[r]) ++correct;
  }
  BaselineResult out;
  out.method = "Single-Stage";
  out.g1 = 1.0;
  out.g2 = static_cast<double>(correct) / static_cast<double>(eval.size());
  out.g3_raw = costs.total();
  out.aggregate = aggregate_metric(out.g1, out.g2, out.g3_raw, costs.total());
  return out;
}

Chromosome cost_ordered_chromosome(const CostSchema& costs) {
  return Chromosome::compress(costs.cost_classes);
}

BaselineResult cost_ordered(CascadeEvaluator& evaluator) {
  const Chromosome q = cost_ordered_chromosome(evaluator.costs());
  const ObjectiveVector o = evaluator.evaluate(q);
  BaselineResult out;
  out.method = "CO-T";
  out.g1 = o.g1;
  out.g2 = o.g2;
  out.g3_raw = o.g3_raw;
  out.aggregate = aggregate_metric(o.g1, o.g2, o.g3_raw, evaluator.costs().total());
  out.config["T"] = q.stage_count();
  out.config["chromosome"] = q.to_string();
  return out;
}

std::vector<double> lambda_grid(double step, double upper) {
  if (!(step > 0.0) || upper < 0.0) throw Error("lambda grid needs a positive step and non-negative upper bound");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor(upper / step + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

std::vector<int> selected_features(const SubsetClassifier& model) {
  std::set<int> chosen;
  for (int c = 0; c < model.num_classes(); ++c)
    for (std::size_t k = 0; k < model.features().size(); ++k)
      if (std::abs(model.weight(c, k)) > 1e-8) chosen.insert(model.features()[k]);
  return {chosen.begin(), chosen.end()};
}

LassoPoint evaluate_lasso(const Dataset& train, const Dataset& eval, const CostSchema& costs, double p_hat,
                          double lambda, const TrainOptions& options) {
  std::vector<int> all(costs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const SubsetClassifier model = train_classifier(train, all, {Penalty::L1, lambda}, options);

  LassoPoint out;
  out.lambda = lambda;
  out.selected = selected_features(model);
  for (int f : out.selected) out.cost += costs.costs[static_cast<std::size_t>(f)];

  std::size_t conclusive = 0, correct = 0;
  std::vector<double> proba(static_cast<std::size_t>(model.num_classes()));
  for (std::size_t r = 0; r < eval.size(); ++r) {
    model.predict_proba(eval.features.row(r), proba);
    const int label = argmax_class(proba);
    if (proba[static_cast<std::size_t>(label)] >= p_hat) {
      ++conclusive;
      if (label == eval.labels[r]) ++correct;
    }
  }
  out.g1 = static_cast<double>(conclusive) / static_cast<double>(eval.size());
  out.g2 = conclusive == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(conclusive);
  out.aggregate = aggregate_metric(out.g1, out.g2, out.cost, costs.total());
  return out;
}

LassoSweep cact_lasso(const Dataset& train, const Dataset& validation, const Dataset& test,
                      const CostSchema& costs, double p_hat, const std::vector<double>& grid,
                      const TrainOptions& options) {
  if (grid.empty()) throw Error("lambda grid is empty");
  LassoSweep out;
  std::size_t best = 0;
  for (double lambda : grid) {
    out.path.push_back(evaluate_lasso(train, validation, costs, p_hat, lambda, options));
    if (out.path.back().aggregate > out.path[best].aggregate) best = out.path.size() - 1;
  }
  const double chosen = out.path[best].lambda;
  const LassoPoint at_test = evaluate_lasso(train, test, costs, p_hat, chosen, options);
  out.result.method = "CaCT LASSO";
  out.result.g1 = at_test.g1;
  out.result.g2 = at_test.g2;
  out.result.g3_raw = at_test.cost;
  out.result.aggregate = at_test.aggregate;
  out.result.config["lambda"] = chosen;
  out.result.config["selected"] = at_test.selected;
  out.result.config["validation_aggregate"] = out.path[best].aggregate;
  return out;
}

nlohmann::ordered_json to_json(const BaselineResult& r) {
  return {{"method", r.method}, {"g1", r.g1}, {"g2", r.g2}, {"g3_raw", r.g3_raw}, {"aggregate", r.aggregate},
          {"config", r.config}};
}

}  // namespace emsco
