#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "emsco/experiment.hpp"

namespace emsco::testing {

inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                            int num_classes) {
  Dataset ds;
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  ds.features = Matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) ds.features(r, c) = rows[r][c];
  ds.labels = labels;
  ds.num_classes = num_classes;
  for (std::size_t c = 0; c < cols; ++c) ds.feature_names.push_back("f" + std::to_string(c + 1));
  ds.categorical.assign(cols, false);
  return ds;
}

/// Two-class model whose class-1 logit is `coef * x[driver]`; class 0 has all
/// zero weights, so P(class 1) = 1 / (1 + exp(-coef * x[driver])).
inline SubsetClassifier logit_model(std::vector<int> features, int driver, double coef) {
  const std::size_t stride = features.size() + 1;
  std::vector<double> w(2 * stride, 0.0);
  for (std::size_t k = 0; k < features.size(); ++k)
    if (features[k] == driver) w[stride + 1 + k] = coef;
  return SubsetClassifier(std::move(features), 2, std::move(w), {});
}

// Six inputs over four features with costs [1, 1, 10, 10]. Stage one sees
// {f1, f2} and its class-1 logit is x1; stage two sees all four features and
// its class-1 logit is x3. With p-hat 0.75 a logit must reach ln 3 in
// magnitude to be conclusive.
struct HandFixture {
  Dataset eval = make_dataset({{3.0, 0.0, 0.0, 0.0},     // stage 1, class 1, correct
                               {-3.0, 0.0, 0.0, 0.0},    // stage 1, class 0, correct
                               {2.0, 0.0, 0.0, 0.0},     // stage 1, class 1, wrong
                               {0.0, 0.0, 3.0, 0.0},     // stage 2, class 1, correct
                               {0.5, 0.0, 0.0, 0.0},     // terminal reject
                               {-0.5, 0.0, 0.2, 0.0}},   // terminal reject
                              {1, 0, 0, 1, 1, 0}, 2);
  CostSchema costs = CostSchema::make({1, 1, 2, 2}, CostScaling::Custom, {{1, 1.0}, {2, 10.0}});
  ClassifierCache cache{eval, {}};
  Chromosome q{std::vector<int>{0, 0, 1, 1}};

  HandFixture() {
    cache.insert(logit_model({0, 1}, 0, 1.0));
    cache.insert(logit_model({0, 1, 2, 3}, 2, 1.0));
  }
};

/// The (n = 8, k = 3) synthetic configuration shared by the oracle-relative
/// checks.
inline RunConfig small_fixture_config(std::uint64_t seed = 0) {
  RunConfig cfg;
  cfg.synth = SyntheticSpec{8, 400, 2, 5, 11, 1.5};
  cfg.synth_cost_buckets = 5;
  cfg.synth_scaling = CostScaling::Linear100;
  cfg.split.seed = 3;
  cfg.evolution.max_stages = 3;
  cfg.max_stages_explicit = true;
  cfg.evolution.p_hat = 0.75;
  cfg.oracle_k = 3;
  cfg.seed = seed;
  return cfg;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("emsco_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace emsco::testing
