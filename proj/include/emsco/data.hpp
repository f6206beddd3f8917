#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emsco/common.hpp"

namespace emsco {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& values() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Labelled feature table. Missing cells are NaN until imputed.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<bool> categorical;  // mode-imputed when true
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t num_features() const { return features.cols(); }
  bool has_missing() const;

  /// Throws Error when shapes disagree, N or n is zero, l < 2 or a label is
  /// out of range.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
};

enum class CostScaling { Power10, Linear100, Custom };

/// Per-feature cost classes T_i and the acquisition costs h(T_i) they map to.
struct CostSchema {
  std::vector<int> cost_classes;
  CostScaling scaling = CostScaling::Linear100;
  std::map<int, double> table;  // only for CostScaling::Custom
  std::vector<double> costs;

  /// Builds the schema and derives costs. Rejects non-positive classes and
  /// custom tables that miss a class or map it to a non-positive cost.
  static CostSchema make(std::vector<int> classes, CostScaling scaling,
                         std::map<int, double> table = {});

  double total() const;
  std::size_t size() const { return costs.size(); }
};

double scale_cost(int cost_class, CostScaling scaling, const std::map<int, double>& table = {});

std::string to_string(CostScaling scaling);

struct SplitSpec {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
};

/// Dataset and cost schema read from disk.
struct LoadedData {
  Dataset dataset;
  CostSchema costs;
};

/// Reads a CSV (header row, label in the last column, empty cell = missing)
/// and a JSON cost file {"scaling": ..., "classes": {name: T}}. Label strings
/// are mapped to class indices in order of first appearance unless every
/// label is a non-negative integer, in which case the integer is used.
LoadedData load_csv(const std::string& csv_path, const std::string& cost_path);

Dataset parse_csv(const std::string& text);
CostSchema parse_cost_schema(const std::string& json_text, const std::vector<std::string>& feature_names);

/// Stratified split into train / validation / test. Set sizes are
/// apportioned by largest remainder so each lands within one of N * fraction.
Split split(const Dataset& ds, const SplitSpec& spec);

/// Statistics fitted on the training split and replayed on the others.
struct StandardizeTransform {
  std::vector<double> fill;   // imputation value per column
  std::vector<double> mean;
  std::vector<double> scale;  // population stdev, or 1 for zero variance

  Dataset apply(const Dataset& ds) const;
};

struct Standardized {
  Dataset train;
  std::vector<Dataset> others;
  StandardizeTransform transform;
};

Standardized impute_standardize(const Dataset& train, const std::vector<Dataset>& others);

struct SyntheticSpec {
  int num_features = 30;
  int num_samples = 1000;
  int num_classes = 3;
  int num_informative = 25;
  std::uint64_t seed = 0;
  double class_separation = 1.5;
};

/// Class-conditional Gaussian clusters. Informative columns come first; the
/// remaining columns are standard-normal noise drawn independently of labels.
/// Labels are assigned round-robin before the rows are shuffled.
Dataset make_synthetic(const SyntheticSpec& spec);

/// Gini impurity reduction of the best single-feature split, averaged over
/// bootstrap resamples.
std::vector<double> gini_importance(const Dataset& ds, std::uint64_t seed = 0, int bootstraps = 25);

/// Equal-width percentile buckets: class b covers ((b-1)/B, b/B], with 0
/// falling in class 1.
int cost_class_for_percentile(double percentile, int buckets);

/// Ranks importances (ties broken by feature index, lowest index ranked less
/// important) and maps rank percentiles (rank+1)/n onto buckets.
std::vector<int> cost_classes_from_importance(std::span<const double> importance, int buckets);

CostSchema assign_gini_cost_classes(const Dataset& ds, int buckets,
                                    CostScaling scaling = CostScaling::Linear100,
                                    std::uint64_t seed = 0);

std::string to_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::string& path);
std::string cost_schema_json(const CostSchema& costs, const std::vector<std::string>& feature_names);

}  // namespace emsco
