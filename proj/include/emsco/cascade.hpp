#pragma once

#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emsco/data.hpp"
#include "emsco/stage_classifier.hpp"

namespace emsco {

/// Zero-indexed stage assignment per feature, encoding an ordered partition
/// of the feature set. Always gap-free: the values used are exactly
/// {0, ..., stage_count() - 1}.
class Chromosome {
 public:
  Chromosome() = default;

  /// Throws unless `assignments` is non-empty and gap-free.
  explicit Chromosome(std::vector<int> assignments);

  /// Rank-densifies arbitrary non-negative assignments: each value becomes the
  /// rank of its distinct value, preserving order relations.
  static Chromosome compress(std::span<const int> raw);

  /// One-stage chromosome [0, ..., 0].
  static Chromosome single_stage(std::size_t n);

  /// Parses the comma-separated text form, e.g. "0,0,1,1". Gaps are rejected.
  static Chromosome parse(std::string_view text);
  std::string to_string() const;

  std::size_t size() const { return assignments_.size(); }
  int stage_count() const { return stage_count_; }
  int operator[](std::size_t i) const { return assignments_[i]; }
  const std::vector<int>& assignments() const { return assignments_; }

  /// Features first acquired at zero-indexed stage j.
  std::vector<int> stage_features(int stage) const;
  /// Features available at stage j: every feature assigned to a stage <= j.
  std::vector<int> cumulative_features(int stage) const;

  auto operator<=>(const Chromosome& other) const { return assignments_ <=> other.assignments_; }
  bool operator==(const Chromosome& other) const { return assignments_ == other.assignments_; }

 private:
  std::vector<int> assignments_;
  int stage_count_ = 0;
};

/// True when some j in 0..max-1 is missing from the used values.
bool has_gaps(std::span<const int> raw);

/// g1 coverage, g2 conclusive accuracy, raw cost and the inverse cost g3,
/// which stays 0 until normalized against a population or a space minimum.
struct ObjectiveVector {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3_raw = 0.0;
  double g3 = 0.0;
};

struct CascadeOutcome {
  bool conclusive = false;
  int label = -1;          // argmax class at the exit stage (kept for rejects too)
  int stage = 0;           // 1-based stage at which evaluation stopped
  double confidence = 0.0; // max class probability at that stage
  double cost = 0.0;       // acquisition cost accrued through that stage
};

/// Trained cascade context: stage classifiers come from the cache, inputs from
/// `eval`. Per-subset predictions on the eval set are memoized.
class CascadeEvaluator {
 public:
  CascadeEvaluator(ClassifierCache& cache, const Dataset& eval, const CostSchema& costs, double p_hat);

  double p_hat() const { return p_hat_; }
  const Dataset& eval_set() const { return eval_; }
  const CostSchema& costs() const { return costs_; }
  std::size_t num_features() const { return costs_.size(); }

  /// Walks the stages for one input row given as a full feature vector.
  CascadeOutcome evaluate_input(const Chromosome& q, std::span<const double> x) const;

  /// Same walk for row `r` of the eval set, through memoized predictions.
  CascadeOutcome evaluate_row(const Chromosome& q, std::size_t r);

  /// g1, g2 and g3_raw over the eval set; g3 is left at 0.
  ObjectiveVector evaluate(const Chromosome& q);

 private:
  struct StagePredictions {
    std::vector<double> confidence;
    std::vector<int> label;
  };
  const StagePredictions& predictions(const std::vector<int>& subset);
  void check(const Chromosome& q) const;

  ClassifierCache& cache_;
  const Dataset& eval_;
  const CostSchema& costs_;
  double p_hat_;
  std::mutex memo_mutex_;
  std::map<std::vector<int>, std::shared_ptr<const StagePredictions>> memo_;
};

/// Raw cost g3* of every member mapped to min(g3*) / g3*; the cheapest get 1.
/// Throws if any raw cost is not positive. Returns the minimum.
double normalize_costs(std::span<ObjectiveVector> members);

/// min_U g3*(U) / g3*(q) with the minimum taken over an enumerated space.
double global_inverse_cost(double g3_raw, double space_min);

/// Index of the largest probability; lowest index on ties.
int argmax_class(std::span<const double> probabilities);

}  // namespace emsco
