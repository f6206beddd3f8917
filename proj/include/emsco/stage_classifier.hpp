#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emsco/data.hpp"

namespace emsco {

enum class Penalty { L2, L1 };

struct Regularization {
  Penalty kind = Penalty::L2;
  double strength = 1.0;  // lambda; intercepts are never penalized
};

enum class TrainStatus { Converged, IterationCap };

struct TrainOptions {
  double tolerance = 1e-6;  // on the (proximal) gradient l2 norm
  int max_iterations = 20000;
};

/// Scores are clamped to +/- kScoreClamp before the softmax.
inline constexpr double kScoreClamp = 30.0;

/// Multinomial logistic regression over a fixed subset of the feature columns.
/// Weights are stored row-major, one row per class: [intercept, w_1 .. w_s].
class SubsetClassifier {
 public:
  SubsetClassifier() = default;
  SubsetClassifier(std::vector<int> features, int num_classes, std::vector<double> weights,
                   Regularization reg);

  const std::vector<int>& features() const { return features_; }
  int num_classes() const { return num_classes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Regularization& regularization() const { return reg_; }

  double weight(int cls, std::size_t feature_slot) const {
    return weights_[static_cast<std::size_t>(cls) * stride() + 1 + feature_slot];
  }
  double intercept(int cls) const { return weights_[static_cast<std::size_t>(cls) * stride()]; }

  /// `row` holds every column of the dataset; only the subset is read.
  /// Throws if a required value is missing.
  std::vector<double> predict_proba(std::span<const double> row) const;
  void predict_proba(std::span<const double> row, std::span<double> out) const;

  TrainStatus status = TrainStatus::Converged;
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;

  nlohmann::json to_json() const;
  static SubsetClassifier from_json(const nlohmann::json& j);

 private:
  std::size_t stride() const { return features_.size() + 1; }

  std::vector<int> features_;
  int num_classes_ = 0;
  std::vector<double> weights_;
  Regularization reg_;
};

/// Sum-over-rows multinomial cross-entropy on a feature subset, with the
/// smooth L2 penalty (lambda/2)||w||^2 on non-intercept weights. Exposed for
/// the optimizer and for gradient checks.
class LogisticObjective {
 public:
  LogisticObjective(const Dataset& data, std::span<const int> subset);

  std::size_t num_weights() const { return static_cast<std::size_t>(num_classes_) * stride_; }
  std::size_t stride() const { return stride_; }
  int num_classes() const { return num_classes_; }

  /// Cross-entropy only.
  double data_loss(std::span<const double> w) const;
  /// Cross-entropy and its gradient.
  double data_loss(std::span<const double> w, std::span<double> grad) const;

  /// Cross-entropy plus L2 penalty (L1 is handled by the proximal step).
  double value(std::span<const double> w, double l2) const;
  double value(std::span<const double> w, double l2, std::span<double> grad) const;

  bool is_intercept(std::size_t index) const { return index % stride_ == 0; }

 private:
  std::vector<double> design_;  // rows x stride_, leading 1
  std::vector<int> labels_;
  std::size_t rows_ = 0;
  std::size_t stride_ = 0;
  int num_classes_ = 0;
};

/// Trains from all-zero weights: gradient descent with Armijo backtracking for
/// L2, proximal gradient (soft-thresholding) for L1. Deterministic.
SubsetClassifier train_classifier(const Dataset& train, std::vector<int> subset, const Regularization& reg,
                                  const TrainOptions& options = {});

/// Sorted, duplicate-free subset.
std::vector<int> canonical_subset(std::vector<int> subset);

/// Trained classifiers for one training set and regularization, keyed by the
/// canonical feature subset. Safe for concurrent use.
class ClassifierCache {
 public:
  ClassifierCache(const Dataset& train, Regularization reg, TrainOptions options = {});

  std::shared_ptr<const SubsetClassifier> get_or_train(std::vector<int> subset);

  /// Preloads a model (e.g. one restored from JSON); replaces any cached one.
  void insert(SubsetClassifier model);

  std::size_t size() const;
  std::size_t hits() const { return hits_.load(); }
  std::size_t trainings() const { return trainings_.load(); }
  const Dataset& train() const { return train_; }
  const Regularization& regularization() const { return reg_; }

 private:
  const Dataset& train_;
  Regularization reg_;
  TrainOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::vector<int>, std::shared_ptr<const SubsetClassifier>> models_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> trainings_{0};
};

}  // namespace emsco
