#include "emsco/stage_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

namespace emsco {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Relative slack for line-search comparisons near the roundoff floor of the
// summed loss.
constexpr double kRoundoffSlack = 64.0 * std::numeric_limits<double>::epsilon();

}  // namespace

SubsetClassifier::SubsetClassifier(std::vector<int> features, int num_classes, std::vector<double> weights,
                                   Regularization reg)
    : features_(std::move(features)), num_classes_(num_classes), weights_(std::move(weights)), reg_(reg) {
  if (weights_.size() != static_cast<std::size_t>(num_classes_) * stride())
    throw Error("weight count does not match classes x (features + 1)");
}

void SubsetClassifier::predict_proba(std::span<const double> row, std::span<double> out) const {
  const std::size_t s = stride();
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < num_classes_; ++c) {
    const double* w = weights_.data() + static_cast<std::size_t>(c) * s;
    double z = w[0];
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const double x = row[static_cast<std::size_t>(features_[k])];
      if (is_missing(x)) throw Error("input is missing feature " + std::to_string(features_[k]));
      z += w[k + 1] * x;
    }
    z = std::clamp(z, -kScoreClamp, kScoreClamp);
    out[static_cast<std::size_t>(c)] = z;
    top = std::max(top, z);
  }
  double total = 0.0;
  for (int c = 0; c < num_classes_; ++c) {
    auto& v = out[static_cast<std::size_t>(c)];
    v = std::exp(v - top);
    total += v;
  }
  for (int c = 0; c < num_classes_; ++c) out[static_cast<std::size_t>(c)] /= total;
}

std::vector<double> SubsetClassifier::predict_proba(std::span<const double> row) const {
  std::vector<double> out(static_cast<std::size_t>(num_classes_));
  predict_proba(row, out);
  return out;
}

nlohmann::json SubsetClassifier::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int c = 0; c < num_classes_; ++c) {
    const auto first = weights_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * stride());
    rows.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride())));
  }
  return {{"features", features_},
          {"classes", num_classes_},
          {"kind", reg_.kind == Penalty::L2 ? "L2" : "L1"},
          {"lambda", reg_.strength},
          {"weights", rows},
          {"converged", status == TrainStatus::Converged},
          {"iterations", iterations}};
}

SubsetClassifier SubsetClassifier::from_json(const nlohmann::json& j) {
  Regularization reg;
  reg.kind = j.at("kind").get<std::string>() == "L1" ? Penalty::L1 : Penalty::L2;
  reg.strength = j.at("lambda").get<double>();
  std::vector<double> weights;
  for (const auto& row : j.at("weights"))
    for (const auto& v : row) weights.push_back(v.get<double>());
  SubsetClassifier out(j.at("features").get<std::vector<int>>(), j.at("classes").get<int>(), std::move(weights), reg);
  out.status = j.value("converged", true) ? TrainStatus::Converged : TrainStatus::IterationCap;
  out.iterations = j.value("iterations", 0);
  return out;
}

// ---------------------------------------------------------------------------

LogisticObjective::LogisticObjective(const Dataset& data, std::span<const int> subset)
    : labels_(data.labels), rows_(data.size()), stride_(subset.size() + 1), num_classes_(data.num_classes) {
  design_.resize(rows_ * stride_);
  for (std::size_t r = 0; r < rows_; ++r) {
    double* out = design_.data() + r * stride_;
    out[0] = 1.0;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      const double v = data.features(r, static_cast<std::size_t>(subset[k]));
      if (is_missing(v)) throw Error("training data has missing values; impute first");
      out[k + 1] = v;
    }
  }
}

double LogisticObjective::data_loss(std::span<const double> w) const {
  const auto l = static_cast<std::size_t>(num_classes_);
  std::vector<double> z(l);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::span<const double> x(design_.data() + r * stride_, stride_);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < l; ++c) {
      z[c] = dot(w.subspan(c * stride_, stride_), x);
      top = std::max(top, z[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < l; ++c) sum += std::exp(z[c] - top);
    loss += top + std::log(sum) - z[static_cast<std::size_t>(labels_[r])];
  }
  return loss;
}

double LogisticObjective::data_loss(std::span<const double> w, std::span<double> grad) const {
  const auto l = static_cast<std::size_t>(num_classes_);
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> z(l);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* x = design_.data() + r * stride_;
    const std::span<const double> xs(x, stride_);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < l; ++c) {
      z[c] = dot(w.subspan(c * stride_, stride_), xs);
      top = std::max(top, z[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < l; ++c) {
      z[c] = std::exp(z[c] - top);
      sum += z[c];
    }
    const auto y = static_cast<std::size_t>(labels_[r]);
    loss += top + std::log(sum) - dot(w.subspan(y * stride_, stride_), xs);
    for (std::size_t c = 0; c < l; ++c) {
      const double residual = z[c] / sum - (c == y ? 1.0 : 0.0);
      double* g = grad.data() + c * stride_;
      for (std::size_t k = 0; k < stride_; ++k) g[k] += residual * x[k];
    }
  }
  return loss;
}

double LogisticObjective::value(std::span<const double> w, double l2) const {
  double penalty = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!is_intercept(i)) penalty += w[i] * w[i];
  return data_loss(w) + 0.5 * l2 * penalty;
}

double LogisticObjective::value(std::span<const double> w, double l2, std::span<double> grad) const {
  double f = data_loss(w, grad);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_intercept(i)) continue;
    f += 0.5 * l2 * w[i] * w[i];
    grad[i] += l2 * w[i];
  }
  return f;
}

// ---------------------------------------------------------------------------

namespace {

// Gradient descent with a Barzilai-Borwein trial step and Armijo backtracking.
void minimize_l2(const LogisticObjective& obj, double lambda, const TrainOptions& opt, std::vector<double>& w,
                 SubsetClassifier& report) {
  const std::size_t m = w.size();
  std::vector<double> g(m), trial(m), g_trial(m);
  double f = obj.value(w, lambda, g);
  double step = 1e-3;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const double gnorm = norm2(g);
    report.gradient_norm = gnorm;
    if (gnorm <= opt.tolerance) break;
    double f_trial = 0.0;
    while (true) {
      for (std::size_t i = 0; i < m; ++i) trial[i] = w[i] - step * g[i];
      f_trial = obj.value(trial, lambda, g_trial);
      if (f_trial <= f - 1e-4 * step * gnorm * gnorm + kRoundoffSlack * std::abs(f)) break;
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (step < 1e-18) break;
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double s = trial[i] - w[i];
      const double y = g_trial[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    w.swap(trial);
    g.swap(g_trial);
    f = f_trial;
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : std::min(step * 2.0, 1e6);
  }
  report.iterations = it;
  report.objective = f;
  report.gradient_norm = norm2(g);
  report.status = report.gradient_norm <= opt.tolerance ? TrainStatus::Converged : TrainStatus::IterationCap;
}

// Proximal gradient for cross-entropy + lambda * ||w||_1 (intercepts free).
void minimize_l1(const LogisticObjective& obj, double lambda, const TrainOptions& opt, std::vector<double>& w,
                 SubsetClassifier& report) {
  const std::size_t m = w.size();
  std::vector<double> g(m), trial(m), g_trial(m);
  double f = obj.data_loss(w, g);
  double step = 1e-3;
  double mapping_norm = std::numeric_limits<double>::infinity();
  int it = 0;
  auto prox = [&](double t) {
    for (std::size_t i = 0; i < m; ++i) {
      const double v = w[i] - t * g[i];
      if (obj.is_intercept(i)) {
        trial[i] = v;
      } else {
        const double shrink = t * lambda;
        trial[i] = v > shrink ? v - shrink : (v < -shrink ? v + shrink : 0.0);
      }
    }
  };
  for (; it < opt.max_iterations; ++it) {
    double f_trial = 0.0;
    double lin = 0.0, quad = 0.0;
    while (true) {
      prox(step);
      lin = 0.0;
      quad = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = trial[i] - w[i];
        lin += g[i] * d;
        quad += d * d;
      }
      f_trial = obj.data_loss(trial, g_trial);
      if (f_trial <= f + lin + quad / (2.0 * step) + kRoundoffSlack * std::abs(f)) break;
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (step < 1e-18) break;
    mapping_norm = std::sqrt(quad) / step;
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double s = trial[i] - w[i];
      const double y = g_trial[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    w.swap(trial);
    g.swap(g_trial);
    f = f_trial;
    if (mapping_norm <= opt.tolerance) {
      ++it;
      break;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : std::min(step * 2.0, 1e6);
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (!obj.is_intercept(i)) l1 += std::abs(w[i]);
  report.iterations = it;
  report.objective = f + lambda * l1;
  report.gradient_norm = mapping_norm;
  report.status = mapping_norm <= opt.tolerance ? TrainStatus::Converged : TrainStatus::IterationCap;
}

}  // namespace

std::vector<int> canonical_subset(std::vector<int> subset) {
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  return subset;
}

SubsetClassifier train_classifier(const Dataset& train, std::vector<int> subset, const Regularization& reg,
                                  const TrainOptions& options) {
  train.validate();
  subset = canonical_subset(std::move(subset));
  if (subset.empty()) throw Error("cannot train a classifier on an empty feature subset");
  if (subset.front() < 0 || static_cast<std::size_t>(subset.back()) >= train.num_features())
    throw Error("feature index out of range");
  if (reg.strength < 0.0) throw Error("regularization strength must be non-negative");

  const LogisticObjective objective(train, subset);
  std::vector<double> w(objective.num_weights(), 0.0);
  SubsetClassifier report;
  if (reg.kind == Penalty::L2)
    minimize_l2(objective, reg.strength, options, w, report);
  else
    minimize_l1(objective, reg.strength, options, w, report);

  for (double v : w)
    if (!std::isfinite(v)) throw Error("training diverged to non-finite weights");

  SubsetClassifier out(std::move(subset), train.num_classes, std::move(w), reg);
  out.status = report.status;
  out.iterations = report.iterations;
  out.gradient_norm = report.gradient_norm;
  out.objective = report.objective;
  return out;
}

// ---------------------------------------------------------------------------

ClassifierCache::ClassifierCache(const Dataset& train, Regularization reg, TrainOptions options)
    : train_(train), reg_(reg), options_(options) {}

std::shared_ptr<const SubsetClassifier> ClassifierCache::get_or_train(std::vector<int> subset) {
  subset = canonical_subset(std::move(subset));
  {
    std::shared_lock lock(mutex_);
    const auto it = models_.find(subset);
    if (it != models_.end()) {
      ++hits_;
      return it->second;
    }
  }
  // Trained outside the lock; a concurrent duplicate produces the same model.
  auto model = std::make_shared<const SubsetClassifier>(train_classifier(train_, subset, reg_, options_));
  ++trainings_;
  std::unique_lock lock(mutex_);
  return models_.emplace(subset, std::move(model)).first->second;
}

void ClassifierCache::insert(SubsetClassifier model) {
  auto subset = canonical_subset(model.features());
  if (subset != model.features()) throw Error("preloaded model features must be sorted and distinct");
  std::unique_lock lock(mutex_);
  models_[subset] = std::make_shared<const SubsetClassifier>(std::move(model));
}

std::size_t ClassifierCache::size() const {
  std::shared_lock lock(mutex_);
  return models_.size();
}

}  // namespace emsco
