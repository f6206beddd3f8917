#include "emsco/cascade.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace emsco {

namespace {

int distinct_count(std::span<const int> raw) {
  std::set<int> values(raw.begin(), raw.end());
  return static_cast<int>(values.size());
}

}  // namespace

bool has_gaps(std::span<const int> raw) {
  if (raw.empty()) return false;
  const int top = *std::max_element(raw.begin(), raw.end());
  return distinct_count(raw) != top + 1 || *std::min_element(raw.begin(), raw.end()) < 0;
}

Chromosome::Chromosome(std::vector<int> assignments) : assignments_(std::move(assignments)) {
  if (assignments_.empty()) throw Error("chromosome needs at least one feature");
  if (*std::min_element(assignments_.begin(), assignments_.end()) < 0)
    throw Error("stage assignments must be non-negative");
  if (has_gaps(assignments_)) throw Error("chromosome has an empty stage: " + to_string());
  stage_count_ = *std::max_element(assignments_.begin(), assignments_.end()) + 1;
}

Chromosome Chromosome::compress(std::span<const int> raw) {
  if (raw.empty()) throw Error("chromosome needs at least one feature");
  std::vector<int> values(raw.begin(), raw.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.front() < 0) throw Error("stage assignments must be non-negative");
  std::vector<int> dense(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    dense[i] = static_cast<int>(std::lower_bound(values.begin(), values.end(), raw[i]) - values.begin());
  return Chromosome(std::move(dense));
}

Chromosome Chromosome::single_stage(std::size_t n) { return Chromosome(std::vector<int>(n, 0)); }

Chromosome Chromosome::parse(std::string_view text) {
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto token = text.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
      throw Error("bad chromosome text '" + std::string(text) + "'");
    values.push_back(v);
    start = end + 1;
  }
  return Chromosome(std::move(values));
}

std::string Chromosome::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(assignments_[i]);
  }
  return out;
}

std::vector<int> Chromosome::stage_features(int stage) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignments_.size(); ++i)
    if (assignments_[i] == stage) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Chromosome::cumulative_features(int stage) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignments_.size(); ++i)
    if (assignments_[i] <= stage) out.push_back(static_cast<int>(i));
  return out;
}

int argmax_class(std::span<const double> probabilities) {
  return static_cast<int>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

// ---------------------------------------------------------------------------

CascadeEvaluator::CascadeEvaluator(ClassifierCache& cache, const Dataset& eval, const CostSchema& costs,
                                   double p_hat)
    : cache_(cache), eval_(eval), costs_(costs), p_hat_(p_hat) {
  eval_.validate();
  if (eval_.num_features() != costs_.size()) throw Error("cost schema and eval set disagree on feature count");
  if (cache_.train().num_features() != costs_.size())
    throw Error("cost schema and training set disagree on feature count");
  if (!std::isfinite(p_hat_)) throw Error("confidence threshold must be finite");
}

void CascadeEvaluator::check(const Chromosome& q) const {
  if (q.size() != costs_.size())
    throw Error("chromosome has " + std::to_string(q.size()) + " features, expected " + std::to_string(costs_.size()));
}

CascadeOutcome CascadeEvaluator::evaluate_input(const Chromosome& q, std::span<const double> x) const {
  check(q);
  if (x.size() != costs_.size()) throw Error("input row has the wrong feature count");
  CascadeOutcome out;
  std::vector<double> proba(static_cast<std::size_t>(cache_.train().num_classes));
  for (int stage = 0; stage < q.stage_count(); ++stage) {
    for (int f : q.stage_features(stage)) out.cost += costs_.costs[static_cast<std::size_t>(f)];
    const auto model = cache_.get_or_train(q.cumulative_features(stage));
    model->predict_proba(x, proba);
    out.stage = stage + 1;
    out.label = argmax_class(proba);
    out.confidence = proba[static_cast<std::size_t>(out.label)];
    if (out.confidence >= p_hat_) {
      out.conclusive = true;
      return out;
    }
  }
  return out;
}

const CascadeEvaluator::StagePredictions& CascadeEvaluator::predictions(const std::vector<int>& subset) {
  {
    std::lock_guard lock(memo_mutex_);
    const auto it = memo_.find(subset);
    if (it != memo_.end()) return *it->second;
  }
  const auto model = cache_.get_or_train(subset);
  auto preds = std::make_shared<StagePredictions>();
  preds->confidence.resize(eval_.size());
  preds->label.resize(eval_.size());
  std::vector<double> proba(static_cast<std::size_t>(model->num_classes()));
  for (std::size_t r = 0; r < eval_.size(); ++r) {
    model->predict_proba(eval_.features.row(r), proba);
    const int label = argmax_class(proba);
    preds->label[r] = label;
    preds->confidence[r] = proba[static_cast<std::size_t>(label)];
  }
  std::lock_guard lock(memo_mutex_);
  auto& slot = memo_[subset];
  if (!slot) slot = std::move(preds);
  return *slot;
}

CascadeOutcome CascadeEvaluator::evaluate_row(const Chromosome& q, std::size_t r) {
  check(q);
  CascadeOutcome out;
  for (int stage = 0; stage < q.stage_count(); ++stage) {
    for (int f : q.stage_features(stage)) out.cost += costs_.costs[static_cast<std::size_t>(f)];
    const auto& preds = predictions(q.cumulative_features(stage));
    out.stage = stage + 1;
    out.label = preds.label[r];
    out.confidence = preds.confidence[r];
    if (out.confidence >= p_hat_) {
      out.conclusive = true;
      return out;
    }
  }
  return out;
}

ObjectiveVector CascadeEvaluator::evaluate(const Chromosome& q) {
  check(q);
  const std::size_t n_rows = eval_.size();
  const int stages = q.stage_count();

  std::vector<const StagePredictions*> preds;
  std::vector<double> stage_cost;
  preds.reserve(static_cast<std::size_t>(stages));
  for (int s = 0; s < stages; ++s) {
    preds.push_back(&predictions(q.cumulative_features(s)));
    double c = 0.0;
    for (int f : q.stage_features(s)) c += costs_.costs[static_cast<std::size_t>(f)];
    stage_cost.push_back(c);
  }

  std::size_t conclusive = 0;
  std::size_t correct = 0;
  double total_cost = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    double cost = 0.0;
    for (int s = 0; s < stages; ++s) {
      cost += stage_cost[static_cast<std::size_t>(s)];
      const auto& p = *preds[static_cast<std::size_t>(s)];
      if (p.confidence[r] >= p_hat_) {
        ++conclusive;
        if (p.label[r] == eval_.labels[r]) ++correct;
        break;
      }
    }
    total_cost += cost;
  }

  ObjectiveVector out;
  out.g1 = static_cast<double>(conclusive) / static_cast<double>(n_rows);
  out.g2 = conclusive == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(conclusive);
  out.g3_raw = total_cost / static_cast<double>(n_rows);
  return out;
}

// ---------------------------------------------------------------------------

double normalize_costs(std::span<ObjectiveVector> members) {
  if (members.empty()) return 0.0;
  double lowest = members.front().g3_raw;
  for (const auto& m : members) {
    if (!(m.g3_raw > 0.0)) throw Error("raw cost must be positive to normalize");
    lowest = std::min(lowest, m.g3_raw);
  }
  for (auto& m : members) m.g3 = lowest / m.g3_raw;
  return lowest;
}

double global_inverse_cost(double g3_raw, double space_min) {
  if (!(space_min > 0.0) || !(g3_raw > 0.0)) throw Error("costs must be positive");
  return space_min / g3_raw;
}

}  // namespace emsco
