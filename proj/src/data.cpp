#include "emsco/data.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "emsco/io.hpp"

namespace emsco {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

bool parse_label_index(const std::string& s, int& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && out >= 0;
}

double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

}  // namespace

bool Dataset::has_missing() const {
  return std::any_of(features.values().begin(), features.values().end(),
                     [](double v) { return is_missing(v); });
}

void Dataset::validate() const {
  if (labels.empty()) throw Error("dataset has no rows");
  if (features.cols() == 0) throw Error("dataset has no features");
  if (features.rows() != labels.size()) throw Error("feature rows and label count differ");
  if (feature_names.size() != features.cols()) throw Error("feature name count differs from column count");
  if (!categorical.empty() && categorical.size() != features.cols())
    throw Error("categorical flag count differs from column count");
  if (num_classes < 2) throw Error("dataset needs at least two classes");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw Error("label index out of range");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = Matrix(rows.size(), num_features());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[rows[i]]);
  }
  out.feature_names = feature_names;
  out.categorical = categorical;
  out.num_classes = num_classes;
  return out;
}

// ---------------------------------------------------------------------------
// Costs

double scale_cost(int cost_class, CostScaling scaling, const std::map<int, double>& table) {
  if (cost_class <= 0) throw Error("cost class must be positive, got " + std::to_string(cost_class));
  switch (scaling) {
    case CostScaling::Power10:
      return std::pow(10.0, cost_class);
    case CostScaling::Linear100:
      return 100.0 * cost_class;
    case CostScaling::Custom: {
      const auto it = table.find(cost_class);
      if (it == table.end()) throw Error("custom cost table has no entry for class " + std::to_string(cost_class));
      if (!(it->second > 0.0)) throw Error("custom cost table maps class " + std::to_string(cost_class) + " to a non-positive cost");
      return it->second;
    }
  }
  throw Error("unknown cost scaling");
}

std::string to_string(CostScaling scaling) {
  switch (scaling) {
    case CostScaling::Power10: return "power10";
    case CostScaling::Linear100: return "linear100";
    case CostScaling::Custom: return "custom";
  }
  return "unknown";
}

CostSchema CostSchema::make(std::vector<int> classes, CostScaling scaling, std::map<int, double> table) {
  CostSchema out;
  out.scaling = scaling;
  out.table = std::move(table);
  out.costs.reserve(classes.size());
  for (int t : classes) out.costs.push_back(scale_cost(t, scaling, out.table));
  out.cost_classes = std::move(classes);
  return out;
}

double CostSchema::total() const { return std::accumulate(costs.begin(), costs.end(), 0.0); }

CostSchema parse_cost_schema(const std::string& json_text, const std::vector<std::string>& feature_names) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("cost file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("classes") || !doc.contains("scaling"))
    throw Error("cost file needs \"scaling\" and \"classes\" keys");

  CostScaling scaling;
  std::map<int, double> table;
  const auto& s = doc["scaling"];
  if (s.is_string()) {
    if (s == "power10") scaling = CostScaling::Power10;
    else if (s == "linear100") scaling = CostScaling::Linear100;
    else throw Error("unknown cost scaling '" + s.get<std::string>() + "'");
  } else if (s.is_object() && s.contains("table") && s["table"].is_object()) {
    scaling = CostScaling::Custom;
    for (const auto& [key, value] : s["table"].items()) {
      int cls = 0;
      if (!parse_label_index(key, cls) || !value.is_number())
        throw Error("custom cost table entries must map an integer class to a number");
      table[cls] = value.get<double>();
    }
  } else {
    throw Error("\"scaling\" must be \"power10\", \"linear100\" or {\"table\": {...}}");
  }

  const auto& classes = doc["classes"];
  if (!classes.is_object()) throw Error("\"classes\" must map feature names to cost classes");
  std::unordered_map<std::string, int> by_name;
  for (const auto& [name, value] : classes.items()) {
    if (std::find(feature_names.begin(), feature_names.end(), name) == feature_names.end())
      throw Error("cost file names unknown feature '" + name + "'");
    if (!value.is_number_integer()) throw Error("cost class for '" + name + "' is not an integer");
    const int t = value.get<int>();
    if (t <= 0) throw Error("cost class for '" + name + "' must be positive");
    by_name[name] = t;
  }
  std::vector<int> ordered;
  ordered.reserve(feature_names.size());
  for (const auto& name : feature_names) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw Error("cost file has no class for feature '" + name + "'");
    ordered.push_back(it->second);
  }
  return CostSchema::make(std::move(ordered), scaling, std::move(table));
}

std::string cost_schema_json(const CostSchema& costs, const std::vector<std::string>& feature_names) {
  nlohmann::ordered_json doc;
  if (costs.scaling == CostScaling::Custom) {
    nlohmann::ordered_json table = nlohmann::ordered_json::object();
    for (const auto& [cls, cost] : costs.table) table[std::to_string(cls)] = cost;
    doc["scaling"] = {{"table", table}};
  } else {
    doc["scaling"] = to_string(costs.scaling);
  }
  doc["classes"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < feature_names.size(); ++i) doc["classes"][feature_names[i]] = costs.cost_classes.at(i);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// CSV

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("CSV is empty");
  const auto header = split_fields(line);
  if (header.size() < 2) throw Error("CSV needs at least one feature column and a label column");
  const std::size_t n = header.size() - 1;

  std::vector<double> cells;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw Error("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(header.size()));
    for (std::size_t j = 0; j < n; ++j) {
      double v = kMissing;
      if (!fields[j].empty() && !parse_double(fields[j], v))
        throw Error("CSV line " + std::to_string(line_no) + ": '" + fields[j] + "' is not a number");
      cells.push_back(v);
    }
    if (fields[n].empty()) throw Error("CSV line " + std::to_string(line_no) + " is missing its label");
    raw_labels.push_back(fields[n]);
  }
  if (raw_labels.empty()) throw Error("CSV has no data rows");

  Dataset ds;
  ds.features = Matrix(raw_labels.size(), n);
  std::copy(cells.begin(), cells.end(), ds.features.row(0).begin());
  for (std::size_t r = 1; r < raw_labels.size(); ++r)
    std::copy(cells.begin() + r * n, cells.begin() + (r + 1) * n, ds.features.row(r).begin());
  ds.feature_names.assign(header.begin(), header.end() - 1);
  ds.categorical.assign(n, false);

  bool integral = true;
  std::vector<int> ints;
  for (const auto& s : raw_labels) {
    int v = 0;
    if (!parse_label_index(s, v)) {
      integral = false;
      break;
    }
    ints.push_back(v);
  }
  if (integral) {
    ds.labels = std::move(ints);
    ds.num_classes = std::max(2, *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
  } else {
    std::vector<std::string> seen;
    for (const auto& s : raw_labels) {
      auto it = std::find(seen.begin(), seen.end(), s);
      if (it == seen.end()) {
        seen.push_back(s);
        it = seen.end() - 1;
      }
      ds.labels.push_back(static_cast<int>(it - seen.begin()));
    }
    ds.num_classes = std::max<int>(2, static_cast<int>(seen.size()));
  }
  ds.validate();
  return ds;
}

LoadedData load_csv(const std::string& csv_path, const std::string& cost_path) {
  LoadedData out;
  out.dataset = parse_csv(read_file(csv_path));
  const std::string cost_text = read_file(cost_path);
  out.costs = parse_cost_schema(cost_text, out.dataset.feature_names);
  // Optional "categorical": [names] selects mode imputation for those columns.
  const auto doc = nlohmann::json::parse(cost_text);
  if (doc.contains("categorical")) {
    for (const auto& name : doc["categorical"]) {
      const auto& names = out.dataset.feature_names;
      const auto it = std::find(names.begin(), names.end(), name.get<std::string>());
      if (it == names.end()) throw Error("categorical flag names unknown feature '" + name.get<std::string>() + "'");
      out.dataset.categorical[static_cast<std::size_t>(it - names.begin())] = true;
    }
  }
  return out;
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "label\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.features.row(r)) {
      if (!is_missing(v)) out << v;
      out << ',';
    }
    out << ds.labels[r] << '\n';
  }
  return out.str();
}

void write_csv(const Dataset& ds, const std::string& path) {
  write_file_atomic(path, to_csv(ds));
}

// ---------------------------------------------------------------------------
// Splitting and preprocessing

void SplitSpec::validate() const {
  if (!(train > 0.0 && validation > 0.0 && test > 0.0)) throw Error("split fractions must all be positive");
  if (std::abs(train + validation + test - 1.0) > 1e-9) throw Error("split fractions must sum to 1");
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  ds.validate();
  const std::size_t n = ds.size();
  if (n < 4) throw Error("splitting needs at least 4 rows");

  // Largest-remainder apportionment of the set sizes.
  const std::array<double, 3> fractions{spec.train, spec.validation, spec.test};
  std::array<std::size_t, 3> target{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(n);
    target[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[s] = exact - static_cast<double>(target[s]);
    assigned += target[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++target[order[i % 3]];
  for (std::size_t s = 0; s < 3; ++s)
    if (target[s] == 0) throw Error("split fractions leave an empty partition");

  // Shuffle within each class, lay classes end to end, then deal positions
  // to the set furthest behind its proportional quota. Every class block is
  // therefore spread proportionally across the three sets.
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::vector<std::size_t> sequence;
  sequence.reserve(n);
  for (auto& members : by_class) {
    rng.shuffle(members);
    sequence.insert(sequence.end(), members.begin(), members.end());
  }

  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < 3; ++s) {
      if (parts[s].size() >= target[s]) continue;
      const double deficit = static_cast<double>(target[s]) * static_cast<double>(p + 1) / static_cast<double>(n) -
                             static_cast<double>(parts[s].size());
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    parts[best].push_back(sequence[p]);
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());

  Split out;
  out.train = ds.subset(parts[0]);
  out.validation = ds.subset(parts[1]);
  out.test = ds.subset(parts[2]);
  out.train_rows = std::move(parts[0]);
  out.validation_rows = std::move(parts[1]);
  out.test_rows = std::move(parts[2]);
  return out;
}

Dataset StandardizeTransform::apply(const Dataset& ds) const {
  if (ds.num_features() != mean.size()) throw Error("transform fitted on a different feature count");
  Dataset out = ds;
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto row = out.features.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double v = is_missing(row[j]) ? fill[j] : row[j];
      row[j] = (v - mean[j]) / scale[j];
    }
  }
  return out;
}

Standardized impute_standardize(const Dataset& train, const std::vector<Dataset>& others) {
  if (train.size() == 0) throw Error("cannot fit a transform on an empty training set");
  const std::size_t n = train.num_features();
  StandardizeTransform t;
  t.fill.resize(n);
  t.mean.resize(n);
  t.scale.resize(n);

  for (std::size_t j = 0; j < n; ++j) {
    const bool categorical = !train.categorical.empty() && train.categorical[j];
    std::vector<double> present;
    for (std::size_t r = 0; r < train.size(); ++r)
      if (!is_missing(train.features(r, j))) present.push_back(train.features(r, j));

    if (present.empty()) {
      t.fill[j] = 0.0;
    } else if (categorical) {
      std::map<double, std::size_t> counts;
      for (double v : present) ++counts[v];
      // Most frequent value; smallest value on ties.
      t.fill[j] = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
                    return a.second < b.second;
                  })->first;
    } else {
      t.fill[j] = std::accumulate(present.begin(), present.end(), 0.0) / static_cast<double>(present.size());
    }

    double sum = 0.0;
    for (std::size_t r = 0; r < train.size(); ++r) {
      const double v = train.features(r, j);
      sum += is_missing(v) ? t.fill[j] : v;
    }
    const double mu = sum / static_cast<double>(train.size());
    double ss = 0.0;
    for (std::size_t r = 0; r < train.size(); ++r) {
      const double v = train.features(r, j);
      const double d = (is_missing(v) ? t.fill[j] : v) - mu;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(train.size()));
    t.mean[j] = mu;
    t.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mu)) ? sd : 1.0;
  }

  Standardized out;
  out.train = t.apply(train);
  out.others.reserve(others.size());
  for (const auto& ds : others) out.others.push_back(t.apply(ds));
  out.transform = std::move(t);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data and importance-based cost classes

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_features < 1 || spec.num_samples < 1) throw Error("synthetic data needs features and samples");
  if (spec.num_classes < 2) throw Error("synthetic data needs at least two classes");
  if (spec.num_informative < 1 || spec.num_informative > spec.num_features)
    throw Error("informative feature count must lie in [1, num_features]");

  Rng rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.num_features);
  const auto inf = static_cast<std::size_t>(spec.num_informative);
  const auto l = static_cast<std::size_t>(spec.num_classes);

  std::vector<double> strength(inf);
  for (auto& s : strength) s = 0.25 + 0.75 * rng.uniform();

  // Centroids sit on scaled hypercube vertices; sign patterns are kept
  // distinct whenever there are enough vertices.
  const bool can_be_distinct = inf >= 63 || (std::uint64_t{1} << inf) >= l;
  std::vector<std::vector<int>> signs;
  while (signs.size() < l) {
    std::vector<int> pattern(inf);
    for (auto& s : pattern) s = rng.coin() ? 1 : -1;
    if (can_be_distinct && std::find(signs.begin(), signs.end(), pattern) != signs.end()) continue;
    signs.push_back(std::move(pattern));
  }

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.features = Matrix(static_cast<std::size_t>(spec.num_samples), n);
  ds.labels.resize(static_cast<std::size_t>(spec.num_samples));
  std::vector<std::size_t> order(ds.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t r = order[i];
    const std::size_t c = i % l;
    ds.labels[r] = static_cast<int>(c);
    for (std::size_t j = 0; j < inf; ++j)
      ds.features(r, j) = spec.class_separation * strength[j] * signs[c][j] + rng.normal();
  }
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t j = inf; j < n; ++j) ds.features(r, j) = rng.normal();

  ds.feature_names.reserve(n);
  for (std::size_t j = 0; j < n; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.categorical.assign(n, false);
  return ds;
}

std::vector<double> gini_importance(const Dataset& ds, std::uint64_t seed, int bootstraps) {
  ds.validate();
  if (bootstraps < 1) throw Error("need at least one bootstrap resample");
  const std::size_t n = ds.num_features();
  const auto l = static_cast<std::size_t>(ds.num_classes);
  std::vector<double> importance(n, 0.0);
  Rng rng(seed);
  std::vector<std::size_t> sample(ds.size());
  std::vector<std::pair<double, int>> column;

  for (int b = 0; b < bootstraps; ++b) {
    for (auto& s : sample) s = rng.index(ds.size());
    for (std::size_t j = 0; j < n; ++j) {
      column.clear();
      for (std::size_t s : sample)
        if (!is_missing(ds.features(s, j))) column.emplace_back(ds.features(s, j), ds.labels[s]);
      if (column.size() < 2) continue;
      std::sort(column.begin(), column.end());

      std::vector<double> right(l, 0.0), left(l, 0.0);
      for (const auto& [v, y] : column) right[static_cast<std::size_t>(y)] += 1.0;
      const double total = static_cast<double>(column.size());
      const double parent = gini(right, total);
      double best_child = parent;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        const auto y = static_cast<std::size_t>(column[i].second);
        left[y] += 1.0;
        right[y] -= 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        const double child = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        best_child = std::min(best_child, child);
      }
      importance[j] += parent - best_child;
    }
  }
  for (auto& v : importance) v /= static_cast<double>(bootstraps);
  return importance;
}

int cost_class_for_percentile(double percentile, int buckets) {
  if (buckets < 1) throw Error("need at least one cost bucket");
  if (!(percentile >= 0.0 && percentile <= 1.0)) throw Error("percentile must lie in [0, 1]");
  const int cls = static_cast<int>(std::ceil(percentile * buckets - 1e-9));
  return std::clamp(cls, 1, buckets);
}

std::vector<int> cost_classes_from_importance(std::span<const double> importance, int buckets) {
  if (buckets < 1) throw Error("need at least one cost bucket");
  const std::size_t n = importance.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] < importance[b]; });
  std::vector<int> classes(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    // ceil((rank+1) * B / n) in integers, i.e. the bucket of percentile (rank+1)/n.
    const std::size_t numer = (rank + 1) * static_cast<std::size_t>(buckets);
    classes[order[rank]] = static_cast<int>(std::max<std::size_t>(1, (numer + n - 1) / n));
  }
  return classes;
}

CostSchema assign_gini_cost_classes(const Dataset& ds, int buckets, CostScaling scaling, std::uint64_t seed) {
  const auto importance = gini_importance(ds, seed);
  return CostSchema::make(cost_classes_from_importance(importance, buckets), scaling);
}

}  // namespace emsco
