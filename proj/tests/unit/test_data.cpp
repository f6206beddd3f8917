#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "emsco/data.hpp"
#include "emsco/io.hpp"
#include "fixtures.hpp"

using namespace emsco;
using emsco::testing::make_dataset;

TEST_CASE("power-of-ten costs for the twelve heart-disease cost classes") {
  const std::vector<int> classes{1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 1, 1};
  const auto schema = CostSchema::make(classes, CostScaling::Power10);
  // 4 features at 10 and 8 features at 100.
  CHECK(schema.total() == doctest::Approx(840.0));
  CHECK(schema.costs[0] == 10.0);
  CHECK(schema.costs[1] == 100.0);
}

TEST_CASE("linear and custom cost scaling") {
  CHECK(scale_cost(3, CostScaling::Linear100) == 300.0);
  CHECK(scale_cost(1, CostScaling::Power10) == 10.0);
  CHECK(scale_cost(2, CostScaling::Custom, {{1, 0.5}, {2, 7.0}}) == 7.0);
  CHECK_THROWS_AS(scale_cost(0, CostScaling::Linear100), Error);
  CHECK_THROWS_AS(scale_cost(3, CostScaling::Custom, {{1, 1.0}}), Error);
  CHECK_THROWS_AS(CostSchema::make({1, 2}, CostScaling::Custom, {{1, 1.0}, {2, -1.0}}), Error);
}

TEST_CASE("CSV parsing handles missing cells and label encodings") {
  const auto ds = parse_csv("a,b,label\n1,,yes\n2,3,no\n,4,yes\n");
  CHECK(ds.size() == 3);
  CHECK(ds.num_features() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(is_missing(ds.features(0, 1)));
  CHECK(is_missing(ds.features(2, 0)));
  CHECK(ds.features(1, 1) == 3.0);
  CHECK(ds.has_missing());

  const auto numeric = parse_csv("x,y\n0.5,2\n1.5,0\n2.5,1\n");
  CHECK(numeric.labels == std::vector<int>{2, 0, 1});
  CHECK(numeric.num_classes == 3);

  CHECK_THROWS_AS(parse_csv(""), Error);
  CHECK_THROWS_AS(parse_csv("a,label\n1,0,5\n"), Error);
  CHECK_THROWS_AS(parse_csv("a,label\nfoo,0\nbar,1\n"), Error);
}

TEST_CASE("load_csv reads the cost file and categorical flags") {
  const auto dir = emsco::testing::scratch_dir("load_csv");
  write_file_atomic((dir / "d.csv").string(), "a,b,c,label\n1,2,3,0\n4,5,6,1\n7,8,9,0\n");
  write_file_atomic((dir / "c.json").string(),
                    R"({"scaling": "power10", "classes": {"a": 1, "b": 2, "c": 3}, "categorical": ["b"]})");
  const auto loaded = load_csv((dir / "d.csv").string(), (dir / "c.json").string());
  CHECK(loaded.costs.costs == std::vector<double>{10.0, 100.0, 1000.0});
  CHECK(loaded.dataset.categorical == std::vector<bool>{false, true, false});

  write_file_atomic((dir / "bad.json").string(), R"({"scaling": "power10", "classes": {"a": 1, "b": 2}})");
  CHECK_THROWS_AS(load_csv((dir / "d.csv").string(), (dir / "bad.json").string()), Error);
  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string(), (dir / "c.json").string()), Error);
}

TEST_CASE("cost schema JSON round trip") {
  const auto schema = CostSchema::make({3, 1, 2}, CostScaling::Linear100);
  const auto text = cost_schema_json(schema, {"x", "y", "z"});
  const auto back = parse_cost_schema(text, {"x", "y", "z"});
  CHECK(back.cost_classes == schema.cost_classes);
  CHECK(back.costs == schema.costs);

  const auto custom = CostSchema::make({1, 2}, CostScaling::Custom, {{1, 0.25}, {2, 4.0}});
  const auto custom_back = parse_cost_schema(cost_schema_json(custom, {"p", "q"}), {"p", "q"});
  CHECK(custom_back.costs == custom.costs);
}

TEST_CASE("CSV write and parse round trip preserves values") {
  const auto ds = make_synthetic({4, 30, 3, 2, 5, 1.5});
  const auto back = parse_csv(to_csv(ds));
  CHECK(back.labels == ds.labels);
  CHECK(back.features.values() == ds.features.values());
}

TEST_CASE("split is stratified, disjoint, exhaustive and seeded") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i < 60 ? 0 : 1);
  }
  const auto ds = make_dataset(rows, labels, 2);
  const auto parts = split(ds, {0.5, 0.25, 0.25, 9});
  CHECK(parts.train.size() == 50);
  CHECK(parts.validation.size() == 25);
  CHECK(parts.test.size() == 25);

  std::set<std::size_t> all;
  for (const auto* v : {&parts.train_rows, &parts.validation_rows, &parts.test_rows}) all.insert(v->begin(), v->end());
  CHECK(all.size() == 100);

  auto count1 = [](const Dataset& d) { return std::count(d.labels.begin(), d.labels.end(), 1); };
  CHECK(count1(parts.train) == 20);
  CHECK(std::abs(count1(parts.validation) - 10) <= 1);
  CHECK(std::abs(count1(parts.test) - 10) <= 1);

  const auto again = split(ds, {0.5, 0.25, 0.25, 9});
  CHECK(again.train_rows == parts.train_rows);
  const auto other = split(ds, {0.5, 0.25, 0.25, 10});
  CHECK(other.train_rows != parts.train_rows);

  CHECK_THROWS_AS(split(ds, {0.5, 0.5, 0.5, 0}), Error);
  CHECK_THROWS_AS(split(ds, {-0.1, 0.6, 0.5, 0}), Error);
}

TEST_CASE("split sizes stay within one row of N times each fraction") {
  for (int n : {7, 13, 41, 99}) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      rows.push_back({static_cast<double>(i)});
      labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    const auto parts = split(make_dataset(rows, labels, 2), {0.6, 0.2, 0.2, 1});
    CHECK(parts.train.size() + parts.validation.size() + parts.test.size() == static_cast<std::size_t>(n));
    CHECK(std::abs(static_cast<double>(parts.train.size()) - 0.6 * n) < 1.0);
    CHECK(std::abs(static_cast<double>(parts.validation.size()) - 0.2 * n) < 1.0);
  }
}

TEST_CASE("imputation and standardization use training statistics only") {
  auto train = make_dataset({{1.0, 5.0, 2.0}, {3.0, 5.0, kMissing}, {kMissing, 5.0, 2.0}, {2.0, 5.0, 7.0}},
                            {0, 1, 0, 1}, 2);
  train.categorical[2] = true;
  const auto other = make_dataset({{kMissing, 6.0, kMissing}}, {0}, 2);
  const auto out = impute_standardize(train, {other});

  // Column 0: observed {1, 3, 2}, mean 2 fills the gap; population sd of {1,3,2,2}.
  const double sd0 = std::sqrt(0.5);
  CHECK(out.transform.fill[0] == doctest::Approx(2.0));
  CHECK(out.train.features(0, 0) == doctest::Approx(-1.0 / sd0));
  CHECK(out.train.features(2, 0) == doctest::Approx(0.0));
  // Column 1 is constant: centred and divided by 1.
  CHECK(out.transform.scale[1] == 1.0);
  CHECK(out.train.features(0, 1) == 0.0);
  CHECK(out.others[0].features(0, 1) == 1.0);
  // Column 2 is categorical: the mode 2 fills the gap.
  CHECK(out.transform.fill[2] == 2.0);
  CHECK_FALSE(out.train.has_missing());
  CHECK_FALSE(out.others[0].has_missing());

  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < 4; ++r) sum += out.train.features(r, c);
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("synthetic data is deterministic and balanced") {
  const SyntheticSpec spec{10, 300, 3, 6, 42, 1.5};
  const auto a = make_synthetic(spec);
  const auto b = make_synthetic(spec);
  CHECK(a.features.values() == b.features.values());
  CHECK(a.labels == b.labels);
  CHECK(a.num_features() == 10);
  CHECK(a.size() == 300);
  for (int c = 0; c < 3; ++c) CHECK(std::count(a.labels.begin(), a.labels.end(), c) == 100);
  CHECK_NOTHROW(a.validate());

  auto other = spec;
  other.seed = 43;
  CHECK(make_synthetic(other).features.values() != a.features.values());
}

TEST_CASE("Gini importance ranks informative columns above noise") {
  const auto ds = make_synthetic({8, 600, 2, 3, 5, 2.0});
  const auto imp = gini_importance(ds, 1);
  const double weakest_informative = *std::min_element(imp.begin(), imp.begin() + 3);
  const double strongest_noise = *std::max_element(imp.begin() + 3, imp.end());
  CHECK(weakest_informative > strongest_noise);
}

TEST_CASE("percentile buckets") {
  CHECK(cost_class_for_percentile(0.0, 5) == 1);
  CHECK(cost_class_for_percentile(0.2, 5) == 1);
  CHECK(cost_class_for_percentile(0.21, 5) == 2);
  CHECK(cost_class_for_percentile(0.6, 5) == 3);
  CHECK(cost_class_for_percentile(1.0, 5) == 5);
}

TEST_CASE("importance ranks map onto cost classes") {
  const std::vector<double> imp{0.1, 0.5, 0.3, 0.2};
  CHECK(cost_classes_from_importance(imp, 2) == std::vector<int>{1, 2, 2, 1});
  CHECK(cost_classes_from_importance(imp, 4) == std::vector<int>{1, 4, 3, 2});
  // Ties: the lower index ranks as less important.
  const std::vector<double> tied{0.3, 0.3, 0.3};
  CHECK(cost_classes_from_importance(tied, 3) == std::vector<int>{1, 2, 3});
}

TEST_CASE("dataset validation rejects malformed tables") {
  auto ds = make_dataset({{1.0}, {2.0}}, {0, 1}, 2);
  CHECK_NOTHROW(ds.validate());
  ds.labels[1] = 2;
  CHECK_THROWS_AS(ds.validate(), Error);
  auto one_class = make_dataset({{1.0}}, {0}, 1);
  CHECK_THROWS_AS(one_class.validate(), Error);
}
