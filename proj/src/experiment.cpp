#include "emsco/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <map>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "emsco/io.hpp"

namespace emsco {

namespace {

CostScaling parse_scaling(const std::string& s) {
  if (s == "power10") return CostScaling::Power10;
  if (s == "linear100") return CostScaling::Linear100;
  throw Error("scaling must be power10 or linear100, got '" + s + "'");
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

nlohmann::ordered_json objectives_json(const ObjectiveVector& o, bool with_g3) {
  nlohmann::ordered_json j{{"g1", o.g1}, {"g2", o.g2}};
  if (with_g3) j["g3"] = o.g3;
  j["g3_raw"] = o.g3_raw;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  const nlohmann::json empty = nlohmann::json::object();
  auto section = [&](const char* key) -> const nlohmann::json& { return j.contains(key) ? j.at(key) : empty; };

  const auto& data = section("data");
  c.csv_path = data.value("csv", c.csv_path);
  c.cost_path = data.value("costs", c.cost_path);

  const auto& synth = section("synth");
  c.synth.num_features = synth.value("features", c.synth.num_features);
  c.synth.num_samples = synth.value("samples", c.synth.num_samples);
  c.synth.num_classes = synth.value("classes", c.synth.num_classes);
  c.synth.num_informative = synth.value("informative", c.synth.num_informative);
  c.synth.seed = synth.value("seed", c.synth.seed);
  c.synth.class_separation = synth.value("separation", c.synth.class_separation);
  c.synth_cost_buckets = synth.value("cost_buckets", c.synth_cost_buckets);
  c.synth_scaling = parse_scaling(synth.value("scaling", to_string(c.synth_scaling)));

  const auto& split = section("split");
  c.split.train = split.value("train", c.split.train);
  c.split.validation = split.value("validation", c.split.validation);
  c.split.test = split.value("test", c.split.test);
  c.split.seed = split.value("seed", c.split.seed);

  const auto& evo = section("evolution");
  auto& e = c.evolution;
  e.mutation_rate = evo.value("mutation_rate", e.mutation_rate);
  e.recombination_rate = evo.value("recombination_rate", e.recombination_rate);
  e.elite_fraction = evo.value("elite_fraction", e.elite_fraction);
  e.population_size = evo.value("population_size", e.population_size);
  e.mutation_bias = evo.value("mutation_bias", e.mutation_bias);
  if (evo.contains("max_stages") && !evo.at("max_stages").is_null()) {
    e.max_stages = evo.at("max_stages").get<int>();
    c.max_stages_explicit = true;
  }
  e.p_hat = evo.value("p_hat", e.p_hat);
  e.epsilon = evo.value("epsilon", e.epsilon);
  e.max_iterations = evo.value("max_iterations", e.max_iterations);
  e.patience = evo.value("patience", e.patience);

  c.lambda = section("classifier").value("lambda", c.lambda);
  c.lasso_step = section("baselines").value("lasso_step", c.lasso_step);
  c.lasso_max = section("baselines").value("lasso_max", c.lasso_max);

  const auto& oracle = section("oracle");
  c.oracle_k = oracle.value("k", c.oracle_k);
  c.enumeration_cap = oracle.value("cap", c.enumeration_cap);
  c.force_enumeration = oracle.value("force", c.force_enumeration);

  c.neighborhood_chromosome = section("neighborhood").value("chromosome", c.neighborhood_chromosome);

  const auto& inputs = section("inputs");
  c.global_front_path = inputs.value("global_front", c.global_front_path);
  c.run_report_path = inputs.value("run_report", c.run_report_path);
  c.baselines_path = inputs.value("baselines", c.baselines_path);
  c.external_rows_path = inputs.value("external_rows", c.external_rows_path);

  c.seed = j.value("seed", c.seed);
  c.runs = j.value("runs", c.runs);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.record_elites = j.value("record_elites", c.record_elites);
  return c;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data"] = {{"csv", csv_path}, {"costs", cost_path}};
  j["synth"] = {{"features", synth.num_features},   {"samples", synth.num_samples},
                {"classes", synth.num_classes},     {"informative", synth.num_informative},
                {"seed", synth.seed},               {"separation", synth.class_separation},
                {"cost_buckets", synth_cost_buckets}, {"scaling", to_string(synth_scaling)}};
  j["split"] = {{"train", split.train}, {"validation", split.validation}, {"test", split.test}, {"seed", split.seed}};
  const auto& e = evolution;
  j["evolution"] = {{"mutation_rate", e.mutation_rate},
                    {"recombination_rate", e.recombination_rate},
                    {"elite_fraction", e.elite_fraction},
                    {"population_size", e.population_size},
                    {"mutation_bias", e.mutation_bias},
                    {"max_stages", max_stages_explicit ? nlohmann::ordered_json(e.max_stages) : nlohmann::ordered_json()},
                    {"p_hat", e.p_hat},
                    {"epsilon", e.epsilon},
                    {"max_iterations", e.max_iterations},
                    {"patience", e.patience}};
  j["classifier"] = {{"lambda", lambda}, {"kind", "L2"}};
  j["baselines"] = {{"lasso_step", lasso_step}, {"lasso_max", lasso_max}};
  j["oracle"] = {{"k", oracle_k}, {"cap", enumeration_cap}, {"force", force_enumeration}};
  j["neighborhood"] = {{"chromosome", neighborhood_chromosome}};
  j["inputs"] = {{"global_front", global_front_path},
                 {"run_report", run_report_path},
                 {"baselines", baselines_path},
                 {"external_rows", external_rows_path}};
  j["seed"] = seed;
  j["runs"] = runs;
  j["out_dir"] = out_dir;
  j["record_elites"] = record_elites;
  return j;
}

void RunConfig::validate() const {
  split.validate();
  evolution.validate(0);
  if (runs < 1) throw Error("runs must be at least 1");
  if (lambda < 0.0) throw Error("classifier lambda must be non-negative");
  if (!(lasso_step > 0.0) || lasso_max < 0.0) throw Error("lasso grid needs a positive step");
  if (oracle_k < 1) throw Error("oracle k must be at least 1");
  if (synth_cost_buckets < 1) throw Error("synth cost_buckets must be positive");
  if (csv_path.empty() != cost_path.empty()) throw Error("data.csv and data.costs must be given together");
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw Error("bad override key '" + key + "'");
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    try {
      doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error("config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

int default_max_stages(std::size_t num_features) {
  const int half = static_cast<int>((num_features + 1) / 2);
  return std::min(static_cast<int>(num_features), std::max(half, 10));
}

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(const RunConfig& cfg) : cfg_(cfg) {
  if (cfg_.csv_path.empty()) {
    Dataset data = make_synthetic(cfg_.synth);
    costs_ = assign_gini_cost_classes(data, cfg_.synth_cost_buckets, cfg_.synth_scaling, cfg_.synth.seed);
    prepare(std::move(data));
  } else {
    auto loaded = load_csv(cfg_.csv_path, cfg_.cost_path);
    costs_ = std::move(loaded.costs);
    prepare(std::move(loaded.dataset));
  }
}

Experiment::Experiment(Dataset data, CostSchema costs, const RunConfig& cfg) : cfg_(cfg), costs_(std::move(costs)) {
  prepare(std::move(data));
}

void Experiment::prepare(Dataset data) {
  data.validate();
  if (data.num_features() != costs_.size()) throw Error("cost schema and dataset disagree on feature count");
  evolution_ = cfg_.evolution;
  if (!cfg_.max_stages_explicit) evolution_.max_stages = default_max_stages(data.num_features());
  evolution_.validate(data.num_features());

  auto parts = split(data, cfg_.split);
  auto standardized = impute_standardize(parts.train, {parts.validation, parts.test});
  sets_ = {std::move(standardized.train), std::move(standardized.others[0]), std::move(standardized.others[1])};
  cache_ = std::make_unique<ClassifierCache>(train(), Regularization{Penalty::L2, cfg_.lambda});
  validation_eval_ = std::make_unique<CascadeEvaluator>(*cache_, validation(), costs_, evolution_.p_hat);
  test_eval_ = std::make_unique<CascadeEvaluator>(*cache_, test(), costs_, evolution_.p_hat);
}

ObjectiveFn Experiment::validation_objectives() {
  return [eval = validation_eval_.get()](const Chromosome& q) { return eval->evaluate(q); };
}

std::vector<RunSummary> run_experiment(Experiment& exp, const std::vector<Chromosome>& planted) {
  const int runs = exp.config().runs;
  std::vector<RunSummary> out(static_cast<std::size_t>(runs));
  const ObjectiveFn objectives = exp.validation_objectives();
  RunOptions options;
  options.planted = planted;
  options.record_elites = exp.config().record_elites;

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < runs; i = next++) {
      EvolutionConfig cfg = exp.evolution();
      cfg.seed = exp.config().seed + static_cast<std::uint64_t>(i);
      auto& slot = out[static_cast<std::size_t>(i)];
      slot.seed = cfg.seed;
      slot.result = run_evolution(cfg, exp.num_features(), objectives, options);
      slot.best_test = exp.test_evaluator().evaluate(slot.result.front.front().chromosome);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(runs)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

nlohmann::ordered_json run_report_json(const Experiment& exp, const std::vector<RunSummary>& runs) {
  nlohmann::ordered_json j;
  j[kTimestampKey] = current_timestamp();
  j["config"] = exp.config().to_json();
  j["config"]["evolution"]["max_stages"] = exp.evolution().max_stages;
  j["dataset"] = {{"features", exp.num_features()},
                  {"classes", exp.train().num_classes},
                  {"train", exp.train().size()},
                  {"validation", exp.validation().size()},
                  {"test", exp.test().size()},
                  {"cost_classes", exp.costs().cost_classes},
                  {"costs", exp.costs().costs},
                  {"total_cost", exp.costs().total()}};
  auto& arr = j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : runs) {
    nlohmann::ordered_json r;
    r["seed"] = run.seed;
    r["generations"] = run.result.generations;
    r["stop"] = to_string(run.result.stop);
    r["evaluations"] = run.result.evaluations;
    auto& hist = r["history"] = nlohmann::ordered_json::array();
    for (const auto& h : run.result.history) {
      nlohmann::ordered_json g{{"generation", h.index},
                               {"top_fitness", h.top_fitness},
                               {"top", h.top.to_string()},
                               {"front_size", h.front_size},
                               {"unique", h.unique_count}};
      if (exp.config().record_elites) {
        auto& elite = g["elite"] = nlohmann::ordered_json::array();
        for (const auto& e : h.elite) elite.push_back(e.to_string());
      }
      hist.push_back(std::move(g));
    }
    auto& front = r["front"] = nlohmann::ordered_json::array();
    for (const auto& m : run.result.front) {
      auto entry = objectives_json(m.objectives, true);
      entry["chromosome"] = m.chromosome.to_string();
      entry["rank"] = m.rank;
      entry["fitness"] = m.fitness;
      front.push_back(std::move(entry));
    }
    const auto& best = run.result.front.front();
    r["best"] = {{"chromosome", best.chromosome.to_string()},
                 {"validation", objectives_json(best.objectives, true)},
                 {"test", objectives_json(run.best_test, false)}};
    arr.push_back(std::move(r));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Reporting

MeanInterval mean_interval(std::vector<double> samples, double confidence) {
  MeanInterval out;
  out.count = samples.size();
  if (samples.empty()) return out;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / static_cast<double>(samples.size());
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  const boost::math::students_t dist(static_cast<double>(samples.size() - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
  out.margin = t * sd / std::sqrt(static_cast<double>(samples.size()));
  return out;
}

namespace {

struct MetricRows {
  std::vector<double> g1, g2, g3_raw, aggregate;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace

ComparisonTables build_report(const nlohmann::json& run_report, const std::optional<GlobalFront>& front,
                              const std::vector<nlohmann::json>& baseline_rows,
                              const std::string& external_rows_csv) {
  const double total_cost = run_report.at("dataset").at("total_cost").get<double>();
  std::map<std::string, MetricRows> by_method;
  auto add = [&](const std::string& method, double g1, double g2, double g3_raw, double aggregate) {
    auto& rows = by_method[method];
    rows.g1.push_back(g1);
    rows.g2.push_back(g2);
    rows.g3_raw.push_back(g3_raw);
    rows.aggregate.push_back(aggregate);
  };

  for (const auto& run : run_report.at("runs")) {
    const auto& t = run.at("best").at("test");
    const double g1 = t.at("g1"), g2 = t.at("g2"), g3 = t.at("g3_raw");
    add("EMSCO", g1, g2, g3, aggregate_metric(g1, g2, g3, total_cost));
  }
  for (const auto& b : baseline_rows) {
    const double g1 = b.at("g1"), g2 = b.at("g2"), g3 = b.at("g3_raw");
    add(b.at("method").get<std::string>(), g1, g2, g3,
        b.contains("aggregate") ? b.at("aggregate").get<double>() : aggregate_metric(g1, g2, g3, total_cost));
  }
  if (!external_rows_csv.empty()) {
    std::istringstream in(external_rows_csv);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> std::ptrdiff_t {
      const auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? -1 : it - header.begin();
    };
    const auto c_method = column("method"), c_g1 = column("g1"), c_g2 = column("g2"), c_g3 = column("g3_raw");
    const auto c_agg = column("aggregate");
    if (c_method < 0 || c_g1 < 0 || c_g2 < 0 || c_g3 < 0)
      throw Error("external rows need method, g1, g2 and g3_raw columns");
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
      const auto cells = split_csv_line(line);
      auto num = [&](std::ptrdiff_t c) { return std::stod(cells.at(static_cast<std::size_t>(c))); };
      const double g1 = num(c_g1), g2 = num(c_g2), g3 = num(c_g3);
      add(cells.at(static_cast<std::size_t>(c_method)), g1, g2, g3,
          c_agg >= 0 && static_cast<std::size_t>(c_agg) < cells.size() && !cells[static_cast<std::size_t>(c_agg)].empty()
              ? num(c_agg)
              : aggregate_metric(g1, g2, g3, total_cost));
    }
  }

  ComparisonTables out;
  std::ostringstream cmp;
  cmp << "method,runs,g1_mean,g1_moe,g2_mean,g2_moe,g3_raw_mean,g3_raw_moe,aggregate_mean,aggregate_moe\n";
  for (const auto& [method, rows] : by_method) {
    const auto g1 = mean_interval(rows.g1), g2 = mean_interval(rows.g2);
    const auto g3 = mean_interval(rows.g3_raw), agg = mean_interval(rows.aggregate);
    cmp << method << ',' << g1.count << ',' << fmt(g1.mean) << ',' << fmt(g1.margin) << ',' << fmt(g2.mean) << ','
        << fmt(g2.margin) << ',' << fmt(g3.mean) << ',' << fmt(g3.margin) << ',' << fmt(agg.mean) << ','
        << fmt(agg.margin) << '\n';
  }
  out.comparison_csv = cmp.str();

  // Per-generation curves. A run that halted early keeps contributing its
  // final generation, which is what it returned.
  const auto& runs = run_report.at("runs");
  std::size_t longest = 0;
  for (const auto& run : runs) longest = std::max(longest, run.at("history").size());
  std::ostringstream curves;
  curves << "generation,runs,front_size_mean,optimal_mean,optimal_lower,optimal_upper\n";
  for (std::size_t h = 0; h < longest; ++h) {
    std::vector<double> sizes, optimal;
    for (const auto& run : runs) {
      const auto& hist = run.at("history");
      const auto& g = hist.at(std::min(h, hist.size() - 1));
      sizes.push_back(g.at("front_size").get<double>());
      if (front && g.contains("elite")) {
        std::size_t hits = 0;
        for (const auto& e : g.at("elite"))
          if (front->contains(Chromosome::parse(e.get<std::string>()))) ++hits;
        optimal.push_back(static_cast<double>(hits));
      }
    }
    curves << h << ',' << runs.size() << ',' << fmt(mean_interval(sizes).mean);
    if (!optimal.empty()) {
      const auto ci = mean_interval(optimal);
      curves << ',' << fmt(ci.mean) << ',' << fmt(ci.mean - ci.margin) << ',' << fmt(ci.mean + ci.margin);
    } else {
      curves << ",,,";
    }
    curves << '\n';
  }
  out.curves_csv = curves.str();
  return out;
}

std::string current_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace emsco
