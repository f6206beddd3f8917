#include "commands.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "emsco/io.hpp"

namespace emsco::cli {

namespace fs = std::filesystem;

namespace {

std::string in_out_dir(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

nlohmann::ordered_json header(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j[kTimestampKey] = current_timestamp();
  j["config"] = cfg.to_json();
  return j;
}

std::string input_path(const std::string& configured, const RunConfig& cfg, const std::string& fallback) {
  return configured.empty() ? in_out_dir(cfg, fallback) : configured;
}

nlohmann::ordered_json objectives_json(const ObjectiveVector& o) {
  return {{"g1", o.g1}, {"g2", o.g2}, {"g3", o.g3}, {"g3_raw", o.g3_raw}};
}

}  // namespace

Artifacts cmd_synth(const RunConfig& cfg) {
  const Dataset data = make_synthetic(cfg.synth);
  const CostSchema costs = assign_gini_cost_classes(data, cfg.synth_cost_buckets, cfg.synth_scaling, cfg.synth.seed);
  return {{in_out_dir(cfg, "synthetic.csv"), to_csv(data)},
          {in_out_dir(cfg, "synthetic_costs.json"), cost_schema_json(costs, data.feature_names)}};
}

Artifacts cmd_split(const RunConfig& cfg) {
  Experiment exp(cfg);
  auto j = header(cfg);
  j["sizes"] = {{"train", exp.train().size()}, {"validation", exp.validation().size()}, {"test", exp.test().size()}};
  return {{in_out_dir(cfg, "train.csv"), to_csv(exp.train())},
          {in_out_dir(cfg, "validation.csv"), to_csv(exp.validation())},
          {in_out_dir(cfg, "test.csv"), to_csv(exp.test())},
          {in_out_dir(cfg, "split.json"), dump(j)}};
}

Artifacts cmd_evolve(const RunConfig& cfg) {
  Experiment exp(cfg);
  const auto runs = run_experiment(exp);
  return {{in_out_dir(cfg, "run_report.json"), dump(run_report_json(exp, runs))}};
}

Artifacts cmd_bruteforce(const RunConfig& cfg) {
  Experiment exp(cfg);
  FrontOptions options;
  options.cap = cfg.enumeration_cap;
  options.force = cfg.force_enumeration;
  const auto front = global_front(static_cast<int>(exp.num_features()), cfg.oracle_k, exp.validation_objectives(), options);
  auto j = header(cfg);
  const auto body = front.to_json();
  for (const auto& [key, value] : body.items()) j[key] = value;
  return {{in_out_dir(cfg, "global_front.json"), dump(j)}};
}

Artifacts cmd_baseline(const RunConfig& cfg) {
  Experiment exp(cfg);
  const auto single = single_stage(exp.cache(), exp.test(), exp.costs());
  const auto ordered = cost_ordered(exp.test_evaluator());
  const auto lasso = cact_lasso(exp.train(), exp.validation(), exp.test(), exp.costs(), exp.evolution().p_hat,
                                lambda_grid(cfg.lasso_step, cfg.lasso_max));
  auto j = header(cfg);
  j["total_cost"] = exp.costs().total();
  j["rows"] = nlohmann::ordered_json::array({to_json(single), to_json(ordered), to_json(lasso.result)});
  auto& path = j["lasso_path"] = nlohmann::ordered_json::array();
  for (const auto& p : lasso.path)
    path.push_back({{"lambda", p.lambda}, {"g1", p.g1}, {"g2", p.g2}, {"cost", p.cost}, {"aggregate", p.aggregate},
                    {"selected", p.selected}});
  return {{in_out_dir(cfg, "baselines.json"), dump(j)}};
}

Artifacts cmd_neighborhood(const RunConfig& cfg) {
  if (cfg.neighborhood_chromosome.empty()) throw Error("neighborhood.chromosome is required");
  Experiment exp(cfg);
  const Chromosome q = Chromosome::parse(cfg.neighborhood_chromosome);
  if (q.size() != exp.num_features()) throw Error("neighborhood chromosome length does not match the feature count");

  std::optional<GlobalFront> front;
  if (!cfg.global_front_path.empty())
    front = GlobalFront::from_json(nlohmann::json::parse(read_file(cfg.global_front_path)));
  const int k = front ? front->k : exp.evolution().max_stages;
  std::optional<double> space_min;
  if (front) space_min = front->space_min_cost;

  const auto objectives = exp.validation_objectives();
  ObjectiveVector center = objectives(q);
  if (space_min) center.g3 = global_inverse_cost(center.g3_raw, *space_min);

  auto j = header(cfg);
  j["k"] = k;
  j["center"] = objectives_json(center);
  j["center"]["chromosome"] = q.to_string();
  if (front) j["center"]["in_global_front"] = front->contains(q);
  auto& arr = j["neighbors"] = nlohmann::ordered_json::array();
  for (const auto& nb : neighborhood_scan(q, k, objectives, space_min)) {
    auto e = objectives_json(nb.objectives);
    e["chromosome"] = nb.chromosome.to_string();
    if (front) e["in_global_front"] = front->contains(nb.chromosome);
    arr.push_back(std::move(e));
  }
  return {{in_out_dir(cfg, "neighborhood.json"), dump(j)}};
}

Artifacts cmd_report(const RunConfig& cfg) {
  const auto report_path = input_path(cfg.run_report_path, cfg, "run_report.json");
  const auto run_report = nlohmann::json::parse(read_file(report_path));

  std::optional<GlobalFront> front;
  const auto front_path = input_path(cfg.global_front_path, cfg, "global_front.json");
  if (!cfg.global_front_path.empty() || fs::exists(front_path))
    front = GlobalFront::from_json(nlohmann::json::parse(read_file(front_path)));

  std::vector<nlohmann::json> rows;
  const auto baselines_path = input_path(cfg.baselines_path, cfg, "baselines.json");
  if (!cfg.baselines_path.empty() || fs::exists(baselines_path)) {
    const auto doc = nlohmann::json::parse(read_file(baselines_path));
    for (const auto& r : doc.at("rows")) rows.push_back(r);
  }

  const std::string external = cfg.external_rows_path.empty() ? std::string() : read_file(cfg.external_rows_path);
  const auto tables = build_report(run_report, front, rows, external);
  return {{in_out_dir(cfg, "comparison.csv"), tables.comparison_csv},
          {in_out_dir(cfg, "curves.csv"), tables.curves_csv}};
}

void commit(const Artifacts& artifacts) {
  for (const auto& [path, contents] : artifacts) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  }
  for (const auto& [path, contents] : artifacts) write_file_atomic(path, contents);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Evolutionary search for cost-aware multi-stage classifier cascades"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out_dir;
  bool force = false;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--runs", runs, "Number of independent runs");
  app.add_option("--out-dir", out_dir, "Directory for artifacts");
  app.add_option("--override", overrides, "Config override key=value (dotted keys for nested fields)");
  app.add_flag("--force-enumeration", force, "Enumerate even above the oracle cap");

  using Command = Artifacts (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"synth", "Generate a synthetic dataset with Gini-based cost classes", cmd_synth},
      {"split", "Write the standardized train / validation / test splits", cmd_split},
      {"evolve", "Run the evolutionary search and write run_report.json", cmd_evolve},
      {"bruteforce", "Enumerate the solution space and write global_front.json", cmd_bruteforce},
      {"baseline", "Evaluate Single-Stage, CO-T and CaCT LASSO", cmd_baseline},
      {"neighborhood", "Score the single-change neighbors of a chromosome", cmd_neighborhood},
      {"report", "Merge runs, the global front and baselines into CSV tables", cmd_report},
  };
  Command chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&chosen, fn = fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    // Explicit flags take precedence over both the file and --override.
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (runs) overrides.push_back("runs=" + std::to_string(*runs));
    if (out_dir) overrides.push_back("out_dir=" + nlohmann::json(*out_dir).dump());
    if (force) overrides.push_back("oracle.force=true");
    const RunConfig cfg = load_run_config(config_path, overrides);
    const Artifacts artifacts = chosen(cfg);
    commit(artifacts);
    for (const auto& [path, contents] : artifacts) std::cout << path << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace emsco::cli
