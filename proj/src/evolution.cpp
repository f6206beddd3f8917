#include "emsco/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace emsco {

void EvolutionConfig::validate(std::size_t num_features) const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(mutation_rate >= 0.0 && mutation_rate < 1.0)) throw Error("mutation_rate must lie in [0, 1)");
  if (!(recombination_rate >= 0.0 && recombination_rate <= 1.0))
    throw Error("recombination_rate must lie in [0, 1]");
  if (!open_unit(elite_fraction)) throw Error("elite_fraction must lie in (0, 1)");
  if (population_size < 1) throw Error("population_size must be positive");
  if (!(mutation_bias > 0.0)) throw Error("mutation_bias must be positive");
  if (max_stages < 1) throw Error("max_stages must be at least 1");
  if (num_features > 0 && static_cast<std::size_t>(max_stages) > num_features)
    throw Error("max_stages cannot exceed the feature count");
  if (!(p_hat > 0.0 && p_hat <= 1.0)) throw Error("p_hat must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (max_iterations < 0) throw Error("max_iterations must be non-negative");
  if (patience < 0) throw Error("patience must be non-negative");
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.g1 < b.g1 || a.g2 < b.g2 || a.g3 < b.g3) return false;
  return a.g1 > b.g1 || a.g2 > b.g2 || a.g3 > b.g3;
}

int rank_population(std::span<ScoredChromosome> members) {
  const std::size_t m = members.size();
  if (m == 0) return 0;
  std::vector<std::vector<std::size_t>> beats(m);
  std::vector<std::size_t> beaten_by(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (dominates(members[i].objectives, members[j].objectives)) {
        beats[i].push_back(j);
        ++beaten_by[j];
      } else if (dominates(members[j].objectives, members[i].objectives)) {
        beats[j].push_back(i);
        ++beaten_by[i];
      }
    }
  }
  std::vector<int> level(m, 0);
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < m; ++i)
    if (beaten_by[i] == 0) current.push_back(i);
  int t = 0;
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      level[i] = t;
      for (std::size_t j : beats[i])
        if (--beaten_by[j] == 0) next.push_back(j);
    }
    current.swap(next);
    ++t;
  }
  const int last = t - 1;
  for (std::size_t i = 0; i < m; ++i) members[i].rank = last - level[i];
  return t;
}

double fitness(const Generation& gen, const ScoredChromosome& q) {
  return std::pow(gen.gamma(), q.rank) * q.euclid;
}

void refresh_generation(Generation& gen, double epsilon) {
  auto& members = gen.members;
  if (members.empty()) return;
  double lowest = members.front().objectives.g3_raw;
  for (const auto& m : members) {
    if (!(m.objectives.g3_raw > 0.0)) throw Error("raw cost must be positive to normalize");
    lowest = std::min(lowest, m.objectives.g3_raw);
  }
  gen.min_raw_cost = lowest;
  gen.epsilon = epsilon;
  gen.lower_norm = std::numeric_limits<double>::infinity();
  gen.upper_norm = 0.0;
  for (auto& m : members) {
    auto& o = m.objectives;
    o.g3 = lowest / o.g3_raw;
    m.euclid = std::sqrt(o.g1 * o.g1 + o.g2 * o.g2 + o.g3 * o.g3);
    gen.lower_norm = std::min(gen.lower_norm, m.euclid);
    gen.upper_norm = std::max(gen.upper_norm, m.euclid);
  }
  gen.front_count = rank_population(members);
  for (auto& m : members) m.fitness = fitness(gen, m);
  // Fitness order is exactly (rank, euclid) order because gamma exceeds the
  // largest norm ratio; sorting on that key stays exact where gamma^rank
  // would lose precision.
  std::stable_sort(members.begin(), members.end(), [](const ScoredChromosome& a, const ScoredChromosome& b) {
    if (a.rank != b.rank) return a.rank > b.rank;
    if (a.euclid != b.euclid) return a.euclid > b.euclid;
    return a.chromosome < b.chromosome;
  });
}

std::size_t select(const Generation& gen, Rng& rng) {
  const auto& members = gen.members;
  if (members.empty()) throw Error("cannot select from an empty generation");
  if (members.size() == 1) return 0;
  // Proportional to gamma^rank * E, evaluated in log space.
  const double log_gamma = std::log(gen.gamma());
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    logs[i] = members[i].rank * log_gamma + std::log(members[i].euclid);
    top = std::max(top, logs[i]);
  }
  std::vector<double> cumulative(members.size());
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    total += std::exp(logs[i] - top);
    cumulative[i] = total;
  }
  const double u = rng.uniform() * total;
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), members.size() - 1);
}

std::size_t elite_size(std::size_t unique_count, std::size_t unique_nondominated, double elite_fraction) {
  const auto scaled = static_cast<std::size_t>(std::ceil(elite_fraction * static_cast<double>(unique_count) - 1e-9));
  return std::min(unique_count, std::max(scaled, unique_nondominated));
}

std::vector<ScoredChromosome> elite_set(const Generation& gen, double elite_fraction) {
  std::vector<ScoredChromosome> unique;
  std::set<Chromosome> seen;
  int best_rank = 0;
  for (const auto& m : gen.members) best_rank = std::max(best_rank, m.rank);
  std::size_t nondominated = 0;
  for (const auto& m : gen.members) {
    if (!seen.insert(m.chromosome).second) continue;
    unique.push_back(m);
    if (m.rank == best_rank) ++nondominated;
  }
  unique.resize(elite_size(unique.size(), nondominated, elite_fraction));
  return unique;
}

// ---------------------------------------------------------------------------

std::vector<double> beta_binomial_pmf(int trials, double alpha, double beta) {
  if (trials < 0) throw Error("trials must be non-negative");
  if (!(alpha > 0.0 && beta > 0.0)) throw Error("beta-binomial shapes must be positive");
  auto log_beta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
  const double n = trials;
  std::vector<double> pmf(static_cast<std::size_t>(trials) + 1);
  for (int j = 0; j <= trials; ++j) {
    const double log_choose = std::lgamma(n + 1) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1);
    pmf[static_cast<std::size_t>(j)] =
        std::exp(log_choose + log_beta(j + alpha, n - j + beta) - log_beta(alpha, beta));
  }
  return pmf;
}

int sample_beta_binomial(int trials, double beta, Rng& rng) {
  const auto pmf = beta_binomial_pmf(trials, 1.0, beta);
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t j = 0; j < pmf.size(); ++j) {
    cdf += pmf[j];
    if (u < cdf) return static_cast<int>(j);
  }
  return trials;
}

Chromosome mutate(const Chromosome& q, const EvolutionConfig& cfg, Rng& rng) {
  std::vector<int> v = q.assignments();
  const int k = cfg.max_stages;
  std::vector<int> count(static_cast<std::size_t>(std::max(k, q.stage_count())) + 1, 0);
  for (int s : v) ++count[static_cast<std::size_t>(s)];
  int stages = q.stage_count();
  for (auto& s : v) {
    const bool fire = rng.uniform() < cfg.mutation_rate;
    if (!fire || count[static_cast<std::size_t>(s)] <= 1) continue;
    const int drawn = sample_beta_binomial(std::min(stages, k - 1), cfg.mutation_bias, rng);
    --count[static_cast<std::size_t>(s)];
    ++count[static_cast<std::size_t>(drawn)];
    s = drawn;
    if (drawn == stages) ++stages;
  }
  return Chromosome::compress(v);
}

int rescale_stage(int r, int parent_stages, int child_stages) {
  // (r + 1) * child is an integer, so exact halves survive the division.
  const double scaled = static_cast<double>((r + 1) * child_stages) / static_cast<double>(parent_stages);
  return std::max(static_cast<int>(std::round(scaled)) - 1, 0);
}

Chromosome recombine_with(const Chromosome& a, const Chromosome& b, int child_stages,
                          const std::vector<bool>& pick_b) {
  if (a.size() != b.size() || pick_b.size() != a.size()) throw Error("parents and picks must have equal length");
  if (child_stages < 1) throw Error("child stage count must be positive");
  std::vector<int> child(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Chromosome& r = pick_b[i] ? b : a;
    child[i] = rescale_stage(r[i], r.stage_count(), child_stages);
  }
  return Chromosome::compress(child);
}

Chromosome recombine(const Chromosome& a, const Chromosome& b, const EvolutionConfig& cfg, Rng& rng) {
  if (!(rng.uniform() < cfg.recombination_rate)) return rng.coin() ? b : a;
  const int options[3] = {(a.stage_count() + b.stage_count()) / 2, a.stage_count(), b.stage_count()};
  const int child_stages = options[rng.index(3)];
  std::vector<bool> pick_b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) pick_b[i] = rng.coin();
  return recombine_with(a, b, child_stages, pick_b);
}

std::vector<Chromosome> init_population(const EvolutionConfig& cfg, std::size_t num_features, Rng& rng) {
  const Chromosome base = Chromosome::single_stage(num_features);
  std::vector<Chromosome> out;
  out.reserve(static_cast<std::size_t>(cfg.population_size));
  for (int i = 0; i < cfg.population_size; ++i) out.push_back(mutate(base, cfg, rng));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class ScoredPopulation {
 public:
  explicit ScoredPopulation(const ObjectiveFn& fn) : fn_(fn) {}

  Generation score(const std::vector<Chromosome>& chromosomes, int index, double epsilon) {
    Generation gen;
    gen.index = index;
    gen.members.reserve(chromosomes.size());
    for (const auto& c : chromosomes) {
      auto it = memo_.find(c.assignments());
      if (it == memo_.end()) {
        ObjectiveVector o = fn_(c);
        o.g3 = 0.0;
        it = memo_.emplace(c.assignments(), o).first;
      }
      gen.members.push_back({c, it->second, 0, 0.0, 0.0});
    }
    refresh_generation(gen, epsilon);
    return gen;
  }

  std::size_t evaluations() const { return memo_.size(); }

 private:
  const ObjectiveFn& fn_;
  std::map<std::vector<int>, ObjectiveVector> memo_;
};

GenerationRecord record(const Generation& gen, double elite_fraction, bool keep_elites) {
  GenerationRecord rec;
  rec.index = gen.index;
  rec.top = gen.members.front().chromosome;
  rec.top_fitness = gen.members.front().fitness;
  std::set<Chromosome> unique;
  std::set<Chromosome> front;
  for (const auto& m : gen.members) {
    unique.insert(m.chromosome);
    if (m.rank == gen.front_count - 1) front.insert(m.chromosome);
  }
  rec.unique_count = unique.size();
  rec.front_size = front.size();
  if (keep_elites)
    for (const auto& e : elite_set(gen, elite_fraction)) rec.elite.push_back(e.chromosome);
  return rec;
}

}  // namespace

RunResult run_evolution(const EvolutionConfig& cfg, std::size_t num_features, const ObjectiveFn& objectives,
                        const RunOptions& options) {
  cfg.validate(num_features);
  Rng rng(cfg.seed);
  ScoredPopulation scorer(objectives);

  auto population = init_population(cfg, num_features, rng);
  for (std::size_t i = 0; i < options.planted.size() && i < population.size(); ++i) {
    if (options.planted[i].size() != num_features) throw Error("planted chromosome has the wrong length");
    if (options.planted[i].stage_count() > cfg.max_stages) throw Error("planted chromosome exceeds max_stages");
    population[i] = options.planted[i];
  }

  RunResult result;
  Generation gen = scorer.score(population, 0, cfg.epsilon);
  result.history.push_back(record(gen, cfg.elite_fraction, options.record_elites));
  int stagnant = 0;

  while (true) {
    if (gen.index >= cfg.max_iterations) {
      result.stop = StopReason::MaxIterations;
      break;
    }
    if (cfg.patience > 0 && stagnant >= cfg.patience) {
      result.stop = StopReason::Stagnation;
      break;
    }
    std::vector<Chromosome> next;
    next.reserve(static_cast<std::size_t>(cfg.population_size));
    for (auto& e : elite_set(gen, cfg.elite_fraction)) next.push_back(std::move(e.chromosome));
    while (next.size() < static_cast<std::size_t>(cfg.population_size)) {
      const auto& pa = gen.members[select(gen, rng)].chromosome;
      const auto& pb = gen.members[select(gen, rng)].chromosome;
      next.push_back(mutate(recombine(pa, pb, cfg, rng), cfg, rng));
    }
    const Chromosome previous_top = gen.members.front().chromosome;
    gen = scorer.score(next, gen.index + 1, cfg.epsilon);
    result.history.push_back(record(gen, cfg.elite_fraction, options.record_elites));
    stagnant = gen.members.front().chromosome == previous_top ? stagnant + 1 : 0;
  }

  std::set<Chromosome> seen;
  for (const auto& m : gen.members)
    if (m.rank == gen.front_count - 1 && seen.insert(m.chromosome).second) result.front.push_back(m);
  result.generations = gen.index;
  result.evaluations = scorer.evaluations();
  return result;
}

std::string to_string(StopReason reason) {
  return reason == StopReason::MaxIterations ? "max_iterations" : "stagnation";
}

}  // namespace emsco
