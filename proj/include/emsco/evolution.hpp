#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "emsco/cascade.hpp"
#include "emsco/common.hpp"

namespace emsco {

struct EvolutionConfig {
  double mutation_rate = 0.075;       // m-hat
  double recombination_rate = 0.8;    // r-hat
  double elite_fraction = 0.2;        // b
  int population_size = 300;          // |G|
  double mutation_bias = 2.0;         // beta
  int max_stages = 3;                 // k
  double p_hat = 0.75;
  double epsilon = 0.01;
  int max_iterations = 150;
  int patience = 20;                  // g
  std::uint64_t seed = 0;

  /// Throws Error on any out-of-range field, or when k exceeds n.
  void validate(std::size_t num_features) const;
};

struct ScoredChromosome {
  Chromosome chromosome;
  ObjectiveVector objectives;
  int rank = 0;
  double euclid = 0.0;
  double fitness = 0.0;
};

/// One population plus the normalizers its fitness values depend on.
struct Generation {
  std::vector<ScoredChromosome> members;
  double min_raw_cost = 0.0;
  double lower_norm = 0.0;  // l_E
  double upper_norm = 0.0;  // u_E
  int index = 0;
  int front_count = 0;      // number of non-dominated fronts peeled
  double epsilon = 0.01;

  double gamma() const { return upper_norm / lower_norm + epsilon; }
};

/// Weak inequality on g1, g2, g3 and strict inequality on at least one.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Peels non-dominated fronts E_0..E_t* and sets rank = t* - t, so the best
/// front holds the largest rank. Returns the number of fronts.
int rank_population(std::span<ScoredChromosome> members);

/// gamma^rank * E with gamma = u_E / l_E + epsilon.
double fitness(const Generation& gen, const ScoredChromosome& q);

/// Normalizes inverse costs, computes norms, ranks, fitness, and sorts the
/// members by fitness descending (ties by assignment vector).
void refresh_generation(Generation& gen, double epsilon);

/// Roulette wheel over fitness; returns a member index.
std::size_t select(const Generation& gen, Rng& rng);

/// Unique members sorted by fitness, truncated to
/// max(ceil(b * |G*|), |E_0*|). Requires a refreshed generation.
std::vector<ScoredChromosome> elite_set(const Generation& gen, double elite_fraction);

std::size_t elite_size(std::size_t unique_count, std::size_t unique_nondominated, double elite_fraction);

/// Beta-binomial PMF over 0..trials with the given shape parameters.
std::vector<double> beta_binomial_pmf(int trials, double alpha, double beta);

/// Draw from BetaBinomial(trials, alpha = 1, beta) by CDF inversion.
int sample_beta_binomial(int trials, double beta, Rng& rng);

/// Mutation: each index with probability m-hat, when its stage holds more
/// than one feature, is redrawn from BetaBinomial(min(||Q||, k-1), 1, beta).
/// ||Q|| tracks the chromosome as it changes. The result is compressed.
Chromosome mutate(const Chromosome& q, const EvolutionConfig& cfg, Rng& rng);

/// Maps assignment r of a parent with `parent_stages` stages onto a child
/// with `child_stages` stages: max(round((r + 1) / parent * child) - 1, 0),
/// rounding half away from zero.
int rescale_stage(int r, int parent_stages, int child_stages);

/// Deterministic core of recombination: child stage count and per-feature
/// parent picks (false = parent A) are given. The result is compressed.
Chromosome recombine_with(const Chromosome& a, const Chromosome& b, int child_stages,
                          const std::vector<bool>& pick_b);

/// With probability 1 - r-hat returns a coin-flip parent copy; otherwise
/// draws the child stage count from {floor((|A|+|B|)/2), |A|, |B|} and a
/// parent per feature.
Chromosome recombine(const Chromosome& a, const Chromosome& b, const EvolutionConfig& cfg, Rng& rng);

/// |G| mutations of the one-stage chromosome.
std::vector<Chromosome> init_population(const EvolutionConfig& cfg, std::size_t num_features, Rng& rng);

/// Returns g1, g2 and g3_raw for a chromosome.
using ObjectiveFn = std::function<ObjectiveVector(const Chromosome&)>;

struct GenerationRecord {
  int index = 0;
  double top_fitness = 0.0;
  Chromosome top;
  std::size_t front_size = 0;   // unique non-dominated members
  std::size_t unique_count = 0;
  std::vector<Chromosome> elite;
};

enum class StopReason { MaxIterations, Stagnation };

struct RunResult {
  std::vector<ScoredChromosome> front;  // unique non-dominated, fitness descending
  std::vector<GenerationRecord> history;
  int generations = 0;
  StopReason stop = StopReason::MaxIterations;
  std::size_t evaluations = 0;          // distinct chromosomes scored
};

struct RunOptions {
  std::vector<Chromosome> planted;  // replace the first members of G_0
  bool record_elites = true;
};

/// Evolves populations until max_iterations generations have been produced or
/// the top-fitness chromosome stays the same for `patience` generations.
/// Objectives are memoized by assignment vector for the whole run.
RunResult run_evolution(const EvolutionConfig& cfg, std::size_t num_features, const ObjectiveFn& objectives,
                        const RunOptions& options = {});

std::string to_string(StopReason reason);

}  // namespace emsco
