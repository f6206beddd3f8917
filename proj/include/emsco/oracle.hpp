#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "emsco/cascade.hpp"
#include "emsco/evolution.hpp"

namespace emsco {

using BigInt = boost::multiprecision::cpp_int;

/// Stirling number of the second kind via S2(n,j) = j S2(n-1,j) + S2(n-1,j-1).
/// Zero when j > n.
BigInt stirling2(int n, int j);

/// Ordered partitions of n features into exactly j non-empty stages: j! S2(n,j).
BigInt ordered_partitions(int n, int j);

struct SpaceCount {
  int n = 0;
  int k = 0;
  std::vector<BigInt> per_stage_count;  // j = 1..k
  BigInt total;
};

/// |S(n,k)| as the disjoint union of ordered partitions with 1..k stages.
SpaceCount count_space(int n, int k);

/// |S(n,k)| / k^n as an exact fraction plus a double approximation.
struct SpaceRatio {
  BigInt numerator;
  BigInt denominator;
  double value = 0.0;
};
SpaceRatio space_ratio(int n, int k);

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Visits each gap-free chromosome with at most k stages exactly once: for
/// j = 1..k, all surjections onto {0..j-1} in lexicographic order.
class SpaceEnumerator {
 public:
  SpaceEnumerator(int n, int k);

  /// Writes the next chromosome's assignments; false when exhausted.
  bool next(std::vector<int>& out);

 private:
  bool advance();
  bool surjective() const;

  int n_;
  int k_;
  int stages_ = 1;
  bool started_ = false;
  std::vector<int> current_;
};

/// Throws unless |S(n,k)| <= cap or `force` is set.
void check_enumeration_cap(int n, int k, std::uint64_t cap, bool force);

std::vector<Chromosome> enumerate_space(int n, int k, std::uint64_t cap = kDefaultEnumerationCap,
                                        bool force = false);

struct FrontEntry {
  Chromosome chromosome;
  ObjectiveVector objectives;
};

/// Non-dominated set over an enumerated space, with g3 normalized against the
/// space minimum raw cost.
struct GlobalFront {
  int n = 0;
  int k = 0;
  std::string eval_split = "validation";
  std::vector<FrontEntry> members;
  double space_min_cost = 0.0;
  BigInt space_total;
  std::uint64_t evaluated = 0;
  double asymptotic_ratio = 0.0;  // |S(n,k)| / k^n

  bool contains(const Chromosome& q) const;
  nlohmann::ordered_json to_json() const;
  static GlobalFront from_json(const nlohmann::json& j);
};

/// Merges a point into a non-dominated set: rejected when some member
/// dominates it, otherwise inserted after evicting members it dominates.
/// Equal objective vectors coexist.
void merge_into_front(std::vector<FrontEntry>& front, FrontEntry candidate);

struct FrontOptions {
  std::uint64_t cap = kDefaultEnumerationCap;
  bool force = false;
  std::string eval_split = "validation";
};

/// Scores every chromosome of S(n,k) and keeps the globally non-dominated set.
GlobalFront global_front(int n, int k, const ObjectiveFn& objectives, const FrontOptions& options = {});

struct Neighbor {
  Chromosome chromosome;
  ObjectiveVector objectives;
};

/// Distinct chromosomes reachable from q by a single +/-1 change of one
/// assignment that stays non-negative and, after compression, has at most k
/// stages; q itself is excluded. When `space_min` is given, g3 is the global
/// inverse cost.
std::vector<Chromosome> von_neumann_neighbors(const Chromosome& q, int k);
std::vector<Neighbor> neighborhood_scan(const Chromosome& q, int k, const ObjectiveFn& objectives,
                                        std::optional<double> space_min = std::nullopt);

std::string to_string(const BigInt& value);

}  // namespace emsco
