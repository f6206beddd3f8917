#include "emsco/oracle.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace emsco {

BigInt stirling2(int n, int j) {
  if (n < 0 || j < 0) throw Error("Stirling arguments must be non-negative");
  if (j > n) return 0;
  // Row-by-row recurrence; row[t] holds S2(m, t).
  std::vector<BigInt> row(static_cast<std::size_t>(j) + 1, 0);
  row[0] = 1;
  for (int m = 1; m <= n; ++m) {
    for (int t = std::min(m, j); t >= 1; --t)
      row[static_cast<std::size_t>(t)] = t * row[static_cast<std::size_t>(t)] + row[static_cast<std::size_t>(t) - 1];
    row[0] = 0;
  }
  return row[static_cast<std::size_t>(j)];
}

BigInt ordered_partitions(int n, int j) {
  BigInt factorial = 1;
  for (int t = 2; t <= j; ++t) factorial *= t;
  return factorial * stirling2(n, j);
}

SpaceCount count_space(int n, int k) {
  if (n < 1) throw Error("need at least one feature");
  if (k < 1 || k > n) throw Error("stage bound k must satisfy 1 <= k <= n");
  SpaceCount out;
  out.n = n;
  out.k = k;
  out.total = 0;
  for (int j = 1; j <= k; ++j) {
    out.per_stage_count.push_back(ordered_partitions(n, j));
    out.total += out.per_stage_count.back();
  }
  return out;
}

SpaceRatio space_ratio(int n, int k) {
  using Float = boost::multiprecision::cpp_bin_float_50;
  SpaceRatio out;
  out.numerator = count_space(n, k).total;
  out.denominator = boost::multiprecision::pow(BigInt(k), static_cast<unsigned>(n));
  out.value = static_cast<double>(Float(out.numerator) / Float(out.denominator));
  return out;
}

std::string to_string(const BigInt& value) { return value.str(); }

// ---------------------------------------------------------------------------

SpaceEnumerator::SpaceEnumerator(int n, int k) : n_(n), k_(std::min(k, n)), current_(static_cast<std::size_t>(n), 0) {
  if (n < 1 || k < 1) throw Error("enumeration needs n >= 1 and k >= 1");
}

bool SpaceEnumerator::surjective() const {
  std::vector<bool> used(static_cast<std::size_t>(stages_), false);
  int distinct = 0;
  for (int v : current_)
    if (!used[static_cast<std::size_t>(v)]) {
      used[static_cast<std::size_t>(v)] = true;
      ++distinct;
    }
  return distinct == stages_;
}

bool SpaceEnumerator::advance() {
  // Odometer increment over {0..stages-1}^n, last position fastest.
  for (int i = n_ - 1; i >= 0; --i) {
    auto& digit = current_[static_cast<std::size_t>(i)];
    if (++digit < stages_) return true;
    digit = 0;
  }
  ++stages_;
  std::fill(current_.begin(), current_.end(), 0);
  return stages_ <= k_;
}

bool SpaceEnumerator::next(std::vector<int>& out) {
  if (!started_) {
    started_ = true;
  } else if (!advance()) {
    return false;
  }
  while (!surjective())
    if (!advance()) return false;
  out = current_;
  return true;
}

void check_enumeration_cap(int n, int k, std::uint64_t cap, bool force) {
  const auto total = count_space(n, k).total;
  if (!force && total > cap)
    throw Error("S(" + std::to_string(n) + "," + std::to_string(k) + ") holds " + total.str() +
                " chromosomes, above the enumeration cap of " + std::to_string(cap) +
                "; pass --force-enumeration to override");
}

std::vector<Chromosome> enumerate_space(int n, int k, std::uint64_t cap, bool force) {
  check_enumeration_cap(n, k, cap, force);
  std::vector<Chromosome> out;
  SpaceEnumerator it(n, k);
  std::vector<int> v;
  while (it.next(v)) out.emplace_back(v);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Dominance on raw cost (lower is better); identical to dominance on the
// inverse cost for any common positive normalizer.
bool dominates_raw(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.g1 < b.g1 || a.g2 < b.g2 || a.g3_raw > b.g3_raw) return false;
  return a.g1 > b.g1 || a.g2 > b.g2 || a.g3_raw < b.g3_raw;
}

}  // namespace

void merge_into_front(std::vector<FrontEntry>& front, FrontEntry candidate) {
  for (const auto& m : front)
    if (dominates_raw(m.objectives, candidate.objectives)) return;
  std::erase_if(front, [&](const FrontEntry& m) { return dominates_raw(candidate.objectives, m.objectives); });
  front.push_back(std::move(candidate));
}

bool GlobalFront::contains(const Chromosome& q) const {
  return std::any_of(members.begin(), members.end(), [&](const FrontEntry& e) { return e.chromosome == q; });
}

GlobalFront global_front(int n, int k, const ObjectiveFn& objectives, const FrontOptions& options) {
  check_enumeration_cap(n, k, options.cap, options.force);
  GlobalFront out;
  out.n = n;
  out.k = k;
  out.eval_split = options.eval_split;
  out.space_total = count_space(n, k).total;
  out.asymptotic_ratio = space_ratio(n, k).value;
  out.space_min_cost = std::numeric_limits<double>::infinity();

  SpaceEnumerator it(n, k);
  std::vector<int> v;
  while (it.next(v)) {
    Chromosome q(v);
    ObjectiveVector o = objectives(q);
    if (!(o.g3_raw > 0.0)) throw Error("raw cost must be positive for " + q.to_string());
    out.space_min_cost = std::min(out.space_min_cost, o.g3_raw);
    ++out.evaluated;
    merge_into_front(out.members, {std::move(q), o});
  }
  for (auto& m : out.members) m.objectives.g3 = global_inverse_cost(m.objectives.g3_raw, out.space_min_cost);
  std::sort(out.members.begin(), out.members.end(),
            [](const FrontEntry& a, const FrontEntry& b) { return a.chromosome < b.chromosome; });
  return out;
}

nlohmann::ordered_json GlobalFront::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["k"] = k;
  j["eval_split"] = eval_split;
  j["space_total"] = space_total.str();
  j["evaluated"] = evaluated;
  j["space_min_cost"] = space_min_cost;
  j["asymptotic_ratio"] = asymptotic_ratio;
  j["front_size"] = members.size();
  auto& arr = j["front"] = nlohmann::ordered_json::array();
  for (const auto& m : members) {
    arr.push_back({{"chromosome", m.chromosome.to_string()},
                   {"g1", m.objectives.g1},
                   {"g2", m.objectives.g2},
                   {"g3", m.objectives.g3},
                   {"g3_raw", m.objectives.g3_raw}});
  }
  return j;
}

GlobalFront GlobalFront::from_json(const nlohmann::json& j) {
  GlobalFront out;
  out.n = j.at("n").get<int>();
  out.k = j.at("k").get<int>();
  out.eval_split = j.value("eval_split", std::string("validation"));
  out.space_total = BigInt(j.at("space_total").get<std::string>());
  out.evaluated = j.value("evaluated", std::uint64_t{0});
  out.space_min_cost = j.at("space_min_cost").get<double>();
  out.asymptotic_ratio = j.value("asymptotic_ratio", 0.0);
  for (const auto& e : j.at("front")) {
    ObjectiveVector o;
    o.g1 = e.at("g1").get<double>();
    o.g2 = e.at("g2").get<double>();
    o.g3 = e.at("g3").get<double>();
    o.g3_raw = e.at("g3_raw").get<double>();
    out.members.push_back({Chromosome::parse(e.at("chromosome").get<std::string>()), o});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Chromosome> von_neumann_neighbors(const Chromosome& q, int k) {
  std::vector<Chromosome> out;
  std::set<Chromosome> seen{q};
  std::vector<int> v = q.assignments();
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int delta : {-1, +1}) {
      const int original = v[i];
      v[i] = original + delta;
      if (v[i] >= 0) {
        Chromosome c = Chromosome::compress(v);
        if (c.stage_count() <= k && seen.insert(c).second) out.push_back(std::move(c));
      }
      v[i] = original;
    }
  }
  return out;
}

std::vector<Neighbor> neighborhood_scan(const Chromosome& q, int k, const ObjectiveFn& objectives,
                                        std::optional<double> space_min) {
  std::vector<Neighbor> out;
  for (auto& c : von_neumann_neighbors(q, k)) {
    ObjectiveVector o = objectives(c);
    if (space_min) o.g3 = global_inverse_cost(o.g3_raw, *space_min);
    out.push_back({std::move(c), o});
  }
  return out;
}

}  // namespace emsco
