#pragma once

// Max-sum / min-sum dispersion over angular distances, with an optional anchor
// language that enters every pairwise sum without being selected, and an
// optional all-different constraint on script or family.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "langsel/error.hpp"
#include "langsel/metric.hpp"
#include "langsel/random.hpp"
#include "langsel/typology.hpp"

namespace langsel {

enum class Direction { maximize, minimize };
enum class Solver { exact, greedy, local_search, random };

inline std::string_view to_string(Direction d) { return d == Direction::maximize ? "max" : "min"; }

inline Direction parse_direction(std::string_view s) {
  if (s == "max") return Direction::maximize;
  if (s == "min") return Direction::minimize;
  throw validation_error("unknown direction '" + std::string(s) + "' (expected max or min)");
}

inline std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::exact: return "exact";
    case Solver::greedy: return "greedy";
    case Solver::local_search: return "local";
    case Solver::random: return "random";
  }
  return "?";
}

inline Solver parse_solver(std::string_view s) {
  if (s == "exact") return Solver::exact;
  if (s == "greedy") return Solver::greedy;
  if (s == "local" || s == "local_search") return Solver::local_search;
  if (s == "random") return Solver::random;
  throw validation_error("unknown solver '" + std::string(s) + "' (expected exact, greedy, local or random)");
}

inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;
inline constexpr double kImprovementTolerance = 1e-12;

// Selected languages must carry pairwise distinct labels under `key`; languages
// labelled `excluded` are removed from the candidate set.
struct GroupConstraint {
  GroupKey key = GroupKey::script;
  std::optional<std::string> excluded;
  std::map<std::string, std::string> label_of;
};

inline GroupConstraint make_group_constraint(const Catalog& catalog, GroupKey key,
                                             std::optional<std::string> excluded = std::nullopt) {
  if (excluded && !catalog.has_label(key, *excluded)) {
    throw validation_error("unknown " + std::string(to_string(key)) + " label '" + *excluded + "'");
  }
  GroupConstraint g{key, std::move(excluded), {}};
  for (const auto& r : catalog.records()) g.label_of.emplace(r.code, r.label(key));
  return g;
}

struct SelectionSpec {
  std::vector<std::string> pool;
  std::size_t n = 1;
  Direction direction = Direction::maximize;
  std::optional<std::string> anchor;
  std::optional<GroupConstraint> group;
  Solver solver = Solver::exact;
  std::uint64_t seed = 0;
  std::uint64_t enumeration_budget = kDefaultEnumerationBudget;
  bool trace = false;
  unsigned threads = 1;
};

struct SubsetResult {
  SelectionSpec spec;
  std::vector<std::string> selected;
  // Sum of pairwise distances over selected + anchor; absent when a random
  // subset was drawn without feature vectors.
  std::optional<double> objective;
  Solver solver_used = Solver::exact;
  bool clamped = false;
  std::size_t effective_n = 0;
  std::vector<std::string> trace;
};

// Sum of d over all unordered pairs of selected + {anchor}. Pairs are visited
// in ascending code order with the anchor last, so the value does not depend
// on the order of `selected`.
inline double objective_value(const DistanceMatrix& matrix, std::vector<std::string> selected,
                              const std::optional<std::string>& anchor = std::nullopt) {
  std::sort(selected.begin(), selected.end());
  if (std::adjacent_find(selected.begin(), selected.end()) != selected.end()) {
    throw validation_error("objective_value: duplicate code in selection");
  }
  std::vector<std::size_t> idx;
  idx.reserve(selected.size() + 1);
  for (const auto& c : selected) idx.push_back(matrix.index_of(c));
  if (anchor) {
    if (std::binary_search(selected.begin(), selected.end(), *anchor)) {
      throw validation_error("objective_value: anchor '" + *anchor + "' is also selected");
    }
    idx.push_back(matrix.index_of(*anchor));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) total += matrix(idx[i], idx[j]);
  }
  return total;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

// Saturating binomial coefficient.
inline std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

// Candidate set resolved against a distance matrix. Candidates are matrix
// indices in ascending code order so that position order is lexicographic.
struct Problem {
  const DistanceMatrix* matrix = nullptr;
  std::vector<std::string> codes;
  std::vector<std::size_t> index;
  std::vector<int> group;  // -1 when unconstrained
  std::vector<double> anchor_distance;
  std::optional<std::size_t> anchor;
  std::size_t k = 0;
  bool clamped = false;
  bool maximize = true;
  int group_count = 0;

  double d(std::size_t a, std::size_t b) const { return (*matrix)(index[a], index[b]); }
  bool better(double candidate, double incumbent) const {
    return maximize ? candidate > incumbent : candidate < incumbent;
  }
};

inline std::vector<std::string> canonical_pool(std::vector<std::string> pool) {
  std::sort(pool.begin(), pool.end());
  if (const auto it = std::adjacent_find(pool.begin(), pool.end()); it != pool.end()) {
    throw validation_error("duplicate code '" + *it + "' in pool");
  }
  return pool;
}

// Candidates = pool minus anchor minus excluded group; k = min(n, capacity).
inline std::vector<std::string> candidate_codes(const SelectionSpec& spec) {
  std::vector<std::string> out;
  for (const auto& code : canonical_pool(spec.pool)) {
    if (spec.anchor && code == *spec.anchor) continue;
    if (spec.group) {
      const auto it = spec.group->label_of.find(code);
      if (it == spec.group->label_of.end()) {
        throw validation_error("no " + std::string(to_string(spec.group->key)) + " label for '" + code + "'");
      }
      if (spec.group->excluded && it->second == *spec.group->excluded) continue;
    }
    out.push_back(code);
  }
  return out;
}

inline Problem prepare(const DistanceMatrix& matrix, const SelectionSpec& spec) {
  if (spec.n < 1) throw validation_error("subset size n must be at least 1");
  Problem p;
  p.matrix = &matrix;
  p.maximize = spec.direction == Direction::maximize;
  p.codes = candidate_codes(spec);
  if (spec.anchor) p.anchor = matrix.index_of(*spec.anchor);
  std::map<std::string, int> group_ids;
  for (const auto& code : p.codes) {
    p.index.push_back(matrix.index_of(code));
    if (spec.group) {
      const auto [it, inserted] =
          group_ids.emplace(spec.group->label_of.at(code), static_cast<int>(group_ids.size()));
      p.group.push_back(it->second);
    } else {
      p.group.push_back(-1);
    }
    p.anchor_distance.push_back(p.anchor ? matrix(p.index.back(), *p.anchor) : 0.0);
  }
  p.group_count = static_cast<int>(group_ids.size());
  const std::size_t capacity = spec.group ? group_ids.size() : p.codes.size();
  p.k = std::min(spec.n, capacity);
  p.clamped = spec.n > capacity;
  if (p.k == 0) throw infeasible_error("no feasible candidates in pool for the requested constraints");
  return p;
}

inline SubsetResult finish(const Problem& p, const SelectionSpec& spec, Solver used,
                           const std::vector<std::size_t>& chosen, std::vector<std::string> trace) {
  SubsetResult r;
  r.spec = spec;
  for (std::size_t c : chosen) r.selected.push_back(p.codes[c]);
  std::sort(r.selected.begin(), r.selected.end());
  r.objective = objective_value(*p.matrix, r.selected, spec.anchor);
  r.solver_used = used;
  r.clamped = p.clamped;
  r.effective_n = p.k;
  if (spec.trace) r.trace = std::move(trace);
  return r;
}

struct Incumbent {
  bool found = false;
  double value = 0.0;
  std::vector<std::size_t> positions;
};

// Depth-first enumeration of all group-feasible k-subsets whose smallest
// position is `first`, in lexicographic order. A later subset replaces the
// incumbent only on strict improvement, so ties keep the lexicographically
// smallest subset.
inline void enumerate_from(const Problem& p, std::size_t first, Incumbent& best, std::uint64_t& visited) {
  std::vector<std::size_t> chosen{first};
  std::vector<double> partial{p.anchor_distance[first]};
  std::vector<char> used(static_cast<std::size_t>(std::max(p.group_count, 1)), 0);
  if (p.group[first] >= 0) used[p.group[first]] = 1;
  const std::size_t m = p.codes.size();

  const auto recurse = [&](auto&& self, std::size_t start) -> void {
    if (chosen.size() == p.k) {
      ++visited;
      const double v = partial.back();
      if (!best.found || p.better(v, best.value)) {
        best.found = true;
        best.value = v;
        best.positions = chosen;
      }
      return;
    }
    const std::size_t need = p.k - chosen.size();
    for (std::size_t c = start; c + need <= m; ++c) {
      if (p.group[c] >= 0 && used[p.group[c]]) continue;
      double gain = p.anchor_distance[c];
      for (std::size_t s : chosen) gain += p.d(c, s);
      chosen.push_back(c);
      partial.push_back(partial.back() + gain);
      if (p.group[c] >= 0) used[p.group[c]] = 1;
      self(self, c + 1);
      if (p.group[c] >= 0) used[p.group[c]] = 0;
      partial.pop_back();
      chosen.pop_back();
    }
  };
  recurse(recurse, first + 1);
}

}  // namespace detail

// Global optimum by enumeration. The number of k-subsets of the candidate set
// must not exceed spec.enumeration_budget. Work is split by the first element
// and reduced in that order, so the result is independent of spec.threads.
inline SubsetResult select_exact(const DistanceMatrix& matrix, const SelectionSpec& spec) {
  const detail::Problem p = detail::prepare(matrix, spec);
  const std::uint64_t count = detail::choose(p.codes.size(), p.k);
  if (count > spec.enumeration_budget) {
    throw budget_error("exact enumeration needs C(" + std::to_string(p.codes.size()) + "," +
                       std::to_string(p.k) + ") = " + std::to_string(count) + " subsets, budget is " +
                       std::to_string(spec.enumeration_budget) + "; use the greedy or local solver");
  }
  const std::size_t firsts = p.codes.size() - p.k + 1;
  std::vector<detail::Incumbent> per_first(firsts);
  std::vector<std::uint64_t> visited(firsts, 0);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t f = next++; f < firsts; f = next++) detail::enumerate_from(p, f, per_first[f], visited[f]);
  };
  unsigned threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, firsts));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  detail::Incumbent best;
  std::uint64_t total = 0;
  for (std::size_t f = 0; f < firsts; ++f) {
    total += visited[f];
    const auto& cand = per_first[f];
    if (cand.found && (!best.found || p.better(cand.value, best.value))) best = cand;
  }
  if (!best.found) throw infeasible_error("no group-feasible subset of size " + std::to_string(p.k));
  std::vector<std::string> trace{"enumerated " + std::to_string(total) + " feasible subsets"};
  return detail::finish(p, spec, Solver::exact, best.positions, std::move(trace));
}

// Constructive heuristic: grow from the anchor (or, without one, from the
// first endpoint of the most extreme candidate pair), always adding the
// candidate with the best marginal change; ties go to the smaller code.
inline SubsetResult select_greedy(const DistanceMatrix& matrix, const SelectionSpec& spec) {
  const detail::Problem p = detail::prepare(matrix, spec);
  const std::size_t m = p.codes.size();
  std::vector<double> gain = p.anchor_distance;
  std::vector<char> taken(m, 0);
  std::vector<char> used(static_cast<std::size_t>(std::max(p.group_count, 1)), 0);
  std::vector<std::size_t> chosen;
  std::vector<std::string> trace;

  const auto take = [&](std::size_t c) {
    taken[c] = 1;
    if (p.group[c] >= 0) used[p.group[c]] = 1;
    chosen.push_back(c);
    for (std::size_t x = 0; x < m; ++x) gain[x] += p.d(x, c);
  };

  if (!p.anchor) {
    std::optional<std::pair<std::size_t, std::size_t>> seed_pair;
    double extreme = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        if (p.group[i] >= 0 && p.group[i] == p.group[j]) continue;
        const double v = p.d(i, j);
        if (!seed_pair || p.better(v, extreme)) {
          seed_pair = {i, j};
          extreme = v;
        }
      }
    }
    const std::size_t first = seed_pair ? seed_pair->first : 0;
    if (seed_pair) {
      trace.push_back("seed " + p.codes[first] + " from pair " + p.codes[seed_pair->first] + "," +
                      p.codes[seed_pair->second] + " distance " + detail::fmt(extreme));
    } else {
      trace.push_back("seed " + p.codes[first] + " (no feasible pair)");
    }
    take(first);
  }

  while (chosen.size() < p.k) {
    std::optional<std::size_t> pick;
    for (std::size_t c = 0; c < m; ++c) {
      if (taken[c] || (p.group[c] >= 0 && used[p.group[c]])) continue;
      if (!pick || p.better(gain[c], gain[*pick])) pick = c;
    }
    if (!pick) throw infeasible_error("greedy ran out of group-feasible candidates");
    trace.push_back("add " + p.codes[*pick] + " gain " + detail::fmt(gain[*pick]));
    take(*pick);
  }
  return detail::finish(p, spec, Solver::greedy, chosen, std::move(trace));
}

// Best-improvement 1-swap descent from `start`. Each pass scans outgoing
// members and incoming candidates in ascending code order and applies the
// first swap achieving the best change beyond kImprovementTolerance.
inline SubsetResult select_local_search(const DistanceMatrix& matrix, const SelectionSpec& spec,
                                        const SubsetResult& start) {
  const detail::Problem p = detail::prepare(matrix, spec);
  const std::size_t m = p.codes.size();
  std::vector<char> in(m, 0);
  for (const auto& code : start.selected) {
    const auto it = std::lower_bound(p.codes.begin(), p.codes.end(), code);
    if (it == p.codes.end() || *it != code) {
      throw validation_error("local search start contains '" + code + "', which is not a candidate");
    }
    in[static_cast<std::size_t>(it - p.codes.begin())] = 1;
  }
  std::vector<std::size_t> members;
  for (std::size_t c = 0; c < m; ++c) {
    if (in[c]) members.push_back(c);
  }
  if (members.size() != p.k) {
    throw validation_error("local search start has " + std::to_string(members.size()) +
                           " members, expected " + std::to_string(p.k));
  }
  std::vector<int> group_use(static_cast<std::size_t>(std::max(p.group_count, 1)), 0);
  for (std::size_t s : members) {
    if (p.group[s] >= 0 && group_use[p.group[s]]++ > 0) {
      throw validation_error("local search start violates the group constraint");
    }
  }

  std::vector<std::string> trace;
  std::size_t swaps = 0;
  for (;;) {
    std::vector<double> gain = p.anchor_distance;
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t s : members) gain[x] += p.d(x, s);
    }
    double best_change = kImprovementTolerance;
    std::optional<std::pair<std::size_t, std::size_t>> best;  // (slot in members, incoming)
    for (std::size_t slot = 0; slot < members.size(); ++slot) {
      const std::size_t out = members[slot];
      for (std::size_t c = 0; c < m; ++c) {
        if (in[c]) continue;
        if (p.group[c] >= 0 && p.group[c] != p.group[out] && group_use[p.group[c]] > 0) continue;
        const double delta = gain[c] - p.d(c, out) - gain[out];
        const double change = p.maximize ? delta : -delta;
        if (change > best_change) {
          best_change = change;
          best = {slot, c};
        }
      }
    }
    if (!best) break;
    const std::size_t out = members[best->first];
    const std::size_t incoming = best->second;
    in[out] = 0;
    in[incoming] = 1;
    if (p.group[out] >= 0) --group_use[p.group[out]];
    if (p.group[incoming] >= 0) ++group_use[p.group[incoming]];
    members[best->first] = incoming;
    std::sort(members.begin(), members.end());
    ++swaps;
    trace.push_back("swap out " + p.codes[out] + " in " + p.codes[incoming] + " change " +
                    detail::fmt(p.maximize ? best_change : -best_change));
  }
  trace.push_back(std::to_string(swaps) + " improving swaps");
  if (spec.trace && !start.trace.empty()) {
    std::vector<std::string> combined = start.trace;
    combined.insert(combined.end(), trace.begin(), trace.end());
    trace = std::move(combined);
  }
  return detail::finish(p, spec, Solver::local_search, members, std::move(trace));
}

// Seeded uniform subset of the candidate pool (pool minus anchor). Without a
// matrix the objective is left empty. Group constraints are not supported.
inline SubsetResult select_random(const SelectionSpec& spec, const DistanceMatrix* matrix = nullptr) {
  if (spec.n < 1) throw validation_error("subset size n must be at least 1");
  if (spec.group) throw validation_error("the random solver does not support group constraints");
  const std::vector<std::string> candidates = detail::candidate_codes(spec);
  SubsetResult r;
  r.spec = spec;
  r.solver_used = Solver::random;
  r.effective_n = std::min(spec.n, candidates.size());
  r.clamped = spec.n > candidates.size();
  if (r.effective_n == 0) throw infeasible_error("no candidates in pool");
  r.selected = sample_random(candidates, r.effective_n, spec.seed);
  if (matrix) r.objective = objective_value(*matrix, r.selected, spec.anchor);
  if (spec.trace) r.trace.push_back("seed " + std::to_string(spec.seed));
  return r;
}

// Dispatch on spec.solver; local_search starts from the greedy solution.
inline SubsetResult select(const DistanceMatrix& matrix, const SelectionSpec& spec) {
  switch (spec.solver) {
    case Solver::exact: return select_exact(matrix, spec);
    case Solver::greedy: return select_greedy(matrix, spec);
    case Solver::local_search: return select_local_search(matrix, spec, select_greedy(matrix, spec));
    case Solver::random: return select_random(spec, &matrix);
  }
  throw validation_error("unknown solver");
}

}  // namespace langsel
