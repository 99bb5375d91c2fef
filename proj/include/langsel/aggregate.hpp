#pragma once

// Downstream score tables and their macro-average: per task, scores are
// averaged per language (over seeds and datasets), then over languages; the
// macro-average is the unweighted mean of the task means.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "langsel/detail/text.hpp"
#include "langsel/error.hpp"
#include "langsel/typology.hpp"

namespace langsel {

struct ScoreRecord {
  std::string subset_id;
  std::string task;
  std::string dataset;
  std::string language;
  std::uint64_t seed = 0;
  double score = 0.0;
};

class ScoreTable {
 public:
  ScoreTable() = default;

  static ScoreTable from_records(std::vector<ScoreRecord> records) {
    ScoreTable t;
    std::set<std::tuple<std::string, std::string, std::string, std::string, std::uint64_t>> keys;
    for (const auto& r : records) {
      if (!std::isfinite(r.score)) throw validation_error("non-finite score for subset '" + r.subset_id + "'");
      if (!keys.emplace(r.subset_id, r.task, r.dataset, r.language, r.seed).second) {
        throw validation_error("duplicate score record (" + r.subset_id + ", " + r.task + ", " + r.dataset +
                               ", " + r.language + ", " + std::to_string(r.seed) + ")");
      }
      t.tasks_.insert(r.task);
      t.subsets_.insert(r.subset_id);
    }
    t.records_ = std::move(records);
    return t;
  }

  const std::vector<ScoreRecord>& records() const { return records_; }
  const std::set<std::string>& tasks() const { return tasks_; }
  const std::set<std::string>& subsets() const { return subsets_; }

 private:
  std::vector<ScoreRecord> records_;
  std::set<std::string> tasks_;
  std::set<std::string> subsets_;
};

inline constexpr std::string_view kScoreHeader = "subset_id,task,dataset,language,seed,score";

// CSV without quoting; scores must lie in [0, 100].
inline ScoreTable load_scores(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || detail::trim(lines.front()) != kScoreHeader) {
    throw parse_error(path, 1, 1, "expected header '" + std::string(kScoreHeader) + "'");
  }
  std::vector<ScoreRecord> records;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    if (detail::trim(lines[ln]).empty()) continue;
    const auto f = detail::split_fields(lines[ln], ',');
    if (f.size() != 6) {
      throw parse_error(path, line_no, 1, "expected 6 comma-separated fields, got " + std::to_string(f.size()));
    }
    ScoreRecord r;
    r.subset_id = std::string(detail::trim(f[0].text));
    r.task = std::string(detail::trim(f[1].text));
    r.dataset = std::string(detail::trim(f[2].text));
    r.language = std::string(detail::trim(f[3].text));
    for (std::size_t i : {0u, 1u, 3u}) {
      if (detail::trim(f[i].text).empty()) throw parse_error(path, line_no, f[i].column, "empty field");
    }
    const auto seed = detail::parse_integer<std::uint64_t>(f[4].text);
    if (!seed) throw parse_error(path, line_no, f[4].column, "invalid seed '" + std::string(f[4].text) + "'");
    r.seed = *seed;
    const auto score = detail::parse_double(f[5].text);
    if (!score || !std::isfinite(*score) || *score < 0.0 || *score > 100.0) {
      throw parse_error(path, line_no, f[5].column, "score must be a number in [0, 100]");
    }
    r.score = *score;
    records.push_back(std::move(r));
  }
  try {
    return ScoreTable::from_records(std::move(records));
  } catch (const Error& e) {
    throw validation_error(path + ": " + e.what());
  }
}

namespace detail {

// Mean of values summed in ascending order: independent of input order.
inline double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// task -> language -> mean over that language's records (all datasets, seeds).
inline std::map<std::string, std::map<std::string, double>> language_means(const ScoreTable& table,
                                                                           const std::string& subset_id) {
  std::map<std::string, std::map<std::string, std::vector<double>>> raw;
  for (const auto& r : table.records()) {
    if (r.subset_id == subset_id) raw[r.task][r.language].push_back(r.score);
  }
  std::map<std::string, std::map<std::string, double>> out;
  for (auto& [task, langs] : raw) {
    for (auto& [lang, scores] : langs) out[task][lang] = sorted_mean(std::move(scores));
  }
  return out;
}

inline double mean_of_values(const std::map<std::string, double>& m) {
  std::vector<double> v;
  for (const auto& [_, x] : m) v.push_back(x);
  return sorted_mean(std::move(v));
}

}  // namespace detail

struct SubsetScores {
  std::map<std::string, double> task_mean;
  double macro = 0.0;
};

// Task means for every task in the table; a task with no records for the
// subset is an error.
inline SubsetScores subset_scores(const ScoreTable& table, const std::string& subset_id) {
  if (!table.subsets().count(subset_id)) throw validation_error("unknown subset_id '" + subset_id + "'");
  const auto means = detail::language_means(table, subset_id);
  SubsetScores s;
  std::vector<double> per_task;
  for (const auto& task : table.tasks()) {
    const auto it = means.find(task);
    if (it == means.end()) {
      throw validation_error("subset '" + subset_id + "' has no scores for task '" + task + "'");
    }
    s.task_mean[task] = detail::mean_of_values(it->second);
    per_task.push_back(s.task_mean[task]);
  }
  s.macro = detail::sorted_mean(std::move(per_task));
  return s;
}

inline double macro_average(const ScoreTable& table, const std::string& subset_id) {
  return subset_scores(table, subset_id).macro;
}

// Argmax of the macro-average over candidates with full task coverage; ties
// go to the lexicographically smallest id.
inline std::pair<std::string, double> best_subset(const ScoreTable& table, std::vector<std::string> candidate_ids) {
  std::sort(candidate_ids.begin(), candidate_ids.end());
  std::optional<std::pair<std::string, double>> best;
  for (const auto& id : candidate_ids) {
    if (!table.subsets().count(id)) throw validation_error("unknown subset_id '" + id + "'");
    double score = 0.0;
    try {
      score = macro_average(table, id);
    } catch (const Error&) {
      continue;  // incomplete task coverage
    }
    if (!best || score > best->second) best = std::make_pair(id, score);
  }
  if (!best) throw validation_error("no candidate subset has scores for every task");
  return *best;
}

enum class ResourceClass { hrl, mrl, lrl_seen, lrl_unseen };

inline std::string_view to_string(ResourceClass c) {
  switch (c) {
    case ResourceClass::hrl: return "HRL";
    case ResourceClass::mrl: return "MRL";
    case ResourceClass::lrl_seen: return "LRL_seen";
    case ResourceClass::lrl_unseen: return "LRL_unseen";
  }
  return "?";
}

// HRL = Joshi 5, MRL = Joshi 3-4, LRL = Joshi 0-2 split by the model's
// pre-training coverage.
inline ResourceClass classify(const LanguageRecord& r, Model model) {
  if (r.joshi_class >= 5) return ResourceClass::hrl;
  if (r.joshi_class >= 3) return ResourceClass::mrl;
  return r.seen_by(model) ? ResourceClass::lrl_seen : ResourceClass::lrl_unseen;
}

struct ClassMean {
  double mean = 0.0;
  std::size_t languages = 0;
};

// Classes without evaluation languages are absent from the maps.
struct ResourceBreakdown {
  std::map<std::string, std::map<ResourceClass, ClassMean>> per_task;
  std::map<std::string, ClassMean> task_overall;
  std::map<ResourceClass, double> macro;
};

inline ResourceBreakdown resource_breakdown(const ScoreTable& table, const Catalog& catalog, Model model,
                                            const std::string& subset_id) {
  if (!table.subsets().count(subset_id)) throw validation_error("unknown subset_id '" + subset_id + "'");
  ResourceBreakdown out;
  std::map<ResourceClass, std::vector<double>> class_task_means;
  for (const auto& [task, langs] : detail::language_means(table, subset_id)) {
    std::map<ResourceClass, std::map<std::string, double>> by_class;
    for (const auto& [lang, mean] : langs) {
      const LanguageRecord* rec = catalog.find(lang);
      if (!rec) {
        throw validation_error("evaluation language '" + lang + "' is not in the catalog (no Joshi class)");
      }
      by_class[classify(*rec, model)][lang] = mean;
    }
    for (const auto& [cls, members] : by_class) {
      const ClassMean cm{detail::mean_of_values(members), members.size()};
      out.per_task[task][cls] = cm;
      class_task_means[cls].push_back(cm.mean);
    }
    out.task_overall[task] = {detail::mean_of_values(langs), langs.size()};
  }
  for (auto& [cls, means] : class_task_means) out.macro[cls] = detail::sorted_mean(std::move(means));
  return out;
}

}  // namespace langsel
