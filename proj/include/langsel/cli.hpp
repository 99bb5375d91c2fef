#pragma once

// Command-line front end. run() never touches std::cout/std::cerr directly,
// so it can be driven from tests with string streams.

#include <charconv>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "langsel/aggregate.hpp"
#include "langsel/error.hpp"
#include "langsel/manifest.hpp"
#include "langsel/metric.hpp"
#include "langsel/realign_loss.hpp"
#include "langsel/selector.hpp"
#include "langsel/typology.hpp"

namespace langsel {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr double kGradientErrorLimit = 1e-4;
inline constexpr int kGradientCheckFailed = 4;

inline std::string version_string() {
  return "langsel " + std::string(kVersion) + " (format_version " + std::to_string(kFormatVersion) + ")";
}

// Shortest representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace cli_detail {

struct Common {
  unsigned threads = 0;
};

struct SelectArgs {
  std::string metadata;
  std::string vectors;
  std::size_t n = 0;
  std::string direction = "max";
  std::string anchor = "none";
  std::string pool_filter = "all";
  std::string distinct;
  std::string exclude_group;
  std::string solver = "exact";
  std::uint64_t seed = 0;
  std::uint64_t budget = kDefaultEnumerationBudget;
  bool trace = false;
};

struct LossArgs {
  std::string batch;
  double temperature = kDefaultTemperature;
  double epsilon = 1e-5;
  bool include_positive = true;
};

struct AggregateArgs {
  std::string scores;
  std::string catalog;
  std::string model;
  bool by_resource = false;
  bool best = false;
};

struct ManifestArgs {
  std::string vectors;
  std::vector<std::string> entries;
};

inline std::optional<std::string> anchor_of(const std::string& s) {
  if (s.empty() || s == "none") return std::nullopt;
  return s;
}

inline void add_selection_options(CLI::App* sub, SelectArgs& a, bool vectors_required) {
  sub->add_option("--metadata", a.metadata, "Language metadata TSV")->required();
  auto* v = sub->add_option("--vectors", a.vectors, "Feature vector TSV");
  if (vectors_required) v->required();
  sub->add_option("--n", a.n, "Subset size")->required();
  sub->add_option("--anchor", a.anchor, "Anchor language code counted in the objective but never selected, or 'none'");
  sub->add_option("--pool-filter", a.pool_filter,
                  "Candidate pool, e.g. 'joshi=4,5 & script!=Latin & seen_xlmr=1 & code!=eng'");
  sub->add_option("--seed", a.seed, "Seed for the random solver");
  sub->add_flag("--trace", a.trace, "Include the solver trace in the output");
}

inline SubsetResult run_selection(const SelectArgs& a, const Common& common, VectorInfo& info) {
  const bool random = parse_solver(a.solver) == Solver::random;
  Catalog catalog = a.vectors.empty() ? load_metadata(a.metadata) : load_catalog(a.metadata, a.vectors);
  SelectionSpec spec;
  spec.pool = filter_pool(catalog, PoolFilter::parse(a.pool_filter));
  spec.n = a.n;
  spec.direction = parse_direction(a.direction);
  spec.anchor = anchor_of(a.anchor);
  if (spec.anchor) catalog.at(*spec.anchor);
  spec.solver = parse_solver(a.solver);
  spec.seed = a.seed;
  spec.enumeration_budget = a.budget;
  spec.trace = a.trace;
  spec.threads = common.threads;
  if (!a.exclude_group.empty() && a.distinct.empty()) {
    throw validation_error("--exclude-group requires --distinct {script,family}");
  }
  if (!a.distinct.empty()) {
    std::optional<std::string> excluded;
    if (!a.exclude_group.empty()) excluded = a.exclude_group;
    spec.group = make_group_constraint(catalog, parse_group_key(a.distinct), excluded);
  }
  if (a.vectors.empty()) {
    if (!random) throw validation_error("--vectors is required for solver '" + a.solver + "'");
    return select_random(spec);
  }
  info.digest = file_sha256(a.vectors);
  info.dimension = catalog.dimension();
  std::vector<std::string> members = spec.pool;
  if (spec.anchor && std::find(members.begin(), members.end(), *spec.anchor) == members.end()) {
    members.push_back(*spec.anchor);
    std::sort(members.begin(), members.end());
  }
  const DistanceMatrix matrix = pairwise_matrix(catalog, members, common.threads);
  return select(matrix, spec);
}

inline int run_distances(const SelectArgs& a, const Common& common, std::ostream& out) {
  const Catalog catalog = load_catalog(a.metadata, a.vectors);
  const auto pool = filter_pool(catalog, PoolFilter::parse(a.pool_filter));
  const DistanceMatrix m = pairwise_matrix(catalog, pool, common.threads);
  out << "code";
  for (const auto& c : m.codes()) out << '\t' << c;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.codes()[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << '\t' << format_double(m(i, j));
    out << '\n';
  }
  return 0;
}

inline int run_loss_check(const LossArgs& a, std::ostream& out) {
  const AlignedBatch batch = load_batch(a.batch, a.temperature);
  const LossOptions opt{a.include_positive};
  const LossReport report = contrastive_loss(batch, opt);
  const double err = gradient_check(batch, a.epsilon, opt);
  out << "pairs\t" << batch.size() << '\n';
  out << "loss\t" << format_double(report.loss) << '\n';
  out << "max_gradient_error\t" << format_double(err) << '\n';
  const bool ok = err <= kGradientErrorLimit;
  out << "gradient_check\t" << (ok ? "pass" : "FAIL") << '\n';
  return ok ? 0 : kGradientCheckFailed;
}

inline int run_aggregate(const AggregateArgs& a, std::ostream& out) {
  const ScoreTable table = load_scores(a.scores);
  const Catalog catalog = load_metadata(a.catalog);
  const Model model = parse_model(a.model);

  out << "subset_id";
  for (const auto& t : table.tasks()) out << '\t' << t;
  out << "\tmacro\n";
  std::vector<std::string> complete;
  for (const auto& id : table.subsets()) {
    const auto means = detail::language_means(table, id);
    out << id;
    bool full = true;
    for (const auto& t : table.tasks()) {
      const auto it = means.find(t);
      if (it == means.end()) {
        full = false;
        out << "\tNA";
      } else {
        out << '\t' << format_double(detail::mean_of_values(it->second));
      }
    }
    out << '\t' << (full ? format_double(macro_average(table, id)) : std::string("NA")) << '\n';
    if (full) complete.push_back(id);
  }

  if (a.by_resource) {
    out << "\nsubset_id\ttask\tclass\tmean\tlanguages\n";
    for (const auto& id : table.subsets()) {
      const ResourceBreakdown rb = resource_breakdown(table, catalog, model, id);
      for (const auto& [task, classes] : rb.per_task) {
        for (const auto& [cls, cm] : classes) {
          out << id << '\t' << task << '\t' << to_string(cls) << '\t' << format_double(cm.mean) << '\t'
              << cm.languages << '\n';
        }
      }
      for (const auto& [cls, macro] : rb.macro) {
        out << id << "\tmacro\t" << to_string(cls) << '\t' << format_double(macro) << "\t-\n";
      }
    }
  }

  if (a.best) {
    const auto [id, score] = best_subset(table, complete);
    out << "\nbest\t" << id << '\t' << format_double(score) << '\n';
  }
  return 0;
}

inline int run_emit_manifest(const ManifestArgs& a, std::ostream& out) {
  const std::string digest = file_sha256(a.vectors);
  std::vector<std::pair<std::string, SubsetResult>> labelled;
  for (const auto& spec : a.entries) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw validation_error("--entry expects HEURISTIC=RESULT_FILE, got '" + spec + "'");
    }
    const std::string file = spec.substr(eq + 1);
    auto [result, info] = subset_result_from_json(detail::read_file(file));
    if (info.digest && *info.digest != digest) {
      throw validation_error(file + ": computed from a different vector file (digest " + *info.digest + ")");
    }
    labelled.emplace_back(spec.substr(0, eq), std::move(result));
  }
  out << emit_manifest(make_manifest(labelled, digest));
  return 0;
}

}  // namespace cli_detail

// Exit codes: 0 success, 1 validation error, 2 infeasible request, 3 exact
// enumeration budget exceeded, 4 loss-check gradient error above 1e-4.
inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Typology-driven language subset selection and realignment-loss tooling", "langsel"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--threads", common.threads, "Worker threads (0 = all available)");

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "Choose a language subset by angular-distance dispersion");
  add_selection_options(select_cmd, sel, true);
  select_cmd->add_option("--direction", sel.direction, "Optimize total pairwise distance: max or min")
      ->check(CLI::IsMember({"max", "min"}));
  select_cmd->add_option("--distinct", sel.distinct, "All-different constraint on script or family")
      ->check(CLI::IsMember({"script", "family"}));
  select_cmd->add_option("--exclude-group", sel.exclude_group, "Drop candidates with this script/family label");
  select_cmd->add_option("--solver", sel.solver, "exact, greedy, local (greedy + 1-swap descent) or random")
      ->check(CLI::IsMember({"exact", "greedy", "local", "random"}));
  select_cmd->add_option("--budget", sel.budget, "Maximum subsets enumerated by the exact solver");

  SelectArgs rnd;
  rnd.solver = "random";
  auto* random_cmd = app.add_subcommand("random", "Draw a seeded uniform random subset");
  add_selection_options(random_cmd, rnd, false);

  SelectArgs dist;
  auto* distances_cmd = app.add_subcommand("distances", "Print the pairwise angular distance matrix");
  distances_cmd->add_option("--metadata", dist.metadata, "Language metadata TSV")->required();
  distances_cmd->add_option("--vectors", dist.vectors, "Feature vector TSV")->required();
  distances_cmd->add_option("--pool-filter", dist.pool_filter, "Languages to include");

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss-check", "Evaluate the contrastive loss and verify its gradient");
  loss_cmd->add_option("--batch", loss.batch, "Batch TSV: pair_index, side (src|tgt), values")->required();
  loss_cmd->add_option("--temperature", loss.temperature, "Softmax temperature T");
  loss_cmd->add_option("--epsilon", loss.epsilon, "Central-difference step, in [1e-7, 1e-3]");
  loss_cmd->add_option("--include-positive-in-denominator", loss.include_positive,
                       "Keep the aligned partner in each anchor's denominator (true|false)");

  AggregateArgs agg;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Macro-average downstream scores per subset");
  aggregate_cmd->add_option("--scores", agg.scores, "Score CSV")->required();
  aggregate_cmd->add_option("--catalog", agg.catalog, "Language metadata TSV")->required();
  aggregate_cmd->add_option("--model", agg.model, "Model whose seen/unseen flags apply: xlmr or mbert")
      ->required()
      ->check(CLI::IsMember({"xlmr", "mbert"}));
  aggregate_cmd->add_flag("--by-resource", agg.by_resource, "Break scores down by resource class");
  aggregate_cmd->add_flag("--best", agg.best, "Report the subset with the highest macro-average");

  ManifestArgs man;
  auto* manifest_cmd = app.add_subcommand("emit-manifest", "Combine selection results into a manifest");
  manifest_cmd->add_option("--vectors", man.vectors, "Vector file the results were computed from")->required();
  manifest_cmd->add_option("--entry", man.entries, "HEURISTIC=RESULT_FILE, repeatable")->required();

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ErrorKind::validation);
  }

  try {
    for (const auto* sub : app.get_subcommands()) {
      err << "# langsel " << sub->get_name() << " (" << version_string() << ")\n"
          << "threads=" << common.threads << '\n'
          << sub->config_to_str(true, false);
    }
    if (*select_cmd || *random_cmd) {
      const SelectArgs& a = *select_cmd ? sel : rnd;
      VectorInfo info;
      const SubsetResult r = run_selection(a, common, info);
      out << subset_result_to_json(r, info);
      if (r.clamped) {
        err << "note: n=" << a.n << " clamped to " << r.effective_n << " (feasible capacity of the pool)\n";
      }
      return 0;
    }
    if (*distances_cmd) return run_distances(dist, common, out);
    if (*loss_cmd) return run_loss_check(loss, out);
    if (*aggregate_cmd) return run_aggregate(agg, out);
    if (*manifest_cmd) return run_emit_manifest(man, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::validation);
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace langsel
