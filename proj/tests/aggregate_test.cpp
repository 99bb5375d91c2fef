#include <gtest/gtest.h>

#include <array>
#include <random>

#include "langsel/aggregate.hpp"
#include "langsel/manifest.hpp"
#include "support.hpp"

namespace langsel {
namespace {

// POS, NLI and NER task-level scores per subset, one record each.
ScoreTable ablation_table() {
  const std::vector<std::pair<std::string, std::array<double, 3>>> rows{
      {"finetune_only", {66.0, 58.6, 51.1}},    {"joshi_4_5", {67.5, 58.6, 54.4}},
      {"joshi_3_4_5", {67.2, 58.8, 53.8}},      {"joshi_3", {67.0, 58.9, 51.0}},
      {"joshi_2", {68.8, 59.9, 54.5}},          {"unseen", {69.1, 59.8, 53.5}},
      {"seen", {67.1, 58.8, 53.3}},
  };
  const std::array<std::string, 3> tasks{"pos", "nli", "ner"};
  std::vector<ScoreRecord> recs;
  for (const auto& [id, scores] : rows) {
    for (std::size_t t = 0; t < 3; ++t) recs.push_back({id, tasks[t], "d", "all", 0, scores[t]});
  }
  return ScoreTable::from_records(recs);
}

TEST(MacroAverage, AblationRows) {
  const ScoreTable t = ablation_table();
  EXPECT_NEAR(macro_average(t, "joshi_2"), 61.0667, 1e-4);
  EXPECT_NEAR(macro_average(t, "finetune_only"), 58.5667, 1e-4);
  const auto [id, score] =
      best_subset(t, {"joshi_4_5", "joshi_3_4_5", "joshi_3", "joshi_2", "unseen", "seen"});
  EXPECT_EQ(id, "joshi_2");
  EXPECT_NEAR(score, 61.0667, 1e-4);
  EXPECT_THROW(macro_average(t, "nope"), Error);
  EXPECT_THROW(best_subset(t, {"nope"}), Error);
}

TEST(MacroAverage, AveragesLanguagesBeforeTasks) {
  // deu has two datasets and two seeds; each language still weighs 1.
  const auto t = ScoreTable::from_records({
      {"s", "pos", "d1", "deu", 1, 80},
      {"s", "pos", "d1", "deu", 2, 90},
      {"s", "pos", "d2", "deu", 1, 70},
      {"s", "pos", "d2", "deu", 2, 60},
      {"s", "pos", "d1", "yor", 1, 40},
      {"s", "ner", "d1", "deu", 1, 50},
  });
  const auto s = subset_scores(t, "s");
  EXPECT_DOUBLE_EQ(s.task_mean.at("pos"), (75.0 + 40.0) / 2);
  EXPECT_DOUBLE_EQ(s.task_mean.at("ner"), 50.0);
  EXPECT_DOUBLE_EQ(s.macro, (57.5 + 50.0) / 2);
}

TEST(MacroAverage, IncompleteSubsetsAndTies) {
  const auto t = ScoreTable::from_records({
      {"b", "pos", "d", "deu", 0, 60},
      {"b", "ner", "d", "deu", 0, 40},
      {"a", "pos", "d", "deu", 0, 40},
      {"a", "ner", "d", "deu", 0, 60},
      {"c", "pos", "d", "deu", 0, 99},
  });
  EXPECT_THROW(macro_average(t, "c"), Error);
  const auto [id, score] = best_subset(t, {"c", "b", "a"});
  EXPECT_EQ(id, "a");
  EXPECT_DOUBLE_EQ(score, 50.0);
  EXPECT_THROW(best_subset(t, {"c"}), Error);
}

TEST(ScoreTable, RejectsDuplicatesAndNonFinite) {
  EXPECT_THROW(ScoreTable::from_records({{"s", "pos", "d", "deu", 0, 1}, {"s", "pos", "d", "deu", 0, 2}}), Error);
  EXPECT_THROW(ScoreTable::from_records({{"s", "pos", "d", "deu", 0, std::nan("")}}), Error);
}

TEST(ResourceBreakdown, ClassesFromCatalog) {
  const Catalog meta = load_metadata(testing::kMetadata65);
  // deu, fra: Joshi 5; fin: Joshi 4; yor: unseen by XLM-R but seen by mBERT.
  ASSERT_EQ(meta.at("yor").joshi_class <= 2, true);
  const auto t = ScoreTable::from_records({
      {"s", "pos", "d", "deu", 0, 80},
      {"s", "pos", "d", "fra", 0, 60},
      {"s", "pos", "d", "fin", 0, 50},
      {"s", "pos", "d", "yor", 0, 30},
      {"s", "ner", "d", "deu", 0, 90},
  });
  const auto rb = resource_breakdown(t, meta, Model::xlmr, "s");
  EXPECT_DOUBLE_EQ(rb.per_task.at("pos").at(ResourceClass::hrl).mean, 70.0);
  EXPECT_EQ(rb.per_task.at("pos").at(ResourceClass::hrl).languages, 2u);
  EXPECT_EQ(classify(meta.at("fin"), Model::xlmr), ResourceClass::mrl);
  EXPECT_DOUBLE_EQ(rb.per_task.at("pos").at(ResourceClass::lrl_unseen).mean, 30.0);
  EXPECT_FALSE(rb.per_task.at("pos").count(ResourceClass::lrl_seen));
  EXPECT_EQ(rb.per_task.at("ner").size(), 1u);
  EXPECT_DOUBLE_EQ(rb.macro.at(ResourceClass::hrl), (70.0 + 90.0) / 2);
  EXPECT_DOUBLE_EQ(rb.task_overall.at("pos").mean, 55.0);

  const auto mb = resource_breakdown(t, meta, Model::mbert, "s");
  EXPECT_TRUE(mb.per_task.at("pos").count(ResourceClass::lrl_seen));
  EXPECT_FALSE(mb.per_task.at("pos").count(ResourceClass::lrl_unseen));

  const auto bad = ScoreTable::from_records({{"s", "pos", "d", "xxx", 0, 1}});
  EXPECT_THROW(resource_breakdown(bad, meta, Model::xlmr, "s"), Error);
}

TEST(ResourceBreakdown, JoshiOneUnseenIsLowResourceUnseen) {
  const Catalog c = Catalog::from_records({{"qqq", "Q", "Latin", "F", 1, false, false, {}}});
  EXPECT_EQ(classify(c.at("qqq"), Model::xlmr), ResourceClass::lrl_unseen);
  EXPECT_EQ(classify(c.at("qqq"), Model::mbert), ResourceClass::lrl_unseen);
}

std::vector<ScoreRecord> random_records(std::mt19937_64& rng, const Catalog& meta) {
  std::uniform_real_distribution<double> u(0.0, 90.0);
  const auto codes = meta.codes();
  std::vector<ScoreRecord> recs;
  for (const std::string id : {"a", "b"}) {
    for (const std::string task : {"ner", "pos", "qa"}) {
      for (std::size_t i = 0; i < codes.size(); ++i) {
        if (rng() % 3 == 0) continue;
        for (std::uint64_t seed = 0; seed < 1 + rng() % 3; ++seed) recs.push_back({id, task, "d", codes[i], seed, u(rng)});
      }
      recs.push_back({id, task, "d", "deu", 99, u(rng)});
    }
  }
  return recs;
}

TEST(AggregateProperties, ShiftOrderAndClassMerge) {
  const Catalog meta = load_metadata(testing::kMetadata65);
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto recs = random_records(rng, meta);
    const ScoreTable t = ScoreTable::from_records(recs);
    const double base = macro_average(t, "a");

    auto shifted = recs;
    for (auto& r : shifted) r.score += 7.5;
    EXPECT_NEAR(macro_average(ScoreTable::from_records(shifted), "a"), base + 7.5, 1e-9);

    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_EQ(macro_average(ScoreTable::from_records(recs), "a"), base);

    // Language-weighted merge of the classes gives back each task mean.
    const auto s = subset_scores(t, "a");
    const auto rb = resource_breakdown(t, meta, Model::xlmr, "a");
    for (const auto& [task, classes] : rb.per_task) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [_, cm] : classes) {
        sum += cm.mean * static_cast<double>(cm.languages);
        n += cm.languages;
      }
      EXPECT_NEAR(sum / static_cast<double>(n), s.task_mean.at(task), 1e-9);
      EXPECT_NEAR(rb.task_overall.at(task).mean, s.task_mean.at(task), 1e-9);
    }
  }
}

TEST(LoadScores, ParsesAndReportsLocations) {
  testing::TempDir dir;
  const auto ok = dir.write("s.csv", "subset_id,task,dataset,language,seed,score\ns,pos,ud,deu,1,80.5\n");
  EXPECT_DOUBLE_EQ(macro_average(load_scores(ok), "s"), 80.5);
  const auto expect_msg = [&](const std::string& name, const std::string& text, const std::string& where) {
    try {
      load_scores(dir.write(name, text));
      ADD_FAILURE() << "no error for " << name;
    } catch (const Error& e) {
      EXPECT_EQ(e.exit_code(), 1);
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  };
  expect_msg("h.csv", "id,score\n", "h.csv:1:1");
  expect_msg("r.csv", "subset_id,task,dataset,language,seed,score\ns,pos,ud,deu,1,101\n", "r.csv:2:16");
  expect_msg("x.csv", "subset_id,task,dataset,language,seed,score\ns,pos,ud,deu,x,1\n", "x.csv:2:14");
  expect_msg("f.csv", "subset_id,task,dataset,language,seed,score\ns,pos,ud\n", "f.csv:2:1");
  expect_msg("d.csv", "subset_id,task,dataset,language,seed,score\ns,pos,ud,deu,1,1\ns,pos,ud,deu,1,2\n",
             "duplicate");
}

SubsetResult sample_result(Solver solver, std::uint64_t seed = 0) {
  SubsetResult r;
  r.spec.pool = {"amh", "deu", "yor"};
  r.spec.n = 2;
  r.spec.anchor = "eng";
  r.spec.solver = solver;
  r.spec.seed = seed;
  r.solver_used = solver;
  r.selected = {"amh", "yor"};
  r.objective = 1.2345678901234567;
  r.effective_n = 2;
  return r;
}

TEST(Manifest, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_TRUE(is_hex_digest(sha256_hex("")));
  EXPECT_FALSE(is_hex_digest("ABC"));
}

TEST(Manifest, RoundTripIsByteIdentical) {
  const std::string digest = sha256_hex("vectors");
  auto grouped = sample_result(Solver::exact);
  grouped.spec.group = GroupConstraint{GroupKey::script, std::string("Latin"), {}};
  const Manifest m = make_manifest({{"maxsum", grouped},
                                    {"greedy", sample_result(Solver::greedy)},
                                    {"random", sample_result(Solver::random, 17)},
                                    {"random", sample_result(Solver::random, 23)}},
                                   digest);
  const std::string text = emit_manifest(m);
  const Manifest back = parse_manifest(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(emit_manifest(back), text);
  EXPECT_EQ(back.entries[0].constraint->exclude, std::optional<std::string>("Latin"));
  EXPECT_FALSE(back.entries[1].seed.has_value());
  EXPECT_EQ(back.entries[2].seed, std::optional<std::uint64_t>(17));
  EXPECT_EQ(back.entries[0].objective, std::optional<double>(1.2345678901234567));
  EXPECT_LT(text.find("\"format_version\""), text.find("\"vector_digest\""));
}

TEST(Manifest, RejectsDuplicatesAndBadDigest) {
  const std::string digest = sha256_hex("v");
  const auto dup = make_manifest({{"random", sample_result(Solver::random, 1)},
                                  {"random", sample_result(Solver::random, 1)}},
                                 digest);
  EXPECT_THROW(emit_manifest(dup), Error);
  EXPECT_THROW(emit_manifest(make_manifest({}, "xyz")), Error);
  EXPECT_THROW(parse_manifest("{\"format_version\": 2, \"vector_digest\": \"\", \"entries\": []}"), Error);
  EXPECT_THROW(parse_manifest("not json"), Error);
  EXPECT_THROW(parse_manifest("{}"), Error);
}

TEST(SubsetResultJson, RoundTrip) {
  auto r = sample_result(Solver::random, 42);
  r.spec.trace = true;
  r.trace = {"seed 42"};
  const VectorInfo info{sha256_hex("v"), 289};
  const std::string text = subset_result_to_json(r, info);
  const auto [back, vinfo] = subset_result_from_json(text);
  EXPECT_EQ(back.selected, r.selected);
  EXPECT_EQ(back.spec.pool, r.spec.pool);
  EXPECT_EQ(back.spec.seed, 42u);
  EXPECT_EQ(back.objective, r.objective);
  EXPECT_EQ(back.trace, r.trace);
  EXPECT_EQ(vinfo.digest, info.digest);
  EXPECT_EQ(vinfo.dimension, 289u);
  EXPECT_EQ(subset_result_to_json(back, vinfo), text);
  EXPECT_THROW(subset_result_from_json("{\"format_version\": 1}"), Error);
}

}  // namespace
}  // namespace langsel
