#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "tpt/checkpoint.hpp"
#include "tpt/errors.hpp"
#include "tpt/harness.hpp"

using namespace tpt;

namespace {

RunConfig small_run() {
  RunConfig c = tiny_config();
  c.data.num_train = 12;
  c.data.num_val = 4;
  c.data.num_test = 5;
  c.finalize();
  return c;
}

std::vector<data::TrainPair> some_pairs(const data::Dataset& ds, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::TrainPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(data::sample_train_pair(ds.train, rng, false));
  return pairs;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Objective, FreshHeadsGiveFourLogTwo) {
  auto c = small_run();
  c.objective.weights = {1.0, 0.0, 0.0, 0.0};
  const auto ds = data::generate_dataset(c.data);
  const auto tm = init_model(c, ds);
  ad::Tape tape(false);
  const auto loss = batch_objective(tape, tm, some_pairs(ds, 6, 1));
  EXPECT_NEAR(loss.log.cls, 4.0 * std::log(2.0), 1e-9);
  EXPECT_NEAR(loss.total.item(), 4.0 * std::log(2.0), 1e-9);
}

TEST(Objective, TotalIsWeightedSumOfComponents) {
  auto c = small_run();
  c.objective.weights = {0.7, 1.3, 0.4, 2.1};
  const auto ds = data::generate_dataset(c.data);
  const auto tm = init_model(c, ds);
  ad::Tape tape(false);
  const auto l = batch_objective(tape, tm, some_pairs(ds, 5, 2));
  const double expected = 0.7 * l.log.cls + 1.3 * l.log.reg + 0.4 * l.log.order + 2.1 * l.log.sparsity;
  EXPECT_NEAR(l.total.item(), expected, 1e-12);
  EXPECT_NEAR(l.log.total, l.total.item(), 1e-12);
  EXPECT_GT(l.log.sparsity, 0.0);
}

TEST(Training, EpochZeroLossIsBitIdentical) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto a = train(c, ds, {false, nullptr});
  const auto b = train(c, ds, {false, nullptr});
  EXPECT_EQ(a.first_batch.total, b.first_batch.total);
  ASSERT_EQ(a.history.size(), b.history.size());
  EXPECT_EQ(a.history.back().loss.total, b.history.back().loss.total);
  EXPECT_TRUE(std::isfinite(a.first_batch.total));
}

TEST(Training, WritesTaggedArtifacts) {
  auto c = small_run();
  c.output_dir = scratch("tpt_harness_artifacts").string();
  const auto ds = data::generate_dataset(c.data);
  const auto r = train(c, ds, {true, nullptr});
  ASSERT_FALSE(r.run_dir.empty());
  for (const char* f : {"config.txt", "intervals.csv", "train_loss.csv", "history.csv",
                        "checkpoint.bin", "best_val.json", "test.json"}) {
    EXPECT_TRUE(std::filesystem::exists(r.run_dir / f)) << f;
  }
  EXPECT_NE(r.run_dir.filename().string().find(c.hash()), std::string::npos);
  std::filesystem::remove_all(c.output_dir);
}

TEST(Checkpoint, RoundTripPreservesEvaluationExactly) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto r = train(c, ds, {false, nullptr});
  const auto dir = scratch("tpt_harness_ckpt");
  save_checkpoint(dir / "m.bin", r.trained);
  const auto loaded = load_checkpoint(dir / "m.bin");
  const auto a = evaluate(r.trained, ds.train, ds.test, "test");
  const auto b = evaluate(loaded, ds.train, ds.test, "test");
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  EXPECT_EQ(loaded.intervals.edges(), r.trained.intervals.edges());
  EXPECT_EQ(loaded.intervals.counts(), r.trained.intervals.counts());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, TamperedConfigHashIsRejected) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto tm = init_model(c, ds);
  const auto dir = scratch("tpt_harness_tamper");
  save_checkpoint(dir / "m.bin", tm);
  auto archive = ckpt::read_archive(dir / "m.bin");
  const auto pos = archive.metadata.find("seed");
  ASSERT_NE(pos, std::string::npos);
  archive.metadata.replace(archive.metadata.find('\n', pos) - 1, 1, "9");
  ckpt::write_archive(dir / "bad.bin", archive);
  EXPECT_THROW(load_checkpoint(dir / "bad.bin"), LoadError);

  auto no_iv = ckpt::read_archive(dir / "m.bin");
  std::erase_if(no_iv.entries, [](const ckpt::Entry& e) { return e.name == "intervals.edges"; });
  ckpt::write_archive(dir / "noiv.bin", no_iv);
  EXPECT_THROW(load_checkpoint(dir / "noiv.bin"), LoadError);
  std::filesystem::remove_all(dir);
}

TEST(Evaluation, ReferenceScorePredictorMatchesOracle) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto s0 = [](const data::ScoredVideo&, std::span<const data::ScoredVideo* const> ex) {
    std::vector<double> out;
    for (const auto* e : ex) out.push_back(e->score);
    return out;
  };
  const auto r = evaluate_with(c, ds.train, ds.test, "test", s0);
  ASSERT_EQ(r.predictions.size(), ds.test.size());
  EXPECT_EQ(r.report.count, ds.test.size());
  std::vector<double> truth;
  for (const auto& v : ds.test) truth.push_back(v.score);
  const auto [lo, hi] = c.data.declared_score_range();
  EXPECT_NEAR(r.report.relative_l2, metrics::relative_l2(r.predictions, truth, lo, hi), 1e-15);
  double mean_train = 0.0, min_train = 1e300, max_train = -1e300;
  for (const auto& v : ds.train) {
    mean_train += v.score / ds.train.size();
    min_train = std::min(min_train, v.score);
    max_train = std::max(max_train, v.score);
  }
  for (double p : r.predictions) {
    EXPECT_GE(p, min_train);
    EXPECT_LE(p, max_train);
  }
  const auto again = evaluate_with(c, ds.train, ds.test, "test", s0);
  EXPECT_EQ(again.predictions, r.predictions);
}

TEST(Evaluation, ConstantPredictionsWarnInsteadOfFailing) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto r = evaluate_with(c, ds.train, ds.test, "test",
                               [](const data::ScoredVideo&, std::span<const data::ScoredVideo* const> ex) {
                                 return std::vector<double>(ex.size(), 50.0);
                               });
  EXPECT_EQ(r.report.spearman, 0.0);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Ablation, EmptyVariantListGivesHeaderOnly) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto rows = ablate(c, ds, {});
  EXPECT_TRUE(rows.empty());
  EXPECT_EQ(ablation_csv(rows), "variant,spearman,relative_l2_x100\n");
}

TEST(Ablation, UnknownVariantIsAConfigError) {
  EXPECT_THROW(variant_config(small_run(), "tpt_plus_magic"), ConfigError);
  for (const auto& v : ablation_variants()) EXPECT_NO_THROW(variant_config(small_run(), v)) << v;
}

TEST(Ablation, BaselineLeavesDecoderWithoutGradient) {
  const auto c = variant_config(small_run(), "baseline");
  const auto ds = data::generate_dataset(c.data);
  const auto tm = init_model(c, ds);
  auto& store = tm.model->params();
  store.zero_grad();
  {
    ad::Tape tape;
    tape.backward(batch_objective(tape, tm, some_pairs(ds, 3, 4)).total);
  }
  bool any_decoder = false;
  for (const auto* p : store.all()) {
    if (p->name().rfind("decoder", 0) != 0) continue;
    any_decoder = true;
    for (double g : p->grad()) EXPECT_EQ(g, 0.0) << p->name();
  }
  EXPECT_TRUE(any_decoder);
}

TEST(Ablation, PoolingGeneratorsEmitKParts) {
  for (const char* v : {"adaptive_pooling", "temporal_conv"}) {
    const auto c = variant_config(small_run(), v);
    const auto ds = data::generate_dataset(c.data);
    const auto tm = init_model(c, ds);
    ad::Tape tape(false);
    const auto ps = tm.model->parts(tape, ds.train[0].clips);
    EXPECT_EQ(ps.parts.shape(), (ad::Shape{c.model.tpt.queries, c.model.tpt.model_dim})) << v;
    EXPECT_TRUE(ps.attention.empty());
  }
}

TEST(Gradcheck, ReportsEveryParameterOnce) {
  const auto c = tiny_config();
  const auto report = gradcheck(c);
  const auto tm = init_model(c, data::generate_dataset(c.data));
  ASSERT_EQ(report.entries.size(), tm.model->params().size());
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    EXPECT_EQ(report.entries[i].name, tm.model->params().all()[i]->name());
  }
  EXPECT_TRUE(report.passed()) << report.to_text();
}

TEST(Gradcheck, PassesWithClassificationOnly) {
  auto c = tiny_config();
  c.objective.weights = {1.0, 0.0, 0.0, 0.0};
  EXPECT_TRUE(gradcheck(c).passed());
}

TEST(Config, TextRoundTripAndHash) {
  auto c = small_run();
  c.set("loss.sparsity", "0.25");
  c.set_assignment("model.positional=memory");
  const auto back = RunConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.hash(), c.hash());
  auto moved = c;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(moved.hash(), c.hash());
  auto reseeded = c;
  reseeded.seed += 1;
  EXPECT_NE(reseeded.hash(), c.hash());
  EXPECT_THROW(c.set("no.such.key", "1"), ConfigError);
  EXPECT_THROW(c.set("train.epochs", "many"), ConfigError);
  EXPECT_THROW(c.set_assignment("missing_equals"), ConfigError);
}

TEST(Export, CsvAndPgmFormats) {
  const std::vector<double> att = {0.25, 0.75, 1.0, 0.0};
  EXPECT_EQ(attention_csv(att, 2, 2),
            "query,clip1,clip2\n1,0.250000000,0.750000000\n2,1.000000000,0.000000000\n");
  const auto pgm = attention_pgm(att, 2, 2, 3);
  std::istringstream is(pgm);
  std::string magic;
  is >> magic;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(static_cast<unsigned char>(pgm.back()), 0u);
  EXPECT_NE(pgm.find('\xff'), std::string::npos);
}

TEST(Export, WritesOneMapPerVideoAndLayer) {
  const auto c = small_run();
  const auto ds = data::generate_dataset(c.data);
  const auto tm = init_model(c, ds);
  const auto dir = scratch("tpt_harness_export");
  const auto files = export_attention(tm, std::span(ds.test).first(2), dir);
  EXPECT_EQ(files.size(), 2u * c.model.tpt.layers * 2u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  std::filesystem::remove_all(dir);
}
