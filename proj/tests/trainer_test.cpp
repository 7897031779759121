#include "dmmvh/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dmmvh/error.hpp"

namespace dmmvh {
namespace {

DatasetSplit small_data() {
  SynthConfig s;
  s.view_dims = {8, 6};
  s.train_size = 64;
  s.retrieval_size = 64;
  s.query_size = 16;
  s.seed = 5;
  return generate_synthetic(s);
}

TrainConfig small_config() {
  TrainConfig c;
  c.bits = 8;
  c.proj_dim = 8;
  c.batch_size = 16;
  c.epochs = 6;
  c.eval_every = 2;
  c.adam.lr = 1e-3;
  return c;
}

TEST(TrainerTest, EpochsZeroReturnsInitialParams) {
  TrainConfig c = small_config();
  c.epochs = 0;
  const DatasetSplit d = small_data();
  const TrainResult r = train(d, c);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.final_state.params, initial_state(c, d.view_dims).params);
  EXPECT_EQ(r.final_state.epoch, 0u);
}

TEST(TrainerTest, RecordsAndEvaluationSchedule) {
  const TrainConfig c = small_config();
  std::vector<EpochRecord> seen;
  const TrainResult r = train(small_data(), c, std::nullopt,
                              [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(r.records.size(), 6u);
  EXPECT_EQ(seen, r.records);
  for (const EpochRecord& e : r.records) {
    EXPECT_EQ(e.map.has_value(), e.epoch % 2 == 0);
    EXPECT_TRUE(std::isfinite(e.loss));
  }
  EXPECT_EQ(r.final_state.optim.step, 6u * 4u);
  ASSERT_TRUE(r.best_map);
  EXPECT_GE(*r.best_map, *r.records.back().map);
}

TEST(TrainerTest, FinalEpochAlwaysEvaluated) {
  TrainConfig c = small_config();
  c.epochs = 3;
  c.eval_every = 0;
  const TrainResult r = train(small_data(), c);
  EXPECT_FALSE(r.records[0].map);
  EXPECT_TRUE(r.records[2].map);
}

TEST(TrainerTest, ResumeMatchesUninterruptedRun) {
  const DatasetSplit d = small_data();
  const TrainConfig c = small_config();
  const TrainResult whole = train(d, c);
  TrainConfig first = c;
  first.epochs = 3;
  const TrainResult part = train(d, first);
  const TrainResult rest = train(d, c, part.final_state);
  EXPECT_EQ(rest.final_state.params, whole.final_state.params);
  EXPECT_EQ(rest.final_state.optim, whole.final_state.optim);
  ASSERT_EQ(rest.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rest.records[i].loss, whole.records[i + 3].loss);
    EXPECT_EQ(rest.records[i].map, whole.records[i + 3].map);
  }
}

TEST(TrainerTest, SameSeedSameRunDifferentSeedDiffers) {
  const DatasetSplit d = small_data();
  TrainConfig c = small_config();
  const TrainResult a = train(d, c);
  const TrainResult b = train(d, c);
  EXPECT_EQ(a.final_state.params, b.final_state.params);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].loss, b.records[i].loss);
  c.seed = 2;
  EXPECT_NE(train(d, c).final_state.params, a.final_state.params);
}

TEST(TrainerTest, AblationWiring) {
  TrainConfig c = small_config();
  c.ablation = Ablation::kMetricOnly;
  EXPECT_EQ(loss_config_for(c).mu, 0.0);
  c.ablation = Ablation::kQuantOnly;
  EXPECT_EQ(loss_config_for(c).metric_weight, 0.0);
  EXPECT_EQ(loss_config_for(c).mu, 0.5);
  c.ablation = Ablation::kConcatOnly;
  EXPECT_EQ(model_config_for(c, {4, 4}).fusion, FusionMode::kConcat);
  c.ablation = Ablation::kTextOnly;
  EXPECT_EQ(model_config_for(c, {4, 4}).active_views, (std::vector<bool>{false, true}));
  c.ablation = Ablation::kImageOnly;
  EXPECT_EQ(model_config_for(c, {4, 4}).active_views, (std::vector<bool>{true, false}));
  EXPECT_THROW(model_config_for(c, {4}), ConfigError);
  for (const char* name :
       {"full", "metric-only", "quant-only", "image-only", "text-only", "concat-only"}) {
    EXPECT_EQ(to_string(parse_ablation(name)), name);
  }
  EXPECT_THROW(parse_ablation("both"), ConfigError);
}

TEST(TrainerTest, ConfigErrors) {
  const DatasetSplit d = small_data();
  TrainConfig c = small_config();
  c.batch_size = 65;
  EXPECT_THROW(train(d, c), ConfigError);
  c = small_config();
  c.batch_size = 2;
  c.loss.lambda = 0.25;
  EXPECT_THROW(train(d, c), ConfigError);
  c = small_config();
  c.dropout_p = 1.0;
  EXPECT_THROW(train(d, c), ConfigError);
}

TEST(TrainerTest, DivergenceSurfacesAsNumericError) {
  TrainConfig c = small_config();
  c.adam.lr = 1e308;
  EXPECT_THROW(train(small_data(), c), NumericError);
}

TEST(TrainerTest, LearnsSeparableData) {
  TrainConfig c = small_config();
  c.epochs = 20;
  c.eval_every = 20;
  c.adam.lr = 1e-2;
  SynthConfig s;
  s.view_dims = {8, 6};
  s.train_size = 64;
  s.retrieval_size = 64;
  s.query_size = 16;
  s.seed = 5;
  s.common_offset = 2.0;
  const DatasetSplit d = generate_synthetic(s);
  const double before = evaluate_codes(d, initial_state(c, d.view_dims).params,
                                       model_config_for(c, d.view_dims)).map;
  const TrainResult r = train(d, c);
  EXPECT_GT(*r.records.back().map, before);
  EXPECT_GT(*r.records.back().map, 0.9);
}

TEST(TrainerTest, CurvesRoundTrip) {
  const TrainResult r = train(small_data(), small_config());
  const auto path = std::filesystem::path(::testing::TempDir()) / "dmmvh_curves.csv";
  export_curves(r.records, path, config_entries(small_config()), true);
  const auto back = read_curves(path);
  ASSERT_EQ(back.size(), r.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].epoch, r.records[i].epoch);
    EXPECT_EQ(back[i].loss, r.records[i].loss);
    EXPECT_EQ(back[i].map, r.records[i].map);
    EXPECT_EQ(back[i].wall_ms, r.records[i].wall_ms);
  }
  export_curves(r.records, path);
  for (const auto& e : read_curves(path)) EXPECT_EQ(e.wall_ms, 0.0);
  EXPECT_THROW(export_curves({}, path), ArgumentError);
}

}  // namespace
}  // namespace dmmvh
