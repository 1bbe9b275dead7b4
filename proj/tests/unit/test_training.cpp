#include <gtest/gtest.h>

#include <filesystem>

#include "nowcast/training.hpp"
#include "test_support.hpp"

using namespace nowcast;
using nowcast::testing::random_samples;

namespace {

// Model whose prediction is a learnable scalar broadcast over the output grid.
struct ScalarModel {
  Var<float> w = leaf(Tensor<float>({1}, 0.0f), true);
  bool frozen = false;  // when set, no gradient ever reaches w

  GeneratorOutput<float> forward(const Tensor<float>& x, const Tensor<float>*, const ForwardContext<float>&) {
    Tensor<float> out({x.dim(0), 12, x.dim(2), x.dim(3)}, w.value()[0]);
    if (frozen) return {leaf(out), {}};
    return {make_result<float>(std::move(out), {w},
                               [](Node<float>& self) {
                                 double acc = 0;
                                 for (float g : self.grad.values()) acc += g;
                                 self.inputs[0]->grad_buffer()[0] += static_cast<float>(acc);
                               }),
            {}};
  }
  ModuleState<float> state() { return {{{"w", w}}, {}}; }
  bool uses_masks() const { return false; }
  bool has_log_var() const { return false; }
};

GeneratorConfig tiny_gnet() {
  GeneratorConfig cfg;
  cfg.width_scale = 0.125;
  cfg.cbam_reduction = 4;
  return cfg;
}

DiscriminatorConfig tiny_disc() {
  DiscriminatorConfig cfg;
  cfg.width_scale = 0.125;
  cfg.cbam_reduction = 4;
  return cfg;
}

std::vector<Tensor<float>> params_of(ModuleState<float> st) {
  std::vector<Tensor<float>> out;
  for (auto& p : st.params) out.push_back(p.var.value());
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nowcast_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Scheduler, ConstantValidationTrace) {
  Rng rng(1);
  auto data = random_samples(3, rng);
  ScalarModel model;
  model.frozen = true;
  TrainConfig cfg;
  cfg.batch_size = 2;
  auto result = train_supervised(model, data, data, cfg);
  const auto& rows = result.log.rows;
  ASSERT_EQ(rows.back().epoch, 16);
  std::vector<int> reductions;
  for (const auto& r : rows)
    if (r.lr_g_reduced) reductions.push_back(r.epoch);
  EXPECT_EQ(reductions, (std::vector<int>{5, 9, 13}));
  EXPECT_DOUBLE_EQ(rows[5].lr_g, 1e-3);
  EXPECT_NEAR(rows[6].lr_g, 1e-4, 1e-18);
  EXPECT_NEAR(rows[10].lr_g, 1e-5, 1e-18);
  EXPECT_NEAR(rows[14].lr_g, 1e-6, 1e-18);
}

TEST(Scheduler, PlateauAndEarlyStoppingUnits) {
  PlateauScheduler sched(4, 0.1);
  EarlyStopping stop(15);
  std::vector<int> reduced;
  int epoch = 0;
  while (!stop.should_stop()) {
    ++epoch;
    if (sched.observe(1.0)) reduced.push_back(epoch);
    stop.observe(1.0);
  }
  EXPECT_EQ(epoch, 16);
  EXPECT_EQ(reduced, (std::vector<int>{5, 9, 13}));
  EXPECT_NEAR(sched.apply(1e-3), 1e-4, 1e-18);
}

TEST(TrainSupervised, ImprovingValidationRunsToMaxEpochs) {
  Rng rng(2);
  auto data = random_samples(2, rng);
  ScalarModel model;
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.batch_size = 2;
  auto result = train_supervised(model, data, data, cfg);
  ASSERT_EQ(result.log.rows.size(), 13u);
  for (std::size_t k = 1; k < result.log.rows.size(); ++k)
    EXPECT_LT(result.log.rows[k].val_mse, result.log.rows[k - 1].val_mse);
  EXPECT_EQ(result.best_epoch, 12);
}

TEST(TrainSupervised, EmptySplitsAreConfigErrors) {
  Rng rng(3);
  auto data = random_samples(2, rng);
  ScalarModel model;
  EXPECT_THROW(train_supervised(model, {}, data, TrainConfig{}), ConfigError);
  EXPECT_THROW(train_supervised(model, data, {}, TrainConfig{}), ConfigError);
  TrainConfig bad;
  bad.d_update_every = 0;
  try {
    train_supervised(model, data, data, bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "d_update_every");
  }
}

TEST(TrainSupervised, BestCheckpointIsMinimumAndRestored) {
  Rng rng(4);
  auto data = random_samples(4, rng);
  auto model = build_smaat_gnet<float>(tiny_gnet());
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 2;
  cfg.lr_generator = 3e-3;
  auto result = train_supervised(model, data, data, cfg);
  for (const auto& r : result.log.rows) EXPECT_LE(result.best_val_loss, r.val_loss);
  EXPECT_LT(result.best_val_loss, result.log.rows.front().val_loss);
  auto ev = evaluate_supervised(model, data, cfg.batch_size);
  EXPECT_FLOAT_EQ(static_cast<float>(ev.loss), static_cast<float>(result.best_val_loss));
}

TEST(TrainSupervised, MaxIterationsCapsGeneratorSteps) {
  Rng rng(5);
  auto data = random_samples(5, rng);
  ScalarModel model;
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_iterations = 7;
  auto result = train_supervised(model, data, data, cfg);
  EXPECT_EQ(result.log.rows.back().iterations, 7);
  EXPECT_EQ(result.log.rows.back().epoch, 3);
}

TEST(TrainSupervised, ResumeMatchesUninterruptedRun) {
  Rng rng(6);
  auto data = random_samples(4, rng);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 11;

  auto full_model = build_smaat_gnet<float>(tiny_gnet());
  TrainRun full_run;
  full_run.checkpoint_dir = fresh_dir("full");
  auto full = train_supervised(full_model, data, data, cfg, full_run);

  auto part_model = build_smaat_gnet<float>(tiny_gnet());
  TrainRun part_run;
  part_run.checkpoint_dir = fresh_dir("part");
  auto short_cfg = cfg;
  short_cfg.max_epochs = 2;
  train_supervised(part_model, data, data, short_cfg, part_run);
  auto resumed_model = build_smaat_gnet<float>(tiny_gnet());
  part_run.resume = true;
  auto resumed = train_supervised(resumed_model, data, data, cfg, part_run);

  ASSERT_EQ(resumed.log.rows.size(), full.log.rows.size());
  for (std::size_t k = 0; k < full.log.rows.size(); ++k) {
    EXPECT_EQ(resumed.log.rows[k].val_mse, full.log.rows[k].val_mse) << k;
    EXPECT_EQ(resumed.log.rows[k].train, full.log.rows[k].train) << k;
  }
  EXPECT_EQ(params_of(resumed_model.state()), params_of(full_model.state()));

  auto meta = read_json(sidecar_path(full.best_checkpoint));
  for (const char* key : {"config", "epoch", "validation_loss", "norm_max", "seed", "git_hash"})
    EXPECT_TRUE(meta.contains(key)) << key;
  EXPECT_TRUE(std::filesystem::exists(full_run.checkpoint_dir / "train_log.csv"));
  EXPECT_TRUE(std::filesystem::exists(full_run.checkpoint_dir / "train_log.json"));
}

TEST(TrainGan, DiscriminatorCadenceAndDeterminism) {
  Rng rng(7);
  auto data = random_samples(5, rng);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 1;  // five batches
  auto run_once = [&] {
    auto gen = build_smaat_gnet<float>(tiny_gnet());
    auto disc = build_discriminator<float>(tiny_disc());
    return train_gan(gen, disc, data, data, cfg);
  };
  auto a = run_once();
  auto b = run_once();
  EXPECT_EQ(a.log.rows.at(1).d_updates, 2);
  EXPECT_EQ(a.d_updates, 2);
  for (std::size_t k = 0; k < a.log.rows.size(); ++k) {
    EXPECT_EQ(a.log.rows[k].train, b.log.rows[k].train);
    EXPECT_EQ(a.log.rows[k].val_mse, b.log.rows[k].val_mse);
    EXPECT_EQ(a.log.rows[k].val_d_loss, b.log.rows[k].val_d_loss);
  }
  EXPECT_EQ(batch_count(5, 1) / 2, 2u);
}

TEST(TrainGan, RequiresDualEncoder) {
  Rng rng(8);
  auto data = random_samples(2, rng);
  auto cfg = tiny_gnet();
  cfg.dual_encoder = false;
  auto unet = build_smaat_unet<float>(cfg);
  auto disc = build_discriminator<float>(tiny_disc());
  EXPECT_THROW(train_gan(unet, disc, data, data, TrainConfig{}), ConfigError);
}

TEST(TrainGan, StepsOnlyMoveTheirOwnParameters) {
  Rng rng(9);
  auto data = random_samples(2, rng);
  auto gen = build_smaat_gnet<float>(tiny_gnet());
  auto disc = build_discriminator<float>(tiny_disc());
  TrainConfig cfg;
  Adam<float> opt_g(gen.state(), cfg.lr_generator), opt_d(disc.state(), cfg.lr_discriminator);
  auto batch = make_batch(data, {0, 1});
  Rng drop(1);
  ForwardContext<float> ctx{true, true, &drop, nullptr};

  auto g0 = params_of(gen.state());
  auto d0 = params_of(disc.state());
  generator_step(gen, disc, opt_g, batch, ctx, cfg);
  EXPECT_EQ(params_of(disc.state()), d0);
  auto g1 = params_of(gen.state());
  EXPECT_NE(g1, g0);
  discriminator_step(gen, disc, opt_d, batch, ctx, cfg);
  EXPECT_EQ(params_of(gen.state()), g1);
  EXPECT_NE(params_of(disc.state()), d0);
}

// A discriminator that outputs 0.5 everywhere contributes a constant, so the generator
// gradient is exactly lambda times the L2 gradient.
TEST(TrainGan, FrozenHalfDiscriminatorReducesToWeightedL2) {
  Rng rng(10);
  auto data = random_samples(2, rng);
  auto gen = build_smaat_gnet<float>(tiny_gnet());
  auto disc = build_discriminator<float>(tiny_disc());
  disc.head().weight().mutable_value().fill(0.0f);
  disc.head().bias().mutable_value().fill(0.0f);
  auto batch = make_batch(data, {0, 1});
  ForwardContext<float> ctx;
  auto st = gen.state();
  const double lambda = 1e6;

  auto fake = run_model(gen, batch, ctx).y_hat;
  auto total = loss_generator_total(disc.forward(leaf(batch.x), fake, ctx), batch.y, fake, lambda);
  EXPECT_NEAR(total.value()[0] - lambda * loss_l2(batch.y, fake).value()[0], std::log(0.5), 1e-2);
  st.zero_grad();
  backward(total);
  std::vector<Tensor<float>> g_total;
  for (auto& p : st.params) g_total.push_back(p.var.grad());

  st.zero_grad();
  auto fake2 = run_model(gen, batch, ctx).y_hat;
  backward(ops::linear_combination<float>({loss_l2(batch.y, fake2)}, {static_cast<float>(lambda)}));
  double diff = 0, norm = 0;
  for (std::size_t k = 0; k < st.params.size(); ++k)
    for (std::size_t i = 0; i < g_total[k].size(); ++i) {
      diff += std::abs(g_total[k][i] - st.params[k].var.grad()[i]);
      norm += std::abs(g_total[k][i]);
    }
  EXPECT_GT(norm, 0.0);
  EXPECT_LE(diff, 1e-6 * norm);
}

TEST(Batching, KeepsPartialBatchAndCastsMasks) {
  std::vector<std::size_t> order{4, 1, 3, 0, 2};
  auto batches = batch_indices(order, 2);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[2], (std::vector<std::size_t>{2}));
  Rng rng(11);
  auto data = random_samples(3, rng);
  auto b = make_batch(data, {2, 0});
  EXPECT_EQ(b.x.shape(), (Shape{2, 12, 64, 64}));
  EXPECT_EQ(b.m.shape(), (Shape{2, 25, 64, 64}));
  EXPECT_EQ(b.x[0], data[2].x[0]);
  EXPECT_EQ(b.m[25 * 4096 + 7], static_cast<float>(data[0].m[7]));
}
