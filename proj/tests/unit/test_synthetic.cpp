#include <gtest/gtest.h>

#include "nowcast/generator.hpp"
#include "nowcast/synthetic_storms.hpp"
#include "test_support.hpp"

using namespace nowcast;

namespace {

StormConfig small_config() {
  StormConfig cfg;
  cfg.seed = 17;
  cfg.n_frames = 30;
  cfg.n_cells = 4;
  cfg.rows = cfg.cols = 64;
  return cfg;
}

std::int64_t total(const RadarFrame& f) {
  std::int64_t s = 0;
  for (auto v : f.values) s += v;
  return s;
}

}  // namespace

TEST(StormArchive, SameSeedIsBitIdentical) {
  auto a = gen_storm_archive(small_config());
  auto b = gen_storm_archive(small_config());
  ASSERT_EQ(a.frames.size(), 30u);
  for (std::size_t j = 0; j < a.frames.size(); ++j) {
    ASSERT_EQ(a.frames[j].values, b.frames[j].values);
    ASSERT_EQ(a.frames[j].timestamp, b.frames[j].timestamp);
  }
  auto cfg = small_config();
  cfg.seed = 18;
  EXPECT_NE(gen_storm_archive(cfg).frames[0].values, a.frames[0].values);
}

TEST(StormArchive, TimestampsAreFiveMinutesApart) {
  auto a = gen_storm_archive(small_config());
  for (std::size_t j = 1; j < a.frames.size(); ++j) EXPECT_EQ(a.frames[j].timestamp - a.frames[j - 1].timestamp, kFrameStep);
  EXPECT_EQ(count_gaps(a.frames), 0u);
}

TEST(StormArchive, NonNegativeIntegersEvenWithNoise) {
  auto cfg = small_config();
  cfg.noise_sigma = 0.5;
  auto a = gen_storm_archive(cfg);
  bool any_zero = false;
  for (const auto& f : a.frames)
    for (auto v : f.values) {
      ASSERT_GE(v, 0);
      any_zero = any_zero || v == 0;
    }
  EXPECT_TRUE(any_zero);
}

TEST(StormArchive, StationaryFieldsMakePersistenceExact) {
  auto cfg = small_config();
  cfg.velocity = {0.0, 0.0};
  auto a = gen_storm_archive(cfg);
  for (const auto& f : a.frames) ASSERT_EQ(f.values, a.frames[0].values);
}

TEST(StormArchive, SingleCellPeakIsTheRoundedAmplitude) {
  auto cfg = small_config();
  cfg.n_cells = 1;
  cfg.amplitude_range = {2.347, 2.347};
  cfg.cell_sigma_range = {4.0, 4.0};
  auto a = gen_storm_archive(cfg);
  const auto& cell = a.cells.at(0);
  const auto& f0 = a.frames[0];
  EXPECT_EQ(f0(int(cell.row), int(cell.col)), 235);
  EXPECT_EQ(*std::max_element(f0.values.begin(), f0.values.end()), 235);
}

TEST(StormArchive, AdvectionWrapsAndConservesMass) {
  auto cfg = small_config();
  cfg.velocity = {0.7, -1.3};
  cfg.n_frames = 200;  // cells cross the 64-pixel domain several times
  cfg.cell_sigma_range = {3.0, 8.0};
  auto a = gen_storm_archive(cfg);
  const auto m0 = total(a.frames[0]);
  const double slack = 0.5 * 64 * 64;
  for (const auto& f : a.frames) ASSERT_LE(std::abs(double(total(f) - m0)), slack);
}

TEST(StormArchive, GrowthScalesAmplitude) {
  auto cfg = small_config();
  cfg.velocity = {0, 0};
  cfg.growth_rate = 1.05;
  auto a = gen_storm_archive(cfg);
  const double ratio = double(total(a.frames[10])) / double(total(a.frames[0]));
  EXPECT_NEAR(ratio, std::pow(1.05, 10), 1e-3);
}

TEST(StormArchive, DiskLandmaskZeroesTheOutside) {
  auto cfg = small_config();
  cfg.land_radius = 20;
  auto a = gen_storm_archive(cfg);
  for (const auto& f : a.frames)
    for (std::size_t p = 0; p < f.values.size(); ++p)
      if (!a.landmask.cells[p]) ASSERT_EQ(f.values[p], 0);
  EXPECT_LT(a.landmask.count(), 64u * 64u);
}

TEST(StormArchive, ConfigValidation) {
  auto cfg = small_config();
  cfg.amplitude_range = {-1, 1};
  EXPECT_THROW(gen_storm_archive(cfg), ConfigError);
  cfg = small_config();
  cfg.n_frames = 0;
  try {
    gen_storm_archive(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "n_frames");
  }
}

TEST(StormArchive, FeedsThePipeline) {
  auto cfg = small_config();
  cfg.n_frames = 120;
  cfg.n_cells = 20;
  cfg.cell_sigma_range = {10, 20};
  cfg.amplitude_range = {0.02, 0.08};  // stays under the 24 h clutter limit on a small domain
  auto a = gen_storm_archive(cfg);
  PrepareConfig pc;
  pc.crop = CropSpec{0, 0};
  auto prepared = prepare_dataset(a.frames, a.landmask, pc);
  EXPECT_EQ(prepared.candidate_windows_train, 90u - 23u);
  EXPECT_EQ(prepared.qc.pixels_zeroed, 0u);
  EXPECT_GT(prepared.container.train.size(), 0u);
}

TEST(Heteroscedastic, ZeroSigmaGivesTheCleanTarget) {
  auto pairs = gen_heteroscedastic_pairs(3, 2, [](double) { return 0.0; });
  ASSERT_EQ(pairs.size(), 2u);
  for (const auto& p : pairs) {
    EXPECT_EQ(p.sample.y, p.clean_y);
    for (float v : p.noise_map.values()) ASSERT_EQ(v, 0.0f);
  }
}

TEST(Heteroscedastic, NoiseMapRecordsSigmaOfIntensity) {
  auto pairs = gen_heteroscedastic_pairs(4, 2, [](double i) { return 0.1 * i; });
  double resid2 = 0, sigma2 = 0;
  for (const auto& p : pairs)
    for (std::size_t k = 0; k < p.clean_y.size(); ++k) {
      ASSERT_NEAR(p.noise_map[k], 0.1f * p.clean_y[k], 1e-6);
      const double r = p.sample.y[k] - p.clean_y[k];
      resid2 += r * r;
      sigma2 += double(p.noise_map[k]) * p.noise_map[k];
    }
  // Empirical noise energy matches the injected variance.
  EXPECT_NEAR(resid2 / sigma2, 1.0, 0.05);
}

TEST(Heteroscedastic, SeededAndMasksComeFromTheInput) {
  auto sigma = [](double i) { return 0.05 + 0.1 * i; };
  auto a = gen_heteroscedastic_pairs(9, 3, sigma);
  auto b = gen_heteroscedastic_pairs(9, 3, sigma);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sample.y, b[i].sample.y);
    EXPECT_EQ(a[i].sample.x, b[i].sample.x);
    EXPECT_EQ(a[i].sample.m, masks_for_input(a[i].sample.x, 1000.0));
  }
  EXPECT_NE(gen_heteroscedastic_pairs(10, 1, sigma)[0].sample.y, a[0].sample.y);
}

TEST(Heteroscedastic, TargetContinuesTheInputMotion) {
  auto pairs = gen_heteroscedastic_pairs(5, 1, [](double) { return 0.0; });
  const auto& s = pairs[0].sample;
  // Consecutive frames are close; the first target frame continues the last input frame.
  double step_in = 0, step_across = 0;
  for (int p = 0; p < 4096; ++p) {
    step_in += std::abs(s.x[11 * 4096 + p] - s.x[10 * 4096 + p]);
    step_across += std::abs(s.y[p] - s.x[11 * 4096 + p]);
  }
  EXPECT_NEAR(step_across, step_in, 0.2 * step_in + 1e-3);
}
