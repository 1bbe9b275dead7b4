#include <gtest/gtest.h>

#include "nowcast/dataset_pipeline.hpp"
#include "test_support.hpp"

using namespace nowcast;
using namespace std::chrono;

namespace {

const Timestamp kJan2020 = from_epoch_seconds(1577836800);

std::vector<RadarFrame> constant_stream(std::size_t n, std::int32_t value, int rows = 4, int cols = 4,
                                        Timestamp start = kJan2020) {
  std::vector<RadarFrame> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j].timestamp = start + static_cast<int>(j) * kFrameStep;
    out[j].rows = rows;
    out[j].cols = cols;
    out[j].values.assign(std::size_t(rows) * cols, value);
  }
  return out;
}

std::vector<NormalizedFrame> normalized_stream(std::size_t n, const std::function<float(std::size_t, std::size_t)>& v) {
  std::vector<NormalizedFrame> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j].timestamp = kJan2020 + static_cast<int>(j) * kFrameStep;
    out[j].values.resize(kCropSize * kCropSize);
    for (std::size_t p = 0; p < out[j].values.size(); ++p) out[j].values[p] = v(j, p);
  }
  return out;
}

const Landmask kFull64 = Landmask::full(kCropSize, kCropSize);

}  // namespace

TEST(LandmaskRule, OffLandPixelsAreZeroed) {
  auto frames = constant_stream(1, 7);
  Landmask mask = Landmask::full(4, 4);
  mask.cells[5] = 0;
  apply_landmask(frames[0], mask);
  EXPECT_EQ(frames[0].values[5], 0);
  EXPECT_EQ(frames[0].values[4], 7);
}

TEST(ClutterFilter, DaySumFixtureIsZeroedAndFlagged) {
  // 288 frames of 100 units = 288 mm in 24 h at one pixel; neighbours stay below the limit.
  auto frames = constant_stream(288, 0);
  for (auto& f : frames) {
    f.values[0] = 100;
    f.values[1] = 60;  // 172.8 mm over the same day
  }
  auto [out, qc] = apply_clutter_filter(frames);
  for (const auto& f : out) {
    EXPECT_EQ(f.values[0], 0);
    EXPECT_EQ(f.values[1], 60);
  }
  EXPECT_EQ(qc.pixels_zeroed, 288u);
  ASSERT_EQ(qc.windows_flagged.size(), 1u);
  EXPECT_EQ(qc.windows_flagged[0].rule, "day_sum");
  EXPECT_EQ(qc.windows_flagged[0].sum, 28800);
  EXPECT_EQ(qc.rules[1].count, 1u);
  EXPECT_EQ(qc.rules[0].count, 0u);
}

TEST(ClutterFilter, DaySumBoundaryIsStrict) {
  // 174 mm over 24 h: 288 frames, 174 frames of 100 units. Exactly at the limit, so kept.
  auto frames = constant_stream(288, 0);
  for (int j = 0; j < 174; ++j) frames[std::size_t(j)].values[0] = 100;
  auto [out, qc] = apply_clutter_filter(frames);
  EXPECT_EQ(qc.pixels_zeroed, 0u);
  frames[200].values[0] = 1;
  auto [out2, qc2] = apply_clutter_filter(frames);
  EXPECT_EQ(qc2.pixels_zeroed, 175u);
}

TEST(ClutterFilter, YearSumExactlyAtLimitIsKept) {
  // Daily totals stay below 174 mm; the calendar-year sum hits 1300 mm exactly.
  std::vector<RadarFrame> frames;
  for (int d = 0; d < 13; ++d) {
    RadarFrame f;
    f.timestamp = kJan2020 + days(d * 7);
    f.rows = f.cols = 2;
    f.values = {10000, 0, 0, 0};  // 100 mm each
    frames.push_back(f);
  }
  auto [out, qc] = apply_clutter_filter(frames);
  EXPECT_EQ(qc.pixels_zeroed, 0u);
  frames.back().values[0] += 1;
  auto [out2, qc2] = apply_clutter_filter(frames);
  EXPECT_EQ(qc2.pixels_zeroed, 13u);
  EXPECT_EQ(qc2.rules[0].count, 1u);
  EXPECT_EQ(qc2.windows_flagged[0].rule, "year_sum");
}

TEST(ClutterFilter, YearRuleUsesCalendarYears) {
  // 800 mm in late December, 800 mm in early January: no calendar year exceeds 1300 mm.
  std::vector<RadarFrame> frames;
  const Timestamp dec = from_epoch_seconds(1608768000);  // 2020-12-24
  for (int d = 0; d < 16; ++d) {
    RadarFrame f;
    f.timestamp = dec + days(d);
    f.rows = f.cols = 1;
    f.values = {10000};
    frames.push_back(f);
  }
  auto [out, qc] = apply_clutter_filter(frames);
  EXPECT_EQ(qc.pixels_zeroed, 0u);
}

TEST(ClutterFilter, IdempotentOnRandomStreams) {
  Rng rng(5);
  auto frames = constant_stream(600, 0, 3, 3);
  for (auto& f : frames)
    for (auto& v : f.values) v = static_cast<std::int32_t>(rng.uniform() < 0.7 ? rng.uniform(0, 200) : 0);
  auto [once, qc1] = apply_clutter_filter(frames);
  auto [twice, qc2] = apply_clutter_filter(once);
  EXPECT_GT(qc1.pixels_zeroed, 0u);
  for (std::size_t j = 0; j < once.size(); ++j) ASSERT_EQ(once[j].values, twice[j].values);
}

TEST(ClutterFilter, EmptyAndAllZeroStreams) {
  auto [out, qc] = apply_clutter_filter({});
  EXPECT_TRUE(out.empty());
  EXPECT_TRUE(qc.windows_flagged.empty());
  auto zeros = constant_stream(50, 0);
  auto [same, qc0] = apply_clutter_filter(zeros);
  EXPECT_EQ(qc0.pixels_zeroed, 0u);
  EXPECT_TRUE(qc0.windows_flagged.empty());
  for (std::size_t j = 0; j < zeros.size(); ++j) EXPECT_EQ(same[j].values, zeros[j].values);
}

TEST(ClutterFilter, UnorderedStreamIsRejected) {
  auto frames = constant_stream(3, 1);
  std::swap(frames[0], frames[2]);
  EXPECT_THROW(apply_clutter_filter(frames), OrderingError);
}

TEST(Crop, IndexArithmeticAndBounds) {
  RadarFrame f;
  f.values.assign(256 * 256, 0);
  f(100, 100) = 9;
  auto c = crop_frame(f, {96, 96});
  EXPECT_EQ(c.values[4 * 64 + 4], 9);
  int nonzero = 0;
  for (auto v : c.values) nonzero += v != 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_NO_THROW(crop_frame(f, {192, 192}));
  EXPECT_THROW(crop_frame(f, {193, 0}), BoundsError);
  EXPECT_THROW(crop_frame(f, {0, -1}), BoundsError);

  Landmask mask = Landmask::full(256, 256);
  mask.cells[100 * 256 + 100] = 0;
  auto m64 = crop_landmask(mask, {96, 96});
  EXPECT_FALSE(m64(4, 4));
  EXPECT_EQ(m64.count(), 64u * 64u - 1u);
}

TEST(Crop, DefaultCentresOnTheLandmask) {
  Landmask mask{256, 256, std::vector<std::uint8_t>(256 * 256, 0)};
  for (int r = 40; r < 80; ++r)
    for (int c = 150; c < 200; ++c) mask.cells[std::size_t(r) * 256 + c] = 1;
  auto crop = default_crop(mask);
  EXPECT_EQ(crop.origin_row, 60 - 32);
  EXPECT_EQ(crop.origin_col, 175 - 32);
  EXPECT_EQ(default_crop(Landmask::full(256, 256)), (CropSpec{96, 96}));
}

TEST(Normalise, FixturesAndRoundtrip) {
  CroppedFrame f{kJan2020, {0, 26, 52}};
  const double norm_max = fit_normalizer({f});
  EXPECT_EQ(norm_max, 52.0);
  auto n = normalize(f.values, norm_max);
  EXPECT_FLOAT_EQ(n[0], 0.0f);
  EXPECT_FLOAT_EQ(n[1], 0.5f);
  EXPECT_FLOAT_EQ(n[2], 1.0f);
  EXPECT_NEAR(normalize(std::vector<int>{60}, 52)[0], 60.0 / 52.0, 1e-7);

  Rng rng(8);
  std::vector<std::int32_t> grid(4096);
  for (auto& v : grid) v = static_cast<std::int32_t>(rng.uniform(0, 50000));
  auto back = denormalize(normalize(grid, 50000.0), 50000.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    ASSERT_LE(std::abs(back[i] - grid[i]), 1e-6 * std::max(1.0, double(grid[i])));

  EXPECT_THROW(fit_normalizer({CroppedFrame{kJan2020, {0, 0}}}), ConfigError);
  EXPECT_THROW(normalize(grid, 0.0), ConfigError);
}

TEST(Selection, WindowCountIsNMinus23) {
  auto frames = normalized_stream(30, [](auto, auto) { return 0.5f; });
  auto samples = select_sequences(frames, kFull64);
  ASSERT_EQ(samples.size(), 7u);
  EXPECT_EQ(candidate_window_count(30), 7u);
  EXPECT_EQ(candidate_window_count(23), 0u);
  EXPECT_TRUE(select_sequences(normalized_stream(23, [](auto, auto) { return 1.0f; }), kFull64).empty());
  for (std::size_t s = 0; s < samples.size(); ++s) EXPECT_EQ(samples[s].t0, frames[s].timestamp);
}

TEST(Selection, InputAndTargetFramesAreSlicedInOrder) {
  auto frames = normalized_stream(24, [](std::size_t j, std::size_t) { return float(j + 1); });
  auto samples = select_sequences(frames, kFull64);
  ASSERT_EQ(samples.size(), 1u);
  for (int t = 0; t < 12; ++t) {
    EXPECT_EQ(samples[0].x[t * 4096 + 17], float(t + 1));
    EXPECT_EQ(samples[0].y[t * 4096 + 17], float(t + 13));
  }
}

TEST(Selection, ExactlyHalfRainyIsRejected) {
  auto half = normalized_stream(24, [](auto, std::size_t p) { return p % 2 ? 0.3f : 0.0f; });
  EXPECT_TRUE(select_sequences(half, kFull64).empty());
  auto more = normalized_stream(24, [](auto, std::size_t p) { return p % 2 || p == 0 ? 0.3f : 0.0f; });
  EXPECT_EQ(select_sequences(more, kFull64).size(), 1u);
  auto dry = normalized_stream(24, [](std::size_t j, auto) { return j < 12 ? 1.0f : 0.0f; });
  EXPECT_TRUE(select_sequences(dry, kFull64).empty());
}

TEST(Selection, FractionIsOverLandPixelsOnly) {
  Landmask mask = kFull64;
  for (std::size_t p = 0; p < 4096; p += 2) mask.cells[p] = 0;  // rain only off land at even pixels
  auto frames = normalized_stream(24, [](auto, std::size_t p) { return p % 2 ? 0.2f : 0.0f; });
  EXPECT_EQ(select_sequences(frames, mask).size(), 1u);
}

TEST(Selection, MeanVersusPerFrameCriterion) {
  // Output frames alternate 100% and 20% rainy: mean 60% passes, per-frame fails.
  auto frames = normalized_stream(24, [](std::size_t j, std::size_t p) {
    return (j % 2 == 0 || p % 5 == 0) ? 0.4f : 0.0f;
  });
  EXPECT_EQ(select_sequences(frames, kFull64).size(), 1u);
  SelectionConfig per_frame{0.5, RainyCriterion::every_output};
  EXPECT_TRUE(select_sequences(frames, kFull64, per_frame).empty());
}

TEST(Selection, LoweringTheThresholdNeverRemovesWindows) {
  Rng rng(21);
  std::vector<double> density(80);
  for (auto& d : density) d = rng.uniform();
  auto frames = normalized_stream(80, [&](std::size_t j, std::size_t p) {
    return (p * 2654435761u % 1000) / 1000.0 < density[j] ? 0.1f : 0.0f;
  });
  std::vector<Timestamp> previous;
  for (double thr : {0.9, 0.7, 0.5, 0.3, 0.1, 0.0}) {
    std::vector<Timestamp> kept;
    for (const auto& s : select_sequences(frames, kFull64, {thr})) kept.push_back(s.t0);
    for (auto t : previous) EXPECT_NE(std::find(kept.begin(), kept.end(), t), kept.end()) << thr;
    EXPECT_GE(kept.size(), previous.size());
    previous = kept;
  }
}

TEST(Selection, WindowsNeverSpanGaps) {
  auto frames = normalized_stream(30, [](auto, auto) { return 1.0f; });
  for (std::size_t j = 10; j < frames.size(); ++j) frames[j].timestamp += minutes(5);
  // A gap after frame 9 leaves runs of 10 and 20 consecutive frames: no full window.
  EXPECT_TRUE(select_sequences(frames, kFull64).empty());
}

TEST(Season, MeteorologicalSeasons) {
  EXPECT_EQ(season_of(from_epoch_seconds(1579046400)), Season::winter);  // 2020-01-15
  EXPECT_EQ(season_of(from_epoch_seconds(1593561600)), Season::summer);  // 2020-07-01
  EXPECT_EQ(season_of(from_epoch_seconds(1606694400)), Season::autumn);  // 2020-11-30
  EXPECT_EQ(season_of(from_epoch_seconds(1583020800)), Season::spring);  // 2020-03-01
  EXPECT_EQ(season_of(from_epoch_seconds(1606780800)), Season::winter);  // 2020-12-01
  Sample s;
  s.t0 = from_epoch_seconds(1590965400);  // 2020-05-31T22:50Z, target starts 23:50 (still May)
  EXPECT_EQ(season_of(s), Season::spring);
  s.t0 = from_epoch_seconds(1590967800);  // 23:30Z, target starts 2020-06-01T00:30Z
  EXPECT_EQ(season_of(s), Season::summer);
  EXPECT_EQ(format_timestamp(from_epoch_seconds(1590967800)), "2020-05-31T23:30:00Z");
}

TEST(ValidationSplit, LastTenPercentChronologically) {
  Rng rng(1);
  auto samples = nowcast::testing::random_samples(20, rng);
  auto [train, val] = split_validation(samples);
  EXPECT_EQ(train.size(), 18u);
  EXPECT_EQ(val.size(), 2u);
  EXPECT_EQ(val.front().t0, samples[18].t0);
  EXPECT_THROW(split_validation({samples[0]}), ConfigError);
}

TEST(PrepareDataset, SplitsNormalisesAndAttachesMasks) {
  auto frames = constant_stream(100, 0, 64, 64);
  for (std::size_t j = 0; j < frames.size(); ++j)
    for (std::size_t p = 0; p < frames[j].values.size(); ++p) frames[j].values[p] = static_cast<std::int32_t>(1 + (j + p) % 50);
  frames[10].values[3] = 400;  // training maximum
  frames[90].values[3] = 900;  // test value above it
  PrepareConfig cfg;
  cfg.crop = CropSpec{0, 0};
  auto out = prepare_dataset(frames, Landmask::full(64, 64), cfg);
  const auto& c = out.container;
  EXPECT_EQ(c.norm_max, 400.0);
  // 75 train frames -> 52 windows, 25 test frames -> 2 windows; all rainy.
  EXPECT_EQ(c.train.size(), 52u);
  EXPECT_EQ(c.test.size(), 2u);
  EXPECT_EQ(out.candidate_windows_train, 52u);
  for (const auto& s : c.train)
    for (float v : s.x.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  for (std::size_t k = 1; k < c.train.size(); ++k) EXPECT_LT(c.train[k - 1].t0, c.train[k].t0);
  EXPECT_LT(c.train.back().t0 + (kWindowFrames - 1) * kFrameStep, c.test.front().t0);
  EXPECT_EQ(c.train[0].m, masks_for_input(c.train[0].x, 400.0));
  bool above_one = false;
  for (const auto& s : c.test)
    for (float v : s.x.values()) above_one = above_one || v > 1.0f;
  for (const auto& s : c.test)
    for (float v : s.y.values()) above_one = above_one || v > 1.0f;
  EXPECT_TRUE(above_one);
}
