#pragma once

// Radar archive preprocessing: clutter filtering, cropping, normalisation,
// sequence selection and seasonal bookkeeping.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/errors.hpp"
#include "nowcast/mask_generation.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

using Timestamp = std::chrono::sys_seconds;

inline constexpr int kRawGridSize = 256;
inline constexpr int kCropSize = 64;
inline constexpr int kInputFrames = 12;
inline constexpr int kOutputFrames = 12;
inline constexpr int kWindowFrames = kInputFrames + kOutputFrames;
inline constexpr int kMaskCount = 25;
inline constexpr std::chrono::minutes kFrameStep{5};

inline std::int64_t to_epoch_seconds(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_seconds(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }

inline std::string format_timestamp(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

/// Boolean grid; true marks pixels that carry radar data.
struct Landmask {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> cells;

  static Landmask full(int rows, int cols) { return {rows, cols, std::vector<std::uint8_t>(std::size_t(rows) * cols, 1)}; }
  bool operator()(int r, int c) const { return cells[std::size_t(r) * cols + c] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }
  friend bool operator==(const Landmask&, const Landmask&) = default;
};

/// One 5-minute radar grid in hundredths of millimetres.
struct RadarFrame {
  Timestamp timestamp{};
  int rows = kRawGridSize, cols = kRawGridSize;
  std::vector<std::int32_t> values;

  std::int32_t operator()(int r, int c) const { return values[std::size_t(r) * cols + c]; }
  std::int32_t& operator()(int r, int c) { return values[std::size_t(r) * cols + c]; }
};

struct CropSpec {
  int origin_row = 96;
  int origin_col = 96;
  static constexpr int size = kCropSize;
  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

/// Sets every off-mask value to zero.
inline void apply_landmask(RadarFrame& frame, const Landmask& mask) {
  if (mask.rows != frame.rows || mask.cols != frame.cols) throw ShapeError("landmask size differs from frame size");
  for (std::size_t i = 0; i < frame.values.size(); ++i)
    if (!mask.cells[i]) frame.values[i] = 0;
}

/// Default crop: the 64x64 window centred on the landmask bounding box, clamped to the grid.
inline CropSpec default_crop(const Landmask& mask) {
  int r0 = mask.rows, r1 = -1, c0 = mask.cols, c1 = -1;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (mask(r, c)) {
        r0 = std::min(r0, r), r1 = std::max(r1, r);
        c0 = std::min(c0, c), c1 = std::max(c1, c);
      }
  if (r1 < 0) return {std::max(0, (mask.rows - kCropSize) / 2), std::max(0, (mask.cols - kCropSize) / 2)};
  auto place = [](int lo, int hi, int extent) {
    const int centre = (lo + hi + 1) / 2;
    return std::clamp(centre - kCropSize / 2, 0, extent - kCropSize);
  };
  return {place(r0, r1, mask.rows), place(c0, c1, mask.cols)};
}

// ---------------------------------------------------------------------------
// Clutter filter
// ---------------------------------------------------------------------------

struct ClutterThresholds {
  std::int64_t year_sum = 130000;  // 1300 mm
  std::int64_t day_sum = 17400;    // 174 mm over any rolling 24 h
};

struct FlaggedWindow {
  int row = 0, col = 0;
  std::string rule;  // "year_sum" | "day_sum"
  Timestamp start{}, end{};
  std::int64_t sum = 0;  // largest offending sum within the window
};

struct QCReport {
  struct RuleRow {
    std::string rule;
    std::int64_t threshold = 0;
    std::size_t count = 0;  // flagged windows
  };
  std::size_t pixels_zeroed = 0;  // (pixel, frame) values changed from non-zero to zero
  std::vector<FlaggedWindow> windows_flagged;
  std::vector<RuleRow> rules;
};

inline int calendar_year(Timestamp t) {
  return static_cast<int>(std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t)}.year());
}

/// Zeroes pixel-windows whose calendar-year sum or rolling 24-hour sum strictly exceeds the
/// thresholds. Both rules are evaluated on the input stream, so the filter is idempotent.
inline std::pair<std::vector<RadarFrame>, QCReport> apply_clutter_filter(std::vector<RadarFrame> frames,
                                                                         const ClutterThresholds& thr = {}) {
  QCReport report;
  report.rules = {{"year_sum", thr.year_sum, 0}, {"day_sum", thr.day_sum, 0}};
  if (frames.empty()) return {std::move(frames), report};
  for (std::size_t j = 1; j < frames.size(); ++j)
    if (frames[j].timestamp <= frames[j - 1].timestamp)
      throw OrderingError("clutter filter requires chronologically ordered frames");
  const int rows = frames.front().rows, cols = frames.front().cols;
  const std::size_t P = std::size_t(rows) * cols;
  const std::size_t F = frames.size();

  struct Range {
    std::size_t first, last;
    std::int64_t sum;
    std::string rule;
  };
  std::vector<std::vector<Range>> ranges(P);

  // Rolling 24-hour rule: window ending at frame j covers timestamps in (t_j - 24h, t_j].
  {
    std::vector<std::int64_t> running(P, 0);
    std::vector<std::int64_t> open_first(P, -1), open_last(P, -1), open_max(P, 0);
    std::size_t start = 0;
    auto flush = [&](std::size_t p) {
      if (open_first[p] >= 0) {
        ranges[p].push_back({std::size_t(open_first[p]), std::size_t(open_last[p]), open_max[p], "day_sum"});
        open_first[p] = -1;
      }
    };
    for (std::size_t j = 0; j < F; ++j) {
      const auto& fj = frames[j];
      if (fj.rows != rows || fj.cols != cols) throw ShapeError("frames in a stream must share one grid size");
      for (std::size_t p = 0; p < P; ++p) running[p] += fj.values[p];
      while (frames[start].timestamp <= fj.timestamp - std::chrono::hours(24)) {
        for (std::size_t p = 0; p < P; ++p) running[p] -= frames[start].values[p];
        ++start;
      }
      for (std::size_t p = 0; p < P; ++p) {
        if (running[p] <= thr.day_sum) continue;
        if (open_first[p] >= 0 && std::int64_t(start) <= open_last[p] + 1) {
          open_last[p] = std::int64_t(j);
          open_max[p] = std::max(open_max[p], running[p]);
        } else {
          flush(p);
          open_first[p] = std::int64_t(start);
          open_last[p] = std::int64_t(j);
          open_max[p] = running[p];
        }
      }
    }
    for (std::size_t p = 0; p < P; ++p) flush(p);
  }

  // Calendar-year rule.
  {
    std::size_t first = 0;
    while (first < F) {
      const int year = calendar_year(frames[first].timestamp);
      std::size_t last = first;
      while (last + 1 < F && calendar_year(frames[last + 1].timestamp) == year) ++last;
      std::vector<std::int64_t> sums(P, 0);
      for (std::size_t j = first; j <= last; ++j)
        for (std::size_t p = 0; p < P; ++p) sums[p] += frames[j].values[p];
      for (std::size_t p = 0; p < P; ++p)
        if (sums[p] > thr.year_sum) ranges[p].push_back({first, last, sums[p], "year_sum"});
      first = last + 1;
    }
  }

  for (std::size_t p = 0; p < P; ++p) {
    for (const auto& r : ranges[p]) {
      report.windows_flagged.push_back({int(p / cols), int(p % cols), r.rule, frames[r.first].timestamp,
                                        frames[r.last].timestamp, r.sum});
      (r.rule == "year_sum" ? report.rules[0] : report.rules[1]).count += 1;
    }
    for (const auto& r : ranges[p])
      for (std::size_t j = r.first; j <= r.last; ++j) {
        auto& v = frames[j].values[p];
        if (v != 0) {
          v = 0;
          ++report.pixels_zeroed;
        }
      }
  }
  return {std::move(frames), report};
}

// ---------------------------------------------------------------------------
// Cropping and normalisation
// ---------------------------------------------------------------------------

struct CroppedFrame {
  Timestamp timestamp{};
  std::vector<std::int32_t> values;  // 64x64, stored units
};

inline void check_crop(const CropSpec& crop, int rows, int cols) {
  if (crop.origin_row < 0 || crop.origin_col < 0 || crop.origin_row + kCropSize > rows ||
      crop.origin_col + kCropSize > cols)
    throw BoundsError("crop origin (" + std::to_string(crop.origin_row) + "," + std::to_string(crop.origin_col) +
                      ") leaves the " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
}

inline CroppedFrame crop_frame(const RadarFrame& frame, const CropSpec& crop) {
  check_crop(crop, frame.rows, frame.cols);
  CroppedFrame out{frame.timestamp, std::vector<std::int32_t>(kCropSize * kCropSize)};
  for (int r = 0; r < kCropSize; ++r)
    std::copy_n(frame.values.begin() + std::ptrdiff_t(crop.origin_row + r) * frame.cols + crop.origin_col, kCropSize,
                out.values.begin() + std::ptrdiff_t(r) * kCropSize);
  return out;
}

inline Landmask crop_landmask(const Landmask& mask, const CropSpec& crop) {
  check_crop(crop, mask.rows, mask.cols);
  Landmask out{kCropSize, kCropSize, std::vector<std::uint8_t>(kCropSize * kCropSize)};
  for (int r = 0; r < kCropSize; ++r)
    for (int c = 0; c < kCropSize; ++c) out.cells[std::size_t(r) * kCropSize + c] = mask(crop.origin_row + r, crop.origin_col + c);
  return out;
}

/// Largest stored value over the training frames.
inline double fit_normalizer(const std::vector<CroppedFrame>& train) {
  std::int32_t best = 0;
  for (const auto& f : train)
    for (auto v : f.values) best = std::max(best, v);
  if (best <= 0) throw ConfigError("training set is all zero; cannot fit the normaliser", "norm_max");
  return static_cast<double>(best);
}

template <class In>
std::vector<float> normalize(const std::vector<In>& grid, double norm_max) {
  if (!(norm_max > 0.0)) throw ConfigError("norm_max must be positive", "norm_max");
  std::vector<float> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = static_cast<float>(static_cast<double>(grid[i]) / norm_max);
  return out;
}

template <class In>
std::vector<double> denormalize(const std::vector<In>& grid, double norm_max) {
  if (!(norm_max > 0.0)) throw ConfigError("norm_max must be positive", "norm_max");
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = static_cast<double>(grid[i]) * norm_max;
  return out;
}

// ---------------------------------------------------------------------------
// Samples and sequence selection
// ---------------------------------------------------------------------------

/// One training example: an input hour, its mask stack and the following hour.
struct Sample {
  Tensor<float> x{Shape{kInputFrames, kCropSize, kCropSize}};
  Tensor<std::uint8_t> m{Shape{kMaskCount, kCropSize, kCropSize}};
  Tensor<float> y{Shape{kOutputFrames, kCropSize, kCropSize}};
  Timestamp t0{};  // first input frame

  Timestamp target_start() const { return t0 + kInputFrames * kFrameStep; }
};

struct NormalizedFrame {
  Timestamp timestamp{};
  std::vector<float> values;  // 64x64
};

enum class RainyCriterion {
  mean_over_outputs,  // mean rainy fraction across the 12 output frames
  every_output,       // each output frame individually
};

struct SelectionConfig {
  double rain_fraction_threshold = 0.5;
  RainyCriterion criterion = RainyCriterion::mean_over_outputs;
};

/// Fraction of landmask pixels with value > 0.
inline double rainy_fraction(const std::vector<float>& frame, const Landmask& mask64) {
  std::size_t land = 0, rainy = 0;
  for (std::size_t i = 0; i < frame.size(); ++i)
    if (mask64.cells[i]) {
      ++land;
      rainy += frame[i] > 0.0f;
    }
  return land ? static_cast<double>(rainy) / static_cast<double>(land) : 0.0;
}

/// Stride-1 windows of 24 consecutive 5-minute frames; a window is kept when its output
/// hour is rainy "more than" the threshold. Windows spanning a time gap are skipped.
inline std::vector<Sample> select_sequences(const std::vector<NormalizedFrame>& frames, const Landmask& mask64,
                                            const SelectionConfig& cfg = {}) {
  std::vector<Sample> out;
  if (frames.size() < std::size_t(kWindowFrames)) return out;
  std::vector<double> fraction(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) fraction[i] = rainy_fraction(frames[i].values, mask64);
  for (std::size_t s = 0; s + kWindowFrames <= frames.size(); ++s) {
    bool consecutive = true;
    for (std::size_t j = s + 1; j < s + kWindowFrames && consecutive; ++j)
      consecutive = frames[j].timestamp - frames[j - 1].timestamp == kFrameStep;
    if (!consecutive) continue;
    bool keep;
    if (cfg.criterion == RainyCriterion::mean_over_outputs) {
      double mean = 0;
      for (int t = kInputFrames; t < kWindowFrames; ++t) mean += fraction[s + t];
      keep = mean / kOutputFrames > cfg.rain_fraction_threshold;
    } else {
      keep = true;
      for (int t = kInputFrames; t < kWindowFrames; ++t) keep = keep && fraction[s + t] > cfg.rain_fraction_threshold;
    }
    if (!keep) continue;
    Sample sample;
    sample.t0 = frames[s].timestamp;
    const std::size_t plane = kCropSize * kCropSize;
    for (int t = 0; t < kInputFrames; ++t) std::copy_n(frames[s + t].values.begin(), plane, sample.x.data() + t * plane);
    for (int t = 0; t < kOutputFrames; ++t)
      std::copy_n(frames[s + kInputFrames + t].values.begin(), plane, sample.y.data() + t * plane);
    out.push_back(std::move(sample));
  }
  return out;
}

/// Number of stride-1 24-frame windows (before selection) in a gap-free stream.
inline std::size_t candidate_window_count(std::size_t frames) {
  return frames >= std::size_t(kWindowFrames) ? frames - kWindowFrames + 1 : 0;
}

enum class Season { winter, spring, summer, autumn };

inline const char* season_name(Season s) {
  switch (s) {
    case Season::winter: return "winter";
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::autumn: return "autumn";
  }
  return "?";
}

/// Meteorological season (DJF, MAM, JJA, SON) of a timestamp.
inline Season season_of(Timestamp t) {
  const unsigned month = static_cast<unsigned>(std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t)}.month());
  if (month == 12 || month <= 2) return Season::winter;
  if (month <= 5) return Season::spring;
  if (month <= 8) return Season::summer;
  return Season::autumn;
}

/// Season of a sample, keyed on its first target frame.
inline Season season_of(const Sample& s) { return season_of(s.target_start()); }

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

inline constexpr int kContainerSchemaVersion = 1;

struct DatasetContainer {
  std::vector<Sample> train;
  std::vector<Sample> test;
  double norm_max = 0.0;  // training-set maximum, stored units
  CropSpec crop;
  Landmask landmask64 = Landmask::full(kCropSize, kCropSize);
  std::map<std::string, std::string> metadata;
  int schema_version = kContainerSchemaVersion;
};

/// Chronological split: the last `fraction` of samples becomes the validation set.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(const std::vector<Sample>& samples,
                                                                            double fraction = 0.1) {
  if (samples.size() < 2) throw ConfigError("need at least two training samples to carve a validation split");
  std::size_t n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(samples.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, samples.size() - 1);
  const auto cut = samples.begin() + std::ptrdiff_t(samples.size() - n_val);
  return {std::vector<Sample>(samples.begin(), cut), std::vector<Sample>(cut, samples.end())};
}

// ---------------------------------------------------------------------------
// End-to-end preparation
// ---------------------------------------------------------------------------

/// Number of 5-minute gaps (steps longer than 5 minutes) in an ordered stream.
inline std::size_t count_gaps(const std::vector<RadarFrame>& frames) {
  std::size_t gaps = 0;
  for (std::size_t j = 1; j < frames.size(); ++j) gaps += frames[j].timestamp - frames[j - 1].timestamp != kFrameStep;
  return gaps;
}

struct PrepareConfig {
  std::optional<CropSpec> crop;           // default: centred on the landmask bounding box
  std::optional<Timestamp> test_start;    // frames at or after this instant form the test split
  double test_fraction = 0.25;            // used when test_start is unset: last fraction of frames
  SelectionConfig selection;
  ClutterThresholds clutter;
  bool clutter_filter = true;
  Exceedance mask_rule = Exceedance::strict;
};

struct PreparedDataset {
  DatasetContainer container;
  QCReport qc;
  std::size_t candidate_windows_train = 0, candidate_windows_test = 0;
};

/// Clutter filter, crop, split, normalise with the training maximum, select windows and
/// attach mask stacks computed from each input hour.
inline PreparedDataset prepare_dataset(std::vector<RadarFrame> frames, const Landmask& landmask,
                                       const PrepareConfig& cfg = {}) {
  if (frames.empty()) throw ConfigError("no frames to prepare", "frames");
  PreparedDataset out;
  for (auto& f : frames) apply_landmask(f, landmask);
  if (cfg.clutter_filter) {
    auto [filtered, qc] = apply_clutter_filter(std::move(frames), cfg.clutter);
    frames = std::move(filtered);
    out.qc = std::move(qc);
  }
  const CropSpec crop = cfg.crop.value_or(default_crop(landmask));
  const Landmask mask64 = crop_landmask(landmask, crop);

  Timestamp split;
  if (cfg.test_start) {
    split = *cfg.test_start;
  } else {
    if (cfg.test_fraction < 0 || cfg.test_fraction >= 1) throw ConfigError("test_fraction must lie in [0,1)", "test_fraction");
    const auto first_test = static_cast<std::size_t>(std::floor((1.0 - cfg.test_fraction) * static_cast<double>(frames.size())));
    split = first_test < frames.size() ? frames[first_test].timestamp : frames.back().timestamp + kFrameStep;
  }

  std::vector<CroppedFrame> train_frames, test_frames;
  for (const auto& f : frames) (f.timestamp < split ? train_frames : test_frames).push_back(crop_frame(f, crop));
  const double norm_max = fit_normalizer(train_frames);

  auto to_samples = [&](const std::vector<CroppedFrame>& part, std::size_t& candidates) {
    std::vector<NormalizedFrame> normed;
    normed.reserve(part.size());
    for (const auto& f : part) normed.push_back({f.timestamp, normalize(f.values, norm_max)});
    for (std::size_t s = 0; s + kWindowFrames <= normed.size(); ++s)
      candidates += normed[s + kWindowFrames - 1].timestamp - normed[s].timestamp == (kWindowFrames - 1) * kFrameStep;
    auto samples = select_sequences(normed, mask64, cfg.selection);
    for (auto& smp : samples) smp.m = masks_for_input(smp.x, norm_max, cfg.mask_rule);
    return samples;
  };

  auto& c = out.container;
  c.train = to_samples(train_frames, out.candidate_windows_train);
  c.test = to_samples(test_frames, out.candidate_windows_test);
  c.norm_max = norm_max;
  c.crop = crop;
  c.landmask64 = mask64;
  c.metadata["split_start"] = format_timestamp(split);
  c.metadata["rain_fraction_threshold"] = std::to_string(cfg.selection.rain_fraction_threshold);
  c.metadata["rainy_criterion"] = cfg.selection.criterion == RainyCriterion::mean_over_outputs ? "mean" : "per_frame";
  c.metadata["mask_rule"] = cfg.mask_rule == Exceedance::strict ? "strict" : "inclusive";
  c.metadata["clutter_filter"] = cfg.clutter_filter ? "on" : "off";
  c.metadata["pixels_zeroed"] = std::to_string(out.qc.pixels_zeroed);
  return out;
}

}  // namespace nowcast
