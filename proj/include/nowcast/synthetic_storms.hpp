#pragma once

// Seeded synthetic rain fields: Gaussian cells advected with wrap-around.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "nowcast/dataset_pipeline.hpp"
#include "nowcast/mask_generation.hpp"
#include "nowcast/random.hpp"

namespace nowcast {

struct StormConfig {
  std::uint64_t seed = 0;
  int n_frames = 288;
  int n_cells = 12;
  std::pair<double, double> amplitude_range{0.5, 3.0};  // mm per 5 min at the cell centre
  std::pair<double, double> cell_sigma_range{6.0, 18.0};  // pixels
  std::pair<double, double> velocity{0.6, 0.3};           // pixels per frame (rows, cols)
  double growth_rate = 1.0;                                 // per-frame amplitude factor
  double noise_sigma = 0.0;                                 // additive noise, mm per 5 min
  int rows = kRawGridSize, cols = kRawGridSize;
  Timestamp start = from_epoch_seconds(1577836800);  // 2020-01-01T00:00Z
  double land_radius = 0.0;  // > 0: circular landmask of this radius (pixels) centred on the grid

  void validate() const {
    if (n_frames < 1) throw ConfigError("n_frames must be >= 1", "n_frames");
    if (n_cells < 0) throw ConfigError("n_cells must be >= 0", "n_cells");
    if (amplitude_range.first < 0 || amplitude_range.second < amplitude_range.first)
      throw ConfigError("amplitude_range must be a non-negative interval", "amplitude_range");
    if (cell_sigma_range.first <= 0 || cell_sigma_range.second < cell_sigma_range.first)
      throw ConfigError("cell_sigma_range must be a positive interval", "cell_sigma_range");
    if (growth_rate <= 0) throw ConfigError("growth_rate must be positive", "growth_rate");
    if (noise_sigma < 0) throw ConfigError("noise_sigma must be non-negative", "noise_sigma");
    if (rows < kCropSize || cols < kCropSize) throw ConfigError("grid must be at least 64x64", "rows");
  }
};

struct StormCell {
  double row = 0, col = 0;  // position at frame 0
  double amplitude = 0;     // mm per 5 min at frame 0
  double sigma = 1;
};

struct StormArchive {
  std::vector<RadarFrame> frames;
  Landmask landmask;
  std::vector<StormCell> cells;
};

namespace detail {

/// Signed shortest displacement on a ring of the given length.
inline double wrap_delta(double d, double length) {
  d = std::fmod(d, length);
  if (d > length / 2) d -= length;
  if (d < -length / 2) d += length;
  return d;
}

/// Sum of periodic Gaussian cells (mm) at every grid pixel for one frame.
inline std::vector<double> render_cells(const std::vector<StormCell>& cells, int frame, std::pair<double, double> velocity,
                                        double growth, int rows, int cols) {
  std::vector<double> field(std::size_t(rows) * cols, 0.0);
  const double scale = std::pow(growth, frame);
  for (const auto& cell : cells) {
    const double cr = cell.row + velocity.first * frame, cc = cell.col + velocity.second * frame;
    const double amp = cell.amplitude * scale, inv = 1.0 / (2 * cell.sigma * cell.sigma);
    std::vector<double> gr(rows), gc(cols);
    for (int r = 0; r < rows; ++r) {
      const double d = wrap_delta(r - cr, rows);
      gr[r] = std::exp(-d * d * inv);
    }
    for (int c = 0; c < cols; ++c) {
      const double d = wrap_delta(c - cc, cols);
      gc[c] = std::exp(-d * d * inv);
    }
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) field[std::size_t(r) * cols + c] += amp * gr[r] * gc[c];
  }
  return field;
}

}  // namespace detail

inline Landmask synthetic_landmask(const StormConfig& cfg) {
  auto mask = Landmask::full(cfg.rows, cfg.cols);
  if (cfg.land_radius <= 0) return mask;
  const double r0 = (cfg.rows - 1) / 2.0, c0 = (cfg.cols - 1) / 2.0;
  for (int r = 0; r < cfg.rows; ++r)
    for (int c = 0; c < cfg.cols; ++c)
      mask.cells[std::size_t(r) * cfg.cols + c] = std::hypot(r - r0, c - c0) <= cfg.land_radius;
  return mask;
}

/// Deterministic archive: cells start at integer pixels, move with `velocity` (wrapping), grow
/// geometrically, receive optional Gaussian noise and are quantised to hundredths of a millimetre.
inline StormArchive gen_storm_archive(const StormConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  StormArchive out;
  out.landmask = synthetic_landmask(cfg);
  for (int k = 0; k < cfg.n_cells; ++k) {
    StormCell cell;
    cell.row = std::floor(rng.uniform(0, cfg.rows));
    cell.col = std::floor(rng.uniform(0, cfg.cols));
    cell.amplitude = rng.uniform(cfg.amplitude_range.first, cfg.amplitude_range.second);
    cell.sigma = rng.uniform(cfg.cell_sigma_range.first, cfg.cell_sigma_range.second);
    out.cells.push_back(cell);
  }
  Rng noise = rng.fork();
  for (int f = 0; f < cfg.n_frames; ++f) {
    auto field = detail::render_cells(out.cells, f, cfg.velocity, cfg.growth_rate, cfg.rows, cfg.cols);
    RadarFrame frame;
    frame.timestamp = cfg.start + f * kFrameStep;
    frame.rows = cfg.rows;
    frame.cols = cfg.cols;
    frame.values.resize(field.size());
    for (std::size_t p = 0; p < field.size(); ++p) {
      double v = field[p];
      if (cfg.noise_sigma > 0) v += noise.normal(0.0, cfg.noise_sigma);
      frame.values[p] = out.landmask.cells[p] ? static_cast<std::int32_t>(std::max(0.0, std::round(100.0 * v))) : 0;
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heteroscedastic pairs
// ---------------------------------------------------------------------------

struct HeteroscedasticPair {
  Sample sample;            // y already carries the injected noise
  Tensor<float> clean_y;    // (12,64,64) before noise
  Tensor<float> noise_map;  // (12,64,64) injected standard deviation
};

struct HeteroscedasticConfig {
  int n_cells = 3;
  std::pair<double, double> amplitude_range{0.3, 1.0};  // normalised units
  std::pair<double, double> sigma_range{5.0, 12.0};     // pixels
  double max_speed = 0.5;                               // pixels per frame
  double norm_max = 1000.0;                             // for the mask stack
};

/// Each pair advects a fresh set of cells over 24 frames on a 64x64 torus (normalised units).
/// y = clean continuation + N(0, sigma_fn(clean intensity)) per pixel.
inline std::vector<HeteroscedasticPair> gen_heteroscedastic_pairs(std::uint64_t seed, int n,
                                                                  const std::function<double(double)>& sigma_fn,
                                                                  const HeteroscedasticConfig& cfg = {}) {
  if (n < 0) throw ArgumentError("gen_heteroscedastic_pairs: n must be >= 0");
  Rng rng(seed);
  std::vector<HeteroscedasticPair> out;
  out.reserve(static_cast<std::size_t>(n));
  constexpr std::int64_t P = kCropSize * kCropSize;
  for (int i = 0; i < n; ++i) {
    std::vector<StormCell> cells(static_cast<std::size_t>(cfg.n_cells));
    for (auto& c : cells) {
      c.row = rng.uniform(0, kCropSize);
      c.col = rng.uniform(0, kCropSize);
      c.amplitude = rng.uniform(cfg.amplitude_range.first, cfg.amplitude_range.second);
      c.sigma = rng.uniform(cfg.sigma_range.first, cfg.sigma_range.second);
    }
    const double angle = rng.uniform(0, 2 * M_PI), speed = rng.uniform(0, cfg.max_speed);
    const std::pair<double, double> velocity{speed * std::sin(angle), speed * std::cos(angle)};
    HeteroscedasticPair pair;
    pair.clean_y = Tensor<float>({kOutputFrames, kCropSize, kCropSize});
    pair.noise_map = Tensor<float>({kOutputFrames, kCropSize, kCropSize});
    for (int f = 0; f < kWindowFrames; ++f) {
      const auto field = detail::render_cells(cells, f, velocity, 1.0, kCropSize, kCropSize);
      for (std::int64_t p = 0; p < P; ++p) {
        const float v = static_cast<float>(field[p]);
        if (f < kInputFrames) {
          pair.sample.x[f * P + p] = v;
        } else {
          const std::int64_t k = (f - kInputFrames) * P + p;
          const double sd = sigma_fn(v);
          pair.clean_y[k] = v;
          pair.noise_map[k] = static_cast<float>(sd);
          pair.sample.y[k] = static_cast<float>(v + (sd > 0 ? rng.normal(0.0, sd) : 0.0));
        }
      }
    }
    pair.sample.m = masks_for_input(pair.sample.x, cfg.norm_max);
    pair.sample.t0 = from_epoch_seconds(1577836800 + std::int64_t(i) * 7200);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace nowcast
