#pragma once

// Hourly accumulation and the 25-level precipitation mask stack.

#include <array>
#include <cmath>
#include <cstdint>

#include "nowcast/errors.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

/// Stored units are hundredths of a millimetre.
inline constexpr double kStoredToMm = 0.01;
inline constexpr int kMaskThresholds = 25;

/// Sums the denormalised frames of one hour in millimetres. seq: (12,H,W) normalised values.
/// The result is snapped to 1e-6 mm so that float round-off of the normalisation cannot flip
/// a comparison against an integer threshold.
template <class T>
Tensor<double> accumulate_hour(const Tensor<T>& seq, double norm_max) {
  if (seq.rank() != 3 || seq.dim(0) != 12)
    throw ShapeError("accumulate_hour: expected (12,H,W), got " + to_string(seq.shape()));
  if (!(norm_max > 0)) throw ConfigError("norm_max must be positive", "norm_max");
  const std::int64_t H = seq.dim(1), W = seq.dim(2), P = H * W;
  Tensor<double> acc({H, W});
  for (int t = 0; t < 12; ++t)
    for (std::int64_t p = 0; p < P; ++p) acc[p] += static_cast<double>(seq[t * P + p]) * norm_max;
  for (auto& v : acc.values()) v = std::round(v * kStoredToMm * 1e6) / 1e6;
  return acc;
}

enum class Exceedance {
  strict,     // value > threshold
  inclusive,  // value >= threshold
};

inline bool exceeds(double value, double threshold, Exceedance rule) {
  return rule == Exceedance::strict ? value > threshold : value >= threshold;
}

struct MaskStack {
  Tensor<std::uint8_t> masks;  // (25,H,W)
  std::array<int, kMaskThresholds> thresholds{};
};

/// masks[t-1] = 1 where the hourly accumulation exceeds t mm, t = 1..25.
inline MaskStack make_masks(const Tensor<double>& acc_mm, Exceedance rule = Exceedance::strict) {
  require_rank(acc_mm.shape(), 2, "make_masks");
  const std::int64_t H = acc_mm.dim(0), W = acc_mm.dim(1), P = H * W;
  MaskStack out{Tensor<std::uint8_t>({kMaskThresholds, H, W}), {}};
  for (int t = 0; t < kMaskThresholds; ++t) out.thresholds[t] = t + 1;
  for (std::int64_t p = 0; p < P; ++p) {
    const double v = acc_mm[p];
    if (v < 0 || std::isnan(v)) throw DomainError("make_masks: negative or NaN accumulation at pixel " + std::to_string(p));
    for (int t = 0; t < kMaskThresholds; ++t) out.masks[t * P + p] = exceeds(v, t + 1, rule) ? 1 : 0;
  }
  return out;
}

/// Mask stack of an input hour.
template <class T>
Tensor<std::uint8_t> masks_for_input(const Tensor<T>& x, double norm_max, Exceedance rule = Exceedance::strict) {
  return make_masks(accumulate_hour(x, norm_max), rule).masks;
}

}  // namespace nowcast
