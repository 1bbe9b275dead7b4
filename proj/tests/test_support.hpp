#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nowcast/autograd.hpp"
#include "nowcast/dataset_pipeline.hpp"
#include "nowcast/random.hpp"

namespace nowcast::testing {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor<float> random_tensor_f(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

struct GradCheck {
  double relative_error = 0.0;
  double analytic_norm = 0.0;
};

/// Compares autograd gradients of `loss()` w.r.t. every leaf in `leaves` against central
/// finite differences. Relative error is ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline GradCheck check_gradients(const std::function<Var<double>()>& loss, std::vector<Var<double>> leaves,
                                 double step = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  auto out = loss();
  backward(out);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& l : leaves) {
    Tensor<double> analytic = l.grad();
    auto& v = l.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + step;
      const double up = loss().value()[0];
      v[i] = keep - step;
      const double down = loss().value()[0];
      v[i] = keep;
      const double numeric = (up - down) / (2 * step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
  return {std::sqrt(diff2) / denom, std::sqrt(a2)};
}

/// Samples with smooth random inputs, a shifted target hour and masks from a fixed pattern.
inline std::vector<Sample> random_samples(std::size_t n, Rng& rng) {
  std::vector<Sample> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& s = out[k];
    const double phase = rng.uniform(0, 6.28), amp = rng.uniform(0.2, 0.8);
    for (int t = 0; t < 12; ++t)
      for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
          const auto at = [&](int step) {
            return static_cast<float>(std::max(0.0, amp * std::sin(phase + 0.1 * (r + step) + 0.07 * c)));
          };
          s.x[(t * 64 + r) * 64 + c] = at(t);
          s.y[(t * 64 + r) * 64 + c] = at(t + 12);
        }
    for (std::size_t i = 0; i < s.m.size(); ++i) s.m[i] = static_cast<std::uint8_t>(s.x[i % 4096] > 0.04f * float(i / 4096));
    s.t0 = from_epoch_seconds(1577836800 + static_cast<std::int64_t>(k) * 300);
  }
  return out;
}

}  // namespace nowcast::testing
