#pragma once

// Epistemic uncertainty from test-time dropout and aleatoric uncertainty from
// the log-variance head.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/training.hpp"

namespace nowcast {

enum class UncertaintyKind { epistemic, aleatoric };

struct UncertaintyMaps {
  UncertaintyKind kind = UncertaintyKind::epistemic;
  Tensor<float> maps;  // (12,H,W) variance in normalised units^2
  int k = 0;           // passes (epistemic only)
};

struct PassReduction {
  Tensor<double> mean;
  Tensor<double> variance;  // population (divide by k)
};

/// Per-element mean and population variance over equally shaped passes. Values at each element are
/// sorted before summation, so the result does not depend on the order of the passes.
inline PassReduction reduce_passes(const std::vector<Tensor<float>>& passes) {
  if (passes.empty()) throw ArgumentError("reduce_passes: no passes");
  for (const auto& p : passes)
    if (p.shape() != passes.front().shape()) throw ShapeError("reduce_passes: passes differ in shape");
  const std::size_t k = passes.size(), n = passes.front().size();
  PassReduction out{Tensor<double>(passes.front().shape()), Tensor<double>(passes.front().shape())};
  std::vector<double> v(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) v[j] = passes[j][i];
    std::sort(v.begin(), v.end());
    double sum = 0;
    for (double x : v) sum += x;
    const double mean = sum / double(k);
    double sq = 0;
    for (double x : v) sq += (x - mean) * (x - mean);
    out.mean[i] = mean;
    out.variance[i] = sq / double(k);
  }
  return out;
}

struct TtdResult {
  Tensor<float> mean;  // (12,H,W)
  UncertaintyMaps uncertainty;
};

namespace detail {

inline Tensor<float> sample_slice(const Tensor<float>& batched, std::int64_t i) {
  Shape s(batched.shape().begin() + 1, batched.shape().end());
  const auto n = numel(s);
  return Tensor<float>(s, std::vector<float>(batched.data() + i * n, batched.data() + (i + 1) * n));
}

template <class V>
Tensor<float> to_float(const Tensor<V>& t) {
  Tensor<float> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>(t[i]);
  return out;
}

}  // namespace detail

/// k forward passes over one batch; pass j draws dropout masks from the j-th child of Rng(seed).
template <NowcastModel M>
std::vector<TtdResult> ttd_predict_batch(M& model, const Batch& b, int k, std::uint64_t seed, bool stochastic = true) {
  if (k < 2) throw ArgumentError("ttd_predict: k must be >= 2, got " + std::to_string(k));
  NoGradGuard no_grad;
  Rng master(seed);
  std::vector<Tensor<float>> passes;
  passes.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    Rng pass_rng = master.fork();
    const ForwardContext<float> ctx{false, stochastic, &pass_rng};
    passes.push_back(run_model(model, b, ctx).y_hat.value());
  }
  const auto n = b.x.dim(0);
  std::vector<TtdResult> out;
  out.reserve(static_cast<std::size_t>(n));
  const auto red = reduce_passes(passes);
  const auto mean = detail::to_float(red.mean), var = detail::to_float(red.variance);
  for (std::int64_t i = 0; i < n; ++i)
    out.push_back({detail::sample_slice(mean, i), {UncertaintyKind::epistemic, detail::sample_slice(var, i), k}});
  return out;
}

template <NowcastModel M>
TtdResult ttd_predict(M& model, const Sample& s, int k = 10, std::uint64_t seed = 0, bool stochastic = true) {
  return ttd_predict_batch(model, make_batch({s}, {0}), k, seed, stochastic).front();
}

struct EpistemicSummary {
  int k = 0;
  std::size_t samples = 0;
  double overall = 0;                                 // mean of all variance maps
  std::array<double, kOutputFrames> by_leadtime{};    // mean variance per lead time
  std::map<std::string, double> by_season;           // mean variance per season present
  std::map<std::string, std::size_t> season_samples;
};

/// Averages TTD variance maps over a split. Batch i uses seed + i so results are reproducible.
template <NowcastModel M>
EpistemicSummary epistemic_summary(M& model, const std::vector<Sample>& split, int k = 10, std::uint64_t seed = 0,
                                   int batch_size = 8, bool stochastic = true) {
  if (split.empty()) throw ArgumentError("epistemic_summary: empty split");
  EpistemicSummary s;
  s.k = k;
  std::array<double, kOutputFrames> lead{};
  std::map<std::string, double> season_sum;
  std::vector<std::size_t> order(split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::uint64_t batch_seed = seed;
  std::int64_t plane = 0;
  for (const auto& idx : batch_indices(order, batch_size)) {
    const auto results = ttd_predict_batch(model, make_batch(split, idx), k, batch_seed++, stochastic);
    for (std::size_t r = 0; r < results.size(); ++r) {
      const auto& maps = results[r].uncertainty.maps;
      plane = maps.dim(1) * maps.dim(2);
      double sample_mean = 0;
      for (int f = 0; f < kOutputFrames; ++f) {
        double sum = 0;
        for (std::int64_t q = 0; q < plane; ++q) sum += maps[f * plane + q];
        lead[f] += sum / double(plane);
        sample_mean += sum / double(plane) / kOutputFrames;
      }
      const std::string season = season_name(season_of(split[idx[r]]));
      season_sum[season] += sample_mean;
      ++s.season_samples[season];
    }
  }
  s.samples = split.size();
  for (int f = 0; f < kOutputFrames; ++f) {
    s.by_leadtime[f] = lead[f] / double(s.samples);
    s.overall += s.by_leadtime[f] / kOutputFrames;
  }
  for (const auto& [name, sum] : season_sum) s.by_season[name] = sum / double(s.season_samples[name]);
  return s;
}

inline nlohmann::json to_json(const EpistemicSummary& s) {
  return {{"k", s.k},
          {"samples", s.samples},
          {"overall", s.overall},
          {"by_leadtime", s.by_leadtime},
          {"by_season", s.by_season},
          {"season_samples", s.season_samples},
          {"units", "normalised^2"}};
}

struct AleatoricResult {
  Tensor<float> prediction;  // (12,H,W)
  UncertaintyMaps uncertainty;
};

/// sigma^2 = exp(s) from the log-variance head, deterministic pass.
template <NowcastModel M>
std::vector<AleatoricResult> aleatoric_infer_batch(M& model, const Batch& b) {
  if (!model.has_log_var()) throw ArgumentError("aleatoric_infer: the model has no log-variance head");
  NoGradGuard no_grad;
  const auto out = run_model(model, b, ForwardContext<float>{});
  const auto& s = out.log_var.value();
  Tensor<float> var(s.shape());
  // Clamped at the smallest normal float so the map stays strictly positive.
  for (std::size_t i = 0; i < s.size(); ++i)
    var[i] = static_cast<float>(std::max(std::exp(double(s[i])), double(std::numeric_limits<float>::min())));
  std::vector<AleatoricResult> results;
  for (std::int64_t i = 0; i < b.x.dim(0); ++i)
    results.push_back({detail::sample_slice(out.y_hat.value(), i), {UncertaintyKind::aleatoric, detail::sample_slice(var, i), 0}});
  return results;
}

template <NowcastModel M>
AleatoricResult aleatoric_infer(M& model, const Sample& s) {
  return aleatoric_infer_batch(model, make_batch({s}, {0})).front();
}

}  // namespace nowcast
