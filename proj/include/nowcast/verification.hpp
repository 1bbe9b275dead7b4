#pragma once

// Verification: denormalised MSE, hourly binarisation, confusion counts and
// the F1 / CSI / HSS / MCC skill scores, pooled overall and per season.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/dataset_pipeline.hpp"
#include "nowcast/generator.hpp"
#include "nowcast/mask_generation.hpp"
#include "nowcast/training.hpp"

namespace nowcast {

/// 1 where the accumulated hour exceeds `threshold_mm`.
template <class T>
Tensor<std::uint8_t> binarize_hour(const Tensor<T>& seq, double norm_max, double threshold_mm,
                                   Exceedance rule = Exceedance::strict) {
  if (!(threshold_mm > 0)) throw ArgumentError("binarize_hour: threshold must be positive");
  const auto acc = accumulate_hour(seq, norm_max);
  Tensor<std::uint8_t> out(acc.shape());
  for (std::size_t p = 0; p < acc.size(); ++p) out[p] = exceeds(acc[p], threshold_mm, rule) ? 1 : 0;
  return out;
}

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, tn += o.tn, fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Counts over landmask pixels only.
inline ConfusionCounts confusion(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& truth, const Landmask& mask) {
  if (pred.shape() != truth.shape()) throw ShapeError("confusion: prediction " + to_string(pred.shape()) + " vs target " + to_string(truth.shape()));
  if (pred.rank() != 2 || pred.dim(0) != mask.rows || pred.dim(1) != mask.cols)
    throw ShapeError("confusion: maps " + to_string(pred.shape()) + " do not match the landmask");
  ConfusionCounts c;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!mask.cells[p]) continue;
    const bool a = pred[p] != 0, b = truth[p] != 0;
    if (a && b) ++c.tp;
    else if (a) ++c.fp;
    else if (b) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct Score {
  double value = 0.0;
  bool undefined = false;  // a denominator was zero; value is reported as 0
};

inline Score f1(const ConfusionCounts& c) {
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn);
  if (tp + fp == 0 || tp + fn == 0) return {0.0, true};
  const double precision = tp / (tp + fp), recall = tp / (tp + fn);
  if (precision + recall == 0) return {0.0, true};
  return {2 * precision * recall / (precision + recall), false};
}

inline Score csi(const ConfusionCounts& c) {
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn);
  if (tp + fn + fp == 0) return {0.0, true};
  return {tp / (tp + fn + fp), false};
}

/// Heidke skill score in the printed form, without the customary factor 2 in the numerator.
inline Score hss(const ConfusionCounts& c) {
  const double tp = double(c.tp), fp = double(c.fp), tn = double(c.tn), fn = double(c.fn);
  const double den = (tp + fn) * (fn + tn) + (tp + fp) * (fp + tn);
  if (den == 0) return {0.0, true};
  return {(tp * tn - fp * fn) / den, false};
}

inline Score mcc(const ConfusionCounts& c) {
  const double tp = double(c.tp), fp = double(c.fp), tn = double(c.tn), fn = double(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0) return {0.0, true};
  return {(tp * tn - fp * fn) / std::sqrt(den), false};
}

/// Per-lead-time MSE in (mm per 5 min)^2. preds/targets: matching lists of (12,H,W) normalised maps.
inline std::array<double, kOutputFrames> mse_per_leadtime(const std::vector<Tensor<float>>& preds,
                                                          const std::vector<Tensor<float>>& targets, double norm_max) {
  if (preds.size() != targets.size()) throw ShapeError("mse_per_leadtime: prediction and target counts differ");
  if (preds.empty()) throw ArgumentError("mse_per_leadtime: no samples");
  if (!(norm_max > 0)) throw ConfigError("norm_max must be positive", "norm_max");
  std::array<double, kOutputFrames> sum{};
  std::int64_t plane = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const auto& t = targets[i];
    if (p.shape() != t.shape() || p.rank() != 3 || p.dim(0) != kOutputFrames)
      throw ShapeError("mse_per_leadtime: expected matching (12,H,W), got " + to_string(p.shape()) + " and " + to_string(t.shape()));
    plane = p.dim(1) * p.dim(2);
    const double scale = norm_max * kStoredToMm;
    for (int f = 0; f < kOutputFrames; ++f)
      for (std::int64_t q = 0; q < plane; ++q) {
        const double d = (double(p[f * plane + q]) - double(t[f * plane + q])) * scale;
        sum[f] += d * d;
      }
  }
  for (auto& s : sum) s /= double(preds.size()) * double(plane);
  return sum;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.5, 10.0, 20.0};
  return t;
}

struct ThresholdScores {
  double threshold_mm = 0;
  ConfusionCounts counts;
  Score f1, csi, hss, mcc;
};

struct MetricsBlock {
  std::size_t samples = 0;
  double mse = 0;
  std::array<double, kOutputFrames> per_leadtime_mse{};
  std::vector<ThresholdScores> thresholds;
};

struct MetricsReport {
  std::string model;
  int runs = 1;
  double norm_max = 0;
  MetricsBlock overall;
  std::map<std::string, MetricsBlock> seasons;  // keyed by season name
};

/// Streams samples into pooled squared errors and per-threshold confusion tables.
class MetricsAccumulator {
 public:
  MetricsAccumulator(double norm_max, Landmask mask64, std::vector<double> thresholds = default_thresholds(),
                     bool by_season = true, Exceedance rule = Exceedance::strict)
      : norm_max_(norm_max), mask_(std::move(mask64)), thresholds_(std::move(thresholds)), by_season_(by_season), rule_(rule) {
    if (!(norm_max_ > 0)) throw ConfigError("norm_max must be positive", "norm_max");
  }

  void add(const Tensor<float>& pred, const Sample& truth) {
    if (pred.shape() != truth.y.shape()) throw ShapeError("prediction " + to_string(pred.shape()) + " vs target " + to_string(truth.y.shape()));
    Partial part;
    part.counts.resize(thresholds_.size());
    const std::int64_t plane = pred.dim(1) * pred.dim(2);
    const double scale = norm_max_ * kStoredToMm;
    for (int f = 0; f < kOutputFrames; ++f)
      for (std::int64_t q = 0; q < plane; ++q) {
        const double d = (double(pred[f * plane + q]) - double(truth.y[f * plane + q])) * scale;
        part.sq[f] += d * d;
      }
    for (std::size_t k = 0; k < thresholds_.size(); ++k)
      part.counts[k] = confusion(binarize_hour(pred, norm_max_, thresholds_[k], rule_),
                                 binarize_hour(truth.y, norm_max_, thresholds_[k], rule_), mask_);
    part.plane = plane;
    merge(overall_, part);
    if (by_season_) merge(seasons_[season_name(season_of(truth))], part);
  }

  MetricsReport report(std::string model, int runs) const {
    MetricsReport r;
    r.model = std::move(model);
    r.runs = runs;
    r.norm_max = norm_max_;
    r.overall = finish(overall_);
    for (const auto& [name, acc] : seasons_) r.seasons[name] = finish(acc);
    return r;
  }

 private:
  struct Partial {
    std::array<double, kOutputFrames> sq{};
    std::vector<ConfusionCounts> counts;
    std::int64_t plane = 0;
  };
  struct Totals {
    std::size_t samples = 0;
    std::array<double, kOutputFrames> sq{};
    std::vector<ConfusionCounts> counts;
    std::int64_t plane = 0;
  };

  void merge(Totals& t, const Partial& p) const {
    if (t.counts.empty()) t.counts.resize(thresholds_.size());
    ++t.samples;
    t.plane = p.plane;
    for (int f = 0; f < kOutputFrames; ++f) t.sq[f] += p.sq[f];
    for (std::size_t k = 0; k < p.counts.size(); ++k) t.counts[k] += p.counts[k];
  }

  MetricsBlock finish(const Totals& t) const {
    MetricsBlock b;
    b.samples = t.samples;
    if (t.samples == 0) return b;
    const double n = double(t.samples) * double(t.plane);
    for (int f = 0; f < kOutputFrames; ++f) {
      b.per_leadtime_mse[f] = t.sq[f] / n;
      b.mse += b.per_leadtime_mse[f] / kOutputFrames;
    }
    for (std::size_t k = 0; k < thresholds_.size(); ++k) {
      const auto& c = t.counts[k];
      b.thresholds.push_back({thresholds_[k], c, f1(c), csi(c), hss(c), mcc(c)});
    }
    return b;
  }

  double norm_max_;
  Landmask mask_;
  std::vector<double> thresholds_;
  bool by_season_;
  Exceedance rule_;
  Totals overall_;
  std::map<std::string, Totals> seasons_;
};

struct EvalOptions {
  int runs = 10;            // stochastic passes averaged into one prediction
  bool stochastic = true;   // dropout active during the passes
  std::vector<double> thresholds = default_thresholds();
  bool by_season = true;
  int batch_size = 8;
  std::uint64_t seed = 0;
  Exceedance rule = Exceedance::strict;
};

/// Mean of `runs` forward passes for one batch, (B,12,64,64).
template <NowcastModel M>
Tensor<float> mean_prediction(M& model, const Batch& b, int runs, bool stochastic, Rng& rng) {
  NoGradGuard no_grad;
  if (!stochastic) runs = 1;
  const ForwardContext<float> ctx{false, stochastic, &rng};
  Tensor<double> sum(b.y.shape());
  for (int r = 0; r < runs; ++r) {
    const auto out = run_model(model, b, ctx).y_hat.value();
    for (std::size_t i = 0; i < out.size(); ++i) sum[i] += out[i];
  }
  Tensor<float> mean(b.y.shape());
  for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = static_cast<float>(sum[i] / runs);
  return mean;
}

namespace detail {

inline Tensor<float> slice_sample(const Tensor<float>& batched, std::int64_t i) {
  Shape s(batched.shape().begin() + 1, batched.shape().end());
  const auto n = numel(s);
  return Tensor<float>(s, std::vector<float>(batched.data() + i * n, batched.data() + (i + 1) * n));
}

inline void require_test(const std::vector<Sample>& test) {
  if (test.empty()) throw ArgumentError("evaluation needs a non-empty test split");
}

}  // namespace detail

/// Predictions for every sample (mean of `opts.runs` passes), in sample order.
template <NowcastModel M>
std::vector<Tensor<float>> predict_split(M& model, const std::vector<Sample>& samples, const EvalOptions& opts) {
  if (opts.runs < 1) throw ConfigError("runs must be >= 1", "runs");
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1", "batch_size");
  Rng rng(opts.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Tensor<float>> out;
  out.reserve(samples.size());
  for (const auto& idx : batch_indices(order, opts.batch_size)) {
    const auto mean = mean_prediction(model, make_batch(samples, idx), opts.runs, opts.stochastic, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) out.push_back(detail::slice_sample(mean, std::int64_t(i)));
  }
  return out;
}

template <NowcastModel M>
MetricsReport evaluate_model(M& model, const std::vector<Sample>& test, double norm_max, const Landmask& mask64,
                             const EvalOptions& opts = {}, std::string name = "model") {
  detail::require_test(test);
  MetricsAccumulator acc(norm_max, mask64, opts.thresholds, opts.by_season, opts.rule);
  const auto preds = predict_split(model, test, opts);
  for (std::size_t i = 0; i < test.size(); ++i) acc.add(preds[i], test[i]);
  return acc.report(std::move(name), opts.stochastic ? opts.runs : 1);
}

/// Repeats the last input frame; a single deterministic run.
inline MetricsReport evaluate_persistence(const std::vector<Sample>& test, double norm_max, const Landmask& mask64,
                                          const EvalOptions& opts = {}) {
  detail::require_test(test);
  MetricsAccumulator acc(norm_max, mask64, opts.thresholds, opts.by_season, opts.rule);
  for (const auto& s : test) acc.add(persistence_predict(s.x, kOutputFrames), s);
  return acc.report("persistence", 1);
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Score& s) { return {{"value", s.value}, {"undefined", s.undefined}}; }

inline nlohmann::json to_json(const MetricsBlock& b) {
  nlohmann::json th = nlohmann::json::array();
  for (const auto& t : b.thresholds)
    th.push_back({{"threshold_mm", t.threshold_mm},
                  {"tp", t.counts.tp},
                  {"fp", t.counts.fp},
                  {"tn", t.counts.tn},
                  {"fn", t.counts.fn},
                  {"f1", to_json(t.f1)},
                  {"csi", to_json(t.csi)},
                  {"hss", to_json(t.hss)},
                  {"mcc", to_json(t.mcc)}});
  return {{"samples", b.samples}, {"mse", b.mse}, {"per_leadtime_mse", b.per_leadtime_mse}, {"thresholds", th}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json seasons = nlohmann::json::object();
  for (const auto& [name, b] : r.seasons) seasons[name] = to_json(b);
  return {{"model", r.model}, {"runs", r.runs}, {"norm_max", r.norm_max}, {"mse_units", "(mm per 5 min)^2"},
          {"overall", to_json(r.overall)}, {"seasons", seasons}};
}

inline MetricsBlock metrics_block_from_json(const nlohmann::json& j) {
  MetricsBlock b;
  b.samples = j.at("samples").get<std::size_t>();
  b.mse = j.at("mse").get<double>();
  b.per_leadtime_mse = j.at("per_leadtime_mse").get<std::array<double, kOutputFrames>>();
  auto score = [](const nlohmann::json& s) { return Score{s.at("value").get<double>(), s.at("undefined").get<bool>()}; };
  for (const auto& t : j.at("thresholds"))
    b.thresholds.push_back({t.at("threshold_mm").get<double>(),
                            {t.at("tp").get<std::uint64_t>(), t.at("fp").get<std::uint64_t>(), t.at("tn").get<std::uint64_t>(),
                             t.at("fn").get<std::uint64_t>()},
                            score(t.at("f1")), score(t.at("csi")), score(t.at("hss")), score(t.at("mcc"))});
  return b;
}

inline MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.model = j.at("model").get<std::string>();
  r.runs = j.at("runs").get<int>();
  r.norm_max = j.at("norm_max").get<double>();
  r.overall = metrics_block_from_json(j.at("overall"));
  for (const auto& [name, b] : j.at("seasons").items()) r.seasons[name] = metrics_block_from_json(b);
  return r;
}

/// metrics.json, metrics.csv (one row per scope and threshold) and mse_per_leadtime.csv.
inline void write_metrics(const std::filesystem::path& dir, const MetricsReport& r) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "metrics.json") << to_json(r).dump(2) << "\n";
  std::ofstream csv(dir / "metrics.csv");
  csv.precision(10);
  csv << "model,scope,samples,mse,threshold_mm,tp,fp,tn,fn,f1,csi,hss,mcc,undefined\n";
  auto rows = [&](const std::string& scope, const MetricsBlock& b) {
    for (const auto& t : b.thresholds) {
      std::string undef;
      for (auto [n, s] : {std::pair{"f1", t.f1}, {"csi", t.csi}, {"hss", t.hss}, {"mcc", t.mcc}})
        if (s.undefined) undef += (undef.empty() ? "" : "|") + std::string(n);
      csv << r.model << ',' << scope << ',' << b.samples << ',' << b.mse << ',' << t.threshold_mm << ',' << t.counts.tp
          << ',' << t.counts.fp << ',' << t.counts.tn << ',' << t.counts.fn << ',' << t.f1.value << ',' << t.csi.value
          << ',' << t.hss.value << ',' << t.mcc.value << ',' << undef << '\n';
    }
  };
  rows("overall", r.overall);
  for (const auto& [name, b] : r.seasons) rows(name, b);
  std::ofstream lt(dir / "mse_per_leadtime.csv");
  lt.precision(10);
  lt << "lead_minutes,mse\n";
  for (int f = 0; f < kOutputFrames; ++f) lt << (f + 1) * 5 << ',' << r.overall.per_leadtime_mse[f] << '\n';
}

}  // namespace nowcast
