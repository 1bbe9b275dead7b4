#pragma once

// Grad-CAM for the nowcasting generator. The target is the sum of predicted
// values over pixels whose accumulated, denormalised hour is rainy; the rainy
// set itself is held constant during differentiation.

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/image_io.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/training.hpp"
#include "nowcast/verification.hpp"

namespace nowcast {

struct HeatmapRequest {
  std::string layer;
  double binarize_threshold_mm = 0.5;
  Exceedance rule = Exceedance::strict;
};

struct GradCamResult {
  std::string layer;
  Tensor<double> heatmap{Shape{kCropSize, kCropSize}};  // upsampled, in [0,1]
  Tensor<double> raw;                                    // ReLU(sum_c w_c A_c) at the layer's resolution
  std::vector<double> weights;                           // one per channel
  bool no_rain = false;                                  // nothing predicted rainy: all-zero heatmap
  std::size_t rainy_pixels = 0;

  Shape source_shape() const { return raw.shape(); }
};

namespace detail {

/// Seed for backward(): 1 at every (lead time, pixel) whose pixel is rainy, so the
/// propagated gradient is that of the summed prediction over the rainy set.
template <class T>
Tensor<T> rainy_seed(const Tensor<T>& y_hat, double norm_max, double threshold_mm, Exceedance rule, std::size_t& count) {
  if (y_hat.rank() != 4 || y_hat.dim(0) != 1) throw ShapeError("gradcam: expected a single-sample (1,F,H,W) prediction");
  const std::int64_t F = y_hat.dim(1), plane = y_hat.dim(2) * y_hat.dim(3);
  const auto rainy = binarize_hour(y_hat.reshaped({F, y_hat.dim(2), y_hat.dim(3)}), norm_max, threshold_mm, rule);
  count = 0;
  Tensor<T> seed(y_hat.shape(), T{0});
  for (std::int64_t p = 0; p < plane; ++p) {
    if (!rainy[p]) continue;
    ++count;
    for (std::int64_t f = 0; f < F; ++f) seed[f * plane + p] = T{1};
  }
  return seed;
}

/// Channel weights from the gradient, the rectified weighted sum, then bilinear upsampling and max-normalisation.
template <class T>
void fill_cam(GradCamResult& r, const Tensor<T>& act, const Tensor<T>& grad, std::int64_t out_size) {
  const std::int64_t C = act.dim(1), h = act.dim(2), w = act.dim(3), plane = h * w;
  r.weights.assign(std::size_t(C), 0.0);
  r.raw = Tensor<double>({h, w}, 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    double s = 0;
    for (std::int64_t q = 0; q < plane; ++q) s += grad[c * plane + q];
    r.weights[std::size_t(c)] = s / double(plane);
  }
  for (std::int64_t q = 0; q < plane; ++q) {
    double s = 0;
    for (std::int64_t c = 0; c < C; ++c) s += r.weights[std::size_t(c)] * act[c * plane + q];
    r.raw[q] = std::max(0.0, s);
  }
  r.heatmap = Tensor<double>({out_size, out_size});
  kernels::bilinear_forward<double>(h, w, out_size, out_size, r.raw.data(), r.heatmap.data());
  double peak = 0;
  for (double& v : r.heatmap.values()) peak = std::max(peak, v = std::max(0.0, v));
  if (peak > 0)
    for (double& v : r.heatmap.values()) v /= peak;
}

}  // namespace detail

/// Grad-CAM from an already-built graph: `activation` must lie on the path to `y_hat`.
/// Runs backward once; callers reading several activations should use the returned gradients directly.
template <class T>
GradCamResult gradcam_from_graph(const Var<T>& activation, const Var<T>& y_hat, double norm_max, const HeatmapRequest& req,
                                 std::int64_t out_size = kCropSize) {
  GradCamResult r;
  r.layer = req.layer;
  const auto seed = detail::rainy_seed(y_hat.value(), norm_max, req.binarize_threshold_mm, req.rule, r.rainy_pixels);
  const auto& act = activation.value();
  if (act.rank() != 4 || act.dim(0) != 1) throw ShapeError("gradcam: activation must be (1,C,h,w)");
  if (r.rainy_pixels == 0) {
    r.no_rain = true;
    r.weights.assign(std::size_t(act.dim(1)), 0.0);
    r.raw = Tensor<double>({act.dim(2), act.dim(3)}, 0.0);
    r.heatmap = Tensor<double>({out_size, out_size}, 0.0);
    return r;
  }
  if (!y_hat.requires_grad()) throw Error("gradcam: prediction carries no graph (was gradient tracking disabled?)");
  backward(y_hat, seed);
  detail::fill_cam(r, act, activation.grad(), out_size);
  return r;
}

namespace detail {

template <NowcastModel M>
void require_sites(M& model, const std::vector<std::string>& layers) {
  const auto sites = model.activation_sites();
  for (const auto& l : layers)
    if (std::find(sites.begin(), sites.end(), l) == sites.end())
      throw ConfigError("gradcam: '" + l + "' is not a registered activation site", "layer");
}

}  // namespace detail

/// Heatmaps for several layers from one forward and one backward pass (deterministic mode).
template <NowcastModel M>
std::vector<GradCamResult> gradcam_layers(M& model, const Sample& s, double norm_max, const std::vector<std::string>& layers,
                                          double threshold_mm = 0.5, Exceedance rule = Exceedance::strict) {
  detail::require_sites(model, layers);
  auto st = model.state();
  st.zero_grad();
  ActivationTaps<float> taps;
  const ForwardContext<float> ctx{false, false, nullptr, &taps};
  const auto out = run_model(model, make_batch({s}, {0}), ctx);
  std::size_t rainy = 0;
  const auto seed = detail::rainy_seed(out.y_hat.value(), norm_max, threshold_mm, rule, rainy);
  if (rainy) backward(out.y_hat, seed);
  std::vector<GradCamResult> results;
  for (const auto& l : layers) {
    const auto& a = taps.at(l);
    GradCamResult r;
    r.layer = l;
    r.rainy_pixels = rainy;
    if (!rainy) {
      r.no_rain = true;
      r.weights.assign(std::size_t(a.value().dim(1)), 0.0);
      r.raw = Tensor<double>({a.value().dim(2), a.value().dim(3)}, 0.0);
      r.heatmap = Tensor<double>({kCropSize, kCropSize}, 0.0);
    } else {
      detail::fill_cam(r, a.value(), a.grad(), kCropSize);
    }
    results.push_back(std::move(r));
  }
  st.zero_grad();
  return results;
}

template <NowcastModel M>
GradCamResult gradcam(M& model, const Sample& s, double norm_max, const HeatmapRequest& req) {
  return gradcam_layers(model, s, norm_max, {req.layer}, req.binarize_threshold_mm, req.rule).front();
}

struct HeatmapGrid {
  std::vector<GradCamResult> heatmaps;  // in activation_sites() order
  Tensor<double> input_mm, truth_mm, prediction_mm;  // accumulated hours (H,W)
  Image figure;
};

/// Every registered site for one sample, laid out one row per depth: map-encoder DSC/CBAM,
/// mask-encoder DSC/CBAM, decoder DSC; the first row shows input, truth and prediction hours.
template <NowcastModel M>
HeatmapGrid heatmap_grid(M& model, const Sample& s, double norm_max, double threshold_mm = 0.5, int tile_scale = 2) {
  HeatmapGrid g;
  const auto sites = model.activation_sites();
  g.heatmaps = gradcam_layers(model, s, norm_max, sites, threshold_mm);
  Tensor<float> pred;
  {
    NoGradGuard ng;
    pred = run_model(model, make_batch({s}, {0}), ForwardContext<float>{}).y_hat.value();
  }
  g.input_mm = accumulate_hour(s.x, norm_max);
  g.truth_mm = accumulate_hour(s.y, norm_max);
  g.prediction_mm = accumulate_hour(pred.reshaped({kOutputFrames, kCropSize, kCropSize}), norm_max);
  double vmax = 1e-9;
  for (const auto* t : {&g.input_mm, &g.truth_mm, &g.prediction_mm})
    for (double v : t->values()) vmax = std::max(vmax, v);
  auto field = [&](const Tensor<double>& t, double hi) {
    return render_field(std::vector<double>(t.values().begin(), t.values().end()), int(t.dim(0)), int(t.dim(1)), 0.0, hi, tile_scale);
  };
  std::vector<std::vector<Image>> rows{{field(g.input_mm, vmax), field(g.truth_mm, vmax), field(g.prediction_mm, vmax)}};
  std::vector<std::vector<std::string>> caps{{"input (mm)", "truth (mm)", "prediction (mm)"}};
  std::map<std::string, const GradCamResult*> by_site;
  for (const auto& h : g.heatmaps) by_site[h.layer] = &h;
  for (int d = 0; d < 5; ++d) {
    rows.emplace_back();
    caps.emplace_back();
    const std::string lvl = "d" + std::to_string(d);
    for (const std::string site : {"enc_map/" + lvl + "/dsc", "enc_map/" + lvl + "/cbam", "enc_mask/" + lvl + "/dsc",
                                   "enc_mask/" + lvl + "/cbam", "dec/" + lvl + "/dsc"}) {
      auto it = by_site.find(site);
      if (it == by_site.end()) {
        rows.back().push_back(Image(kCropSize * tile_scale, kCropSize * tile_scale));
        caps.back().push_back("");
        continue;
      }
      rows.back().push_back(field(it->second->heatmap, 1.0));
      caps.back().push_back(site);
    }
  }
  g.figure = tile_grid(rows, caps);
  return g;
}

inline nlohmann::json to_json(const GradCamResult& r, bool with_maps = false) {
  nlohmann::json j{{"layer", r.layer},
                   {"no_rain", r.no_rain},
                   {"rainy_pixels", r.rainy_pixels},
                   {"source_shape", r.raw.shape()},
                   {"weights", r.weights}};
  if (with_maps) j["heatmap"] = std::vector<double>(r.heatmap.values().begin(), r.heatmap.values().end());
  return j;
}

}  // namespace nowcast
