#pragma once

// SmaAt-UNet (one encoder), SmaAt-GNet (map + mask encoders sharing one decoder),
// the log-variance head variant, and the persistence baseline.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/layers.hpp"

namespace nowcast {

struct GeneratorConfig {
  int in_frames = 12;
  int mask_channels = 25;
  int out_frames = 12;
  std::vector<int> encoder_widths{64, 128, 256, 512, 512};
  std::vector<int> decoder_widths{256, 128, 64, 64};
  double dropout_p = 0.5;
  bool dual_encoder = true;
  bool aleatoric_head = false;
  double width_scale = 1.0;
  int cbam_reduction = 16;
  int cbam_spatial_kernel = 7;
  std::uint64_t seed = 0;

  static int scaled(int width, double scale) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(width) * scale)));
  }
  std::vector<int> scaled_encoder() const {
    std::vector<int> w;
    for (int v : encoder_widths) w.push_back(scaled(v, width_scale));
    return w;
  }
  std::vector<int> scaled_decoder() const {
    std::vector<int> w;
    for (int v : decoder_widths) w.push_back(scaled(v, width_scale));
    return w;
  }

  void validate() const {
    if (encoder_widths.size() != 5) throw ConfigError("encoder_widths needs 5 levels", "encoder_widths");
    if (decoder_widths.size() != 4) throw ConfigError("decoder_widths needs 4 levels", "decoder_widths");
    for (int w : encoder_widths)
      if (w <= 0) throw ConfigError("encoder widths must be positive", "encoder_widths");
    for (int w : decoder_widths)
      if (w <= 0) throw ConfigError("decoder widths must be positive", "decoder_widths");
    if (out_frames != 12) throw ConfigError("out_frames must be 12", "out_frames");
    if (in_frames < 1) throw ConfigError("in_frames must be positive", "in_frames");
    if (mask_channels < 1) throw ConfigError("mask_channels must be positive", "mask_channels");
    if (!(width_scale > 0.0)) throw ConfigError("width_scale must be positive", "width_scale");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must be in [0,1)", "dropout_p");
    for (int w : scaled_encoder())
      if (w < cbam_reduction)
        throw ConfigError("scaled encoder width " + std::to_string(w) + " is below cbam_reduction", "width_scale");
  }
};

template <class T>
struct GeneratorOutput {
  Var<T> y_hat;    // (N,12,H,W), linear output
  Var<T> log_var;  // (N,12,H,W) when the log-variance head is present
};

/// Five-level encoder; every level ends in CBAM, whose output is the level's feature map.
template <class T>
class Encoder {
 public:
  static constexpr int kLevels = 5;

  Encoder() = default;
  Encoder(int in_channels, const std::vector<int>& widths, int reduction, int spatial_kernel, Rng& rng) {
    for (int d = 0; d < kLevels; ++d) {
      BlockConfig cfg{d == 0 ? in_channels : widths[d - 1], widths[d], reduction, spatial_kernel, 3};
      if (d == 0)
        first_ = DoubleDsc<T>(cfg, rng);
      else
        downs_[d - 1] = Down<T>(cfg, rng);
      cbams_[d] = Cbam<T>(widths[d], reduction, spatial_kernel, rng);
    }
  }

  /// Returns the CBAM outputs of levels 0..4 (full to 1/16 resolution).
  std::array<Var<T>, kLevels> forward(const Var<T>& x, const ForwardContext<T>& ctx, const std::string& name) {
    std::array<Var<T>, kLevels> levels;
    Var<T> h = x;
    for (int d = 0; d < kLevels; ++d) {
      const std::string site = name + "/d" + std::to_string(d);
      if (d == 0) {
        h = first_.forward(h, ctx);
        ctx.tap(site + "/dsc", h);
      } else {
        h = downs_[d - 1].forward(h, ctx, site + "/dsc");
      }
      h = cbams_[d].forward(h);
      ctx.tap(site + "/cbam", h);
      levels[d] = h;
    }
    return levels;
  }

  void collect(const std::string& prefix, ModuleState<T>& st) {
    first_.collect(prefix + "d0.dsc.", st);
    for (int d = 1; d < kLevels; ++d) downs_[d - 1].collect(prefix + "d" + std::to_string(d) + ".dsc.", st);
    for (int d = 0; d < kLevels; ++d) cbams_[d].collect(prefix + "d" + std::to_string(d) + ".cbam.", st);
  }

  DoubleDsc<T>& first_block() { return first_; }
  Down<T>& down(int d) { return downs_.at(d - 1); }
  Cbam<T>& cbam(int d) { return cbams_.at(d); }

 private:
  DoubleDsc<T> first_;
  std::array<Down<T>, kLevels - 1> downs_;
  std::array<Cbam<T>, kLevels> cbams_;
};

/// Encoder-decoder nowcasting network. With dual_encoder the map and mask encoders'
/// level outputs are channel-concatenated before feeding skips and the shared decoder.
template <class T>
class SmaAtNet {
 public:
  explicit SmaAtNet(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const auto enc = cfg_.scaled_encoder();
    const auto dec = cfg_.scaled_decoder();
    map_encoder_ = Encoder<T>(cfg_.in_frames, enc, cfg_.cbam_reduction, cfg_.cbam_spatial_kernel, rng);
    if (cfg_.dual_encoder)
      mask_encoder_ = Encoder<T>(cfg_.mask_channels, enc, cfg_.cbam_reduction, cfg_.cbam_spatial_kernel, rng);
    const int mult = cfg_.dual_encoder ? 2 : 1;
    int below = mult * enc[4];
    for (int u = 0; u < 4; ++u) {
      const int skip = mult * enc[3 - u];
      ups_[u] = Up<T>(BlockConfig{below + skip, dec[u], cfg_.cbam_reduction, cfg_.cbam_spatial_kernel, 3}, rng);
      up_in_channels_[u] = below + skip;
      below = dec[u];
    }
    head_ = Conv2d<T>(dec[3], cfg_.out_frames, 1, 1, 0, rng);
    if (cfg_.aleatoric_head) log_var_head_ = Conv2d<T>(dec[3], cfg_.out_frames, 1, 1, 0, rng);
  }

  const GeneratorConfig& config() const { return cfg_; }
  bool uses_masks() const { return cfg_.dual_encoder; }
  bool has_log_var() const { return cfg_.aleatoric_head; }

  /// Channels entering the decoder from the deepest level.
  int bottleneck_channels() const { return (cfg_.dual_encoder ? 2 : 1) * cfg_.scaled_encoder()[4]; }
  /// Channels of the skip connection at encoder level d.
  int skip_channels(int d) const { return (cfg_.dual_encoder ? 2 : 1) * cfg_.scaled_encoder().at(d); }
  /// Concatenated channel count entering decoder block u (0 = deepest).
  int up_input_channels(int u) const { return up_in_channels_.at(u); }

  GeneratorOutput<T> forward(const Var<T>& x, const Var<T>* m, const ForwardContext<T>& ctx) {
    require_rank(x.shape(), 4, "generator input");
    if (x.shape()[1] != cfg_.in_frames)
      throw ShapeError("generator: expected " + std::to_string(cfg_.in_frames) + " input frames, got " +
                       to_string(x.shape()));
    if (x.shape()[2] % 16 != 0 || x.shape()[3] % 16 != 0)
      throw ShapeError("generator: spatial size must be divisible by 16, got " + to_string(x.shape()));
    if (cfg_.dual_encoder && (m == nullptr || !*m))
      throw ArgumentError("dual-encoder generator requires the mask stack m");
    if (ctx.stochastic && !ctx.rng) throw ArgumentError("stochastic forward requires a random stream");

    auto map_levels = map_encoder_.forward(x, ctx, "enc_map");
    std::array<Var<T>, 5> levels = map_levels;
    if (cfg_.dual_encoder) {
      require_shape(m->shape(), {x.shape()[0], cfg_.mask_channels, x.shape()[2], x.shape()[3]}, "generator mask");
      auto mask_levels = mask_encoder_.forward(*m, ctx, "enc_mask");
      for (int d = 0; d < 5; ++d) levels[d] = ops::concat_channels<T>({map_levels[d], mask_levels[d]});
    }
    Var<T> h = levels[4];
    for (int u = 0; u < 4; ++u) {
      const double p = u < 2 ? cfg_.dropout_p : 0.0;
      h = ups_[u].forward(h, levels[3 - u], ctx, p, "dec/d" + std::to_string(3 - u) + "/dsc");
    }
    GeneratorOutput<T> out;
    out.y_hat = head_.forward(h);
    if (cfg_.aleatoric_head) out.log_var = log_var_head_.forward(h);
    return out;
  }

  GeneratorOutput<T> forward(const Tensor<T>& x, const Tensor<T>* m, const ForwardContext<T>& ctx) {
    auto xv = leaf(x);
    if (m) {
      auto mv = leaf(*m);
      return forward(xv, &mv, ctx);
    }
    return forward(xv, nullptr, ctx);
  }

  ModuleState<T> state() {
    ModuleState<T> st;
    map_encoder_.collect("enc_map.", st);
    if (cfg_.dual_encoder) mask_encoder_.collect("enc_mask.", st);
    for (int u = 0; u < 4; ++u) ups_[u].collect("dec.up" + std::to_string(u + 1) + ".", st);
    head_.collect("head.", st);
    if (cfg_.aleatoric_head) log_var_head_.collect("log_var_head.", st);
    return st;
  }

  /// Every Grad-CAM activation site this model records.
  std::vector<std::string> activation_sites() const {
    std::vector<std::string> sites;
    std::vector<std::string> encoders{"enc_map"};
    if (cfg_.dual_encoder) encoders.push_back("enc_mask");
    for (int d = 0; d < 5; ++d)
      for (const auto& e : encoders)
        for (const char* kind : {"dsc", "cbam"}) sites.push_back(e + "/d" + std::to_string(d) + "/" + kind);
    for (int d = 3; d >= 0; --d) sites.push_back("dec/d" + std::to_string(d) + "/dsc");
    return sites;
  }

  Encoder<T>& map_encoder() { return map_encoder_; }
  Encoder<T>& mask_encoder() { return mask_encoder_; }
  Up<T>& up(int u) { return ups_.at(u); }
  Conv2d<T>& head() { return head_; }
  Conv2d<T>& log_var_head() { return log_var_head_; }

 private:
  GeneratorConfig cfg_;
  Encoder<T> map_encoder_;
  Encoder<T> mask_encoder_;
  std::array<Up<T>, 4> ups_;
  std::array<int, 4> up_in_channels_{};
  Conv2d<T> head_;
  Conv2d<T> log_var_head_;
};

template <class T>
SmaAtNet<T> build_smaat_gnet(GeneratorConfig cfg) {
  if (!cfg.dual_encoder) throw ConfigError("SmaAt-GNet requires dual_encoder = true", "dual_encoder");
  return SmaAtNet<T>(std::move(cfg));
}

template <class T>
SmaAtNet<T> build_smaat_unet(GeneratorConfig cfg) {
  if (cfg.dual_encoder) throw ConfigError("SmaAt-UNet requires dual_encoder = false", "dual_encoder");
  if (cfg.aleatoric_head) throw ConfigError("the log-variance head is defined for SmaAt-GNet only", "aleatoric_head");
  return SmaAtNet<T>(std::move(cfg));
}

/// Repeats the last input frame for every lead time. x: (N,F,H,W) or (F,H,W).
template <class T>
Tensor<T> persistence_predict(const Tensor<T>& x, int out_frames = 12) {
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3) throw ShapeError("persistence: expected (N,F,H,W) or (F,H,W), got " + to_string(x.shape()));
  const std::int64_t N = batched ? x.dim(0) : 1;
  const std::int64_t F = x.dim(batched ? 1 : 0);
  const std::int64_t HW = x.dim(batched ? 2 : 1) * x.dim(batched ? 3 : 2);
  Shape out_shape = x.shape();
  out_shape[batched ? 1 : 0] = out_frames;
  Tensor<T> out(out_shape);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* last = x.data() + (n * F + F - 1) * HW;
    for (int t = 0; t < out_frames; ++t) std::copy_n(last, HW, out.data() + (n * out_frames + t) * HW);
  }
  return out;
}

}  // namespace nowcast
