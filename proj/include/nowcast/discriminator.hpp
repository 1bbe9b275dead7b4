#pragma once

#include <array>
#include <string>
#include <vector>

#include "nowcast/layers.hpp"

namespace nowcast {

struct DiscriminatorConfig {
  int in_channels = 24;  // 12 input frames + 12 candidate target frames
  std::vector<int> stage_widths{64, 128, 256, 512};
  double leaky_slope = 0.2;
  int cbam_reduction = 16;
  int cbam_spatial_kernel = 7;
  int input_size = 64;
  double width_scale = 1.0;
  std::uint64_t seed = 1;

  std::vector<int> scaled_widths() const {
    std::vector<int> w;
    for (int v : stage_widths) w.push_back(std::max(1, static_cast<int>(std::lround(v * width_scale))));
    return w;
  }

  void validate() const {
    if (input_size != 64)
      throw ConfigError("discriminator input must be 64x64 (four stride-2 stages to a 4x4 grid)", "input_size");
    if (stage_widths.size() != 4) throw ConfigError("discriminator needs four stages", "stage_widths");
    if (in_channels < 2 || in_channels % 2 != 0) throw ConfigError("in_channels must be 2 x frames", "in_channels");
    if (!(width_scale > 0.0)) throw ConfigError("width_scale must be positive", "width_scale");
    for (int w : scaled_widths())
      if (w < cbam_reduction)
        throw ConfigError("scaled stage width " + std::to_string(w) + " is below cbam_reduction", "width_scale");
  }
};

/// Attention-augmented PatchGAN. Each stage: 4x4/2 conv -> [BN] -> LeakyReLU -> CBAM ->
/// 3x3/1 conv -> BN -> LeakyReLU -> CBAM (no BN after the very first convolution).
/// A 3x3 convolution and sigmoid produce the 4x4 patch probabilities.
template <class T>
class PatchDiscriminator {
 public:
  static constexpr int kStages = 4;

  explicit PatchDiscriminator(DiscriminatorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const auto widths = cfg_.scaled_widths();
    int in = cfg_.in_channels;
    for (int k = 0; k < kStages; ++k) {
      auto& s = stages_[k];
      s.down = Conv2d<T>(in, widths[k], 4, 2, 1, rng);
      if (k > 0) s.bn_down = BatchNorm2d<T>(widths[k]);
      s.cbam_down = Cbam<T>(widths[k], cfg_.cbam_reduction, cfg_.cbam_spatial_kernel, rng);
      s.refine = Conv2d<T>(widths[k], widths[k], 3, 1, 1, rng);
      s.bn_refine = BatchNorm2d<T>(widths[k]);
      s.cbam_refine = Cbam<T>(widths[k], cfg_.cbam_reduction, cfg_.cbam_spatial_kernel, rng);
      in = widths[k];
    }
    head_ = Conv2d<T>(in, 1, 3, 1, 1, rng);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  /// x and candidate: (N,12,64,64). Returns (N,1,4,4) probabilities.
  Var<T> forward(const Var<T>& x, const Var<T>& candidate, const ForwardContext<T>& ctx,
                 std::vector<Shape>* trace = nullptr) {
    require_rank(x.shape(), 4, "discriminator input");
    require_shape(candidate.shape(), x.shape(), "discriminator candidate");
    if (x.shape()[1] + candidate.shape()[1] != cfg_.in_channels)
      throw ShapeError("discriminator: expected " + std::to_string(cfg_.in_channels) + " stacked channels");
    if (x.shape()[2] != cfg_.input_size || x.shape()[3] != cfg_.input_size)
      throw ShapeError("discriminator: expected 64x64 input, got " + to_string(x.shape()));
    Var<T> h = ops::concat_channels<T>({x, candidate});
    if (trace) trace->push_back(h.shape());
    for (int k = 0; k < kStages; ++k) {
      h = stage_forward(k, h, ctx);
      if (trace) trace->push_back(h.shape());
    }
    return head_forward(h);
  }

  /// One stage: halves the spatial size.
  Var<T> stage_forward(int k, const Var<T>& in, const ForwardContext<T>& ctx) {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    auto& s = stages_.at(k);
    Var<T> h = s.down.forward(in);
    if (k > 0) h = s.bn_down.forward(h, ctx);
    h = s.cbam_down.forward(ops::leaky_relu(h, slope));
    return s.cbam_refine.forward(ops::leaky_relu(s.bn_refine.forward(s.refine.forward(h), ctx), slope));
  }

  Var<T> head_forward(const Var<T>& h) const { return ops::sigmoid(head_.forward(h)); }

  Var<T> forward(const Tensor<T>& x, const Tensor<T>& candidate, const ForwardContext<T>& ctx) {
    return forward(leaf(x), leaf(candidate), ctx);
  }

  ModuleState<T> state() {
    ModuleState<T> st;
    for (int k = 0; k < kStages; ++k) {
      auto& s = stages_[k];
      const std::string p = "stage" + std::to_string(k + 1) + ".";
      s.down.collect(p + "down.", st);
      if (k > 0) s.bn_down.collect(p + "bn_down.", st);
      s.cbam_down.collect(p + "cbam_down.", st);
      s.refine.collect(p + "refine.", st);
      s.bn_refine.collect(p + "bn_refine.", st);
      s.cbam_refine.collect(p + "cbam_refine.", st);
    }
    head_.collect("head.", st);
    return st;
  }

  int cbam_count() const { return 2 * kStages; }
  Conv2d<T>& head() { return head_; }

 private:
  struct Stage {
    Conv2d<T> down;
    BatchNorm2d<T> bn_down;
    Cbam<T> cbam_down;
    Conv2d<T> refine;
    BatchNorm2d<T> bn_refine;
    Cbam<T> cbam_refine;
  };
  DiscriminatorConfig cfg_;
  std::array<Stage, kStages> stages_;
  Conv2d<T> head_;
};

template <class T>
PatchDiscriminator<T> build_discriminator(DiscriminatorConfig cfg) {
  return PatchDiscriminator<T>(std::move(cfg));
}

}  // namespace nowcast
