#pragma once

// Network building blocks: depthwise-separable convolutions, double-DSC blocks,
// CBAM attention, and the down/up blocks of the encoder-decoder.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nowcast/ops.hpp"

namespace nowcast {

template <class T>
struct ParamRef {
  std::string name;
  Var<T> var;
};

template <class T>
struct BufferRef {
  std::string name;
  Tensor<T>* tensor;
};

/// Named views of every trainable parameter and persistent buffer of a module tree.
template <class T>
struct ModuleState {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var.value().size();
    return n;
  }
  void zero_grad() {
    for (auto& p : params) p.var.zero_grad();
  }
};

/// Named activations recorded during a forward pass (Grad-CAM sites).
template <class T>
using ActivationTaps = std::map<std::string, Var<T>>;

template <class T>
struct ForwardContext {
  bool training = false;    // batch statistics in batch norm, running estimates updated
  bool stochastic = false;  // dropout layers active
  Rng* rng = nullptr;       // required when stochastic
  ActivationTaps<T>* taps = nullptr;

  void tap(const std::string& site, const Var<T>& v) const {
    if (taps) (*taps)[site] = v;
  }
};

struct BlockConfig {
  int in_channels = 1;
  int out_channels = 1;
  int cbam_reduction = 16;
  int cbam_spatial_kernel = 7;
  int kernel = 3;

  void validate() const {
    if (in_channels < 1 || out_channels < 1) throw ConfigError("block channels must be >= 1");
    if (cbam_reduction < 1) throw ConfigError("cbam_reduction must be >= 1", "cbam_reduction");
    if (cbam_spatial_kernel < 1 || cbam_spatial_kernel % 2 == 0)
      throw ConfigError("cbam_spatial_kernel must be odd", "cbam_spatial_kernel");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd", "kernel");
  }
};

namespace detail {
template <class T>
Var<T> uniform_param(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return leaf(std::move(t), true);
}
}  // namespace detail

/// Dense convolution with bias; uniform(±1/sqrt(fan_in)) initialisation.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, Rng& rng, bool with_bias = true)
      : stride_(stride), pad_(pad) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
    weight_ = detail::uniform_param<T>({out, in, kernel, kernel}, bound, rng);
    if (with_bias) bias_ = detail::uniform_param<T>({out}, bound, rng);
  }

  Var<T> forward(const Var<T>& x) const { return ops::conv2d(x, weight_, bias_, stride_, pad_); }

  void collect(const std::string& prefix, ModuleState<T>& st) const {
    st.params.push_back({prefix + "weight", weight_});
    if (bias_) st.params.push_back({prefix + "bias", bias_});
  }

  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }
  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }
  int in_channels() const { return static_cast<int>(weight_.shape()[1]); }
  int out_channels() const { return static_cast<int>(weight_.shape()[0]); }

 private:
  Var<T> weight_, bias_;
  int stride_ = 1, pad_ = 0;
};

/// Depthwise kxk ("same" padding) followed by pointwise 1x1.
template <class T>
class DepthwiseSeparableConv {
 public:
  DepthwiseSeparableConv() = default;
  DepthwiseSeparableConv(int in, int out, int kernel, Rng& rng) : in_(in), out_(out) {
    const double dw_bound = 1.0 / static_cast<double>(kernel);
    depthwise_w_ = detail::uniform_param<T>({in, 1, kernel, kernel}, dw_bound, rng);
    depthwise_b_ = detail::uniform_param<T>({in}, dw_bound, rng);
    pointwise_ = Conv2d<T>(in, out, 1, 1, 0, rng);
  }

  Var<T> forward(const Var<T>& x) const {
    if (x.shape().size() != 4 || x.shape()[1] != in_)
      throw ShapeError("dsc: expected " + std::to_string(in_) + " input channels, got " + to_string(x.shape()));
    return pointwise_.forward(ops::depthwise_conv2d(x, depthwise_w_, depthwise_b_));
  }

  void collect(const std::string& prefix, ModuleState<T>& st) const {
    st.params.push_back({prefix + "depthwise.weight", depthwise_w_});
    st.params.push_back({prefix + "depthwise.bias", depthwise_b_});
    pointwise_.collect(prefix + "pointwise.", st);
  }

  /// Weights excluding biases: in*k*k + in*out.
  std::size_t weight_count() const { return depthwise_w_.value().size() + pointwise_.weight().value().size(); }

  Var<T>& depthwise_weight() { return depthwise_w_; }
  Var<T>& depthwise_bias() { return depthwise_b_; }
  Conv2d<T>& pointwise() { return pointwise_; }

 private:
  int in_ = 0, out_ = 0;
  Var<T> depthwise_w_, depthwise_b_;
  Conv2d<T> pointwise_;
};

template <class T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels)
      : gamma_(leaf(Tensor<T>({channels}, T{1}), true)),
        beta_(leaf(Tensor<T>({channels}, T{0}), true)),
        running_mean_({channels}, T{0}),
        running_var_({channels}, T{1}) {}

  Var<T> forward(const Var<T>& x, const ForwardContext<T>& ctx) {
    return ops::batch_norm(x, gamma_, beta_, running_mean_, running_var_, ctx.training);
  }

  void collect(const std::string& prefix, ModuleState<T>& st) {
    st.params.push_back({prefix + "gamma", gamma_});
    st.params.push_back({prefix + "beta", beta_});
    st.buffers.push_back({prefix + "running_mean", &running_mean_});
    st.buffers.push_back({prefix + "running_var", &running_var_});
  }

  Var<T>& gamma() { return gamma_; }
  Var<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  Var<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
};

/// (DSC -> BN -> ReLU) twice; in->out then out->out.
template <class T>
class DoubleDsc {
 public:
  DoubleDsc() = default;
  DoubleDsc(const BlockConfig& cfg, Rng& rng)
      : first_(cfg.in_channels, cfg.out_channels, cfg.kernel, rng),
        bn1_(cfg.out_channels),
        second_(cfg.out_channels, cfg.out_channels, cfg.kernel, rng),
        bn2_(cfg.out_channels) {
    cfg.validate();
  }

  Var<T> forward(const Var<T>& x, const ForwardContext<T>& ctx) {
    auto h = ops::relu(bn1_.forward(first_.forward(x), ctx));
    return ops::relu(bn2_.forward(second_.forward(h), ctx));
  }

  void collect(const std::string& prefix, ModuleState<T>& st) {
    first_.collect(prefix + "dsc1.", st);
    bn1_.collect(prefix + "bn1.", st);
    second_.collect(prefix + "dsc2.", st);
    bn2_.collect(prefix + "bn2.", st);
  }

  DepthwiseSeparableConv<T>& first() { return first_; }
  DepthwiseSeparableConv<T>& second() { return second_; }
  BatchNorm2d<T>& bn1() { return bn1_; }
  BatchNorm2d<T>& bn2() { return bn2_; }

 private:
  DepthwiseSeparableConv<T> first_;
  BatchNorm2d<T> bn1_;
  DepthwiseSeparableConv<T> second_;
  BatchNorm2d<T> bn2_;
};

template <class T>
struct CbamOutput {
  Var<T> out;
  Var<T> channel_gate;  // (N,C,1,1)
  Var<T> spatial_gate;  // (N,1,H,W)
};

/// Convolutional block attention: channel gate from a shared MLP over average- and
/// max-pooled descriptors, then a spatial gate from a kxk convolution over the
/// channel-wise mean and max maps.
template <class T>
class Cbam {
 public:
  Cbam() = default;
  Cbam(int channels, int reduction, int spatial_kernel, Rng& rng) : channels_(channels) {
    if (reduction < 1 || channels < reduction)
      throw ConfigError("cbam: channels (" + std::to_string(channels) + ") must be >= reduction (" +
                            std::to_string(reduction) + ")",
                        "cbam_reduction");
    if (spatial_kernel % 2 == 0) throw ConfigError("cbam: spatial kernel must be odd", "cbam_spatial_kernel");
    const int hidden = channels / reduction;
    mlp_in_ = Conv2d<T>(channels, hidden, 1, 1, 0, rng);
    mlp_out_ = Conv2d<T>(hidden, channels, 1, 1, 0, rng);
    spatial_ = Conv2d<T>(2, 1, spatial_kernel, 1, spatial_kernel / 2, rng);
  }

  CbamOutput<T> forward_detailed(const Var<T>& x) const {
    if (x.shape().size() != 4 || x.shape()[1] != channels_)
      throw ShapeError("cbam: expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
    auto mlp = [&](const Var<T>& v) { return mlp_out_.forward(ops::relu(mlp_in_.forward(v))); };
    auto channel_gate = ops::sigmoid(ops::add(mlp(ops::global_avg_pool(x)), mlp(ops::global_max_pool(x))));
    auto refined = ops::scale_channels(x, channel_gate);
    auto pooled = ops::concat_channels<T>({ops::channel_mean(refined), ops::channel_max(refined)});
    auto spatial_gate = ops::sigmoid(spatial_.forward(pooled));
    return {ops::scale_spatial(refined, spatial_gate), channel_gate, spatial_gate};
  }

  Var<T> forward(const Var<T>& x) const { return forward_detailed(x).out; }

  void collect(const std::string& prefix, ModuleState<T>& st) const {
    mlp_in_.collect(prefix + "mlp1.", st);
    mlp_out_.collect(prefix + "mlp2.", st);
    spatial_.collect(prefix + "spatial.", st);
  }

  Conv2d<T>& mlp_in() { return mlp_in_; }
  Conv2d<T>& mlp_out() { return mlp_out_; }
  Conv2d<T>& spatial() { return spatial_; }

 private:
  int channels_ = 0;
  Conv2d<T> mlp_in_, mlp_out_, spatial_;
};

/// 2x2 max-pool followed by a double-DSC block.
template <class T>
class Down {
 public:
  Down() = default;
  Down(const BlockConfig& cfg, Rng& rng) : block_(cfg, rng) {}

  Var<T> forward(const Var<T>& x, const ForwardContext<T>& ctx, const std::string& site = {}) {
    auto h = block_.forward(ops::max_pool2x2(x), ctx);
    if (!site.empty()) ctx.tap(site, h);
    return h;
  }

  void collect(const std::string& prefix, ModuleState<T>& st) { block_.collect(prefix, st); }
  DoubleDsc<T>& block() { return block_; }

 private:
  DoubleDsc<T> block_;
};

/// Bilinear x2 upsampling, optional dropout, concatenation with the skip map, double-DSC.
/// cfg.in_channels is the channel count after concatenation.
template <class T>
class Up {
 public:
  Up() = default;
  Up(const BlockConfig& cfg, Rng& rng) : in_channels_(cfg.in_channels), block_(cfg, rng) {}

  Var<T> forward(const Var<T>& x, const Var<T>& skip, const ForwardContext<T>& ctx, double dropout_p,
                 const std::string& site = {}) {
    require_rank(x.shape(), 4, "up input");
    require_rank(skip.shape(), 4, "up skip");
    const auto h = x.shape()[2], w = x.shape()[3];
    if (skip.shape()[2] != 2 * h || skip.shape()[3] != 2 * w || skip.shape()[0] != x.shape()[0])
      throw ShapeError("up: skip " + to_string(skip.shape()) + " is not twice the size of " + to_string(x.shape()));
    if (x.shape()[1] + skip.shape()[1] != in_channels_)
      throw ShapeError("up: concatenated channels " + std::to_string(x.shape()[1] + skip.shape()[1]) +
                       " != block input " + std::to_string(in_channels_));
    auto upsampled = ops::upsample_bilinear(x, 2 * h, 2 * w);
    if (ctx.stochastic && dropout_p > 0.0) {
      if (!ctx.rng) throw ArgumentError("stochastic forward requires a random stream");
      upsampled = ops::dropout(upsampled, dropout_p, *ctx.rng);
    }
    auto out = block_.forward(ops::concat_channels<T>({upsampled, skip}), ctx);
    if (!site.empty()) ctx.tap(site, out);
    return out;
  }

  void collect(const std::string& prefix, ModuleState<T>& st) { block_.collect(prefix, st); }
  DoubleDsc<T>& block() { return block_; }

 private:
  std::int64_t in_channels_ = 0;
  DoubleDsc<T> block_;
};

}  // namespace nowcast
