#pragma once

// Differentiable tensor operations on NCHW feature maps.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nowcast/autograd.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/random.hpp"

namespace nowcast::ops {

using kernels::idx;

namespace detail {
template <class T>
void require_nchw(const Var<T>& x, const char* what) {
  require_rank(x.shape(), 4, what);
}
}  // namespace detail

/// Dense 2-D convolution. weight: (Cout, Cin, k, k); bias: (Cout) or empty.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, idx stride, idx pad) {
  detail::require_nchw(x, "conv2d input");
  const Shape& ws = weight.shape();
  require_rank(ws, 4, "conv2d weight");
  const idx N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  if (ws[1] != C)
    throw ShapeError("conv2d: input has " + std::to_string(C) + " channels, weight expects " +
                     std::to_string(ws[1]));
  const idx Co = ws[0], k = ws[2];
  const kernels::ConvGeometry g{C, H, W, k, stride, pad};
  const idx Ho = g.out_height(), Wo = g.out_width();
  if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  const idx rows = C * k * k, cols = Ho * Wo;
  const bool has_bias = static_cast<bool>(bias);

  Tensor<T> out({N, Co, Ho, Wo});
  std::vector<T> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(rows * cols));
  for (idx n = 0; n < N; ++n) {
    const T* xin = x.value().data() + n * C * H * W;
    T* y = out.data() + n * Co * cols;
    if (has_bias)
      for (idx co = 0; co < Co; ++co) std::fill_n(y + co * cols, cols, bias.value()[co]);
    const T* colp = xin;
    if (!g.is_pointwise()) {
      kernels::im2col(g, xin, col.data());
      colp = col.data();
    }
    kernels::gemm_nn(Co, cols, rows, weight.value().data(), colp, y);
  }

  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result<T>(std::move(out), std::move(inputs), [=](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    const T* gy = self.grad.data();
    std::vector<T> colbuf(g.is_pointwise() ? 0 : static_cast<std::size_t>(rows * cols));
    std::vector<T> dcol(g.is_pointwise() ? 0 : static_cast<std::size_t>(rows * cols));
    for (idx n = 0; n < N; ++n) {
      const T* gyn = gy + n * Co * cols;
      const T* xin = xn.value.data() + n * C * H * W;
      if (wn.requires_grad) {
        const T* colp = xin;
        if (!g.is_pointwise()) {
          kernels::im2col(g, xin, colbuf.data());
          colp = colbuf.data();
        }
        kernels::gemm_nt(Co, rows, cols, gyn, colp, wn.grad_buffer().data());
      }
      if (xn.requires_grad) {
        T* dx = xn.grad_buffer().data() + n * C * H * W;
        if (g.is_pointwise()) {
          kernels::gemm_tn(rows, cols, Co, wn.value.data(), gyn, dx);
        } else {
          std::fill(dcol.begin(), dcol.end(), T{0});
          kernels::gemm_tn(rows, cols, Co, wn.value.data(), gyn, dcol.data());
          kernels::col2im(g, dcol.data(), dx);
        }
      }
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      T* db = self.inputs[2]->grad_buffer().data();
      for (idx n = 0; n < N; ++n)
        for (idx co = 0; co < Co; ++co) {
          T acc{0};
          const T* p = gy + (n * Co + co) * cols;
          for (idx j = 0; j < cols; ++j) acc += p[j];
          db[co] += acc;
        }
    }
  });
}

/// Per-channel kxk convolution with "same" padding. weight: (C, 1, k, k); bias: (C) or empty.
template <class T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  detail::require_nchw(x, "depthwise_conv2d input");
  const idx N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const Shape& ws = weight.shape();
  if (ws.size() != 4 || ws[0] != C || ws[1] != 1)
    throw ShapeError("depthwise_conv2d: weight " + to_string(ws) + " incompatible with " +
                     std::to_string(C) + " channels");
  const idx k = ws[2];
  const bool has_bias = static_cast<bool>(bias);
  Tensor<T> out({N, C, H, W});
  for (idx n = 0; n < N; ++n) {
    T* y = out.data() + n * C * H * W;
    if (has_bias)
      for (idx c = 0; c < C; ++c) std::fill_n(y + c * H * W, H * W, bias.value()[c]);
    kernels::depthwise_forward(C, H, W, k, x.value().data() + n * C * H * W, weight.value().data(), y);
  }
  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result<T>(std::move(out), std::move(inputs), [=](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    std::vector<T> scratch_dx(xn.requires_grad ? 0 : static_cast<std::size_t>(C * H * W));
    std::vector<T> scratch_dw(wn.requires_grad ? 0 : static_cast<std::size_t>(C * k * k));
    for (idx n = 0; n < N; ++n) {
      T* dx = xn.requires_grad ? xn.grad_buffer().data() + n * C * H * W : scratch_dx.data();
      T* dw = wn.requires_grad ? wn.grad_buffer().data() : scratch_dw.data();
      kernels::depthwise_backward(C, H, W, k, xn.value.data() + n * C * H * W, wn.value.data(),
                                  self.grad.data() + n * C * H * W, dx, dw);
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      T* db = self.inputs[2]->grad_buffer().data();
      for (idx n = 0; n < N; ++n)
        for (idx c = 0; c < C; ++c) {
          T acc{0};
          const T* p = self.grad.data() + (n * C + c) * H * W;
          for (idx j = 0; j < H * W; ++j) acc += p[j];
          db[c] += acc;
        }
    }
  });
}

/// Batch normalisation over (N, H, W). In training mode the batch statistics are used and the
/// running estimates updated with `momentum`; otherwise the running estimates are used.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum = T(0.1), T eps = T(1e-5)) {
  detail::require_nchw(x, "batch_norm input");
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  if (gamma.value().size() != static_cast<std::size_t>(C))
    throw ShapeError("batch_norm: channel mismatch");
  const idx count = N * HW;
  std::vector<T> mean(C), inv_std(C);
  const T* xv = x.value().data();
  for (idx c = 0; c < C; ++c) {
    if (training) {
      double s = 0;
      for (idx n = 0; n < N; ++n)
        for (idx j = 0; j < HW; ++j) s += xv[(n * C + c) * HW + j];
      const double m = s / static_cast<double>(count);
      double v = 0;
      for (idx n = 0; n < N; ++n)
        for (idx j = 0; j < HW; ++j) {
          const double d = xv[(n * C + c) * HW + j] - m;
          v += d * d;
        }
      v /= static_cast<double>(count);
      mean[c] = static_cast<T>(m);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
      const double unbiased = count > 1 ? v * static_cast<double>(count) / static_cast<double>(count - 1) : v;
      running_mean[c] = (T{1} - momentum) * running_mean[c] + momentum * static_cast<T>(m);
      running_var[c] = (T{1} - momentum) * running_var[c] + momentum * static_cast<T>(unbiased);
    } else {
      mean[c] = running_mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + static_cast<double>(eps)));
    }
  }
  Tensor<T> out(x.shape());
  Tensor<T> xhat(x.shape());
  for (idx n = 0; n < N; ++n)
    for (idx c = 0; c < C; ++c) {
      const T g = gamma.value()[c], b = beta.value()[c];
      for (idx j = 0; j < HW; ++j) {
        const idx i = (n * C + c) * HW + j;
        xhat[i] = (xv[i] - mean[c]) * inv_std[c];
        out[i] = g * xhat[i] + b;
      }
    }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [=, xhat = std::move(xhat)](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    const T* gy = self.grad.data();
    for (idx c = 0; c < C; ++c) {
      T sum_g{0}, sum_gx{0};
      for (idx n = 0; n < N; ++n)
        for (idx j = 0; j < HW; ++j) {
          const idx i = (n * C + c) * HW + j;
          sum_g += gy[i];
          sum_gx += gy[i] * xhat[i];
        }
      if (gn.requires_grad) gn.grad_buffer()[c] += sum_gx;
      if (bn.requires_grad) bn.grad_buffer()[c] += sum_g;
      if (!xn.requires_grad) continue;
      T* dx = xn.grad_buffer().data();
      const T scale = gn.value[c] * inv_std[c];
      if (training) {
        const T inv_count = T{1} / static_cast<T>(count);
        for (idx n = 0; n < N; ++n)
          for (idx j = 0; j < HW; ++j) {
            const idx i = (n * C + c) * HW + j;
            dx[i] += scale * (gy[i] - inv_count * sum_g - xhat[i] * inv_count * sum_gx);
          }
      } else {
        for (idx n = 0; n < N; ++n)
          for (idx j = 0; j < HW; ++j) {
            const idx i = (n * C + c) * HW + j;
            dx[i] += scale * gy[i];
          }
      }
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const auto& v = x.value();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > T{0} ? v[i] : T{0};
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& dx = xn.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xn.value[i] > T{0}) dx[i] += self.grad[i];
  });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const auto& v = x.value();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > T{0} ? v[i] : slope * v[i];
  return make_result<T>(std::move(out), {x}, [slope](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& dx = xn.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xn.value[i] > T{0} ? self.grad[i] : slope * self.grad[i];
  });
}

template <class T>
T sigmoid_scalar(T v) {
  return v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const auto& v = x.value();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T s = self.value[i];
      dx[i] += self.grad[i] * s * (T{1} - s);
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_shape(b.shape(), a.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& d = in->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

/// Σ coeffs[i] * terms[i] for equally shaped terms (typically scalar losses).
template <class T>
Var<T> linear_combination(const std::vector<Var<T>>& terms, const std::vector<T>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) throw ArgumentError("linear_combination: bad arguments");
  Tensor<T> out(terms.front().shape());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    require_shape(terms[t].shape(), out.shape(), "linear_combination");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[t] * terms[t].value()[i];
  }
  return make_result<T>(std::move(out), terms, [coeffs](Node<T>& self) {
    for (std::size_t t = 0; t < self.inputs.size(); ++t) {
      if (!self.inputs[t]->requires_grad) continue;
      auto& d = self.inputs[t]->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += coeffs[t] * self.grad[i];
    }
  });
}

/// 2x2 max pooling with stride 2. Requires even spatial size.
template <class T>
Var<T> max_pool2x2(const Var<T>& x) {
  detail::require_nchw(x, "max_pool2x2 input");
  const idx N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  if (H % 2 != 0 || W % 2 != 0)
    throw ShapeError("max_pool2x2: spatial size " + std::to_string(H) + "x" + std::to_string(W) + " is not even");
  const idx Ho = H / 2, Wo = W / 2;
  Tensor<T> out({N, C, Ho, Wo});
  std::vector<idx> argmax(out.size());
  const T* v = x.value().data();
  for (idx p = 0; p < N * C; ++p)
    for (idx oy = 0; oy < Ho; ++oy)
      for (idx ox = 0; ox < Wo; ++ox) {
        idx best = p * H * W + (2 * oy) * W + 2 * ox;
        for (idx dy = 0; dy < 2; ++dy)
          for (idx dx = 0; dx < 2; ++dx) {
            const idx i = p * H * W + (2 * oy + dy) * W + 2 * ox + dx;
            if (v[i] > v[best]) best = i;
          }
        const idx o = (p * Ho + oy) * Wo + ox;
        out[o] = v[best];
        argmax[o] = best;
      }
  return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += self.grad[o];
  });
}

/// Bilinear resize (align_corners=true) of every plane to out_h x out_w.
template <class T>
Var<T> upsample_bilinear(const Var<T>& x, idx out_h, idx out_w) {
  detail::require_nchw(x, "upsample_bilinear input");
  const idx N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  Tensor<T> out({N, C, out_h, out_w});
  for (idx p = 0; p < N * C; ++p)
    kernels::bilinear_forward(H, W, out_h, out_w, x.value().data() + p * H * W, out.data() + p * out_h * out_w);
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (idx p = 0; p < N * C; ++p)
      kernels::bilinear_backward(H, W, out_h, out_w, self.grad.data() + p * out_h * out_w, dx.data() + p * H * W);
  });
}

/// Inverted dropout: zeroes with probability p and rescales survivors by 1/(1-p).
template <class T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: probability must be in [0, 1)");
  if (p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> mask(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? T{0} : keep_scale;
    out[i] = x.value()[i] * mask[i];
  }
  return make_result<T>(std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * mask[i];
  });
}

/// Channel-wise concatenation of NCHW maps with equal N, H, W.
template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
  const Shape& s0 = parts.front().shape();
  require_rank(s0, 4, "concat_channels input");
  idx total = 0;
  std::vector<idx> offsets;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw ShapeError("concat_channels: " + to_string(s) + " incompatible with " + to_string(s0));
    offsets.push_back(total);
    total += s[1];
  }
  const idx N = s0[0], HW = s0[2] * s0[3];
  Tensor<T> out({N, total, s0[2], s0[3]});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const idx Ck = parts[k].shape()[1];
    for (idx n = 0; n < N; ++n)
      std::copy_n(parts[k].value().data() + n * Ck * HW, Ck * HW, out.data() + (n * total + offsets[k]) * HW);
  }
  return make_result<T>(std::move(out), parts, [=](Node<T>& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      const idx Ck = in.value.shape()[1];
      auto& d = in.grad_buffer();
      for (idx n = 0; n < N; ++n) {
        const T* src = self.grad.data() + (n * total + offsets[k]) * HW;
        T* dst = d.data() + n * Ck * HW;
        for (idx j = 0; j < Ck * HW; ++j) dst[j] += src[j];
      }
    }
  });
}

/// x (N,C,H,W) * gate (N,C,1,1).
template <class T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& gate) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  require_shape(gate.shape(), {N, C, 1, 1}, "scale_channels gate");
  Tensor<T> out(x.shape());
  for (idx p = 0; p < N * C; ++p)
    for (idx j = 0; j < HW; ++j) out[p * HW + j] = x.value()[p * HW + j] * gate.value()[p];
  return make_result<T>(std::move(out), {x, gate}, [=](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    for (idx p = 0; p < N * C; ++p) {
      T acc{0};
      for (idx j = 0; j < HW; ++j) acc += self.grad[p * HW + j] * xn.value[p * HW + j];
      if (gn.requires_grad) gn.grad_buffer()[p] += acc;
      if (xn.requires_grad) {
        auto& dx = xn.grad_buffer();
        for (idx j = 0; j < HW; ++j) dx[p * HW + j] += self.grad[p * HW + j] * gn.value[p];
      }
    }
  });
}

/// x (N,C,H,W) * gate (N,1,H,W).
template <class T>
Var<T> scale_spatial(const Var<T>& x, const Var<T>& gate) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  require_shape(gate.shape(), {N, 1, x.shape()[2], x.shape()[3]}, "scale_spatial gate");
  Tensor<T> out(x.shape());
  for (idx n = 0; n < N; ++n)
    for (idx c = 0; c < C; ++c)
      for (idx j = 0; j < HW; ++j) out[(n * C + c) * HW + j] = x.value()[(n * C + c) * HW + j] * gate.value()[n * HW + j];
  return make_result<T>(std::move(out), {x, gate}, [=](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    for (idx n = 0; n < N; ++n)
      for (idx c = 0; c < C; ++c)
        for (idx j = 0; j < HW; ++j) {
          const idx i = (n * C + c) * HW + j;
          if (gn.requires_grad) gn.grad_buffer()[n * HW + j] += self.grad[i] * xn.value[i];
          if (xn.requires_grad) xn.grad_buffer()[i] += self.grad[i] * gn.value[n * HW + j];
        }
  });
}

/// Spatial average per channel: (N,C,H,W) -> (N,C,1,1).
template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  Tensor<T> out({N, C, 1, 1});
  for (idx p = 0; p < N * C; ++p) {
    T acc{0};
    for (idx j = 0; j < HW; ++j) acc += x.value()[p * HW + j];
    out[p] = acc / static_cast<T>(HW);
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (idx p = 0; p < N * C; ++p) {
      const T g = self.grad[p] / static_cast<T>(HW);
      for (idx j = 0; j < HW; ++j) dx[p * HW + j] += g;
    }
  });
}

/// Spatial maximum per channel: (N,C,H,W) -> (N,C,1,1).
template <class T>
Var<T> global_max_pool(const Var<T>& x) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  Tensor<T> out({N, C, 1, 1});
  std::vector<idx> arg(static_cast<std::size_t>(N * C));
  for (idx p = 0; p < N * C; ++p) {
    idx best = p * HW;
    for (idx j = 1; j < HW; ++j)
      if (x.value()[p * HW + j] > x.value()[best]) best = p * HW + j;
    arg[p] = best;
    out[p] = x.value()[best];
  }
  return make_result<T>(std::move(out), {x}, [arg = std::move(arg)](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t p = 0; p < arg.size(); ++p) dx[arg[p]] += self.grad[p];
  });
}

/// Mean over channels: (N,C,H,W) -> (N,1,H,W).
template <class T>
Var<T> channel_mean(const Var<T>& x) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  Tensor<T> out({N, 1, x.shape()[2], x.shape()[3]});
  for (idx n = 0; n < N; ++n) {
    for (idx c = 0; c < C; ++c)
      for (idx j = 0; j < HW; ++j) out[n * HW + j] += x.value()[(n * C + c) * HW + j];
    for (idx j = 0; j < HW; ++j) out[n * HW + j] /= static_cast<T>(C);
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (idx n = 0; n < N; ++n)
      for (idx c = 0; c < C; ++c)
        for (idx j = 0; j < HW; ++j) dx[(n * C + c) * HW + j] += self.grad[n * HW + j] / static_cast<T>(C);
  });
}

/// Maximum over channels: (N,C,H,W) -> (N,1,H,W).
template <class T>
Var<T> channel_max(const Var<T>& x) {
  const idx N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  Tensor<T> out({N, 1, x.shape()[2], x.shape()[3]});
  std::vector<idx> arg(static_cast<std::size_t>(N * HW));
  for (idx n = 0; n < N; ++n)
    for (idx j = 0; j < HW; ++j) {
      idx best = n * C * HW + j;
      for (idx c = 1; c < C; ++c) {
        const idx i = (n * C + c) * HW + j;
        if (x.value()[i] > x.value()[best]) best = i;
      }
      arg[n * HW + j] = best;
      out[n * HW + j] = x.value()[best];
    }
  return make_result<T>(std::move(out), {x}, [arg = std::move(arg)](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t p = 0; p < arg.size(); ++p) dx[arg[p]] += self.grad[p];
  });
}

}  // namespace nowcast::ops
