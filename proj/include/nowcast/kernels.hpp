#pragma once

// Plain CPU kernels used by the differentiable ops. All matrices are row-major.

#include <algorithm>
#include <cstdint>

namespace nowcast::kernels {

using idx = std::int64_t;

/// C[MxN] += A[MxK] * B[KxN]
template <class T>
void gemm_nn(idx M, idx N, idx K, const T* __restrict A, const T* __restrict B, T* __restrict C) {
  for (idx i = 0; i < M; ++i) {
    T* __restrict c = C + i * N;
    for (idx k = 0; k < K; ++k) {
      const T a = A[i * K + k];
      if (a == T{0}) continue;
      const T* __restrict b = B + k * N;
#pragma omp simd
      for (idx j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

/// C[MxN] += A[MxK] * B[NxK]^T
template <class T>
void gemm_nt(idx M, idx N, idx K, const T* __restrict A, const T* __restrict B, T* __restrict C) {
  for (idx i = 0; i < M; ++i) {
    const T* __restrict a = A + i * K;
    for (idx j = 0; j < N; ++j) {
      const T* __restrict b = B + j * K;
      T acc{0};
#pragma omp simd reduction(+ : acc)
      for (idx k = 0; k < K; ++k) acc += a[k] * b[k];
      C[i * N + j] += acc;
    }
  }
}

/// C[MxN] += A[KxM]^T * B[KxN]
template <class T>
void gemm_tn(idx M, idx N, idx K, const T* __restrict A, const T* __restrict B, T* __restrict C) {
  for (idx k = 0; k < K; ++k) {
    const T* __restrict b = B + k * N;
    for (idx i = 0; i < M; ++i) {
      const T a = A[k * M + i];
      if (a == T{0}) continue;
      T* __restrict c = C + i * N;
#pragma omp simd
      for (idx j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

struct ConvGeometry {
  idx channels, height, width;
  idx kernel, stride, pad;
  idx out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  idx out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

/// Unfolds one CxHxW image into a (C*k*k) x (Ho*Wo) column matrix.
template <class T>
void im2col(const ConvGeometry& g, const T* __restrict image, T* __restrict col) {
  const idx ho = g.out_height(), wo = g.out_width();
  for (idx c = 0; c < g.channels; ++c)
    for (idx ky = 0; ky < g.kernel; ++ky)
      for (idx kx = 0; kx < g.kernel; ++kx) {
        T* __restrict row = col + ((c * g.kernel + ky) * g.kernel + kx) * ho * wo;
        for (idx oy = 0; oy < ho; ++oy) {
          const idx iy = oy * g.stride - g.pad + ky;
          T* __restrict out = row + oy * wo;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(out, wo, T{0});
            continue;
          }
          const T* __restrict in = image + (c * g.height + iy) * g.width;
          for (idx ox = 0; ox < wo; ++ox) {
            const idx ix = ox * g.stride - g.pad + kx;
            out[ox] = (ix >= 0 && ix < g.width) ? in[ix] : T{0};
          }
        }
      }
}

/// Adjoint of im2col: scatters-and-adds a column matrix back into an image.
template <class T>
void col2im(const ConvGeometry& g, const T* __restrict col, T* __restrict image) {
  const idx ho = g.out_height(), wo = g.out_width();
  for (idx c = 0; c < g.channels; ++c)
    for (idx ky = 0; ky < g.kernel; ++ky)
      for (idx kx = 0; kx < g.kernel; ++kx) {
        const T* __restrict row = col + ((c * g.kernel + ky) * g.kernel + kx) * ho * wo;
        for (idx oy = 0; oy < ho; ++oy) {
          const idx iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* __restrict out = image + (c * g.height + iy) * g.width;
          const T* __restrict in = row + oy * wo;
          for (idx ox = 0; ox < wo; ++ox) {
            const idx ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) out[ix] += in[ox];
          }
        }
      }
}

/// Per-channel kxk convolution, stride 1, "same" padding, one image.
template <class T>
void depthwise_forward(idx C, idx H, idx W, idx k, const T* __restrict x, const T* __restrict weight,
                       T* __restrict y) {
  const idx pad = k / 2;
  for (idx c = 0; c < C; ++c) {
    const T* __restrict xc = x + c * H * W;
    const T* __restrict wc = weight + c * k * k;
    T* __restrict yc = y + c * H * W;
    for (idx ky = 0; ky < k; ++ky)
      for (idx kx = 0; kx < k; ++kx) {
        const T w = wc[ky * k + kx];
        const idx dy = ky - pad, dx = kx - pad;
        const idx x0 = std::max<idx>(0, -dx), x1 = std::min<idx>(W, W - dx);
        for (idx oy = std::max<idx>(0, -dy); oy < std::min<idx>(H, H - dy); ++oy) {
          const T* __restrict src = xc + (oy + dy) * W + dx;
          T* __restrict dst = yc + oy * W;
#pragma omp simd
          for (idx ox = x0; ox < x1; ++ox) dst[ox] += w * src[ox];
        }
      }
  }
}

/// Gradients of depthwise_forward: accumulates into dx and dweight.
template <class T>
void depthwise_backward(idx C, idx H, idx W, idx k, const T* __restrict x, const T* __restrict weight,
                        const T* __restrict dy_, T* __restrict dx, T* __restrict dweight) {
  const idx pad = k / 2;
  for (idx c = 0; c < C; ++c) {
    const T* __restrict xc = x + c * H * W;
    const T* __restrict gc = dy_ + c * H * W;
    T* __restrict dxc = dx + c * H * W;
    for (idx ky = 0; ky < k; ++ky)
      for (idx kx = 0; kx < k; ++kx) {
        const T w = weight[c * k * k + ky * k + kx];
        const idx dy = ky - pad, dxo = kx - pad;
        const idx x0 = std::max<idx>(0, -dxo), x1 = std::min<idx>(W, W - dxo);
        T acc{0};
        for (idx oy = std::max<idx>(0, -dy); oy < std::min<idx>(H, H - dy); ++oy) {
          const T* __restrict src = xc + (oy + dy) * W + dxo;
          T* __restrict dst = dxc + (oy + dy) * W + dxo;
          const T* __restrict g = gc + oy * W;
#pragma omp simd reduction(+ : acc)
          for (idx ox = x0; ox < x1; ++ox) {
            acc += g[ox] * src[ox];
            dst[ox] += w * g[ox];
          }
        }
        dweight[c * k * k + ky * k + kx] += acc;
      }
  }
}

/// Bilinear sampling weights for align_corners=true resizing along one axis.
struct LinearTap {
  idx lo, hi;
  double frac;
};

inline LinearTap linear_tap(idx out_index, idx in_size, idx out_size) {
  if (in_size == 1 || out_size == 1) return {0, 0, 0.0};
  const double src = static_cast<double>(out_index) * static_cast<double>(in_size - 1) /
                     static_cast<double>(out_size - 1);
  idx lo = static_cast<idx>(src);
  if (lo >= in_size - 1) lo = in_size - 1;
  const idx hi = std::min<idx>(lo + 1, in_size - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

/// Resizes one HxW plane to Ho x Wo with bilinear interpolation (align_corners=true).
template <class T>
void bilinear_forward(idx H, idx W, idx Ho, idx Wo, const T* __restrict x, T* __restrict y) {
  for (idx oy = 0; oy < Ho; ++oy) {
    const LinearTap ty = linear_tap(oy, H, Ho);
    for (idx ox = 0; ox < Wo; ++ox) {
      const LinearTap tx = linear_tap(ox, W, Wo);
      const T fy = static_cast<T>(ty.frac), fx = static_cast<T>(tx.frac);
      const T top = x[ty.lo * W + tx.lo] * (T{1} - fx) + x[ty.lo * W + tx.hi] * fx;
      const T bottom = x[ty.hi * W + tx.lo] * (T{1} - fx) + x[ty.hi * W + tx.hi] * fx;
      y[oy * Wo + ox] = top * (T{1} - fy) + bottom * fy;
    }
  }
}

template <class T>
void bilinear_backward(idx H, idx W, idx Ho, idx Wo, const T* __restrict dy, T* __restrict dx) {
  for (idx oy = 0; oy < Ho; ++oy) {
    const LinearTap ty = linear_tap(oy, H, Ho);
    for (idx ox = 0; ox < Wo; ++ox) {
      const LinearTap tx = linear_tap(ox, W, Wo);
      const T fy = static_cast<T>(ty.frac), fx = static_cast<T>(tx.frac);
      const T g = dy[oy * Wo + ox];
      dx[ty.lo * W + tx.lo] += g * (T{1} - fy) * (T{1} - fx);
      dx[ty.lo * W + tx.hi] += g * (T{1} - fy) * fx;
      dx[ty.hi * W + tx.lo] += g * fy * (T{1} - fx);
      dx[ty.hi * W + tx.hi] += g * fy * fx;
    }
  }
}

}  // namespace nowcast::kernels
