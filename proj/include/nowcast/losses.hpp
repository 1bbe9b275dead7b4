#pragma once

// Training objectives with hand-derived gradients.

#include <algorithm>
#include <cmath>

#include "nowcast/ops.hpp"

namespace nowcast {

inline constexpr double kLogEpsilon = 1e-7;

namespace detail {
template <class T>
void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}
template <class T>
T clamp_prob(T v, double eps) {
  return std::clamp(v, static_cast<T>(eps), static_cast<T>(1.0 - eps));
}
template <class T>
bool inside(T v, double eps) {
  return v > static_cast<T>(eps) && v < static_cast<T>(1.0 - eps);
}
}  // namespace detail

/// Mean squared error over every element: (1/(n*kappa)) Σ (y - y_hat)^2.
template <class T>
Var<T> loss_l2(const Tensor<T>& y, const Var<T>& y_hat) {
  detail::require_same<T>(y.shape(), y_hat.shape(), "loss_l2");
  if (y.empty()) throw ArgumentError("loss_l2: empty batch");
  const std::size_t count = y.size();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(y_hat.value()[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(count)));
  return make_result<T>(std::move(out), {y_hat}, [y, count](Node<T>& self) {
    auto& d = self.inputs[0]->grad_buffer();
    const T scale = self.grad[0] * T{2} / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) d[i] += scale * (self.inputs[0]->value[i] - y[i]);
  });
}

/// Identical contract to loss_l2.
template <class T>
Var<T> loss_mse(const Tensor<T>& y, const Var<T>& y_hat) {
  return loss_l2(y, y_hat);
}

/// Heteroscedastic objective: mean of 0.5*exp(-s)*(y - y_hat)^2 + 0.5*s, with s the predicted log variance.
template <class T>
Var<T> loss_aleatoric(const Tensor<T>& y, const Var<T>& y_hat, const Var<T>& log_var) {
  detail::require_same<T>(y.shape(), y_hat.shape(), "loss_aleatoric");
  detail::require_same<T>(y.shape(), log_var.shape(), "loss_aleatoric");
  if (y.empty()) throw ArgumentError("loss_aleatoric: empty batch");
  const std::size_t count = y.size();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = static_cast<double>(y[i]) - static_cast<double>(y_hat.value()[i]);
    const double s = log_var.value()[i];
    acc += 0.5 * std::exp(-s) * r * r + 0.5 * s;
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(count)));
  return make_result<T>(std::move(out), {y_hat, log_var}, [y, count](Node<T>& self) {
    auto& pred = *self.inputs[0];
    auto& lv = *self.inputs[1];
    const T g = self.grad[0] / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const T r = pred.value[i] - y[i];
      const T w = std::exp(-lv.value[i]);
      if (pred.requires_grad) pred.grad_buffer()[i] += g * w * r;
      if (lv.requires_grad) lv.grad_buffer()[i] += g * (T(0.5) - T(0.5) * w * r * r);
    }
  });
}

/// Conditional GAN objective, averaged over samples and patches:
/// (1/(n*l)) Σ [log D(x,y) + log(1 - D(x,G(x,m)))], probabilities clamped to [eps, 1-eps].
/// The discriminator maximises it; training minimises its negation.
template <class T>
Var<T> loss_cgan(const Var<T>& real_scores, const Var<T>& fake_scores, double eps = kLogEpsilon) {
  detail::require_same<T>(real_scores.shape(), fake_scores.shape(), "loss_cgan");
  if (real_scores.value().empty()) throw ArgumentError("loss_cgan: empty batch");
  const std::size_t count = real_scores.value().size();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    acc += std::log(static_cast<double>(detail::clamp_prob(real_scores.value()[i], eps)));
    acc += std::log(static_cast<double>(detail::clamp_prob(T{1} - fake_scores.value()[i], eps)));
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(count)));
  return make_result<T>(std::move(out), {real_scores, fake_scores}, [count, eps](Node<T>& self) {
    auto& real = *self.inputs[0];
    auto& fake = *self.inputs[1];
    const T g = self.grad[0] / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (real.requires_grad && detail::inside(real.value[i], eps)) real.grad_buffer()[i] += g / real.value[i];
      const T q = T{1} - fake.value[i];
      if (fake.requires_grad && detail::inside(q, eps)) fake.grad_buffer()[i] -= g / q;
    }
  });
}

/// Adversarial part of the generator objective. Saturating form: (1/(n*l)) Σ log(1 - D(fake));
/// non-saturating alternative: -(1/(n*l)) Σ log D(fake).
template <class T>
Var<T> loss_generator_adversarial(const Var<T>& fake_scores, bool non_saturating = false,
                                  double eps = kLogEpsilon) {
  if (fake_scores.value().empty()) throw ArgumentError("loss_generator_adversarial: empty batch");
  const std::size_t count = fake_scores.value().size();
  double acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const T f = fake_scores.value()[i];
    acc += non_saturating ? -std::log(static_cast<double>(detail::clamp_prob(f, eps)))
                          : std::log(static_cast<double>(detail::clamp_prob(T{1} - f, eps)));
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(count)));
  return make_result<T>(std::move(out), {fake_scores}, [count, eps, non_saturating](Node<T>& self) {
    auto& fake = *self.inputs[0];
    const T g = self.grad[0] / static_cast<T>(count);
    auto& d = fake.grad_buffer();
    for (std::size_t i = 0; i < count; ++i) {
      const T f = fake.value[i];
      if (non_saturating) {
        if (detail::inside(f, eps)) d[i] -= g / f;
      } else if (detail::inside(T{1} - f, eps)) {
        d[i] -= g / (T{1} - f);
      }
    }
  });
}

/// Generator objective: adversarial term + lambda * L2. The log D(x,y) term of the cGAN
/// objective does not depend on the generator and is omitted.
template <class T>
Var<T> loss_generator_total(const Var<T>& fake_scores, const Tensor<T>& y, const Var<T>& y_hat, double lambda,
                            bool non_saturating = false, double eps = kLogEpsilon) {
  auto adv = loss_generator_adversarial(fake_scores, non_saturating, eps);
  auto l2 = loss_l2(y, y_hat);
  return ops::linear_combination<T>({adv, l2}, {T{1}, static_cast<T>(lambda)});
}

}  // namespace nowcast
