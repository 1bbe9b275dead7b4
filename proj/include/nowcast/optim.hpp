#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "nowcast/layers.hpp"

namespace nowcast {

/// Adam with bias correction.
template <class T>
class Adam {
 public:
  Adam(ModuleState<T> state, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : state_(std::move(state)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : state_.params) {
      m_.emplace_back(p.var.shape());
      v_.emplace_back(p.var.shape());
    }
  }

  void zero_grad() { state_.zero_grad(); }

  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t k = 0; k < state_.params.size(); ++k) {
      auto& param = state_.params[k].var;
      if (!param.has_grad()) continue;
      auto& w = param.mutable_value();
      const auto& g = param.grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * gi);
        v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] = static_cast<T>(w[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  ModuleState<T>& state() { return state_; }

 private:
  ModuleState<T> state_;
  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

/// Multiplies the learning rate by `factor` once `patience` consecutive epochs pass
/// without a strict improvement of the monitored value; the counter then restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, double factor) : patience_(patience), factor_(factor) {}

  /// Returns true when the learning rate should be reduced after this epoch.
  bool observe(double value) {
    if (value < best_) {
      best_ = value;
      bad_epochs_ = 0;
      return false;
    }
    if (++bad_epochs_ >= patience_) {
      bad_epochs_ = 0;
      return true;
    }
    return false;
  }

  double apply(double lr) const { return lr * factor_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  void restore(double best, int bad_epochs) {
    best_ = best;
    bad_epochs_ = bad_epochs;
  }

 private:
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Stops once `patience` consecutive epochs pass without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true if `value` is a new best.
  bool observe(double value) {
    if (value < best_) {
      best_ = value;
      bad_epochs_ = 0;
      return true;
    }
    ++bad_epochs_;
    return false;
  }
  bool should_stop() const { return bad_epochs_ >= patience_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  void restore(double best, int bad_epochs) {
    best_ = best;
    bad_epochs_ = bad_epochs;
  }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace nowcast
