// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_OPTIM_HPP
#define PLANET_OPTIM_HPP

#include <planet/param_tree.hpp>

namespace planet {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments plus the step counter used for bias correction.
struct AdamWState {
  Vector m;
  Vector v;
  long long step = 0;

  static AdamWState like(const ParamTree& params);
};

/// One decoupled-weight-decay Adam step:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
void adamw_step(AdamWState& state, ParamTree& params, const ParamTree& grads, double lr,
                double weight_decay, const AdamWOptions& opts = {});

/// Same update on raw vectors; `grads` must match `params` in size.
void adamw_step(AdamWState& state, Vector& params, const Vector& grads, double lr,
                double weight_decay, const AdamWOptions& opts = {});

/// gamma * old + (1 - gamma) * new, elementwise.
ParamTree ema_combine(const ParamTree& old_params, const ParamTree& new_params, double gamma);

/// Scalar exponential moving average that adopts its first observation.
class ScalarEma {
 public:
  explicit ScalarEma(double decay = 0.999) : decay_(decay) {}
  double update(double x);
  double value() const noexcept { return value_; }
  bool initialized() const noexcept { return initialized_; }
  double decay() const noexcept { return decay_; }
  void restore(double value, bool initialized) {
    value_ = value;
    initialized_ = initialized;
  }

 private:
  double decay_;
  double value_ = 0.0;
  bool initialized_ = false;
};

}  // namespace planet

#endif  // PLANET_OPTIM_HPP
