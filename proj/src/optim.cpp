// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/optim.hpp>

#include <cmath>

namespace planet {

AdamWState AdamWState::like(const ParamTree& params) {
  return {Vector::Zero(params.size()), Vector::Zero(params.size()), 0};
}

void adamw_step(AdamWState& state, Vector& params, const Vector& grads, double lr,
                double weight_decay, const AdamWOptions& opts) {
  require(grads.size() == params.size(), ErrorCode::kDimension,
          "adamw_step: gradient size does not match parameters");
  if (state.m.size() == 0 && state.step == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::kDimension, "adamw_step: optimizer moments do not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * g;
    state.v[i] = opts.beta2 * state.v[i] + (1.0 - opts.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + opts.eps) + weight_decay * params[i]);
  }
}

void adamw_step(AdamWState& state, ParamTree& params, const ParamTree& grads, double lr,
                double weight_decay, const AdamWOptions& opts) {
  params.require_same_structure(grads, "adamw_step");
  adamw_step(state, params.flat(), grads.flat(), lr, weight_decay, opts);
}

ParamTree ema_combine(const ParamTree& old_params, const ParamTree& new_params, double gamma) {
  old_params.require_same_structure(new_params, "ema_combine");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorCode::kInvalidArgument,
          "ema_combine: gamma must lie in [0, 1]");
  return old_params.with_values(gamma * old_params.flat() + (1.0 - gamma) * new_params.flat());
}

double ScalarEma::update(double x) {
  if (!initialized_) {
    value_ = x;
    initialized_ = true;
  } else {
    value_ = decay_ * value_ + (1.0 - decay_) * x;
  }
  return value_;
}

}  // namespace planet
