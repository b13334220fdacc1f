// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// A small sequential network assembled from named primitives. It exists so
// derivative propagation can be exercised on arbitrary primitive stacks
// without building a full wave function.

#ifndef PLANET_NETWORK_HPP
#define PLANET_NETWORK_HPP

#include <planet/autodiff.hpp>

#include <string>
#include <vector>

namespace planet {

/// One step of a Network. `a` and `b` name parameter leaves where the op
/// needs them:
///
///   affine      x W^T + b            (a = W, b = bias)
///   silu, scaled_silu, tanh, exp, square, softplus, identity
///   sum         sum over features -> one column
///   product     left half of the features times the right half
///   concat      [x, input]           (re-attach the network input)
///   norm        row-wise Euclidean norm
///   envelope    sum_m pi exp(-softplus(sigma) x_m)  (a = pi, b = sigma)
///   slogdet     features reshaped to K stacked n x n blocks,
///               log|sum_k w_k det_k|  (a = w, count = K)
///   shift       adds `scalar`
struct NetworkStep {
  std::string op;
  std::string a;
  std::string b;
  int count = 1;
  double scalar = 0.0;
};

class Network {
 public:
  /// Appends a step; unknown op names raise kUnsupported.
  Network& add(NetworkStep step);
  Network& add(const std::string& op, const std::string& a = {}, const std::string& b = {}) {
    return add(NetworkStep{op, a, b});
  }

  const std::vector<NetworkStep>& steps() const noexcept { return steps_; }

  static bool registered(const std::string& op);
  static std::vector<std::string> registered_ops();

  template <class B>
  typename B::T forward(B& backend, const ParamTree& params, const Matrix& inputs) const;

  Matrix value(const ParamTree& params, const Matrix& inputs) const;

 private:
  std::vector<NetworkStep> steps_;
};

/// Value, jacobian and laplacian trace of the network output with respect to
/// every entry of `inputs` (entry (i, k) is input i * cols + k).
DualBatch propagate_derivatives(const Network& network, const ParamTree& params,
                                const Matrix& inputs);

}  // namespace planet

#endif  // PLANET_NETWORK_HPP
