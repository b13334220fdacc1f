// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/network.hpp>

#include <algorithm>
#include <array>
#include <numeric>

namespace planet {

namespace {

constexpr std::array<const char*, 14> kOps = {
    "affine", "silu",    "scaled_silu", "tanh",     "exp",      "square",  "softplus",
    "identity", "sum",   "product",     "concat",   "norm",     "envelope", "slogdet"};

bool activation_of(const std::string& op, Act& out) {
  static const std::pair<const char*, Act> table[] = {
      {"identity", Act::kIdentity}, {"silu", Act::kSilu}, {"scaled_silu", Act::kScaledSilu},
      {"tanh", Act::kTanh},         {"exp", Act::kExp},   {"square", Act::kSquare},
      {"softplus", Act::kSoftplus}};
  for (const auto& [name, act] : table) {
    if (op == name) {
      out = act;
      return true;
    }
  }
  return false;
}

}  // namespace

bool Network::registered(const std::string& op) {
  if (op == "shift") return true;
  return std::any_of(kOps.begin(), kOps.end(), [&](const char* o) { return op == o; });
}

std::vector<std::string> Network::registered_ops() {
  std::vector<std::string> out(kOps.begin(), kOps.end());
  out.emplace_back("shift");
  return out;
}

Network& Network::add(NetworkStep step) {
  require(registered(step.op), ErrorCode::kUnsupported,
          "network: primitive '" + step.op + "' has no derivative propagation rule");
  steps_.push_back(std::move(step));
  return *this;
}

template <class B>
typename B::T Network::forward(B& backend, const ParamTree& params, const Matrix& inputs) const {
  using T = typename B::T;
  const T input = backend.coords(inputs);
  T x = input;
  for (const NetworkStep& s : steps_) {
    Act act;
    if (activation_of(s.op, act)) {
      x = backend.act(x, act);
    } else if (s.op == "affine") {
      x = s.b.empty() ? backend.linear(x, params.ref(s.a))
                      : backend.linear(x, params.ref(s.a), params.ref(s.b));
    } else if (s.op == "sum") {
      const int c = static_cast<int>(backend.value(x).cols());
      x = backend.right_mul(x, Matrix::Ones(c, 1));
    } else if (s.op == "product") {
      const int c = static_cast<int>(backend.value(x).cols());
      require(c % 2 == 0, ErrorCode::kDimension, "network: product needs an even feature count");
      const int h = c / 2;
      Matrix left = Matrix::Zero(c, h), right = Matrix::Zero(c, h);
      for (int i = 0; i < h; ++i) {
        left(i, i) = 1.0;
        right(h + i, i) = 1.0;
      }
      x = backend.mul(backend.right_mul(x, left), backend.right_mul(x, right));
    } else if (s.op == "concat") {
      x = backend.concat_cols({&x, &input});
    } else if (s.op == "norm") {
      x = backend.norm_rows(x);
    } else if (s.op == "envelope") {
      x = backend.envelope(x, params.ref(s.a), params.ref(s.b));
    } else if (s.op == "slogdet") {
      const Matrix v = backend.value(x);
      const long total = static_cast<long>(v.size());
      const int k = s.count;
      const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(total / k))));
      require(static_cast<long>(n) * n * k == total, ErrorCode::kDimension,
              "network: slogdet needs K * n * n features");
      x = backend.reshape(x, k * n, n);
      x = backend.log_det_sum(x, k, params.ref(s.a)).value;
    } else if (s.op == "shift") {
      const Matrix v = backend.value(x);
      x = backend.add(x, backend.constant(Matrix::Constant(v.rows(), v.cols(), s.scalar)));
    }
  }
  return x;
}

template ValueBackend::T Network::forward(ValueBackend&, const ParamTree&, const Matrix&) const;
template DualBackend::T Network::forward(DualBackend&, const ParamTree&, const Matrix&) const;
template TapeBackend::T Network::forward(TapeBackend&, const ParamTree&, const Matrix&) const;

Matrix Network::value(const ParamTree& params, const Matrix& inputs) const {
  ValueBackend b;
  return forward(b, params, inputs);
}

DualBatch propagate_derivatives(const Network& network, const ParamTree& params,
                                const Matrix& inputs) {
  DualBackend b(static_cast<int>(inputs.size()));
  return network.forward(b, params, inputs);
}

}  // namespace planet
