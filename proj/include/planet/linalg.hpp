// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_LINALG_HPP
#define PLANET_LINALG_HPP

#include <planet/core.hpp>

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace planet {

struct SignedLog {
  int sign = 0;  // -1, 0, +1
  double log_abs = -std::numeric_limits<double>::infinity();
};

/// LU factorization with partial pivoting. An exactly zero pivot marks the
/// matrix singular; no further elimination happens past that column.
class LuFactor {
 public:
  explicit LuFactor(const Matrix& a);

  bool singular() const noexcept { return singular_; }
  SignedLog slogdet() const;
  /// Solves A x = b. Requires a non-singular factor.
  Matrix solve(const Matrix& b) const;
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<int> perm_;
  int swaps_ = 0;
  bool singular_ = false;
};

/// sign(det A) and log|det A|; singular input yields {0, -inf}.
SignedLog slogdet(const Matrix& a);

/// log|sum_k s_k exp(l_k)| with its sign, evaluated without overflow.
SignedLog signed_logsumexp(std::span<const double> logs, std::span<const int> signs);

using LinearOperator = std::function<Vector(const Vector&)>;

struct CgResult {
  Vector x;
  std::vector<double> residual_norms;  // ||b - (A + damping I) x_k||, k = 0..iterations
  int iterations = 0;
};

/// Conjugate gradient on (A + damping I) x = b from x0 = 0, running exactly
/// `max_iter` iterations. The only early exit is an exactly zero residual,
/// where the next step would divide by zero.
CgResult cg_solve(const LinearOperator& matvec, const Vector& b, double damping, int max_iter);

}  // namespace planet

#endif  // PLANET_LINALG_HPP
