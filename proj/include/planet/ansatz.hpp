// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_ANSATZ_HPP
#define PLANET_ANSATZ_HPP

#include <planet/linalg.hpp>

#include <memory>

namespace planet {

/// log|psi| with its first and summed second derivatives over all 3N
/// electron coordinates. sign == 0 marks a node (psi = 0); the derivative
/// fields are then NaN.
struct LogPsiDerivs {
  int sign = 0;
  double log_abs = 0.0;
  Matrix grad;  // N x 3
  double laplacian = 0.0;

  bool singular() const noexcept { return sign == 0; }
};

/// Anything the sampler and the local energy can evaluate: a trained wave
/// function bound to one geometry, or an analytic test function.
class Ansatz {
 public:
  virtual ~Ansatz() = default;
  virtual int n_electrons() const = 0;
  virtual SignedLog log_psi(const Matrix& electrons) const = 0;
  virtual LogPsiDerivs derivatives(const Matrix& electrons) const = 0;
};

/// log psi = -Z |r - center| for a single electron: the exact hydrogen-like
/// ground state with eigenvalue -Z^2 / 2.
class HydrogenHook final : public Ansatz {
 public:
  explicit HydrogenHook(Vector3 center = Vector3::Zero(), double z = 1.0)
      : center_(center), z_(z) {}
  int n_electrons() const override { return 1; }
  SignedLog log_psi(const Matrix& electrons) const override;
  LogPsiDerivs derivatives(const Matrix& electrons) const override;

 private:
  Vector3 center_;
  double z_;
};

/// log psi = -|x|^2 / (4 s^2) over all 3N coordinates, so psi^2 is a
/// Gaussian with per-coordinate variance s^2.
class GaussianHook final : public Ansatz {
 public:
  explicit GaussianHook(int n_electrons, double variance = 1.0)
      : n_(n_electrons), variance_(variance) {}
  int n_electrons() const override { return n_; }
  SignedLog log_psi(const Matrix& electrons) const override;
  LogPsiDerivs derivatives(const Matrix& electrons) const override;

 private:
  int n_;
  double variance_;
};

}  // namespace planet

#endif  // PLANET_ANSATZ_HPP
