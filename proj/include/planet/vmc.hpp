// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_VMC_HPP
#define PLANET_VMC_HPP

#include <planet/ansatz.hpp>
#include <planet/linalg.hpp>
#include <planet/molecule.hpp>

#include <limits>
#include <vector>

namespace planet {

/// Walkers of one geometry: B electron configurations (N x 3 each), the
/// proposal width and the geometry parameters they were sampled for.
struct WalkerState {
  std::vector<Matrix> electrons;
  double step = 0.02;
  Vector geometry_params;

  int size() const noexcept { return static_cast<int>(electrons.size()); }
};

struct EnergyStats {
  std::vector<double> mean;   // E-hat per geometry
  std::vector<double> sigma;  // sigma-hat per geometry: sqrt(sum (E - E-hat)^2) / B

  int size() const noexcept { return static_cast<int>(mean.size()); }
  /// sigma-hat_c for one batch of local energies.
  static double batch_sigma(const Vector& energies);
};

/// Electron positions drawn around the nuclei (unit-width Gaussians); up
/// electrons take nuclei first, then down electrons continue the cycle.
WalkerState init_walkers(const Molecule& molecule, const Geometry& geometry, int n_walkers,
                         Rng& rng, double step = 0.02);

/// Coulomb energy of the configuration (electron-electron, electron-nucleus,
/// nucleus-nucleus). Coincident particles give NaN.
double potential_energy(const Matrix& electrons, const Geometry& geometry,
                        const std::vector<int>& charges);

/// -1/2 sum (d2 log|psi| + (d log|psi|)^2) + V; NaN at a node.
double local_energy(const LogPsiDerivs& derivs, const Matrix& electrons,
                    const Geometry& geometry, const std::vector<int>& charges);

struct McmcOptions {
  double target_low = 0.45;
  double target_high = 0.55;
  double adapt_factor = 1.02;
  bool adapt = true;
};

/// `n_steps` all-electron Gaussian Metropolis sweeps per walker, then one
/// multiplicative step-size adaptation from the block's acceptance rate.
/// Walker w draws from `stream.child(w)`. Returns the acceptance rate.
double mcmc_step(const Ansatz& psi, WalkerState& walkers, int n_steps, const Rng& stream,
                 const McmcOptions& options = {});

/// Per row (geometry): clip to median +- scale * mean |E - median|.
Matrix clip_local_energies(const Matrix& energies, double scale);
double median(Vector values);

/// Row s of `scores` belongs to geometry `geometry_of[s]`. Returns
/// mean_s (E_s - E-hat_{c(s)}) scores_s.
Vector vmc_gradient(const Matrix& scores, const Vector& energies,
                    const std::vector<int>& geometry_of, int n_geometries);

/// Subtracts each geometry's mean score from its rows.
Matrix center_scores(const Matrix& scores, const std::vector<int>& geometry_of, int n_geometries);

/// F v = (1/n) S^T (S v) on centered scores S, never forming F.
class FisherOperator {
 public:
  explicit FisherOperator(const Matrix& centered_scores) : s_(centered_scores) {}
  Vector operator()(const Vector& v) const;
  Matrix dense() const;
  std::ptrdiff_t dim() const noexcept { return s_.cols(); }

 private:
  const Matrix& s_;
};

enum class CgRoute { kAuto, kParameter, kSample };

struct NaturalGradientResult {
  Vector delta;  // lr * x
  double residual = 0.0;
  int iterations = 0;
  double damping = 0.0;
};

/// delta = lr * CG((F + damping I), grad) with damping = damping_base *
/// sigma_t. When the gradient is g = S^T beta, the sample-space route runs
/// the same CG recurrences on coefficient vectors with the Gram matrix S S^T,
/// which is cheaper when there are more parameters than samples.
NaturalGradientResult natural_gradient_update(const Matrix& centered_scores, const Vector& grad,
                                              const Vector* grad_coeffs, double damping_base,
                                              double sigma_t, double lr, int cg_steps = 100,
                                              CgRoute route = CgRoute::kAuto);

/// Same with the scores stored one column per sample (P x n).
NaturalGradientResult natural_gradient_update_columns(const Matrix& centered_scores_t,
                                                      const Vector& grad, const Vector* grad_coeffs,
                                                      double damping_base, double sigma_t,
                                                      double lr, int cg_steps = 100,
                                                      CgRoute route = CgRoute::kAuto);

/// CG on (G / n + lambda I) in the Krylov space of S^T: solves
/// (S^T S / n + lambda I) x = S^T beta with x = S^T alpha.
CgResult sample_space_cg(const Matrix& gram, const Vector& beta, double damping, int n,
                         int max_iter, Vector* alpha);

/// Each electron moves with the nucleus nearest to it in the old geometry.
Matrix transform_electrons(const Matrix& electrons, const Geometry& new_geometry,
                           const Geometry& old_geometry);

struct EvalOptions {
  long long n_samples = 1000000;
  int n_walkers = 4096;
  int burn_in = 400;
  int steps_between = 40;
  double init_step = 0.02;
};

struct EnergyEstimate {
  double energy = 0.0;
  double stderr_naive = 0.0;  // std / sqrt(S); ignores autocorrelation
  double std_dev = 0.0;
  long long n_samples = 0;
  double acceptance = 0.0;
};

/// Mean local energy and its naive standard error after burn-in.
EnergyEstimate evaluate_energy(const Ansatz& psi, const Molecule& molecule,
                               const Geometry& geometry, const EvalOptions& options,
                               const Rng& rng);

/// Same, starting from supplied walkers (no re-initialisation).
EnergyEstimate evaluate_energy(const Ansatz& psi, WalkerState& walkers, const Geometry& geometry,
                               const std::vector<int>& charges, const EvalOptions& options,
                               const Rng& rng);

}  // namespace planet

#endif  // PLANET_VMC_HPP
