// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_PRETRAIN_HPP
#define PLANET_PRETRAIN_HPP

#include <planet/optim.hpp>
#include <planet/wavefunction.hpp>

#include <memory>
#include <string>
#include <vector>

namespace planet {

/// Reference orbitals for pretraining. `evaluate` returns an n_orbitals x N
/// matrix: entry (o, j) is orbital o at electron j.
class OrbitalProvider {
 public:
  virtual ~OrbitalProvider() = default;
  virtual int n_orbitals() const = 0;
  virtual Matrix evaluate(const Matrix& electrons, const Geometry& geometry) const = 0;
};

/// Slater-type hydrogenic orbitals (1s for Z <= 2, 1s 2s 2p above) mixed by a
/// Hueckel-style matrix; the occupied set is its lowest eigenvectors, scaled so
/// the largest coefficient has magnitude one. For H2 this is the bonding
/// combination exp(-|r - R_1|) + exp(-|r - R_2|).
class HydrogenicProvider final : public OrbitalProvider {
 public:
  explicit HydrogenicProvider(const Molecule& molecule);
  int n_orbitals() const override { return n_occ_; }
  Matrix evaluate(const Matrix& electrons, const Geometry& geometry) const override;

  struct Ao {
    int atom;
    int n;      // principal quantum number
    int axis;   // -1 for s, 0..2 for p
    double zeta;
  };
  const std::vector<Ao>& basis() const noexcept { return basis_; }
  /// Occupied coefficients (basis x n_orbitals) for one geometry.
  Matrix coefficients(const Geometry& geometry) const;

 private:
  std::vector<Ao> basis_;
  int n_occ_ = 0;
};

/// Contracted Cartesian Gaussians (s, px, py, pz) on atoms with externally
/// computed MO coefficients, e.g. from an RHF/STO-6G calculation. JSON:
///   {"basis": [{"atom": 0, "shell": "s", "exponents": [...],
///               "coefficients": [...]}, ...],
///    "mo_coefficients": [[c_00, c_01, ...], ...]}   // basis x occupied
class BasisFileProvider final : public OrbitalProvider {
 public:
  static BasisFileProvider parse(const std::string& json_text, int n_atoms);
  static BasisFileProvider load(const std::string& path, int n_atoms);
  int n_orbitals() const override { return static_cast<int>(mo_.cols()); }
  Matrix evaluate(const Matrix& electrons, const Geometry& geometry) const override;

 private:
  struct Shell {
    int atom;
    int axis;  // -1 s, 0..2 p
    std::vector<double> alpha, coef;
  };
  std::vector<Shell> shells_;
  Matrix mo_;
  int n_atoms_ = 0;
};

std::unique_ptr<OrbitalProvider> make_provider(const std::string& source, const Molecule& molecule);

/// N x N target: entry (r, j) is orbital o(r) at electron j when row r and
/// electron j carry the same spin, else 0. Both spin blocks use the same set.
Matrix pretrain_target(const WaveFunction& wf, const OrbitalProvider& provider,
                       const Matrix& electrons, const Geometry& geometry);

/// mean over configurations and determinants of ||phi^k - T||^2, with the
/// gradient with respect to `params` (flat, tree order) when `grad` is set.
double pretrain_loss(const WaveFunction& wf, const ParamTree& params,
                     const OrbitalProvider& provider, const Geometry& geometry,
                     const Frame& frame, const std::vector<Matrix>& batch, Vector* grad);

/// One Adam step (no weight decay) on the pretraining loss. Returns the loss
/// before the step.
double pretrain_step(const WaveFunction& wf, ParamTree& params, const OrbitalProvider& provider,
                     const Geometry& geometry, const Frame& frame,
                     const std::vector<Matrix>& batch, AdamWState& state, double lr = 0.003);

}  // namespace planet

#endif  // PLANET_PRETRAIN_HPP
