// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_WAVEFUNCTION_HPP
#define PLANET_WAVEFUNCTION_HPP

#include <planet/ansatz.hpp>
#include <planet/autodiff.hpp>
#include <planet/molecule.hpp>

#include <string>
#include <vector>

namespace planet {

enum class WfActivation { kSilu, kTanh };

struct WfConfig {
  int single_width = 256;
  int pair_width = 32;
  int n_layers = 4;
  int n_determinants = 16;
  int n_jastrow_layers = 3;
  int jastrow_width = 0;  // 0: same as single_width
  int nuclei_embed_dim = 64;
  bool restricted = true;
  bool dense_orbitals = true;
  bool jastrow = true;
  WfActivation activation = WfActivation::kSilu;
  bool rescale = true;
  bool zero_bias_init = true;

  int jastrow_hidden() const noexcept { return jastrow_width > 0 ? jastrow_width : single_width; }
  void validate(const Molecule& molecule) const;
};

/// Intermediate features of one evaluation (value semantics).
struct WfFeatures {
  Matrix h1;                  // N x single_width
  Matrix g1;                  // N^2 x 4, row i + N j
  std::vector<Matrix> h;      // h after each interaction layer
  std::vector<Matrix> g;      // g after each interaction layer but the last
  std::vector<Matrix> orbitals;  // K matrices, N x N
  double jastrow = 0.0;
  SignedLog log_psi;
};

/// The restricted multi-determinant wave function of one molecule. Geometry
/// and nuclear embeddings are inputs; the latter live in the parameter tree
/// as "embed/z" so the MetaGNN can overwrite them.
///
/// Leaves: embed/{W,z,A,a}, layer<l>/{W_single,b_single,W_global,W_same,
/// b_same,W_diff,b_diff}, orb/{W,b}, env/{pi,sigma}, det/w, jastrow/{W<k>,b<k>}.
/// Orbital channels are laid out as column (v K + k) O + o with variant v
/// (0 same spin, 1 opposite spin), determinant k and orbital o.
class WaveFunction {
 public:
  WaveFunction(WfConfig config, Molecule molecule);

  const WfConfig& config() const noexcept { return config_; }
  const Molecule& molecule() const noexcept { return molecule_; }
  int n_electrons() const noexcept { return n_; }
  int n_variants() const noexcept { return variants_; }
  int n_orbitals() const noexcept { return orbitals_; }
  int n_channels() const noexcept { return variants_ * config_.n_determinants * orbitals_; }
  int channel(int variant, int det, int orbital) const {
    return (variant * config_.n_determinants + det) * orbitals_ + orbital;
  }

  /// Variance-scaled normal weights, zero (or unit-normal) biases, zero
  /// cross-spin projections, zero final Jastrow layer, pi = sigma = 1.
  ParamTree init_params(Rng& rng) const;

  template <class B>
  struct Graph {
    typename B::T orbitals;  // K N x N stacked
    typename B::T log_abs;   // 1 x 1
    int sign = 0;
  };
  template <class B>
  Graph<B> forward(B& backend, const ParamTree& params, bool track, const Matrix& electrons,
                   const Geometry& geometry, const Frame& frame,
                   WfFeatures* features = nullptr) const;

  SignedLog log_psi(const ParamTree& params, const Matrix& electrons, const Geometry& geometry,
                    const Frame& frame) const;
  LogPsiDerivs log_psi_derivatives(const ParamTree& params, const Matrix& electrons,
                                   const Geometry& geometry, const Frame& frame) const;
  /// d log|psi| / d params, flat in tree order.
  Vector score(const ParamTree& params, const Matrix& electrons, const Geometry& geometry,
               const Frame& frame) const;
  WfFeatures features(const ParamTree& params, const Matrix& electrons, const Geometry& geometry,
                      const Frame& frame) const;

  /// Fraction of single-stream neurons (layer, unit) whose standard deviation
  /// over all electrons of all configurations is below `eps`.
  double dead_neuron_fraction(const ParamTree& params, const std::vector<Matrix>& batch,
                              const Geometry& geometry, const Frame& frame,
                              double eps = 1e-6) const;

  const std::vector<int>& spins() const noexcept { return spin_; }

 private:
  Act act() const;

  WfConfig config_;
  Molecule molecule_;
  int n_ = 0;
  int m_ = 0;
  int variants_ = 2;
  int orbitals_ = 0;
  std::vector<int> spin_;
  std::vector<int> en_electron_, en_nucleus_;  // row i + N m
  std::vector<int> pair_i_, pair_j_;           // row i + N j
  std::vector<int> electron_row_;              // i -> i (scatter target)
  std::vector<int> sum_first_, sum_second_;    // per electron: row of the spin-sum table
  std::vector<int> pair_first_, pair_second_;  // per pair: scatter target or -1
  std::vector<unsigned char> pair_same_;
  std::vector<int> orbital_index_;             // flat index into the N x channels product
};

/// Fraction of columns whose standard deviation over rows is below eps.
double dead_fraction(const Matrix& samples_by_neuron, double eps = 1e-6);

/// A wave function with parameters, geometry and frame fixed.
class BoundWaveFunction final : public Ansatz {
 public:
  BoundWaveFunction(const WaveFunction& wf, const ParamTree& params, Geometry geometry,
                    Frame frame)
      : wf_(wf), params_(params), geometry_(std::move(geometry)), frame_(frame) {}
  int n_electrons() const override { return wf_.n_electrons(); }
  SignedLog log_psi(const Matrix& electrons) const override {
    return wf_.log_psi(params_, electrons, geometry_, frame_);
  }
  LogPsiDerivs derivatives(const Matrix& electrons) const override {
    return wf_.log_psi_derivatives(params_, electrons, geometry_, frame_);
  }

 private:
  const WaveFunction& wf_;
  const ParamTree& params_;
  Geometry geometry_;
  Frame frame_;
};

}  // namespace planet

#endif  // PLANET_WAVEFUNCTION_HPP
