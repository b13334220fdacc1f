// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_METAGNN_HPP
#define PLANET_METAGNN_HPP

#include <planet/autodiff.hpp>
#include <planet/molecule.hpp>
#include <planet/wavefunction.hpp>

#include <vector>

namespace planet {

struct MetaGnnConfig {
  int n_message_passes = 2;
  int node_dim = 64;
  int message_dim = 32;
  int n_rbf = 6;
  int n_sbf = 7;  // reserved for an angular basis; the edge features are radial
  int mlp_depth = 2;
  double rbf_cutoff = 20.0;
  void validate() const;
};

/// Geometry-dependent changes to the wave-function parameters.
struct ParamAdaptation {
  Matrix z;         // M x nuclei_embed_dim, replaces embed/z
  Matrix d_pi;      // M x channels, added to env/pi (transposed)
  Matrix d_sigma;   // M x channels, added to the raw env/sigma (transposed)
  Vector d_w;       // K, added to det/w
  Vector d_bias;    // channels, added to orb/b
};

/// Message passing over the fully connected nuclei graph. Edge features are
/// Bessel radial functions of the internuclear distance, so every output is
/// translation and rotation invariant. All offset heads start at zero.
class MetaGnn {
 public:
  MetaGnn(MetaGnnConfig config, const WaveFunction& wf);

  const MetaGnnConfig& config() const noexcept { return config_; }
  ParamTree init_params(Rng& rng) const;

  template <class B>
  struct Heads {
    typename B::T z, d_pi, d_sigma, d_w, d_bias;
  };
  template <class B>
  Heads<B> forward(B& backend, const ParamTree& params, bool track,
                   const Geometry& geometry) const;

  ParamAdaptation adapt(const ParamTree& params, const Geometry& geometry) const;

  /// Chains d log|psi| / d(adapted params) back to the MetaGNN parameters.
  /// `adapted_grads` holds one flat wave-function gradient per row.
  Matrix backprop(const ParamTree& params, const Geometry& geometry,
                  const ParamTree& wf_structure, const Matrix& adapted_grads) const;

 private:
  MetaGnnConfig config_;
  std::vector<int> species_;  // nucleus -> row in the species table
  int n_species_ = 0;
  int m_ = 0;
  int embed_dim_ = 0;
  int channels_ = 0;
  int n_det_ = 0;
  std::vector<int> edge_src_, edge_dst_;
};

/// Bessel radial basis sqrt(2/c) sin(n pi d / c) / d, n = 1..n_rbf.
RowVector bessel_rbf(double d, int n_rbf, double cutoff);

/// base with embed/z replaced and additive offsets on the adapted leaves.
ParamTree apply_adaptation(const ParamTree& base, const ParamAdaptation& a);

}  // namespace planet

#endif  // PLANET_METAGNN_HPP
