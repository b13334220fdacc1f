// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_SURROGATE_HPP
#define PLANET_SURROGATE_HPP

#include <planet/autodiff.hpp>
#include <planet/molecule.hpp>
#include <planet/optim.hpp>
#include <planet/vmc.hpp>

#include <functional>
#include <vector>

namespace planet {

struct SurrogateConfig {
  double cutoff = 10.0;
  int n_rbf = 6;
  int n_sbf = 7;
  int n_blocks = 4;
  int basis_embed = 8;
  int interaction_dim = 64;
  int out_dim = 256;
  int layers_before_skip = 1;
  int layers_after_skip = 2;
  int out_layers = 3;
  int envelope_exponent = 6;
  int max_z = 36;
  void validate() const;
};

/// Edge and triplet bookkeeping for one geometry. Atoms are visited in a
/// canonical order (charge, then sorted distance list), so relabelling
/// identical nuclei reproduces the same arithmetic.
struct SurrogateGraph {
  std::vector<int> atom_z;         // charges in canonical order
  std::vector<int> edge_i, edge_j;  // message j -> i
  Matrix rbf;                       // edges x n_rbf, enveloped
  std::vector<int> trip_kj, trip_ji;  // triplet k -> j -> i as edge ids
  Matrix sbf;                       // triplets x (n_sbf n_rbf)
  std::vector<int> atom_graph;      // atom -> molecule within a merged batch
  int n_graphs = 1;
};

SurrogateGraph build_surrogate_graph(const SurrogateConfig& config, const Geometry& geometry,
                                     const std::vector<int>& charges);

/// Disjoint union of several graphs; the forward pass then returns one
/// energy per input graph.
SurrogateGraph merge_graphs(const std::vector<SurrogateGraph>& graphs);

/// Smooth polynomial cutoff u(x), x = d / cutoff; zero for x >= 1.
double poly_envelope(double x, int p);

/// An E(3)-invariant directional message-passing regressor: Bessel radial
/// basis with polynomial cutoff, cos(l theta) angular basis on triplets,
/// residual interaction blocks, per-block output heads and a per-Z atomic
/// reference energy.
class Surrogate {
 public:
  explicit Surrogate(SurrogateConfig config = {});
  const SurrogateConfig& config() const noexcept { return config_; }
  ParamTree init_params(Rng& rng) const;

  /// n_graphs x 1 energies.
  template <class B>
  typename B::T forward(B& backend, const ParamTree& params, bool track,
                        const SurrogateGraph& graph) const;

  double energy(const ParamTree& params, const Geometry& geometry,
                const std::vector<int>& charges) const;
  Vector energies(const ParamTree& params, const std::vector<Geometry>& geometries,
                  const std::vector<int>& charges) const;
  /// Gradient of sum_c seeds_c V(geometry_c) with respect to the parameters.
  Vector vjp(const ParamTree& params, const std::vector<Geometry>& geometries,
             const std::vector<int>& charges, const Vector& seeds) const;
  /// Energies and, in the same pass, the gradient of sum_c w_c V_c with
  /// w = seeds_of(energies).
  Vector value_and_vjp(const ParamTree& params, const std::vector<Geometry>& geometries,
                       const std::vector<int>& charges,
                       const std::function<Vector(const Vector&)>& seeds_of,
                       Vector* energies) const;

 private:
  SurrogateConfig config_;
};

/// sqrt((1/C) sum_c (E_c - V_c)^2 / max(sigma_c, 1e-12)).
double surrogate_loss(const Vector& predictions, const EnergyStats& stats);
/// d loss / d predictions (zero when the loss is zero).
Vector surrogate_loss_grad(const Vector& predictions, const EnergyStats& stats);

/// sqrt(2 / pi) * mean sigma_c.
double estimate_mad(const EnergyStats& stats);

/// gamma_base + gamma_high when L < zeta D, else gamma_base.
double adaptive_decay(double loss_smooth, double mad_smooth, double gamma_base = 0.99,
                      double gamma_high = 0.0099, double zeta = 1.05);

struct SurrogateTrainerOptions {
  double gamma_base = 0.99;
  double gamma_high = 0.0099;
  double zeta = 1.05;
  int n_inner = 5;
  double ema_decay = 0.999;
  double lr = 1e-4;
  double lr_decay = 10000.0;
  double weight_decay = 0.01;
  double force_gamma = -1.0;  // test hook: >= 0 overrides the adaptive decay
  void validate() const;
};

struct SurrogateTrainerState {
  ParamTree live;    // chi'
  ParamTree merged;  // chi, used for inference
  AdamWState adam;
  ScalarEma loss_ema{0.999};
  ScalarEma mad_ema{0.999};
  double gamma = 0.0;
  double last_loss = 0.0;
  long long t = 0;
  bool offsets_initialized = false;
};

SurrogateTrainerState init_surrogate_trainer(const Surrogate& model, Rng& rng,
                                             const SurrogateTrainerOptions& options);

/// One outer iteration: N_surr AdamW steps from the merged parameters on the
/// current batch, EMA updates of loss and MAD, adaptive decay, merge.
/// Returns the loss of the merged parameters before the update.
double online_update(const Surrogate& model, SurrogateTrainerState& state,
                     const std::vector<Geometry>& geometries, const std::vector<int>& charges,
                     const EnergyStats& stats, const SurrogateTrainerOptions& options);

}  // namespace planet

#endif  // PLANET_SURROGATE_HPP
