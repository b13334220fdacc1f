// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_TRAINER_HPP
#define PLANET_TRAINER_HPP

#include <planet/config.hpp>
#include <planet/metagnn.hpp>
#include <planet/pretrain.hpp>
#include <planet/surrogate.hpp>
#include <planet/vmc.hpp>
#include <planet/wavefunction.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace planet {

// Stream tags; every random draw in a run derives from (seed, tag, ...).
enum StreamTag : std::uint64_t {
  kTagWfInit = 1,
  kTagGnnInit,
  kTagSurrogateInit,
  kTagWalkerInit,
  kTagPretrainWalk,
  kTagPretrainMcmc,
  kTagBurnIn,
  kTagWalk,
  kTagMcmc,
  kTagRestart,
  kTagRestartBurnIn,
  kTagEval,
};

struct TrainState {
  ParamTree wf;
  ParamTree gnn;  // empty without MetaGNN
  std::vector<WalkerState> walkers;  // one per geometry
  long long t = 0;
  long long aborted_steps = 0;
  std::optional<SurrogateTrainerState> surrogate;
};

struct StepResult {
  EnergyStats stats;
  std::vector<Vector> geometry_params;
  double acceptance = 0.0;
  double lr = 0.0;
  double cg_residual = 0.0;
  double surrogate_loss = 0.0;
  double gamma = 0.0;
  bool surrogate_active = false;
  bool aborted = false;
  std::string diagnostic;
};

/// Dataset, models and the training procedure for one RunConfig.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }
  const Dataset& dataset() const noexcept { return dataset_; }
  const WaveFunction& wavefunction() const noexcept { return *wf_; }
  const MetaGnn* metagnn() const noexcept { return gnn_.get(); }
  const Surrogate& surrogate() const noexcept { return surrogate_; }
  const std::vector<int>& charges() const noexcept { return dataset_.molecule.charges; }
  int walkers_per_geometry() const noexcept { return config_.optim.batch_size / config_.optim.n_geometries; }

  /// Fresh parameters, geometry walkers spread over the domain and electron
  /// walkers around the nuclei.
  TrainState init() const;

  Frame frame(const Geometry& geometry) const;
  /// Wave-function parameters for one geometry (MetaGNN applied when present).
  ParamTree adapted(const TrainState& state, const Geometry& geometry) const;

  /// One pretraining iteration over all geometries; returns the mean loss.
  double pretrain_step(TrainState& state, long long it, AdamWState& adam,
                       const OrbitalProvider& provider) const;
  void pretrain(TrainState& state, std::ostream* log = nullptr) const;
  /// `sweeps` adaptive Metropolis sweeps for every geometry; sweep s of
  /// geometry c draws from base.child(s, c).
  void thermalize(TrainState& state, int sweeps, const Rng& base) const;

  /// One joint optimization step.
  StepResult step(TrainState& state) const;

  EnergyEstimate evaluate(const TrainState& state, const Vector& geometry_params,
                          const EvalOptions& options, std::uint64_t tag) const;
  double surrogate_energy(const TrainState& state, const Vector& geometry_params) const;

  /// Header and row of the training log CSV.
  std::string log_header() const;
  std::string log_row(const StepResult& r, long long t) const;

  Rng stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return Rng(config_.run.seed).child(a, b, c);
  }

  std::ptrdiff_t n_params() const;
  Vector flat_params(const TrainState& state) const;
  void set_flat_params(TrainState& state, const Vector& theta) const;

 private:
  // Scores of one geometry's walkers into columns col0.. of a P x n matrix.
  void score_columns(const TrainState& state, const ParamTree& adapted, const Geometry& geometry,
                     const std::vector<Matrix>& electrons, Matrix& scores_t,
                     Eigen::Index col0) const;

  RunConfig config_;
  Dataset dataset_;
  std::unique_ptr<WaveFunction> wf_;
  std::unique_ptr<MetaGnn> gnn_;
  Surrogate surrogate_;
};

/// Applies a RunConfig's domain overrides to a dataset.
void apply_domain_overrides(Dataset& dataset, const SystemConfig& system);

}  // namespace planet

#endif  // PLANET_TRAINER_HPP
