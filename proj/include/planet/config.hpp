// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_CONFIG_HPP
#define PLANET_CONFIG_HPP

#include <planet/metagnn.hpp>
#include <planet/surrogate.hpp>
#include <planet/vmc.hpp>
#include <planet/wavefunction.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace planet {

/// Per-parameter override of a dataset's training domain.
struct DomainOverride {
  double lo = 0.0;
  double hi = 0.0;
  double step = -1.0;  // < 0 keeps the dataset's walk step
};

struct SystemConfig {
  std::string name = "H2";
  std::map<std::string, DomainOverride> domain;
  std::string grid_file;  // optional evaluation grid CSV
};

struct OptimConfig {
  int iterations = 60000;
  int batch_size = 4096;  // walkers per step, split evenly over geometries
  int n_geometries = 16;
  double lr = 0.1;
  double lr_decay = 1000.0;
  double damping = 1e-4;
  int cg_steps = 100;
  std::string cg_route = "auto";  // auto | parameter | sample
  double clip_scale = 5.0;
  bool coordinate_transform = true;
  bool canonical_frame = false;
  double max_abort_fraction = 0.1;  // abort the run when this many steps diverge
};

struct McmcConfig {
  int steps = 40;
  double init_step = 0.02;
  int burn_in = 100;
};

struct PretrainConfig {
  int iterations = 2000;
  double lr = 0.003;
  std::string provider = "hydrogenic";  // or file:<orbitals.json>
  int mcmc_steps = 1;
};

struct RunSettings {
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  std::string precision = "f64";  // f32 rounds stored parameters to binary32
  int checkpoint_every = 1000;
  int threads = 0;  // 0: library default
  int log_every = 1;
  int dead_neuron_every = 0;  // 0: off
};

struct RunConfig {
  SystemConfig system;
  WfConfig wavefunction;
  bool metagnn_enabled = true;
  MetaGnnConfig metagnn;
  bool surrogate_enabled = true;
  SurrogateConfig surrogate;
  SurrogateTrainerOptions surrogate_trainer;
  OptimConfig optim;
  McmcConfig mcmc;
  PretrainConfig pretrain;
  EvalOptions evaluation;
  RunSettings run;

  void validate() const;
};

/// Strict parsing: unknown keys, wrong types and out-of-range values are
/// config errors. Missing keys keep their defaults.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config, int indent = 2);

/// Key paths accepted by the parser ("optim.lr", ...), in document order.
std::vector<std::string> config_keys();

/// Applies `path=value` assignments (value parsed as JSON, bare strings allowed).
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace planet

#endif  // PLANET_CONFIG_HPP
