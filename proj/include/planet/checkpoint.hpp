// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_CHECKPOINT_HPP
#define PLANET_CHECKPOINT_HPP

#include <planet/config.hpp>
#include <planet/trainer.hpp>

#include <string>

namespace planet {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to resume or evaluate a run.
struct Checkpoint {
  int version = kCheckpointVersion;
  RunConfig config;
  TrainState state;
};

/// CBOR container. Parameters are stored bit-exactly together with their
/// leaf layout; loading checks both against the model built from the
/// stored config.
std::string encode_checkpoint(const Trainer& trainer, const TrainState& state);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Trainer& trainer, const TrainState& state);
Checkpoint load_checkpoint(const std::string& path);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace planet

#endif  // PLANET_CHECKPOINT_HPP
