// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_CORE_HPP
#define PLANET_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace planet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kDimension,
  kUnsupported,
  kConfig,
  kIo,
  kVersion,
  kNumerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

/// Deterministic random stream.
///
/// Streams are derived, not advanced: `child(a, b, c)` hashes the parent seed
/// with the given labels, so a walker's proposals at iteration t depend only on
/// (seed, t, geometry, walker) and never on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace planet

#endif  // PLANET_CORE_HPP
