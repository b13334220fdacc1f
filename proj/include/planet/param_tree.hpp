// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_PARAM_TREE_HPP
#define PLANET_PARAM_TREE_HPP

#include <planet/core.hpp>

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace planet {

/// Read-only view of one parameter leaf, tagged with its offset in the flat
/// gradient vector of the owning tree (-1 when gradients are not wanted).
struct ParamRef {
  const double* data = nullptr;
  int rows = 0;
  int cols = 0;
  std::ptrdiff_t offset = -1;

  Eigen::Map<const Matrix> map() const { return {data, rows, cols}; }
  std::ptrdiff_t size() const { return static_cast<std::ptrdiff_t>(rows) * cols; }
  ParamRef constant() const { return {data, rows, cols, -1}; }
};

struct LeafInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::ptrdiff_t offset = 0;
  std::ptrdiff_t size() const { return static_cast<std::ptrdiff_t>(rows) * cols; }
};

/// Named hierarchical collection of real arrays backed by one contiguous
/// vector. Names use '/' as the hierarchy separator ("layer0/W_single").
/// Leaves are column-major matrices; vectors are stored as n x 1.
class ParamTree {
 public:
  ParamTree() = default;

  /// Appends a zero-filled leaf. Only valid before `freeze()`.
  int add(const std::string& name, int rows, int cols = 1);
  void freeze() { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  int index(const std::string& name) const;
  const LeafInfo& info(int leaf) const { return leaves_.at(static_cast<std::size_t>(leaf)); }
  const LeafInfo& info(const std::string& name) const { return info(index(name)); }
  const std::vector<LeafInfo>& leaves() const noexcept { return leaves_; }

  Eigen::Map<Matrix> leaf(int leaf);
  Eigen::Map<const Matrix> leaf(int leaf) const;
  Eigen::Map<Matrix> leaf(const std::string& name) { return leaf(index(name)); }
  Eigen::Map<const Matrix> leaf(const std::string& name) const { return leaf(index(name)); }

  /// View with gradient offset; `track=false` yields a constant reference.
  ParamRef ref(int leaf, bool track = true) const;
  ParamRef ref(const std::string& name, bool track = true) const { return ref(index(name), track); }

  std::ptrdiff_t size() const noexcept { return data_.size(); }
  const Vector& flat() const noexcept { return data_; }
  Vector& flat() noexcept { return data_; }

  /// Copy of the structure with values replaced by `values`.
  ParamTree with_values(const Vector& values) const;
  ParamTree zeros_like() const { return with_values(Vector::Zero(size())); }

  bool same_structure(const ParamTree& other) const;
  void require_same_structure(const ParamTree& other, const char* what) const;

  /// Rounds every entry to the nearest binary32 value.
  void round_to_float();

 private:
  std::vector<LeafInfo> leaves_;
  std::map<std::string, int> index_;
  Vector data_;
  bool frozen_ = false;
};

/// Elementwise a + b.
ParamTree tree_add(const ParamTree& a, const ParamTree& b);
/// Elementwise s * a.
ParamTree tree_scale(const ParamTree& a, double s);

}  // namespace planet

#endif  // PLANET_PARAM_TREE_HPP
