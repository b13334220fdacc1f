// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/param_tree.hpp>

namespace planet {

int ParamTree::add(const std::string& name, int rows, int cols) {
  require(!frozen_, ErrorCode::kInvalidArgument,
          "ParamTree: cannot add leaf '" + name + "' after freeze()");
  require(rows >= 0 && cols >= 0, ErrorCode::kDimension,
          "ParamTree: negative shape for leaf '" + name + "'");
  require(!contains(name), ErrorCode::kInvalidArgument,
          "ParamTree: duplicate leaf '" + name + "'");
  LeafInfo info{name, rows, cols, data_.size()};
  const std::ptrdiff_t old = data_.size();
  data_.conservativeResize(old + info.size());
  data_.segment(old, info.size()).setZero();
  leaves_.push_back(info);
  const int id = static_cast<int>(leaves_.size()) - 1;
  index_.emplace(name, id);
  return id;
}

int ParamTree::index(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kInvalidArgument,
          "ParamTree: no leaf named '" + name + "'");
  return it->second;
}

Eigen::Map<Matrix> ParamTree::leaf(int id) {
  const LeafInfo& l = info(id);
  return {data_.data() + l.offset, l.rows, l.cols};
}

Eigen::Map<const Matrix> ParamTree::leaf(int id) const {
  const LeafInfo& l = info(id);
  return {data_.data() + l.offset, l.rows, l.cols};
}

ParamRef ParamTree::ref(int id, bool track) const {
  const LeafInfo& l = info(id);
  return {data_.data() + l.offset, l.rows, l.cols, track ? l.offset : -1};
}

ParamTree ParamTree::with_values(const Vector& values) const {
  require(values.size() == size(), ErrorCode::kDimension,
          "ParamTree: flat vector has " + std::to_string(values.size()) +
              " entries, tree expects " + std::to_string(size()));
  ParamTree out = *this;
  out.data_ = values;
  return out;
}

bool ParamTree::same_structure(const ParamTree& other) const {
  if (leaves_.size() != other.leaves_.size()) return false;
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const LeafInfo& a = leaves_[i];
    const LeafInfo& b = other.leaves_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

void ParamTree::require_same_structure(const ParamTree& other, const char* what) const {
  require(same_structure(other), ErrorCode::kDimension,
          std::string(what) + ": parameter trees have different structure");
}

void ParamTree::round_to_float() {
  for (std::ptrdiff_t i = 0; i < data_.size(); ++i)
    data_[i] = static_cast<double>(static_cast<float>(data_[i]));
}

ParamTree tree_add(const ParamTree& a, const ParamTree& b) {
  a.require_same_structure(b, "tree_add");
  return a.with_values(a.flat() + b.flat());
}

ParamTree tree_scale(const ParamTree& a, double s) { return a.with_values(s * a.flat()); }

}  // namespace planet
