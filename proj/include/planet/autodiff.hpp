// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// Evaluation backends for the network primitives.
//
// Every model in this library (wave function, MetaGNN, surrogate) is written
// once as a template over a backend `B` exposing `typename B::T` and the
// primitive set below. Three backends give three semantics to the same code:
//
//   ValueBackend  plain matrices, used for sampling and inference
//   DualBackend   value + jacobian + laplacian trace with respect to a fixed
//                 set of D input coordinates (forward propagation)
//   TapeBackend   reverse mode, gradients with respect to tracked ParamRefs
//
// Primitive set: coords, constant, param, linear, act, add, sub, mul, scale,
// right_mul, concat_cols, gather_rows, scatter_rows, select_rows, sum_rows,
// norm_rows, reshape, envelope, gather_elems, log_det_sum.

#ifndef PLANET_AUTODIFF_HPP
#define PLANET_AUTODIFF_HPP

#include <planet/linalg.hpp>
#include <planet/param_tree.hpp>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace planet {

enum class Act { kIdentity, kSilu, kScaledSilu, kTanh, kExp, kSquare, kSoftplus };

/// Standard deviation of SiLU(x) for x ~ N(0, 1); kScaledSilu divides by it.
inline constexpr double kSiluStd = 0.559538467841507;

struct ActValue {
  double f;
  double d1;
  double d2;
};
ActValue eval_act(Act act, double x);
const char* act_name(Act act);

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

using IndexSpan = std::span<const int>;
using MaskSpan = std::span<const unsigned char>;

// ---------------------------------------------------------------------------
// Value backend

class ValueBackend {
 public:
  using T = Matrix;
  struct Signed {
    int sign;
    T value;
  };

  T coords(const Matrix& x) { return x; }
  T constant(const Matrix& x) { return x; }
  T param(ParamRef p) { return p.map(); }
  T linear(const T& x, ParamRef w);
  T linear(const T& x, ParamRef w, ParamRef b);
  T act(const T& x, Act a);
  T add(const T& a, const T& b) { return a + b; }
  T sub(const T& a, const T& b) { return a - b; }
  T mul(const T& a, const T& b) { return a.cwiseProduct(b); }
  T scale(const T& a, double s) { return s * a; }
  T right_mul(const T& x, const Matrix& m) { return x * m; }
  T concat_cols(std::initializer_list<const T*> parts);
  T gather_rows(const T& x, IndexSpan idx);
  T scatter_rows(const T& x, IndexSpan seg, int n_out);
  T select_rows(const T& a, const T& b, MaskSpan take_a);
  T sum_rows(const T& x) { return x.colwise().sum(); }
  T norm_rows(const T& x) { return x.rowwise().norm(); }
  T reshape(const T& x, int rows, int cols);
  T envelope(const T& dist, ParamRef pi, ParamRef sigma_raw);
  T gather_elems(const T& src, IndexSpan idx, int rows, int cols);
  Signed log_det_sum(const T& stacked, int n_det, ParamRef weights);

  static const Matrix& value(const T& x) { return x; }
};

// ---------------------------------------------------------------------------
// Dual backend

/// Value, jacobian and laplacian trace of an R x C array with respect to D
/// input coordinates, stored as one (D + 2) R x C matrix of row blocks:
/// block 0 is the value, blocks 1..D the partial derivatives and block D + 1
/// the sum of second derivatives over all D inputs.
struct DualBatch {
  Matrix stack;
  int rows = 0;
  int cols = 0;
  int n_inputs = 0;

  auto value() { return stack.topRows(rows); }
  auto value() const { return stack.topRows(rows); }
  auto jacobian(int d) { return stack.middleRows(static_cast<Eigen::Index>(1 + d) * rows, rows); }
  auto jacobian(int d) const {
    return stack.middleRows(static_cast<Eigen::Index>(1 + d) * rows, rows);
  }
  auto laplacian() { return stack.bottomRows(rows); }
  auto laplacian() const { return stack.bottomRows(rows); }
  int blocks() const { return n_inputs + 2; }
};

class DualBackend {
 public:
  using T = DualBatch;
  struct Signed {
    int sign;
    T value;
  };

  explicit DualBackend(int n_inputs) : n_inputs_(n_inputs) {}
  int n_inputs() const noexcept { return n_inputs_; }

  /// Seeds the jacobian: entry (i, k) of `x` is input coordinate i * cols + k.
  T coords(const Matrix& x);
  T constant(const Matrix& x);
  T param(ParamRef p) { return constant(p.map()); }
  T linear(const T& x, ParamRef w);
  T linear(const T& x, ParamRef w, ParamRef b);
  T act(const T& x, Act a);
  T add(const T& a, const T& b);
  T sub(const T& a, const T& b);
  T mul(const T& a, const T& b);
  T scale(const T& a, double s);
  T right_mul(const T& x, const Matrix& m);
  T concat_cols(std::initializer_list<const T*> parts);
  T gather_rows(const T& x, IndexSpan idx);
  T scatter_rows(const T& x, IndexSpan seg, int n_out);
  T select_rows(const T& a, const T& b, MaskSpan take_a);
  T sum_rows(const T& x);
  T norm_rows(const T& x);
  T reshape(const T& x, int rows, int cols);
  T envelope(const T& dist, ParamRef pi, ParamRef sigma_raw);
  T gather_elems(const T& src, IndexSpan idx, int rows, int cols);
  Signed log_det_sum(const T& stacked, int n_det, ParamRef weights);

  static Matrix value(const T& x) { return x.value(); }

 private:
  T blank(int rows, int cols) const;
  int n_inputs_;
};

// ---------------------------------------------------------------------------
// Tape backend

struct Var {
  int id = -1;
};

/// Reverse-mode tape. Parameter gradients accumulate into a flat vector laid
/// out like the ParamTree the tracked ParamRefs came from. A tape may be
/// replayed backwards several times with different output seeds.
class TapeBackend {
 public:
  using T = Var;
  struct Signed {
    int sign;
    T value;
  };

  explicit TapeBackend(std::ptrdiff_t n_params) : param_grad_(Vector::Zero(n_params)) {}

  T coords(const Matrix& x) { return constant(x); }
  T constant(const Matrix& x);
  T param(ParamRef p);
  T linear(const T& x, ParamRef w);
  T linear(const T& x, ParamRef w, ParamRef b);
  T act(const T& x, Act a);
  T add(const T& a, const T& b);
  T sub(const T& a, const T& b);
  T mul(const T& a, const T& b);
  T scale(const T& a, double s);
  T right_mul(const T& x, const Matrix& m);
  T concat_cols(std::initializer_list<const T*> parts);
  T gather_rows(const T& x, IndexSpan idx);
  T scatter_rows(const T& x, IndexSpan seg, int n_out);
  T select_rows(const T& a, const T& b, MaskSpan take_a);
  T sum_rows(const T& x);
  T norm_rows(const T& x);
  T reshape(const T& x, int rows, int cols);
  T envelope(const T& dist, ParamRef pi, ParamRef sigma_raw);
  T gather_elems(const T& src, IndexSpan idx, int rows, int cols);
  Signed log_det_sum(const T& stacked, int n_det, ParamRef weights);

  const Matrix& value(const T& x) const { return nodes_.at(static_cast<std::size_t>(x.id)).value; }

  /// Clears node and parameter gradients, then propagates the seeds.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);
  void backward(Var out, double seed = 1.0);
  const Vector& param_grad() const noexcept { return param_grad_; }
  std::size_t n_nodes() const noexcept { return nodes_.size(); }

 private:
  using BackFn = std::function<void(TapeBackend&, const Matrix&)>;
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    BackFn back;
  };

  Var push(Matrix value, bool needs_grad, BackFn back);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  void accumulate(Var v, const Matrix& g);
  void accumulate_param(const ParamRef& p, const Matrix& g);

  std::vector<Node> nodes_;
  Vector param_grad_;
};

}  // namespace planet

#endif  // PLANET_AUTODIFF_HPP
