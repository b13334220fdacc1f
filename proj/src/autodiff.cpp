// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/autodiff.hpp>

#include <cmath>
#include <limits>
#include <memory>

namespace planet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kDimension,
          std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()));
}

void check_linear(Eigen::Index in_cols, const ParamRef& w, const char* op) {
  require(in_cols == w.cols, ErrorCode::kDimension,
          std::string(op) + ": input has " + std::to_string(in_cols) +
              " columns, weight expects " + std::to_string(w.cols));
}

Matrix gather_rows_impl(const Matrix& x, IndexSpan idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0)
      out.row(static_cast<Eigen::Index>(r)).setZero();
    else
      out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  }
  return out;
}

Matrix scatter_rows_impl(const Matrix& x, IndexSpan seg, int n_out) {
  require(static_cast<std::size_t>(x.rows()) == seg.size(), ErrorCode::kDimension,
          "scatter_rows: segment ids do not match row count");
  Matrix out = Matrix::Zero(n_out, x.cols());
  for (std::size_t r = 0; r < seg.size(); ++r)
    if (seg[r] >= 0) out.row(seg[r]) += x.row(static_cast<Eigen::Index>(r));
  return out;
}

Matrix select_rows_impl(const Matrix& a, const Matrix& b, MaskSpan take_a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    out.row(r) = take_a[static_cast<std::size_t>(r)] ? a.row(r) : b.row(r);
  return out;
}

Matrix gather_elems_impl(const Matrix& src, IndexSpan idx, int rows, int cols) {
  Matrix out(rows, cols);
  const double* s = src.data();
  double* o = out.data();
  for (std::size_t k = 0; k < idx.size(); ++k) o[k] = idx[k] < 0 ? 0.0 : s[idx[k]];
  return out;
}

Matrix reshape_impl(const Matrix& x, int rows, int cols) {
  require(x.size() == static_cast<Eigen::Index>(rows) * cols, ErrorCode::kDimension,
          "reshape: element count changes");
  return Eigen::Map<const Matrix>(x.data(), rows, cols);
}

Matrix concat_impl(std::initializer_list<const Matrix*> parts) {
  Eigen::Index rows = -1, cols = 0;
  for (const Matrix* p : parts) {
    if (rows < 0) rows = p->rows();
    require(p->rows() == rows, ErrorCode::kDimension, "concat_cols: row counts differ");
    cols += p->cols();
  }
  Matrix out(rows < 0 ? 0 : rows, cols);
  Eigen::Index c = 0;
  for (const Matrix* p : parts) {
    out.middleCols(c, p->cols()) = *p;
    c += p->cols();
  }
  return out;
}

struct ActArrays {
  Matrix f, d1, d2;
};

ActArrays eval_act_arrays(Act a, const Matrix& x, bool second) {
  ActArrays out{Matrix(x.rows(), x.cols()), Matrix(x.rows(), x.cols()), Matrix()};
  if (second) out.d2.resize(x.rows(), x.cols());
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const ActValue v = eval_act(a, x.data()[i]);
    out.f.data()[i] = v.f;
    out.d1.data()[i] = v.d1;
    if (second) out.d2.data()[i] = v.d2;
  }
  return out;
}

Matrix act_values(Act a, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const Eigen::Index n = x.size();
  const double* in = x.data();
  double* o = out.data();
  switch (a) {
    case Act::kIdentity:
      return x;
    case Act::kTanh:
      for (Eigen::Index i = 0; i < n; ++i) o[i] = std::tanh(in[i]);
      return out;
    case Act::kSilu:
    case Act::kScaledSilu: {
      const double s = a == Act::kScaledSilu ? 1.0 / kSiluStd : 1.0;
      for (Eigen::Index i = 0; i < n; ++i) o[i] = s * in[i] / (1.0 + std::exp(-in[i]));
      return out;
    }
    default:
      for (Eigen::Index i = 0; i < n; ++i) o[i] = eval_act(a, in[i]).f;
      return out;
  }
}

/// Envelope terms for one nucleus column: P(j, c) = pi(c, m) exp(-sigma(c, m) d(j, m)).
Matrix envelope_terms(const Matrix& dist, const Matrix& pi, const Matrix& sigma, Eigen::Index m) {
  Matrix e = (-(dist.col(m) * sigma.col(m).transpose())).array().exp().matrix();
  return e.array().rowwise() * pi.col(m).transpose().array();
}

Matrix softplus_matrix(const Matrix& raw) {
  return raw.unaryExpr([](double v) { return softplus(v); });
}

void check_envelope(const Matrix& dist, const ParamRef& pi, const ParamRef& sigma_raw) {
  require(pi.rows == sigma_raw.rows && pi.cols == sigma_raw.cols, ErrorCode::kDimension,
          "envelope: pi and sigma shapes differ");
  require(dist.cols() == pi.cols, ErrorCode::kDimension,
          "envelope: distance columns must equal the nucleus count");
}

struct DetTerms {
  std::vector<SignedLog> dets;   // slogdet of each block
  std::vector<Matrix> inverses;  // empty when singular
  SignedLog total;               // log |sum_k w_k det_k|
  std::vector<double> ratio;     // w_k det_k / psi, sums to 1
  std::vector<double> det_over_psi;
};

DetTerms det_terms(const Matrix& stacked, int n_det, const Eigen::Map<const Matrix>& w,
                   bool want_inverse) {
  require(n_det > 0 && stacked.rows() == static_cast<Eigen::Index>(n_det) * stacked.cols(),
          ErrorCode::kDimension, "log_det_sum: expected n_det stacked square blocks");
  require(w.size() == n_det, ErrorCode::kDimension, "log_det_sum: weight count mismatch");
  const Eigen::Index n = stacked.cols();
  DetTerms t;
  std::vector<double> logs(static_cast<std::size_t>(n_det));
  std::vector<int> signs(static_cast<std::size_t>(n_det));
  for (int k = 0; k < n_det; ++k) {
    LuFactor lu(stacked.middleRows(k * n, n));
    SignedLog d = lu.slogdet();
    t.dets.push_back(d);
    t.inverses.push_back(want_inverse && !lu.singular() ? lu.inverse() : Matrix());
    const double wk = w.data()[k];
    logs[static_cast<std::size_t>(k)] = d.log_abs + std::log(std::abs(wk));
    signs[static_cast<std::size_t>(k)] = wk == 0.0 ? 0 : d.sign * (wk > 0 ? 1 : -1);
  }
  t.total = signed_logsumexp(logs, signs);
  t.ratio.assign(static_cast<std::size_t>(n_det), 0.0);
  t.det_over_psi.assign(static_cast<std::size_t>(n_det), 0.0);
  if (t.total.sign != 0) {
    for (int k = 0; k < n_det; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      if (signs[ks] != 0)
        t.ratio[ks] = signs[ks] * t.total.sign * std::exp(logs[ks] - t.total.log_abs);
      if (t.dets[ks].sign != 0)
        t.det_over_psi[ks] =
            t.dets[ks].sign * t.total.sign * std::exp(t.dets[ks].log_abs - t.total.log_abs);
    }
  }
  return t;
}

}  // namespace

ActValue eval_act(Act act, double x) {
  switch (act) {
    case Act::kIdentity:
      return {x, 1.0, 0.0};
    case Act::kSilu:
    case Act::kScaledSilu: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      const double c = act == Act::kScaledSilu ? 1.0 / kSiluStd : 1.0;
      return {c * x * s, c * (s + x * s * (1.0 - s)),
              c * s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))};
    }
    case Act::kTanh: {
      const double t = std::tanh(x);
      return {t, 1.0 - t * t, -2.0 * t * (1.0 - t * t)};
    }
    case Act::kExp: {
      const double e = std::exp(x);
      return {e, e, e};
    }
    case Act::kSquare:
      return {x * x, 2.0 * x, 2.0};
    case Act::kSoftplus: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return {softplus(x), s, s * (1.0 - s)};
    }
  }
  fail(ErrorCode::kUnsupported, "eval_act: unknown activation");
}

const char* act_name(Act act) {
  switch (act) {
    case Act::kIdentity: return "identity";
    case Act::kSilu: return "silu";
    case Act::kScaledSilu: return "scaled_silu";
    case Act::kTanh: return "tanh";
    case Act::kExp: return "exp";
    case Act::kSquare: return "square";
    case Act::kSoftplus: return "softplus";
  }
  return "unknown";
}

// ===========================================================================
// ValueBackend

Matrix ValueBackend::linear(const Matrix& x, ParamRef w) {
  check_linear(x.cols(), w, "linear");
  return x * w.map().transpose();
}

Matrix ValueBackend::linear(const Matrix& x, ParamRef w, ParamRef b) {
  Matrix y = linear(x, w);
  y.rowwise() += b.map().col(0).transpose();
  return y;
}

Matrix ValueBackend::act(const Matrix& x, Act a) { return act_values(a, x); }

Matrix ValueBackend::concat_cols(std::initializer_list<const Matrix*> parts) {
  return concat_impl(parts);
}

Matrix ValueBackend::gather_rows(const Matrix& x, IndexSpan idx) { return gather_rows_impl(x, idx); }

Matrix ValueBackend::scatter_rows(const Matrix& x, IndexSpan seg, int n_out) {
  return scatter_rows_impl(x, seg, n_out);
}

Matrix ValueBackend::select_rows(const Matrix& a, const Matrix& b, MaskSpan take_a) {
  check_same_shape(a, b, "select_rows");
  return select_rows_impl(a, b, take_a);
}

Matrix ValueBackend::reshape(const Matrix& x, int rows, int cols) { return reshape_impl(x, rows, cols); }

Matrix ValueBackend::envelope(const Matrix& dist, ParamRef pi, ParamRef sigma_raw) {
  check_envelope(dist, pi, sigma_raw);
  const Matrix p = pi.map();
  const Matrix s = softplus_matrix(sigma_raw.map());
  Matrix out = Matrix::Zero(dist.rows(), pi.rows);
  for (Eigen::Index m = 0; m < dist.cols(); ++m) out += envelope_terms(dist, p, s, m);
  return out;
}

Matrix ValueBackend::gather_elems(const Matrix& src, IndexSpan idx, int rows, int cols) {
  return gather_elems_impl(src, idx, rows, cols);
}

ValueBackend::Signed ValueBackend::log_det_sum(const Matrix& stacked, int n_det, ParamRef weights) {
  DetTerms t = det_terms(stacked, n_det, weights.map(), false);
  return {t.total.sign, Matrix::Constant(1, 1, t.total.log_abs)};
}

// ===========================================================================
// DualBackend

DualBatch DualBackend::blank(int rows, int cols) const {
  DualBatch out;
  out.rows = rows;
  out.cols = cols;
  out.n_inputs = n_inputs_;
  out.stack.resize(static_cast<Eigen::Index>(n_inputs_ + 2) * rows, cols);
  return out;
}

DualBatch DualBackend::coords(const Matrix& x) {
  require(x.size() == n_inputs_, ErrorCode::kDimension,
          "coords: input array size must equal the number of differentiation inputs");
  DualBatch out = constant(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < x.cols(); ++k)
      out.jacobian(static_cast<int>(i * x.cols() + k))(i, k) = 1.0;
  return out;
}

DualBatch DualBackend::constant(const Matrix& x) {
  DualBatch out = blank(static_cast<int>(x.rows()), static_cast<int>(x.cols()));
  out.stack.setZero();
  out.value() = x;
  return out;
}

DualBatch DualBackend::linear(const DualBatch& x, ParamRef w) {
  check_linear(x.cols, w, "linear");
  DualBatch out;
  out.rows = x.rows;
  out.cols = w.rows;
  out.n_inputs = n_inputs_;
  out.stack.noalias() = x.stack * w.map().transpose();
  return out;
}

DualBatch DualBackend::linear(const DualBatch& x, ParamRef w, ParamRef b) {
  DualBatch out = linear(x, w);
  out.value().rowwise() += b.map().col(0).transpose();
  return out;
}

DualBatch DualBackend::act(const DualBatch& x, Act a) {
  if (a == Act::kIdentity) return x;
  DualBatch out = blank(x.rows, x.cols);
  ActArrays v = eval_act_arrays(a, x.value(), true);
  out.value() = v.f;
  Matrix sq = Matrix::Zero(x.rows, x.cols);
  for (int d = 0; d < n_inputs_; ++d) {
    const auto j = x.jacobian(d);
    out.jacobian(d) = v.d1.cwiseProduct(j);
    sq += j.cwiseAbs2();
  }
  out.laplacian() = v.d1.cwiseProduct(x.laplacian()) + v.d2.cwiseProduct(sq);
  return out;
}

DualBatch DualBackend::add(const DualBatch& a, const DualBatch& b) {
  check_same_shape(a.stack, b.stack, "add");
  DualBatch out = a;
  out.stack += b.stack;
  return out;
}

DualBatch DualBackend::sub(const DualBatch& a, const DualBatch& b) {
  check_same_shape(a.stack, b.stack, "sub");
  DualBatch out = a;
  out.stack -= b.stack;
  return out;
}

DualBatch DualBackend::mul(const DualBatch& a, const DualBatch& b) {
  check_same_shape(a.stack, b.stack, "mul");
  DualBatch out = blank(a.rows, a.cols);
  const auto av = a.value();
  const auto bv = b.value();
  out.value() = av.cwiseProduct(bv);
  Matrix cross = Matrix::Zero(a.rows, a.cols);
  for (int d = 0; d < n_inputs_; ++d) {
    out.jacobian(d) = a.jacobian(d).cwiseProduct(bv) + av.cwiseProduct(b.jacobian(d));
    cross += a.jacobian(d).cwiseProduct(b.jacobian(d));
  }
  out.laplacian() =
      a.laplacian().cwiseProduct(bv) + av.cwiseProduct(b.laplacian()) + 2.0 * cross;
  return out;
}

DualBatch DualBackend::scale(const DualBatch& a, double s) {
  DualBatch out = a;
  out.stack *= s;
  return out;
}

DualBatch DualBackend::right_mul(const DualBatch& x, const Matrix& m) {
  require(x.cols == m.rows(), ErrorCode::kDimension, "right_mul: shape mismatch");
  DualBatch out;
  out.rows = x.rows;
  out.cols = static_cast<int>(m.cols());
  out.n_inputs = n_inputs_;
  out.stack.noalias() = x.stack * m;
  return out;
}

DualBatch DualBackend::concat_cols(std::initializer_list<const DualBatch*> parts) {
  int rows = -1;
  for (const DualBatch* p : parts) {
    if (rows < 0) rows = p->rows;
    require(p->rows == rows, ErrorCode::kDimension, "concat_cols: row counts differ");
  }
  Eigen::Index cols = 0;
  for (const DualBatch* p : parts) cols += p->cols;
  DualBatch out = blank(rows < 0 ? 0 : rows, static_cast<int>(cols));
  Eigen::Index c = 0;
  for (const DualBatch* p : parts) {
    out.stack.middleCols(c, p->cols) = p->stack;
    c += p->cols;
  }
  return out;
}

DualBatch DualBackend::gather_rows(const DualBatch& x, IndexSpan idx) {
  const int n = static_cast<int>(idx.size());
  DualBatch out = blank(n, x.cols);
  for (int b = 0; b < x.blocks(); ++b) {
    for (int r = 0; r < n; ++r) {
      if (idx[static_cast<std::size_t>(r)] < 0)
        out.stack.row(b * n + r).setZero();
      else
        out.stack.row(b * n + r) = x.stack.row(b * x.rows + idx[static_cast<std::size_t>(r)]);
    }
  }
  return out;
}

DualBatch DualBackend::scatter_rows(const DualBatch& x, IndexSpan seg, int n_out) {
  require(static_cast<std::size_t>(x.rows) == seg.size(), ErrorCode::kDimension,
          "scatter_rows: segment ids do not match row count");
  DualBatch out = blank(n_out, x.cols);
  out.stack.setZero();
  for (int b = 0; b < x.blocks(); ++b)
    for (int r = 0; r < x.rows; ++r)
      if (seg[static_cast<std::size_t>(r)] >= 0)
        out.stack.row(b * n_out + seg[static_cast<std::size_t>(r)]) += x.stack.row(b * x.rows + r);
  return out;
}

DualBatch DualBackend::select_rows(const DualBatch& a, const DualBatch& b, MaskSpan take_a) {
  check_same_shape(a.stack, b.stack, "select_rows");
  DualBatch out = blank(a.rows, a.cols);
  for (int blk = 0; blk < a.blocks(); ++blk)
    for (int r = 0; r < a.rows; ++r)
      out.stack.row(blk * a.rows + r) = take_a[static_cast<std::size_t>(r)]
                                            ? a.stack.row(blk * a.rows + r)
                                            : b.stack.row(blk * a.rows + r);
  return out;
}

DualBatch DualBackend::sum_rows(const DualBatch& x) {
  DualBatch out = blank(1, x.cols);
  for (int b = 0; b < x.blocks(); ++b)
    out.stack.row(b) = x.stack.middleRows(static_cast<Eigen::Index>(b) * x.rows, x.rows).colwise().sum();
  return out;
}

DualBatch DualBackend::norm_rows(const DualBatch& x) {
  DualBatch out = blank(x.rows, 1);
  out.stack.setZero();
  const auto v = x.value();
  for (int r = 0; r < x.rows; ++r) {
    const double n = v.row(r).norm();
    out.value()(r, 0) = n;
    if (n == 0.0) continue;  // identically-zero rows (e.g. e_i - e_i) stay constant
    double grad_sq = 0.0, jac_sq = 0.0;
    for (int d = 0; d < n_inputs_; ++d) {
      const double g = v.row(r).dot(x.jacobian(d).row(r)) / n;
      out.jacobian(d)(r, 0) = g;
      grad_sq += g * g;
      jac_sq += x.jacobian(d).row(r).squaredNorm();
    }
    out.laplacian()(r, 0) = (jac_sq + v.row(r).dot(x.laplacian().row(r)) - grad_sq) / n;
  }
  return out;
}

DualBatch DualBackend::reshape(const DualBatch& x, int rows, int cols) {
  require(static_cast<long>(x.rows) * x.cols == static_cast<long>(rows) * cols,
          ErrorCode::kDimension, "reshape: element count changes");
  DualBatch out = blank(rows, cols);
  for (int b = 0; b < x.blocks(); ++b) {
    const Matrix blk = x.stack.middleRows(static_cast<Eigen::Index>(b) * x.rows, x.rows);
    out.stack.middleRows(static_cast<Eigen::Index>(b) * rows, rows) = reshape_impl(blk, rows, cols);
  }
  return out;
}

DualBatch DualBackend::envelope(const DualBatch& dist, ParamRef pi, ParamRef sigma_raw) {
  const Matrix dv = dist.value();
  check_envelope(dv, pi, sigma_raw);
  const Matrix p = pi.map();
  const Matrix s = softplus_matrix(sigma_raw.map());
  DualBatch out = blank(dist.rows, pi.rows);
  out.stack.setZero();
  for (Eigen::Index m = 0; m < dv.cols(); ++m) {
    const Matrix terms = envelope_terms(dv, p, s, m);            // pi e
    const Matrix first = -(terms.array().rowwise() * s.col(m).transpose().array()).matrix();
    const Matrix second =
        (terms.array().rowwise() * s.col(m).transpose().array().square()).matrix();
    out.value() += terms;
    Vector dsq = Vector::Zero(dist.rows);
    for (int d = 0; d < n_inputs_; ++d) {
      const auto dd = dist.jacobian(d).col(m);
      out.jacobian(d) += (first.array().colwise() * dd.array()).matrix();
      dsq += dd.cwiseAbs2();
    }
    out.laplacian() += (second.array().colwise() * dsq.array()).matrix() +
                       (first.array().colwise() * dist.laplacian().col(m).array()).matrix();
  }
  return out;
}

DualBatch DualBackend::gather_elems(const DualBatch& src, IndexSpan idx, int rows, int cols) {
  DualBatch out = blank(rows, cols);
  for (int b = 0; b < src.blocks(); ++b) {
    const Matrix blk = src.stack.middleRows(static_cast<Eigen::Index>(b) * src.rows, src.rows);
    out.stack.middleRows(static_cast<Eigen::Index>(b) * rows, rows) =
        gather_elems_impl(blk, idx, rows, cols);
  }
  return out;
}

DualBackend::Signed DualBackend::log_det_sum(const DualBatch& stacked, int n_det, ParamRef weights) {
  const Matrix values = stacked.value();
  DetTerms t = det_terms(values, n_det, weights.map(), true);
  DualBatch out = blank(1, 1);
  out.stack.setZero();
  out.value()(0, 0) = t.total.log_abs;
  if (t.total.sign == 0) {
    out.stack.bottomRows(n_inputs_ + 1).setConstant(kNaN);
    return {0, out};
  }
  const int n = stacked.cols;
  const int D = n_inputs_;
  Vector grad = Vector::Zero(D);
  double lap = 0.0;
  for (int k = 0; k < n_det; ++k) {
    const double rho = t.ratio[static_cast<std::size_t>(k)];
    if (rho == 0.0) continue;
    const Matrix& inv = t.inverses[static_cast<std::size_t>(k)];
    if (inv.size() == 0) {
      out.stack.bottomRows(D + 1).setConstant(kNaN);
      return {t.total.sign, out};
    }
    // d log|det A| = tr(A^-1 dA); d2 = tr(A^-1 d2A) - tr((A^-1 dA)^2)
    double lap_k = (inv * stacked.laplacian().middleRows(k * n, n)).trace();
    double grad_sq_k = 0.0;
    for (int d = 0; d < D; ++d) {
      const Matrix m = inv * stacked.jacobian(d).middleRows(k * n, n);
      const double g = m.trace();
      lap_k -= m.cwiseProduct(m.transpose()).sum();
      grad[d] += rho * g;
      grad_sq_k += g * g;
    }
    lap += rho * (lap_k + grad_sq_k);
  }
  lap -= grad.squaredNorm();
  for (int d = 0; d < D; ++d) out.jacobian(d)(0, 0) = grad[d];
  out.laplacian()(0, 0) = lap;
  return {t.total.sign, out};
}

// ===========================================================================
// TapeBackend

Var TapeBackend::push(Matrix value, bool needs_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void TapeBackend::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void TapeBackend::accumulate_param(const ParamRef& p, const Matrix& g) {
  if (p.offset < 0) return;
  Eigen::Map<Matrix>(param_grad_.data() + p.offset, p.rows, p.cols) += g;
}

Var TapeBackend::constant(const Matrix& x) { return push(x, false, nullptr); }

Var TapeBackend::param(ParamRef p) {
  return push(p.map(), p.offset >= 0,
              [p](TapeBackend& t, const Matrix& g) { t.accumulate_param(p, g); });
}

Var TapeBackend::linear(const Var& x, ParamRef w) {
  const Matrix& xv = value(x);
  check_linear(xv.cols(), w, "linear");
  const bool ng = needs(x) || w.offset >= 0;
  return push(xv * w.map().transpose(), ng, [x, w](TapeBackend& t, const Matrix& g) {
    if (w.offset >= 0) t.accumulate_param(w, g.transpose() * t.value(x));
    if (t.needs(x)) t.accumulate(x, g * w.map());
  });
}

Var TapeBackend::linear(const Var& x, ParamRef w, ParamRef b) {
  const Matrix& xv = value(x);
  check_linear(xv.cols(), w, "linear");
  Matrix y = xv * w.map().transpose();
  y.rowwise() += b.map().col(0).transpose();
  const bool ng = needs(x) || w.offset >= 0 || b.offset >= 0;
  return push(std::move(y), ng, [x, w, b](TapeBackend& t, const Matrix& g) {
    if (w.offset >= 0) t.accumulate_param(w, g.transpose() * t.value(x));
    if (b.offset >= 0) t.accumulate_param(b, g.colwise().sum().transpose());
    if (t.needs(x)) t.accumulate(x, g * w.map());
  });
}

Var TapeBackend::act(const Var& x, Act a) {
  if (a == Act::kIdentity) return x;
  return push(act_values(a, value(x)), needs(x), [x, a](TapeBackend& t, const Matrix& g) {
    ActArrays v = eval_act_arrays(a, t.value(x), false);
    t.accumulate(x, g.cwiseProduct(v.d1));
  });
}

Var TapeBackend::add(const Var& a, const Var& b) {
  check_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](TapeBackend& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var TapeBackend::sub(const Var& a, const Var& b) {
  check_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](TapeBackend& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var TapeBackend::mul(const Var& a, const Var& b) {
  check_same_shape(value(a), value(b), "mul");
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b),
              [a, b](TapeBackend& t, const Matrix& g) {
                if (t.needs(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                if (t.needs(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
              });
}

Var TapeBackend::scale(const Var& a, double s) {
  return push(s * value(a), needs(a), [a, s](TapeBackend& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Var TapeBackend::right_mul(const Var& x, const Matrix& m) {
  require(value(x).cols() == m.rows(), ErrorCode::kDimension, "right_mul: shape mismatch");
  return push(value(x) * m, needs(x),
              [x, m](TapeBackend& t, const Matrix& g) { t.accumulate(x, g * m.transpose()); });
}

Var TapeBackend::concat_cols(std::initializer_list<const Var*> parts) {
  std::vector<const Matrix*> vals;
  std::vector<Var> ids;
  bool ng = false;
  for (const Var* p : parts) {
    ids.push_back(*p);
    ng = ng || needs(*p);
  }
  Eigen::Index rows = -1, cols = 0;
  for (const Var& v : ids) {
    const Matrix& m = value(v);
    if (rows < 0) rows = m.rows();
    require(m.rows() == rows, ErrorCode::kDimension, "concat_cols: row counts differ");
    cols += m.cols();
  }
  Matrix out(rows < 0 ? 0 : rows, cols);
  std::vector<Eigen::Index> widths;
  Eigen::Index c = 0;
  for (const Var& v : ids) {
    const Matrix& m = value(v);
    out.middleCols(c, m.cols()) = m;
    widths.push_back(m.cols());
    c += m.cols();
  }
  return push(std::move(out), ng, [ids, widths](TapeBackend& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.needs(ids[i])) t.accumulate(ids[i], g.middleCols(c, widths[i]));
      c += widths[i];
    }
  });
}

Var TapeBackend::gather_rows(const Var& x, IndexSpan idx) {
  const Eigen::Index src_rows = value(x).rows();
  std::vector<int> ix(idx.begin(), idx.end());
  return push(gather_rows_impl(value(x), idx), needs(x),
              [x, ix, src_rows](TapeBackend& t, const Matrix& g) {
                t.accumulate(x, scatter_rows_impl(g, ix, static_cast<int>(src_rows)));
              });
}

Var TapeBackend::scatter_rows(const Var& x, IndexSpan seg, int n_out) {
  std::vector<int> sg(seg.begin(), seg.end());
  return push(scatter_rows_impl(value(x), seg, n_out), needs(x),
              [x, sg](TapeBackend& t, const Matrix& g) { t.accumulate(x, gather_rows_impl(g, sg)); });
}

Var TapeBackend::select_rows(const Var& a, const Var& b, MaskSpan take_a) {
  check_same_shape(value(a), value(b), "select_rows");
  std::vector<unsigned char> mask(take_a.begin(), take_a.end());
  return push(select_rows_impl(value(a), value(b), take_a), needs(a) || needs(b),
              [a, b, mask](TapeBackend& t, const Matrix& g) {
                Matrix ga = g, gb = g;
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                  if (mask[static_cast<std::size_t>(r)])
                    gb.row(r).setZero();
                  else
                    ga.row(r).setZero();
                }
                t.accumulate(a, ga);
                t.accumulate(b, gb);
              });
}

Var TapeBackend::sum_rows(const Var& x) {
  const Eigen::Index rows = value(x).rows();
  return push(value(x).colwise().sum(), needs(x), [x, rows](TapeBackend& t, const Matrix& g) {
    t.accumulate(x, g.replicate(rows, 1));
  });
}

Var TapeBackend::norm_rows(const Var& x) {
  Matrix n = value(x).rowwise().norm();
  return push(n, needs(x), [x, n](TapeBackend& t, const Matrix& g) {
    const Matrix& v = t.value(x);
    Matrix gx = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      if (n(r, 0) > 0.0) gx.row(r) = (g(r, 0) / n(r, 0)) * v.row(r);
    t.accumulate(x, gx);
  });
}

Var TapeBackend::reshape(const Var& x, int rows, int cols) {
  const int r0 = static_cast<int>(value(x).rows());
  const int c0 = static_cast<int>(value(x).cols());
  return push(reshape_impl(value(x), rows, cols), needs(x), [x, r0, c0](TapeBackend& t, const Matrix& g) {
    t.accumulate(x, reshape_impl(g, r0, c0));
  });
}

Var TapeBackend::envelope(const Var& dist, ParamRef pi, ParamRef sigma_raw) {
  const Matrix& dv = value(dist);
  check_envelope(dv, pi, sigma_raw);
  const Matrix p = pi.map();
  const Matrix s = softplus_matrix(sigma_raw.map());
  Matrix out = Matrix::Zero(dv.rows(), pi.rows);
  for (Eigen::Index m = 0; m < dv.cols(); ++m) out += envelope_terms(dv, p, s, m);
  const bool ng = needs(dist) || pi.offset >= 0 || sigma_raw.offset >= 0;
  return push(std::move(out), ng, [dist, pi, sigma_raw](TapeBackend& t, const Matrix& g) {
    const Matrix& d = t.value(dist);
    const Matrix p = pi.map();
    const Matrix raw = sigma_raw.map();
    const Matrix s = softplus_matrix(raw);
    Matrix gpi = Matrix::Zero(p.rows(), p.cols());
    Matrix gsig = Matrix::Zero(p.rows(), p.cols());
    Matrix gd = Matrix::Zero(d.rows(), d.cols());
    for (Eigen::Index m = 0; m < d.cols(); ++m) {
      // e(j, c) = exp(-s(c, m) d(j, m))
      const Matrix e = (-(d.col(m) * s.col(m).transpose())).array().exp().matrix();
      const Matrix ge = g.cwiseProduct(e);  // N x C
      gpi.col(m) = ge.colwise().sum().transpose();
      const Matrix gpe = ge.array().rowwise() * p.col(m).transpose().array();
      // d/ds: -d(j, m) pi e ; d/dd: -s pi e
      gsig.col(m) = -(gpe.transpose() * d.col(m));
      gd.col(m) = -(gpe * s.col(m));
    }
    if (pi.offset >= 0) t.accumulate_param(pi, gpi);
    if (sigma_raw.offset >= 0) {
      const Matrix dsp = raw.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      t.accumulate_param(sigma_raw, gsig.cwiseProduct(dsp));
    }
    if (t.needs(dist)) t.accumulate(dist, gd);
  });
}

Var TapeBackend::gather_elems(const Var& src, IndexSpan idx, int rows, int cols) {
  const Eigen::Index sr = value(src).rows(), sc = value(src).cols();
  std::vector<int> ix(idx.begin(), idx.end());
  return push(gather_elems_impl(value(src), idx, rows, cols), needs(src),
              [src, ix, sr, sc](TapeBackend& t, const Matrix& g) {
                Matrix gs = Matrix::Zero(sr, sc);
                for (std::size_t k = 0; k < ix.size(); ++k)
                  if (ix[k] >= 0) gs.data()[ix[k]] += g.data()[k];
                t.accumulate(src, gs);
              });
}

TapeBackend::Signed TapeBackend::log_det_sum(const Var& stacked, int n_det, ParamRef weights) {
  auto terms = std::make_shared<DetTerms>(det_terms(value(stacked), n_det, weights.map(), true));
  const bool ng = needs(stacked) || weights.offset >= 0;
  const int sign = terms->total.sign;
  Var out = push(Matrix::Constant(1, 1, terms->total.log_abs), ng && sign != 0,
                 [stacked, n_det, weights, terms](TapeBackend& t, const Matrix& g) {
                   const double gs = g(0, 0);
                   if (weights.offset >= 0) {
                     Matrix gw(n_det, 1);
                     for (int k = 0; k < n_det; ++k)
                       gw(k, 0) = gs * terms->det_over_psi[static_cast<std::size_t>(k)];
                     t.accumulate_param(weights, gw);
                   }
                   if (t.needs(stacked)) {
                     const Matrix& v = t.value(stacked);
                     const Eigen::Index n = v.cols();
                     Matrix ga = Matrix::Zero(v.rows(), n);
                     for (int k = 0; k < n_det; ++k) {
                       const double rho = terms->ratio[static_cast<std::size_t>(k)];
                       const Matrix& inv = terms->inverses[static_cast<std::size_t>(k)];
                       if (rho != 0.0 && inv.size() > 0)
                         ga.middleRows(k * n, n) = (gs * rho) * inv.transpose();
                     }
                     t.accumulate(stacked, ga);
                   }
                 });
  return {sign, out};
}

void TapeBackend::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  for (Node& n : nodes_) n.grad.resize(0, 0);
  param_grad_.setZero();
  int top = -1;
  for (const auto& [v, g] : seeds) {
    accumulate(v, g);
    top = std::max(top, v.id);
  }
  for (int i = top; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0 || !n.back) continue;
    const Matrix g = n.grad;  // back() may grow other nodes' grads, not this one
    n.back(*this, g);
  }
}

void TapeBackend::backward(Var out, double seed) {
  const std::pair<Var, Matrix> s{out, Matrix::Constant(1, 1, seed)};
  backward(std::span<const std::pair<Var, Matrix>>(&s, 1));
}

}  // namespace planet
