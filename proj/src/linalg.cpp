// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/linalg.hpp>

#include <algorithm>
#include <cmath>

namespace planet {

LuFactor::LuFactor(const Matrix& a) : lu_(a) {
  require(a.rows() == a.cols(), ErrorCode::kDimension,
          "slogdet: matrix must be square, got " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()));
  const int n = static_cast<int>(a.rows());
  perm_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm_[static_cast<std::size_t>(i)] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(lu_(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        p = i;
      }
    }
    if (best == 0.0 || !std::isfinite(best)) {
      singular_ = true;
      return;
    }
    if (p != k) {
      lu_.row(k).swap(lu_.row(p));
      std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(p)]);
      ++swaps_;
    }
    const double pivot = lu_(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f != 0.0)
        lu_.row(i).tail(n - k - 1).noalias() -= f * lu_.row(k).tail(n - k - 1);
    }
  }
}

SignedLog LuFactor::slogdet() const {
  if (singular_) return {};
  SignedLog out{(swaps_ % 2 == 0) ? 1 : -1, 0.0};
  for (Eigen::Index i = 0; i < lu_.rows(); ++i) {
    const double d = lu_(i, i);
    if (d < 0) out.sign = -out.sign;
    out.log_abs += std::log(std::abs(d));
  }
  return out;
}

Matrix LuFactor::solve(const Matrix& b) const {
  require(!singular_, ErrorCode::kNumerical, "LuFactor::solve: singular matrix");
  require(b.rows() == lu_.rows(), ErrorCode::kDimension, "LuFactor::solve: shape mismatch");
  const Eigen::Index n = lu_.rows();
  Matrix x(n, b.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = b.row(perm_[static_cast<std::size_t>(i)]);
  lu_.triangularView<Eigen::UnitLower>().solveInPlace(x);
  lu_.triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix LuFactor::inverse() const { return solve(Matrix::Identity(lu_.rows(), lu_.cols())); }

SignedLog slogdet(const Matrix& a) { return LuFactor(a).slogdet(); }

SignedLog signed_logsumexp(std::span<const double> logs, std::span<const int> signs) {
  require(logs.size() == signs.size(), ErrorCode::kDimension,
          "signed_logsumexp: logs and signs differ in length");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logs.size(); ++k)
    if (signs[k] != 0) top = std::max(top, logs[k]);
  if (!std::isfinite(top)) return {};
  double acc = 0.0;
  for (std::size_t k = 0; k < logs.size(); ++k)
    if (signs[k] != 0) acc += signs[k] * std::exp(logs[k] - top);
  if (acc == 0.0) return {};
  return {acc > 0 ? 1 : -1, top + std::log(std::abs(acc))};
}

CgResult cg_solve(const LinearOperator& matvec, const Vector& b, double damping, int max_iter) {
  require(damping >= 0.0, ErrorCode::kInvalidArgument, "cg_solve: damping must be >= 0");
  require(max_iter >= 0, ErrorCode::kInvalidArgument, "cg_solve: max_iter must be >= 0");
  CgResult out;
  out.x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  out.residual_norms.push_back(std::sqrt(rr));
  for (int k = 0; k < max_iter; ++k) {
    if (rr == 0.0) break;
    Vector ap = matvec(p);
    require(ap.size() == b.size(), ErrorCode::kDimension,
            "cg_solve: operator returned " + std::to_string(ap.size()) +
                " entries for a system of size " + std::to_string(b.size()));
    ap += damping * p;
    const double pap = p.dot(ap);
    if (pap <= 0.0) break;  // operator is not positive definite on p
    const double alpha = rr / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    out.residual_norms.push_back(std::sqrt(rr));
    ++out.iterations;
  }
  return out;
}

}  // namespace planet
