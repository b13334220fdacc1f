// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/analysis.hpp>

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace planet {

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
  require(!a.empty(), ErrorCode::kInvalidArgument, "mae: empty input");
  require(a.size() == b.size(), ErrorCode::kDimension, "mae: length mismatch");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double mae(const std::vector<double>& a, const std::vector<double>& b) {
  check_pair(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double relative_mae(const std::vector<double>& a, const std::vector<double>& b) {
  check_pair(a, b);
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs((b[i] - mb) - (a[i] - ma));
  return s / static_cast<double>(a.size());
}

std::vector<double> ScanAxis::points() const {
  require(std::isfinite(lo) && std::isfinite(hi) && hi >= lo, ErrorCode::kInvalidArgument,
          "scan: need lo <= hi");
  require(resolution > 0.0, ErrorCode::kInvalidArgument, "scan: resolution must be positive");
  const double span = (hi - lo) / resolution;
  require(span < 1e8, ErrorCode::kInvalidArgument, "scan: too many grid points");
  const auto n = static_cast<long long>(std::floor(span + 1e-9)) + 1;
  std::vector<double> p(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = lo + static_cast<double>(i) * resolution;
  return p;
}

MinimumResult find_minimum(const std::function<double(const Vector&)>& f,
                           const std::vector<ScanAxis>& axes, double tie_tol) {
  return find_minimum_batched(
      [&](const std::vector<Vector>& pts) {
        std::vector<double> e;
        e.reserve(pts.size());
        for (const Vector& p : pts) e.push_back(f(p));
        return e;
      },
      axes, tie_tol);
}

MinimumResult find_minimum_batched(
    const std::function<std::vector<double>(const std::vector<Vector>&)>& f,
    const std::vector<ScanAxis>& axes, double tie_tol) {
  require(axes.size() == 1 || axes.size() == 2, ErrorCode::kUnsupported,
          "find-min: scans need 1 or 2 free parameters");
  require(tie_tol >= 0.0, ErrorCode::kInvalidArgument, "find-min: negative tie tolerance");
  const std::vector<double> x = axes[0].points();
  const std::vector<double> y = axes.size() == 2 ? axes[1].points() : std::vector<double>{0.0};
  const auto nx = static_cast<long long>(x.size());
  const auto ny = static_cast<long long>(y.size());
  const int d = static_cast<int>(axes.size());
  auto at = [&](long long i, long long k) {
    Vector p(d);
    p[0] = x[static_cast<std::size_t>(i)];
    if (d == 2) p[1] = y[static_cast<std::size_t>(k)];
    return p;
  };
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(nx * ny));
  for (long long i = 0; i < nx; ++i)
    for (long long k = 0; k < ny; ++k) pts.push_back(at(i, k));
  const std::vector<double> e = f(pts);
  require(e.size() == pts.size(), ErrorCode::kDimension, "find-min: evaluator returned wrong count");
  for (double v : e) require(std::isfinite(v), ErrorCode::kNumerical, "find-min: non-finite energy");

  MinimumResult r;
  r.n_evaluated = static_cast<long long>(e.size());
  const auto best = static_cast<long long>(std::min_element(e.begin(), e.end()) - e.begin());
  r.grid_energy = e[static_cast<std::size_t>(best)];
  r.grid_argmin = pts[static_cast<std::size_t>(best)];
  for (std::size_t s = 0; s < e.size(); ++s)
    if (e[s] - r.grid_energy <= tie_tol) r.tied.push_back(pts[s]);
  r.argmin = r.grid_argmin;
  r.energy = r.grid_energy;
  if (r.tied.size() > 1) return r;

  const long long bi = best / ny;
  const long long bk = best % ny;
  auto val = [&](long long i, long long k) { return e[static_cast<std::size_t>(i * ny + k)]; };
  Vector cand = r.grid_argmin;
  if (d == 1) {
    if (bi == 0 || bi == nx - 1) return r;
    const double h = axes[0].resolution;
    const double a = val(bi - 1, 0), b = val(bi, 0), c = val(bi + 1, 0);
    const double curv = a - 2.0 * b + c;
    if (!(curv > 0.0)) return r;
    cand[0] = x[static_cast<std::size_t>(bi)] + 0.5 * h * (a - c) / curv;
  } else {
    if (bi == 0 || bi == nx - 1 || bk == 0 || bk == ny - 1) return r;
    // Least-squares quadratic on the 3x3 stencil in units of the spacing.
    Matrix a(9, 6);
    Vector rhs(9);
    int row = 0;
    for (int di = -1; di <= 1; ++di)
      for (int dk = -1; dk <= 1; ++dk, ++row) {
        a.row(row) << 1.0, di, dk, 0.5 * di * di, di * dk, 0.5 * dk * dk;
        rhs[row] = val(bi + di, bk + dk);
      }
    const Vector q = a.colPivHouseholderQr().solve(rhs);
    Eigen::Matrix2d hess;
    hess << q[3], q[4], q[4], q[5];
    if (!(hess.determinant() > 0.0 && q[3] > 0.0)) return r;
    const Eigen::Vector2d step = -(hess.inverse() * Eigen::Vector2d(q[1], q[2]));
    cand[0] += std::clamp(step[0], -1.0, 1.0) * axes[0].resolution;
    cand[1] += std::clamp(step[1], -1.0, 1.0) * axes[1].resolution;
  }
  const double ec = f({cand}).at(0);
  ++r.n_evaluated;
  if (std::isfinite(ec) && ec <= r.grid_energy) {
    r.argmin = cand;
    r.energy = ec;
  }
  return r;
}

}  // namespace planet
