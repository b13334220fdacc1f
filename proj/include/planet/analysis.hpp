// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_ANALYSIS_HPP
#define PLANET_ANALYSIS_HPP

#include <planet/core.hpp>

#include <functional>
#include <string>
#include <vector>

namespace planet {

/// mean |a_i - b_i|
double mae(const std::vector<double>& a, const std::vector<double>& b);
/// mean |(b_i - mean b) - (a_i - mean a)|
double relative_mae(const std::vector<double>& a, const std::vector<double>& b);

struct ScanAxis {
  double lo = 0.0;
  double hi = 0.0;
  double resolution = 1e-3;  // grid spacing; the last point may fall short of hi
  std::vector<double> points() const;
};

struct MinimumResult {
  Vector argmin;       // refined location
  double energy = 0.0;  // model value at argmin
  Vector grid_argmin;  // best grid point
  double grid_energy = 0.0;
  std::vector<Vector> tied;  // grid points tying the minimum (size > 1 on flat surfaces)
  long long n_evaluated = 0;
};

/// Dense scan of f over 1 or 2 axes followed by a quadratic fit through the
/// grid minimum and its neighbours. Points within `tie_tol` of the grid
/// minimum are reported as tied; with ties the unrefined first point is kept.
MinimumResult find_minimum(const std::function<double(const Vector&)>& f,
                           const std::vector<ScanAxis>& axes, double tie_tol = 0.0);

/// Vectorised variant: f receives all grid points at once.
MinimumResult find_minimum_batched(
    const std::function<std::vector<double>(const std::vector<Vector>&)>& f,
    const std::vector<ScanAxis>& axes, double tie_tol = 0.0);

}  // namespace planet

#endif  // PLANET_ANALYSIS_HPP
