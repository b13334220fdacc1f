// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_MOLECULE_HPP
#define PLANET_MOLECULE_HPP

#include <planet/core.hpp>

#include <functional>
#include <string>
#include <vector>

namespace planet {

struct Molecule {
  std::vector<int> charges;
  int n_up = 0;
  int n_down = 0;

  int n_nuclei() const noexcept { return static_cast<int>(charges.size()); }
  int n_electrons() const noexcept { return n_up + n_down; }
  /// Total charge: sum Z - N.
  int charge() const;
  void validate() const;
};

/// Neutral molecule; the odd electron (if any) goes to the up channel.
Molecule neutral_molecule(std::vector<int> charges);

/// M x 3 nuclear positions in bohr.
struct Geometry {
  Matrix positions;

  int size() const noexcept { return static_cast<int>(positions.rows()); }
  /// Finite coordinates, pairwise distances above 1e-6 bohr.
  void validate() const;
};

struct Frame {
  Matrix3 rotation = Matrix3::Identity();
};

struct DomainParam {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;  // Gaussian walk scale
  bool degrees = false;

  bool frozen() const noexcept { return lo == hi; }
};

/// A box of geometry parameters plus the map from a parameter vector to
/// nuclear positions.
class GeometryDomain {
 public:
  using MapFn = std::function<Matrix(const Vector&)>;

  GeometryDomain() = default;
  GeometryDomain(std::string kind, std::vector<DomainParam> params, MapFn map);

  const std::string& kind() const noexcept { return kind_; }
  const std::vector<DomainParam>& params() const noexcept { return params_; }
  std::vector<DomainParam>& params() noexcept { return params_; }
  int dim() const noexcept { return static_cast<int>(params_.size()); }
  int index(const std::string& name) const;

  bool contains(const Vector& p) const;
  Vector center() const;
  Geometry geometry(const Vector& p) const;

 private:
  std::string kind_;
  std::vector<DomainParam> params_;
  MapFn map_;
};

struct Dataset {
  std::string name;
  Molecule molecule;
  GeometryDomain domain;
  std::vector<Vector> grid;
};

/// Known names: H2, H4, H4+, Li2, H10, N2, H2-HF, and "custom:<geometry file>".
Dataset build_dataset(const std::string& system_name);
std::vector<std::string> dataset_names();

/// n evenly spaced values covering [lo, hi] including both endpoints.
std::vector<double> linspace(double lo, double hi, int n);

/// Gaussian step on every parameter, reflected back into its interval.
Vector geometry_walk(const GeometryDomain& domain, const Vector& current, Rng& rng);

/// Maps x into [lo, hi] by repeated mirroring at the bounds.
double reflect_into(double x, double lo, double hi);

/// Principal axes of the charge-weighted nuclear covariance, ascending
/// eigenvalue order, signs fixed by the charge-weighted third moment.
/// Degenerate spectra fall back to the identity.
Frame canonical_frame(const Geometry& geometry, const std::vector<int>& charges);

double nuclear_repulsion(const Geometry& geometry, const std::vector<int>& charges);

/// Atomic number for an element symbol (H..Kr) or a decimal integer string.
int atomic_number(const std::string& symbol_or_z);

struct GeometryFile {
  std::vector<int> charges;
  Geometry geometry;
};
GeometryFile read_geometry_file(const std::string& path);
GeometryFile parse_geometry(const std::string& text);

/// Parameter-grid CSV: a header naming every domain parameter once, then one
/// row per grid point.
std::vector<Vector> read_grid_csv(const GeometryDomain& domain, const std::string& path);
std::vector<Vector> parse_grid_csv(const GeometryDomain& domain, const std::string& text);

}  // namespace planet

#endif  // PLANET_MOLECULE_HPP
