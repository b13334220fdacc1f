// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/molecule.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace planet {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

constexpr std::array<const char*, 36> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr"};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, where + ": '" + text + "' is not a number");
  }
  require(used == text.size() && std::isfinite(v), ErrorCode::kInvalidArgument,
          where + ": '" + text + "' is not a finite number");
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DomainParam length_param(const std::string& name, double lo, double hi) {
  return {name, lo, hi, 0.05 * (hi - lo), false};
}

DomainParam angle_param(const std::string& name, double lo, double hi) {
  return {name, lo, hi, 0.05 * (hi - lo), true};
}

Matrix diatomic(double r) {
  Matrix p = Matrix::Zero(2, 3);
  p(0, 2) = -0.5 * r;
  p(1, 2) = 0.5 * r;
  return p;
}

std::vector<Vector> grid_1d(double lo, double hi, int n) {
  std::vector<Vector> out;
  for (double v : linspace(lo, hi, n)) out.push_back(Vector::Constant(1, v));
  return out;
}

Dataset make_diatomic(const std::string& name, int z, double lo, double hi, int n_grid) {
  Dataset d;
  d.name = name;
  d.molecule = neutral_molecule({z, z});
  d.domain = GeometryDomain("diatomic", {length_param("r", lo, hi)},
                            [](const Vector& p) { return diatomic(p[0]); });
  d.grid = grid_1d(lo, hi, n_grid);
  return d;
}

// Four hydrogens on a circle of radius R, the diagonal pairs separated by
// the angle theta (a square at 90 degrees).
Matrix h4_rectangle(double theta_deg) {
  constexpr double kRadius = 3.2843;
  const double h = 0.5 * theta_deg * kDeg;
  Matrix p(4, 3);
  p << kRadius * std::cos(h), kRadius * std::sin(h), 0.0,    //
      -kRadius * std::cos(h), kRadius * std::sin(h), 0.0,    //
      -kRadius * std::cos(h), -kRadius * std::sin(h), 0.0,   //
      kRadius * std::cos(h), -kRadius * std::sin(h), 0.0;
  return p;
}

Matrix hydrogen_chain(int n, double spacing) {
  Matrix p = Matrix::Zero(n, 3);
  for (int i = 0; i < n; ++i) p(i, 2) = (i - 0.5 * (n - 1)) * spacing;
  return p;
}

// Jacobi coordinates: H2 midpoint at the origin, HF centre of mass at
// (0, 0, R). theta1/theta2 are polar angles of the H2 and F->H axes, phi the
// dihedral between them.
Matrix h2_hf(const Vector& q) {
  const double r1 = q[0], r2 = q[1], big_r = q[2];
  const double t1 = q[3] * kDeg, t2 = q[4] * kDeg, phi = q[5] * kDeg;
  const Vector3 u1(std::sin(t1), 0.0, std::cos(t1));
  const Vector3 u2(std::sin(t2) * std::cos(phi), std::sin(t2) * std::sin(phi), std::cos(t2));
  const Vector3 com(0.0, 0.0, big_r);
  constexpr double kMassH = 1.00782503207, kMassF = 18.99840322;
  const double frac_h = kMassF / (kMassF + kMassH);
  Matrix p(4, 3);
  p.row(0) = (0.5 * r1 * u1).transpose();
  p.row(1) = (-0.5 * r1 * u1).transpose();
  p.row(2) = (com + frac_h * r2 * u2).transpose();           // H of HF
  p.row(3) = (com - (1.0 - frac_h) * r2 * u2).transpose();   // F
  return p;
}

Dataset make_custom(const std::string& path) {
  GeometryFile f = read_geometry_file(path);
  Dataset d;
  d.name = "custom:" + path;
  d.molecule = neutral_molecule(f.charges);
  const Matrix fixed = f.geometry.positions;
  d.domain = GeometryDomain("fixed", {}, [fixed](const Vector&) { return fixed; });
  d.grid = {Vector(0)};
  return d;
}

}  // namespace

int Molecule::charge() const {
  return std::accumulate(charges.begin(), charges.end(), 0) - n_electrons();
}

void Molecule::validate() const {
  require(!charges.empty(), ErrorCode::kInvalidArgument, "molecule: no nuclei");
  for (int z : charges)
    require(z >= 1, ErrorCode::kInvalidArgument, "molecule: nuclear charges must be >= 1");
  require(n_up >= 0 && n_down >= 0 && n_up + n_down >= 1, ErrorCode::kInvalidArgument,
          "molecule: needs at least one electron");
  require(n_up >= n_down, ErrorCode::kInvalidArgument,
          "molecule: convention requires n_up >= n_down");
}

Molecule neutral_molecule(std::vector<int> charges) {
  Molecule m;
  const int n = std::accumulate(charges.begin(), charges.end(), 0);
  m.charges = std::move(charges);
  m.n_down = n / 2;
  m.n_up = n - m.n_down;
  return m;
}

void Geometry::validate() const {
  require(positions.cols() == 3, ErrorCode::kDimension, "geometry: positions must be M x 3");
  require(positions.allFinite(), ErrorCode::kInvalidArgument, "geometry: non-finite coordinate");
  for (Eigen::Index a = 0; a < positions.rows(); ++a)
    for (Eigen::Index b = a + 1; b < positions.rows(); ++b)
      require((positions.row(a) - positions.row(b)).norm() > 1e-6, ErrorCode::kInvalidArgument,
              "geometry: nuclei " + std::to_string(a) + " and " + std::to_string(b) +
                  " coincide");
}

GeometryDomain::GeometryDomain(std::string kind, std::vector<DomainParam> params, MapFn map)
    : kind_(std::move(kind)), params_(std::move(params)), map_(std::move(map)) {
  for (const DomainParam& p : params_)
    require(p.lo <= p.hi && p.step >= 0.0, ErrorCode::kInvalidArgument,
            "domain: invalid interval for '" + p.name + "'");
}

int GeometryDomain::index(const std::string& name) const {
  for (int i = 0; i < dim(); ++i)
    if (params_[static_cast<std::size_t>(i)].name == name) return i;
  fail(ErrorCode::kInvalidArgument, "domain: no parameter named '" + name + "'");
}

bool GeometryDomain::contains(const Vector& p) const {
  if (p.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    const DomainParam& d = params_[static_cast<std::size_t>(i)];
    if (!(p[i] >= d.lo && p[i] <= d.hi)) return false;
  }
  return true;
}

Vector GeometryDomain::center() const {
  Vector c(dim());
  for (int i = 0; i < dim(); ++i)
    c[i] = 0.5 * (params_[static_cast<std::size_t>(i)].lo + params_[static_cast<std::size_t>(i)].hi);
  return c;
}

Geometry GeometryDomain::geometry(const Vector& p) const {
  require(p.size() == dim(), ErrorCode::kDimension,
          "domain: expected " + std::to_string(dim()) + " parameters, got " +
              std::to_string(p.size()));
  require(map_ != nullptr, ErrorCode::kInvalidArgument, "domain: no geometry map");
  Geometry g{map_(p)};
  g.validate();
  return g;
}

std::vector<double> linspace(double lo, double hi, int n) {
  require(n >= 1, ErrorCode::kInvalidArgument, "linspace: need at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

std::vector<std::string> dataset_names() {
  return {"H2", "H4", "H4+", "Li2", "H10", "N2", "H2-HF"};
}

Dataset build_dataset(const std::string& name) {
  if (name == "H2") return make_diatomic(name, 1, 1.0, 2.4, 16);
  if (name == "Li2") return make_diatomic(name, 3, 3.5, 14.0, 32);
  if (name == "N2") return make_diatomic(name, 7, 1.6, 6.0, 16);
  if (name == "H4" || name == "H4+") {
    Dataset d;
    d.name = name;
    d.molecule = neutral_molecule({1, 1, 1, 1});
    if (name == "H4+") d.molecule.n_down = 1;
    d.domain = GeometryDomain("h4_rectangle", {angle_param("theta", 85.0, 95.0)},
                              [](const Vector& p) { return h4_rectangle(p[0]); });
    d.grid = grid_1d(85.0, 95.0, 16);
    return d;
  }
  if (name == "H10") {
    Dataset d;
    d.name = name;
    d.molecule = neutral_molecule(std::vector<int>(10, 1));
    d.domain = GeometryDomain("hydrogen_chain", {length_param("spacing", 1.0, 3.6)},
                              [](const Vector& p) { return hydrogen_chain(10, p[0]); });
    d.grid = grid_1d(1.0, 3.6, 16);
    return d;
  }
  if (name == "H2-HF") {
    Dataset d;
    d.name = name;
    d.molecule = neutral_molecule({1, 1, 1, 9});
    d.domain = GeometryDomain(
        "h2_hf",
        {length_param("r1", 1.2, 1.8), length_param("r2", 1.2, 1.8), length_param("R", 3.0, 8.0),
         angle_param("theta1", 0.0, 180.0), angle_param("theta2", 0.0, 180.0),
         angle_param("phi", 0.0, 180.0)},
        h2_hf);
    // Two points per dimension (the interval endpoints), 64 geometries.
    for (int code = 0; code < 64; ++code) {
      Vector q(6);
      for (int k = 0; k < 6; ++k) {
        const DomainParam& p = d.domain.params()[static_cast<std::size_t>(k)];
        q[k] = ((code >> (5 - k)) & 1) ? p.hi : p.lo;
      }
      d.grid.push_back(q);
    }
    return d;
  }
  if (name.rfind("custom:", 0) == 0) return make_custom(name.substr(7));
  fail(ErrorCode::kInvalidArgument, "unknown system '" + name + "'");
}

double reflect_into(double x, double lo, double hi) {
  if (lo == hi) return lo;
  const double w = hi - lo;
  // Mirror images repeat with period 2w.
  double y = std::fmod(x - lo, 2.0 * w);
  if (y < 0) y += 2.0 * w;
  if (y > w) y = 2.0 * w - y;
  return lo + y;
}

Vector geometry_walk(const GeometryDomain& domain, const Vector& current, Rng& rng) {
  require(domain.contains(current), ErrorCode::kInvalidArgument,
          "geometry_walk: current parameters lie outside the domain");
  Vector next = current;
  for (int i = 0; i < domain.dim(); ++i) {
    const DomainParam& p = domain.params()[static_cast<std::size_t>(i)];
    const double z = rng.normal();
    if (p.frozen() || p.step == 0.0) continue;
    next[i] = reflect_into(current[i] + p.step * z, p.lo, p.hi);
  }
  return next;
}

Frame canonical_frame(const Geometry& geometry, const std::vector<int>& charges) {
  Frame f;
  const Matrix& x = geometry.positions;
  const Eigen::Index m = x.rows();
  require(static_cast<Eigen::Index>(charges.size()) == m, ErrorCode::kDimension,
          "canonical_frame: charge count does not match the geometry");
  if (m < 2) return f;
  Vector w(m);
  for (Eigen::Index i = 0; i < m; ++i) w[i] = charges[static_cast<std::size_t>(i)];
  const RowVector centroid = (w.transpose() * x) / w.sum();
  const Matrix c = x.rowwise() - centroid;
  const Matrix3 cov = c.transpose() * w.asDiagonal() * c / w.sum();
  Eigen::SelfAdjointEigenSolver<Matrix3> es(cov);
  const Vector3 ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  if (ev[1] - ev[0] < 1e-8 * scale || ev[2] - ev[1] < 1e-8 * scale) return f;
  Matrix3 axes = es.eigenvectors();
  Vector3 third;
  for (int k = 0; k < 3; ++k) {
    const Vector proj = c * axes.col(k);
    third[k] = (w.array() * proj.array().cube()).sum();
    if (third[k] < 0) axes.col(k) *= -1.0;
  }
  if (axes.determinant() < 0) {
    int weakest = 0;
    for (int k = 1; k < 3; ++k)
      if (std::abs(third[k]) < std::abs(third[weakest])) weakest = k;
    axes.col(weakest) *= -1.0;
  }
  f.rotation = axes;
  return f;
}

double nuclear_repulsion(const Geometry& geometry, const std::vector<int>& charges) {
  const Matrix& x = geometry.positions;
  require(static_cast<Eigen::Index>(charges.size()) == x.rows(), ErrorCode::kDimension,
          "nuclear_repulsion: charge count does not match the geometry");
  double e = 0.0;
  for (Eigen::Index a = 0; a < x.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < x.rows(); ++b) {
      const double r = (x.row(a) - x.row(b)).norm();
      require(r > 0.0, ErrorCode::kInvalidArgument, "nuclear_repulsion: coincident nuclei");
      e += charges[static_cast<std::size_t>(a)] * charges[static_cast<std::size_t>(b)] / r;
    }
  }
  return e;
}

int atomic_number(const std::string& s) {
  require(!s.empty(), ErrorCode::kInvalidArgument, "empty element symbol");
  if (std::isdigit(static_cast<unsigned char>(s[0]))) {
    const double z = parse_number(s, "atomic number");
    require(z == std::floor(z) && z >= 1 && z <= static_cast<double>(kSymbols.size()),
            ErrorCode::kInvalidArgument, "unsupported atomic number '" + s + "'");
    return static_cast<int>(z);
  }
  for (std::size_t i = 0; i < kSymbols.size(); ++i)
    if (s == kSymbols[i]) return static_cast<int>(i) + 1;
  fail(ErrorCode::kInvalidArgument, "unknown element symbol '" + s + "'");
}

GeometryFile parse_geometry(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  require(!lines.empty(), ErrorCode::kInvalidArgument, "geometry file: empty");
  const double count = parse_number(lines[0], "geometry file atom count");
  require(count >= 1 && count == std::floor(count), ErrorCode::kInvalidArgument,
          "geometry file: atom count must be a positive integer");
  const auto m = static_cast<std::size_t>(count);
  require(lines.size() == m + 1, ErrorCode::kInvalidArgument,
          "geometry file: expected " + std::to_string(m) + " atom lines, found " +
              std::to_string(lines.size() - 1));
  GeometryFile f;
  f.geometry.positions.resize(static_cast<Eigen::Index>(m), 3);
  for (std::size_t i = 0; i < m; ++i) {
    std::istringstream row(lines[i + 1]);
    std::vector<std::string> tok;
    std::string t;
    while (row >> t) tok.push_back(t);
    const std::string where = "geometry file line " + std::to_string(i + 2);
    require(tok.size() == 4, ErrorCode::kInvalidArgument,
            where + ": expected 'symbol-or-Z x y z'");
    f.charges.push_back(atomic_number(tok[0]));
    for (int k = 0; k < 3; ++k)
      f.geometry.positions(static_cast<Eigen::Index>(i), k) =
          parse_number(tok[static_cast<std::size_t>(k) + 1], where);
  }
  f.geometry.validate();
  return f;
}

GeometryFile read_geometry_file(const std::string& path) { return parse_geometry(read_text(path)); }

std::vector<Vector> parse_grid_csv(const GeometryDomain& domain, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<int> column_of;  // csv column -> domain index
  std::vector<Vector> grid;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (header) {
      std::vector<bool> seen(static_cast<std::size_t>(domain.dim()), false);
      for (const std::string& c : cells) {
        int idx = -1;
        for (int i = 0; i < domain.dim(); ++i)
          if (domain.params()[static_cast<std::size_t>(i)].name == c) idx = i;
        require(idx >= 0, ErrorCode::kInvalidArgument, "grid csv: unknown column '" + c + "'");
        require(!seen[static_cast<std::size_t>(idx)], ErrorCode::kInvalidArgument,
                "grid csv: duplicate column '" + c + "'");
        seen[static_cast<std::size_t>(idx)] = true;
        column_of.push_back(idx);
      }
      for (int i = 0; i < domain.dim(); ++i)
        require(seen[static_cast<std::size_t>(i)], ErrorCode::kInvalidArgument,
                "grid csv: missing column '" + domain.params()[static_cast<std::size_t>(i)].name +
                    "'");
      header = false;
      continue;
    }
    const std::string where = "grid csv line " + std::to_string(line_no);
    require(cells.size() == column_of.size(), ErrorCode::kInvalidArgument,
            where + ": wrong number of cells");
    Vector p(domain.dim());
    for (std::size_t k = 0; k < cells.size(); ++k) p[column_of[k]] = parse_number(cells[k], where);
    grid.push_back(p);
  }
  require(!header || domain.dim() == 0, ErrorCode::kInvalidArgument, "grid csv: missing header");
  return grid;
}

std::vector<Vector> read_grid_csv(const GeometryDomain& domain, const std::string& path) {
  return parse_grid_csv(domain, read_text(path));
}

}  // namespace planet
