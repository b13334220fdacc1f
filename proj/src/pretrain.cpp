// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/pretrain.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace planet {

namespace {

// Slater's rules, first two shells only.
double zeta_1s(int z) { return z == 1 ? 1.0 : z - 0.3; }
double zeta_2(int z) {
  const int valence = z - 2;
  return (z - 1.7 - 0.35 * (valence - 1)) / 2.0;
}

double ao_energy(const HydrogenicProvider::Ao& a) {
  const double zn = a.zeta * a.n;  // effective charge
  return -zn * zn / (2.0 * a.n * a.n);
}

// 1s-1s overlap for a common exponent; used as a crude distance factor.
double ss_overlap(double zeta, double r) {
  const double x = zeta * r;
  return std::exp(-x) * (1.0 + x + x * x / 3.0);
}

}  // namespace

HydrogenicProvider::HydrogenicProvider(const Molecule& molecule) {
  molecule.validate();
  for (int m = 0; m < molecule.n_nuclei(); ++m) {
    const int z = molecule.charges[static_cast<std::size_t>(m)];
    require(z <= 10, ErrorCode::kUnsupported,
            "hydrogenic provider: only elements up to Ne are supported");
    basis_.push_back({m, 1, -1, zeta_1s(z)});
    if (z > 2) {
      const double zeta = zeta_2(z);
      basis_.push_back({m, 2, -1, zeta});
      for (int k = 0; k < 3; ++k) basis_.push_back({m, 2, k, zeta});
    }
  }
  n_occ_ = std::max(molecule.n_up, molecule.n_down);
  require(n_occ_ <= static_cast<int>(basis_.size()), ErrorCode::kUnsupported,
          "hydrogenic provider: more occupied orbitals than basis functions");
}

Matrix HydrogenicProvider::coefficients(const Geometry& geometry) const {
  const auto nb = static_cast<Eigen::Index>(basis_.size());
  Matrix h = Matrix::Zero(nb, nb);
  for (Eigen::Index a = 0; a < nb; ++a) {
    const Ao& p = basis_[static_cast<std::size_t>(a)];
    h(a, a) = ao_energy(p);
    for (Eigen::Index b = 0; b < a; ++b) {
      const Ao& q = basis_[static_cast<std::size_t>(b)];
      if (p.atom == q.atom) continue;
      const Vector3 d = (geometry.positions.row(q.atom) - geometry.positions.row(p.atom)).transpose();
      const double r = d.norm();
      const Vector3 u = d / r;
      double s = ss_overlap(0.5 * (p.zeta + q.zeta), r);
      if (p.axis >= 0 && q.axis >= 0) {
        s *= (p.axis == q.axis ? 1.0 : 0.0) - 2.0 * u[p.axis] * u[q.axis];
      } else if (p.axis >= 0) {
        s *= u[p.axis];
      } else if (q.axis >= 0) {
        s *= -u[q.axis];
      }
      h(a, b) = h(b, a) = 1.75 * s * 0.5 * (h(a, a) + ao_energy(q));
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  Matrix c = eig.eigenvectors().leftCols(n_occ_);
  for (int o = 0; o < n_occ_; ++o) {
    Eigen::Index at = 0;
    c.col(o).cwiseAbs().maxCoeff(&at);
    c.col(o) /= c(at, o);
  }
  return c;
}

Matrix HydrogenicProvider::evaluate(const Matrix& electrons, const Geometry& geometry) const {
  const Matrix c = coefficients(geometry);
  Matrix ao(static_cast<Eigen::Index>(basis_.size()), electrons.rows());
  for (std::size_t a = 0; a < basis_.size(); ++a) {
    const Ao& p = basis_[a];
    for (Eigen::Index j = 0; j < electrons.rows(); ++j) {
      const RowVector d = electrons.row(j) - geometry.positions.row(p.atom);
      const double r = d.norm();
      double v = std::exp(-p.zeta * r);
      if (p.axis >= 0) {
        v *= d[p.axis];
      } else if (p.n == 2) {
        v *= r;
      }
      ao(static_cast<Eigen::Index>(a), j) = v;
    }
  }
  return c.transpose() * ao;
}

BasisFileProvider BasisFileProvider::parse(const std::string& text, int n_atoms) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("orbital file: ") + e.what());
  }
  require(doc.is_object() && doc.contains("basis") && doc.contains("mo_coefficients"),
          ErrorCode::kConfig, "orbital file: needs 'basis' and 'mo_coefficients'");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    require(it.key() == "basis" || it.key() == "mo_coefficients", ErrorCode::kConfig,
            "orbital file: unknown key '" + it.key() + "'");
  BasisFileProvider p;
  p.n_atoms_ = n_atoms;
  try {
    for (const json& s : doc.at("basis")) {
      for (auto it = s.begin(); it != s.end(); ++it)
        require(it.key() == "atom" || it.key() == "shell" || it.key() == "exponents" ||
                    it.key() == "coefficients",
                ErrorCode::kConfig, "orbital file: unknown basis key '" + it.key() + "'");
      const std::string shell = s.at("shell").get<std::string>();
      Shell sh;
      sh.atom = s.at("atom").get<int>();
      require(sh.atom >= 0 && sh.atom < n_atoms, ErrorCode::kConfig,
              "orbital file: atom index out of range");
      sh.alpha = s.at("exponents").get<std::vector<double>>();
      sh.coef = s.at("coefficients").get<std::vector<double>>();
      require(!sh.alpha.empty() && sh.alpha.size() == sh.coef.size(), ErrorCode::kConfig,
              "orbital file: exponents and coefficients differ in length");
      if (shell == "s") {
        sh.axis = -1;
        p.shells_.push_back(sh);
      } else if (shell == "p") {
        for (int k = 0; k < 3; ++k) {
          sh.axis = k;
          p.shells_.push_back(sh);
        }
      } else {
        fail(ErrorCode::kConfig, "orbital file: unsupported shell '" + shell + "'");
      }
    }
    const json& mo = doc.at("mo_coefficients");
    require(mo.size() == p.shells_.size(), ErrorCode::kConfig,
            "orbital file: one coefficient row per basis function expected");
    const std::size_t n_occ = mo.empty() ? 0 : mo[0].size();
    require(n_occ > 0, ErrorCode::kConfig, "orbital file: no occupied orbitals");
    p.mo_.resize(static_cast<Eigen::Index>(mo.size()), static_cast<Eigen::Index>(n_occ));
    for (std::size_t a = 0; a < mo.size(); ++a) {
      require(mo[a].size() == n_occ, ErrorCode::kConfig, "orbital file: ragged coefficient rows");
      for (std::size_t o = 0; o < n_occ; ++o)
        p.mo_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(o)) = mo[a][o].get<double>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("orbital file: ") + e.what());
  }
  return p;
}

BasisFileProvider BasisFileProvider::load(const std::string& path, int n_atoms) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open orbital file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), n_atoms);
}

Matrix BasisFileProvider::evaluate(const Matrix& electrons, const Geometry& geometry) const {
  require(geometry.size() == n_atoms_, ErrorCode::kDimension,
          "orbital file: geometry atom count mismatch");
  Matrix ao(static_cast<Eigen::Index>(shells_.size()), electrons.rows());
  for (std::size_t a = 0; a < shells_.size(); ++a) {
    const Shell& s = shells_[a];
    for (Eigen::Index j = 0; j < electrons.rows(); ++j) {
      const RowVector d = electrons.row(j) - geometry.positions.row(s.atom);
      const double r2 = d.squaredNorm();
      double v = 0.0;
      for (std::size_t q = 0; q < s.alpha.size(); ++q) {
        const double al = s.alpha[q];
        double norm = std::pow(2.0 * al / std::numbers::pi, 0.75);
        if (s.axis >= 0) norm *= 2.0 * std::sqrt(al);
        v += s.coef[q] * norm * std::exp(-al * r2);
      }
      if (s.axis >= 0) v *= d[s.axis];
      ao(static_cast<Eigen::Index>(a), j) = v;
    }
  }
  return mo_.transpose() * ao;
}

std::unique_ptr<OrbitalProvider> make_provider(const std::string& source, const Molecule& molecule) {
  if (source.empty() || source == "hydrogenic") return std::make_unique<HydrogenicProvider>(molecule);
  const std::string prefix = "file:";
  if (source.rfind(prefix, 0) == 0)
    return std::make_unique<BasisFileProvider>(
        BasisFileProvider::load(source.substr(prefix.size()), molecule.n_nuclei()));
  fail(ErrorCode::kConfig, "unknown orbital provider '" + source + "'");
}

Matrix pretrain_target(const WaveFunction& wf, const OrbitalProvider& provider,
                       const Matrix& electrons, const Geometry& geometry) {
  const Molecule& mol = wf.molecule();
  const int n = wf.n_electrons();
  require(provider.n_orbitals() >= std::max(mol.n_up, mol.n_down), ErrorCode::kDimension,
          "pretraining: provider supplies too few orbitals");
  const Matrix chi = provider.evaluate(electrons, geometry);
  require(chi.cols() == n, ErrorCode::kDimension, "pretraining: provider returned wrong width");
  const std::vector<int>& spin = wf.spins();
  Matrix t = Matrix::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    const int a = r < mol.n_up ? 0 : 1;
    const int o = a == 0 ? r : r - mol.n_up;
    for (int j = 0; j < n; ++j)
      if (spin[static_cast<std::size_t>(j)] == a) t(r, j) = chi(o, j);
  }
  return t;
}

double pretrain_loss(const WaveFunction& wf, const ParamTree& params,
                     const OrbitalProvider& provider, const Geometry& geometry,
                     const Frame& frame, const std::vector<Matrix>& batch, Vector* grad) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "pretraining: empty batch");
  const int k_det = wf.config().n_determinants;
  const int n = wf.n_electrons();
  const double w = 1.0 / (static_cast<double>(k_det) * static_cast<double>(batch.size()));
  double loss = 0.0;
  if (grad) grad->setZero(params.size());
  for (const Matrix& e : batch) {
    const Matrix target = pretrain_target(wf, provider, e, geometry);
    Matrix stacked(static_cast<Eigen::Index>(k_det) * n, n);
    for (int k = 0; k < k_det; ++k) stacked.middleRows(k * n, n) = target;
    if (!grad) {
      ValueBackend b;
      auto g = wf.forward(b, params, false, e, geometry, frame);
      loss += w * (g.orbitals - stacked).squaredNorm();
      continue;
    }
    TapeBackend b(params.size());
    auto g = wf.forward(b, params, true, e, geometry, frame);
    const Matrix diff = b.value(g.orbitals) - stacked;
    loss += w * diff.squaredNorm();
    const std::pair<Var, Matrix> seed{g.orbitals, 2.0 * w * diff};
    b.backward(std::span<const std::pair<Var, Matrix>>(&seed, 1));
    *grad += b.param_grad();
  }
  return loss;
}

double pretrain_step(const WaveFunction& wf, ParamTree& params, const OrbitalProvider& provider,
                     const Geometry& geometry, const Frame& frame,
                     const std::vector<Matrix>& batch, AdamWState& state, double lr) {
  Vector grad;
  const double loss = pretrain_loss(wf, params, provider, geometry, frame, batch, &grad);
  adamw_step(state, params.flat(), grad, lr, 0.0);
  return loss;
}

}  // namespace planet
