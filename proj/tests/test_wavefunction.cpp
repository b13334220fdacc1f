// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <planet/vmc.hpp>
#include <planet/wavefunction.hpp>

#include <cmath>

using namespace planet;

namespace {

WfConfig tiny() {
  WfConfig c;
  c.single_width = 12;
  c.pair_width = 6;
  c.n_layers = 2;
  c.n_determinants = 2;
  c.n_jastrow_layers = 2;
  c.nuclei_embed_dim = 4;
  return c;
}

Geometry h4_geometry() {
  return build_dataset("H4").domain.geometry(build_dataset("H4").domain.center());
}

Matrix electrons(int n, Rng& rng) {
  Matrix e(n, 3);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = 1.5 * rng.normal();
  return e;
}

void perturb(ParamTree& p, Rng& rng, double s) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p.flat()[i] += s * rng.normal();
}

}  // namespace

TEST_CASE("embedding is per-electron and translation invariant") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(1);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.2);
  const Geometry g = h4_geometry();
  const Matrix e = electrons(4, rng);
  const WfFeatures a = wf.features(p, e, g, Frame{});

  Matrix swapped = e;
  swapped.row(0) = e.row(3);
  swapped.row(3) = e.row(0);
  const WfFeatures b = wf.features(p, swapped, g, Frame{});
  CHECK((a.h1.row(0) - b.h1.row(3)).norm() == 0.0);
  CHECK((a.h1.row(1) - b.h1.row(1)).norm() == 0.0);

  const Eigen::RowVector3d shift(0.7, -1.1, 2.3);
  Geometry gt;
  gt.positions = g.positions.rowwise() + shift;
  const WfFeatures c = wf.features(p, e.rowwise() + shift, gt, Frame{});
  CHECK((a.h1 - c.h1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.g1 - c.g1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.log_psi.log_abs - c.log_psi.log_abs) < 1e-12);
}

TEST_CASE("pair features vanish on the diagonal") {
  Molecule mol;
  mol.charges = {2};
  mol.n_up = 1;
  mol.n_down = 1;
  const WaveFunction wf(tiny(), mol);
  Rng rng(2);
  const ParamTree p = wf.init_params(rng);
  Geometry g;
  g.positions = Matrix::Zero(1, 3);
  const WfFeatures f = wf.features(p, electrons(2, rng), g, Frame{});
  for (int i = 0; i < 2; ++i) CHECK(f.g1.row(i + 2 * i).norm() == 0.0);
}

TEST_CASE("zero weights give identical electron rows") {
  const Molecule mol = neutral_molecule({1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(3);
  const ParamTree p = wf.init_params(rng).zeros_like();
  const Geometry g = build_dataset("H2").domain.geometry(build_dataset("H2").domain.center());
  const WfFeatures f = wf.features(p, electrons(2, rng), g, Frame{});
  for (const Matrix& h : f.h) CHECK((h.row(0) - h.row(1)).norm() == 0.0);
}

TEST_CASE("interaction layers respect spin-sector permutations") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(4);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.2);
  const Geometry g = h4_geometry();
  const Matrix e = electrons(4, rng);
  Matrix x = e;
  x.row(0) = e.row(1);
  x.row(1) = e.row(0);
  const WfFeatures a = wf.features(p, e, g, Frame{});
  const WfFeatures b = wf.features(p, x, g, Frame{});
  const Matrix& ha = a.h.back();
  const Matrix& hb = b.h.back();
  CHECK((ha.row(0) - hb.row(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ha.row(2) - hb.row(2)).cwiseAbs().maxCoeff() < 1e-12);

  // Whole up set exchanged with the down set.
  Matrix y(4, 3);
  y.topRows(2) = e.bottomRows(2);
  y.bottomRows(2) = e.topRows(2);
  const WfFeatures c = wf.features(p, y, g, Frame{});
  CHECK((c.h.back().topRows(2) - ha.bottomRows(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.h.back().bottomRows(2) - ha.topRows(2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("orbitals at initialization are block diagonal") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  WfConfig cfg = tiny();
  const WaveFunction wf(cfg, mol);
  Rng rng(5);
  const ParamTree p = wf.init_params(rng);
  const Geometry g = h4_geometry();
  const WfFeatures f = wf.features(p, electrons(4, rng), g, Frame{});
  REQUIRE(static_cast<int>(f.orbitals.size()) == cfg.n_determinants);
  for (const Matrix& phi : f.orbitals) {
    CHECK(phi.rows() == 4);
    CHECK(phi.cols() == 4);
    CHECK(phi.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(phi.block(2, 0, 2, 2).cwiseAbs().maxCoeff() == 0.0);
    const SignedLog full = slogdet(phi);
    const SignedLog up = slogdet(phi.block(0, 0, 2, 2));
    const SignedLog down = slogdet(phi.block(2, 2, 2, 2));
    CHECK(full.sign == up.sign * down.sign);
    CHECK(full.log_abs == doctest::Approx(up.log_abs + down.log_abs).epsilon(1e-13));
  }
  CHECK(f.jastrow == 0.0);
}

TEST_CASE("default config has sixteen determinants") {
  const WaveFunction wf(WfConfig{}, neutral_molecule({1, 1}));
  Rng rng(6);
  const ParamTree p = wf.init_params(rng);
  const Geometry g = build_dataset("H2").domain.geometry(build_dataset("H2").domain.center());
  CHECK(wf.features(p, electrons(2, rng), g, Frame{}).orbitals.size() == 16);
}

TEST_CASE("distant electron is killed by the envelope") {
  const Molecule mol = neutral_molecule({1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(7);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.1);
  const Geometry g = build_dataset("H2").domain.geometry(build_dataset("H2").domain.center());
  Matrix e = electrons(2, rng);
  e.row(1) << 1000.0, 0.0, 0.0;
  for (const Matrix& phi : wf.features(p, e, g, Frame{}).orbitals)
    CHECK(phi.col(1).cwiseAbs().maxCoeff() < 1e-30);
}

TEST_CASE("jastrow is symmetric") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(8);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.2);
  const Geometry g = h4_geometry();
  const Matrix e = electrons(4, rng);
  Matrix x = e;
  x.row(0) = e.row(1);
  x.row(1) = e.row(0);
  const double a = wf.features(p, e, g, Frame{}).jastrow;
  const double b = wf.features(p, x, g, Frame{}).jastrow;
  CHECK(a != 0.0);
  CHECK(std::abs(a - b) < 1e-13);
}

TEST_CASE("single determinant without jastrow is its slogdet") {
  WfConfig cfg = tiny();
  cfg.n_determinants = 1;
  cfg.jastrow = false;
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(cfg, mol);
  Rng rng(9);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.2);
  p.leaf("det/w").setConstant(1.0);
  const Geometry g = h4_geometry();
  const Matrix e = electrons(4, rng);
  const WfFeatures f = wf.features(p, e, g, Frame{});
  const SignedLog d = slogdet(f.orbitals[0]);
  const SignedLog l = wf.log_psi(p, e, g, Frame{});
  CHECK(l.sign == d.sign);
  CHECK(l.log_abs == doctest::Approx(d.log_abs).epsilon(1e-14));
}

TEST_CASE("determinant weights act as a gauge") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  Rng rng(10);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.2);
  ParamTree q = p;
  q.leaf("det/w") *= 2.0;
  const Geometry g = h4_geometry();
  const Matrix e = electrons(4, rng);
  const LogPsiDerivs a = wf.log_psi_derivatives(p, e, g, Frame{});
  const LogPsiDerivs b = wf.log_psi_derivatives(q, e, g, Frame{});
  CHECK(b.log_abs - a.log_abs == doctest::Approx(std::log(2.0)));
  CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.laplacian - b.laplacian) < 1e-10);
}

TEST_CASE("analytic hooks") {
  const HydrogenHook hook;
  Matrix r(1, 3);
  r << 0.3, -1.2, 0.4;
  const LogPsiDerivs d = hook.derivatives(r);
  const double n = r.norm();
  CHECK((d.grad + r / n).norm() < 1e-15);
  CHECK(d.laplacian == doctest::Approx(-2.0 / n));

  Geometry g;
  g.positions = Matrix::Zero(1, 3);
  Matrix x(1, 3);
  x << 1, 0, 0;
  const GaussianHook half(1, 0.5);  // log psi = -|x|^2 / 2
  CHECK(local_energy(half.derivatives(x), x, g, {1}) == doctest::Approx(0.0));
  CHECK(local_energy(hook.derivatives(x), x, g, {1}) == doctest::Approx(-0.5));
}

TEST_CASE("potential energy hand values") {
  Geometry g;
  g.positions = Matrix::Zero(1, 3);
  Matrix e(1, 3);
  e << 1, 0, 0;
  CHECK(potential_energy(e, g, {1}) == doctest::Approx(-1.0));
  Matrix he(2, 3);
  he << 1, 0, 0, -1, 0, 0;
  CHECK(potential_energy(he, g, {2}) == doctest::Approx(-3.5));

  Rng rng(11);
  const Geometry h4 = h4_geometry();
  const Matrix x = electrons(4, rng);
  double v = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (j > i) v += 1.0 / (x.row(i) - x.row(j)).norm();
      v -= 1.0 / (x.row(i) - h4.positions.row(j)).norm();
      if (j > i) v += 1.0 / (h4.positions.row(i) - h4.positions.row(j)).norm();
    }
  CHECK(std::abs(potential_energy(x, h4, {1, 1, 1, 1}) - v) < 1e-12);
}

TEST_CASE("dead neuron fraction") {
  Matrix s(10, 3);
  Rng rng(12);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  s.col(1).setConstant(1.0);
  CHECK(dead_fraction(s) == doctest::Approx(1.0 / 3.0));

  WfConfig cfg = tiny();
  cfg.single_width = 8;
  const Molecule mol = neutral_molecule({1, 1});
  const WaveFunction wf(cfg, mol);
  ParamTree p = wf.init_params(rng);
  perturb(p, rng, 0.3);
  std::vector<Matrix> batch;
  for (int i = 0; i < 256; ++i) batch.push_back(electrons(2, rng));
  const Geometry g = build_dataset("H2").domain.geometry(build_dataset("H2").domain.center());
  const double f = wf.dead_neuron_fraction(p, batch, g, Frame{});
  CHECK(f == 0.0);
  const double z = wf.dead_neuron_fraction(p.zeros_like(), batch, g, Frame{});
  CHECK(z >= 0.0);
  CHECK(z <= 1.0);
}

TEST_CASE("wave function config validation") {
  WfConfig c = tiny();
  c.n_determinants = 0;
  CHECK_THROWS_AS(WaveFunction(c, neutral_molecule({1, 1})), Error);
  Molecule open = neutral_molecule({1, 1, 1});
  CHECK_THROWS_AS(WaveFunction(tiny(), open), Error);  // restricted needs a closed shell
}
