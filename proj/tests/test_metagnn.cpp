// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <planet/metagnn.hpp>

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

MetaGnnConfig small_gnn() {
  MetaGnnConfig c;
  c.node_dim = 8;
  c.message_dim = 6;
  c.n_rbf = 4;
  return c;
}

// Heads start at zero; move everything so the offsets are live.
ParamTree live_params(const MetaGnn& gnn, Rng& rng) {
  ParamTree p = gnn.init_params(rng);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.flat()[i] += 0.1 * rng.normal();
  return p;
}

Geometry line4() {
  Geometry g;
  g.positions = Matrix::Zero(4, 3);
  g.positions(1, 0) = 1.3;
  g.positions(2, 0) = 2.9;
  g.positions(3, 1) = 1.7;
  return g;
}

double max_diff(const ParamAdaptation& a, const ParamAdaptation& b) {
  double d = (a.z - b.z).cwiseAbs().maxCoeff();
  d = std::max(d, (a.d_pi - b.d_pi).cwiseAbs().maxCoeff());
  d = std::max(d, (a.d_sigma - b.d_sigma).cwiseAbs().maxCoeff());
  d = std::max(d, (a.d_w - b.d_w).cwiseAbs().maxCoeff());
  return std::max(d, (a.d_bias - b.d_bias).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("bessel radial basis") {
  const RowVector r = bessel_rbf(1.0, 3, 20.0);
  for (int n = 1; n <= 3; ++n)
    CHECK(r[n - 1] == doctest::Approx(std::sqrt(0.1) * std::sin(n * M_PI / 20.0)));
  CHECK(std::abs(bessel_rbf(20.0, 2, 20.0)[0]) < 1e-15);
}

TEST_CASE("offset heads are zero at initialisation") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(1);
  const ParamTree p = gnn.init_params(rng);
  const ParamAdaptation a = gnn.adapt(p, line4());
  CHECK(a.z.rows() == 4);
  CHECK(a.z.cols() == 4);
  CHECK(a.d_pi.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.d_sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.d_w.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.d_bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adaptation is invariant to rigid motion and relabelling") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(2);
  const ParamTree p = live_params(gnn, rng);
  const Geometry g = line4();
  const ParamAdaptation a = gnn.adapt(p, g);

  Geometry moved = g;
  const double c = std::cos(0.7), s = std::sin(0.7);
  Matrix3 rot;
  rot << c, -s, 0, s, c, 0, 0, 0, 1;
  moved.positions = (g.positions * rot.transpose()).rowwise() + Eigen::RowVector3d(3, -1, 0.5);
  CHECK(max_diff(a, gnn.adapt(p, moved)) < 1e-12);

  Geometry perm = g;
  perm.positions.row(0) = g.positions.row(2);
  perm.positions.row(2) = g.positions.row(0);
  const ParamAdaptation b = gnn.adapt(p, perm);
  CHECK((a.z.row(0) - b.z.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.d_pi.row(2) - b.d_pi.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.d_w - b.d_w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single nucleus has no edges") {
  const Molecule mol = neutral_molecule({2});
  const WaveFunction wf(tiny(), mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(3);
  const ParamTree p = live_params(gnn, rng);
  Geometry g;
  g.positions = Matrix::Zero(1, 3);
  const ParamAdaptation a = gnn.adapt(p, g);
  CHECK(a.z.allFinite());
  CHECK(a.d_w.allFinite());
}

TEST_CASE("apply_adaptation") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const WaveFunction wf(tiny(), mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(4);
  const ParamTree base = wf.init_params(rng);
  const ParamAdaptation a = gnn.adapt(live_params(gnn, rng), line4());
  const ParamTree once = apply_adaptation(base, a);
  const ParamTree twice = apply_adaptation(once, a);
  CHECK(once.leaf("embed/z") == a.z);
  const Matrix d1 = once.leaf("env/pi") - base.leaf("env/pi");
  const Matrix d2 = twice.leaf("env/pi") - base.leaf("env/pi");
  CHECK((d2 - 2 * d1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((d1 - a.d_pi.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(once.leaf("embed/W") == base.leaf("embed/W"));

  ParamAdaptation zero = a;
  zero.z.setZero();
  zero.d_pi.setZero();
  zero.d_sigma.setZero();
  zero.d_w.setZero();
  zero.d_bias.setZero();
  const ParamTree z = apply_adaptation(base, zero);
  CHECK(z.leaf("embed/z").cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.leaf("det/w") == base.leaf("det/w"));

  ParamAdaptation bad = a;
  bad.d_w = Vector::Zero(7);
  CHECK_THROWS_AS(apply_adaptation(base, bad), Error);
}

TEST_CASE("large negative envelope offsets keep log psi finite") {
  const Molecule mol = neutral_molecule({1, 1});
  const WaveFunction wf(tiny(), mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(5);
  const ParamTree base = wf.init_params(rng);
  Geometry g;
  g.positions = Matrix::Zero(2, 3);
  g.positions(1, 2) = 1.4;
  ParamAdaptation a = gnn.adapt(gnn.init_params(rng), g);
  a.d_sigma.setConstant(-50.0);
  const ParamTree p = apply_adaptation(base, a);
  Matrix e(2, 3);
  e << 0.1, 0.2, 0.3, -0.2, 0.1, 1.2;
  const SignedLog r = wf.log_psi(p, e, g, Frame{});
  CHECK(std::isfinite(r.log_abs));
  CHECK(r.sign != 0);
}

TEST_CASE("backprop matches finite differences of the adapted log psi") {
  const Molecule mol = neutral_molecule({1, 1, 1});
  WfConfig cfg = tiny();
  cfg.restricted = false;
  const WaveFunction wf(cfg, mol);
  const MetaGnn gnn(small_gnn(), wf);
  Rng rng(6);
  ParamTree base = wf.init_params(rng);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.flat()[i] += 0.2 * rng.normal();
  const ParamTree theta = live_params(gnn, rng);
  Geometry g;
  g.positions = Matrix::Zero(3, 3);
  g.positions(1, 0) = 1.5;
  g.positions(2, 1) = 1.9;
  Matrix e(3, 3);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();

  auto logpsi = [&](const ParamTree& t) {
    return wf.log_psi(apply_adaptation(base, gnn.adapt(t, g)), e, g, Frame{}).log_abs;
  };
  const Vector score = wf.score(apply_adaptation(base, gnn.adapt(theta, g)), e, g, Frame{});
  const Matrix grads = gnn.backprop(theta, g, base, score.transpose());
  REQUIRE(grads.rows() == 1);
  REQUIRE(grads.cols() == theta.size());

  const double h = 1e-3;
  double worst = 0.0, scale = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); j += 7) {
    auto at = [&](double dx) {
      ParamTree t = theta;
      t.flat()[j] += dx;
      return logpsi(t);
    };
    const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    worst = std::max(worst, std::abs(fd - grads(0, j)));
    scale = std::max(scale, std::abs(fd));
  }
  CHECK(scale > 0.0);
  CHECK(worst < 1e-6 * std::max(1.0, scale));
  CHECK_THROWS_AS(gnn.backprop(theta, g, base, Matrix::Zero(1, 3)), Error);
}
