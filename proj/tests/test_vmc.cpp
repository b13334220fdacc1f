// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <planet/vmc.hpp>

#include <cmath>
#include <limits>

using namespace planet;

TEST_CASE("mcmc with zero step keeps every walker") {
  const GaussianHook target(2);
  WalkerState w;
  w.step = 0.0;
  Rng rng(1);
  for (int i = 0; i < 8; ++i) {
    Matrix e(2, 3);
    for (Eigen::Index k = 0; k < e.size(); ++k) e.data()[k] = rng.normal();
    w.electrons.push_back(e);
  }
  const std::vector<Matrix> before = w.electrons;
  McmcOptions o;
  o.adapt = false;
  CHECK(mcmc_step(target, w, 5, Rng(2), o) == 1.0);
  for (int i = 0; i < 8; ++i) CHECK(w.electrons[static_cast<std::size_t>(i)] == before[static_cast<std::size_t>(i)]);
}

TEST_CASE("step adaptation settles the acceptance rate") {
  const GaussianHook target(2);
  WalkerState w;
  w.step = 0.01;
  for (int i = 0; i < 64; ++i) w.electrons.push_back(Matrix::Zero(2, 3));
  const Rng base(3);
  double rate = 0.0;
  for (int t = 0; t < 400; ++t) rate = mcmc_step(target, w, 2, base.child(static_cast<std::uint64_t>(t)));
  double mean = 0.0;
  for (int t = 400; t < 500; ++t) mean += mcmc_step(target, w, 2, base.child(static_cast<std::uint64_t>(t))) / 100.0;
  CHECK(rate >= 0.0);
  CHECK(mean >= 0.4);
  CHECK(mean <= 0.6);
}

TEST_CASE("mcmc results do not depend on the thread count") {
  const GaussianHook target(1);
  auto run = [&] {
    WalkerState w;
    w.step = 0.5;
    for (int i = 0; i < 16; ++i) w.electrons.push_back(Matrix::Zero(1, 3));
    for (int t = 0; t < 5; ++t) mcmc_step(target, w, 3, Rng(4).child(static_cast<std::uint64_t>(t)));
    return w.electrons;
  };
  CHECK(run() == run());
}

TEST_CASE("local energy clipping") {
  Matrix e(1, 5);
  e << 0, 0, 0, 0, 10;
  const Matrix c = clip_local_energies(e, 1.0);
  CHECK(c(0, 4) == doctest::Approx(2.0));
  CHECK(c(0, 0) == 0.0);
  Matrix flat = Matrix::Constant(2, 4, 3.0);
  CHECK(clip_local_energies(flat, 5.0) == flat);
  CHECK(clip_local_energies(e, std::numeric_limits<double>::infinity()) == e);
  Vector m(4);
  m << 4, 1, 3, 2;
  CHECK(median(m) == 2.5);
}

TEST_CASE("vmc gradient centering") {
  Rng rng(5);
  Matrix s(6, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  const std::vector<int> geo = {0, 0, 0, 1, 1, 1};
  Vector e(6);
  e << 1.5, 1.5, 1.5, -2.0, 0.5, 1.0;
  const Vector g = vmc_gradient(s, e, geo, 2);
  // geometry 0 has constant energies, so its scores cannot matter
  Matrix s_second = s;
  s_second.topRows(3).setZero();
  CHECK((g - vmc_gradient(s_second, e, geo, 2)).norm() < 1e-15);
  Vector shifted = e;
  shifted.tail(3).array() += 0.25;
  CHECK((g - vmc_gradient(s, shifted, geo, 2)).norm() < 1e-15);
}

TEST_CASE("vmc gradient matches a reweighted finite difference") {
  // psi_a = exp(-a x^2) in 1-D, H = -1/2 d2/dx2 + x^2 / 2.
  const double a0 = 0.3;
  const int n = 100000;
  Rng rng(6);
  Vector x(n), el(n);
  Matrix score(n, 1);
  auto local = [](double a, double xi) { return a - 2 * a * a * xi * xi + 0.5 * xi * xi; };
  for (int i = 0; i < n; ++i) {
    x[i] = rng.normal() / std::sqrt(4 * a0);
    el[i] = local(a0, x[i]);
    score(i, 0) = -x[i] * x[i];
  }
  const double est = 2.0 * vmc_gradient(score, el, std::vector<int>(n, 0), 1)[0];
  auto reweighted = [&](double a) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(-2 * (a - a0) * x[i] * x[i]);
      num += w * local(a, x[i]);
      den += w;
    }
    return num / den;
  };
  const double h = 1e-5;
  const double fd = (reweighted(a0 + h) - reweighted(a0 - h)) / (2 * h);
  const double mean = el.mean();
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double gi = 2 * (el[i] - mean) * score(i, 0);
    var += (gi - est) * (gi - est);
  }
  const double sigma = std::sqrt(var / n) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(est - fd) < 3 * sigma);
  CHECK(est < 0.0);  // a0 below the exact 0.5
}

TEST_CASE("natural gradient on isotropic scores") {
  const int p = 4;
  Matrix s(2 * p, p);
  s.topRows(p) = Matrix::Identity(p, p) * std::sqrt(2.0 * p);
  s.bottomRows(p) = -Matrix::Identity(p, p) * std::sqrt(2.0 * p);
  // (1/n) S^T S = 2 I here.
  Vector beta(2 * p);
  for (int i = 0; i < 2 * p; ++i) beta[i] = 0.1 * (i + 1);
  const Vector grad = s.transpose() * beta;
  for (CgRoute route : {CgRoute::kParameter, CgRoute::kSample}) {
    const NaturalGradientResult r = natural_gradient_update(s, grad, &beta, 0.5, 2.0, 0.1, 10, route);
    CHECK((r.delta - 0.1 * grad / (2.0 + 1.0)).norm() < 1e-12);
    CHECK(r.damping == doctest::Approx(1.0));
  }
  const NaturalGradientResult big = natural_gradient_update(s, grad, nullptr, 1e8, 1.0, 0.1, 10);
  CHECK((big.delta - 0.1 * grad / 1e8).norm() < 1e-15);
}

TEST_CASE("parameter and sample routes agree") {
  Rng rng(7);
  const int n = 20, p = 50;
  Matrix raw(n, p);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.normal();
  const Matrix s = center_scores(raw, std::vector<int>(n, 0), 1);
  CHECK(s.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  Vector beta(n);
  for (int i = 0; i < n; ++i) beta[i] = rng.normal() / n;
  const Vector grad = s.transpose() * beta;
  const auto a = natural_gradient_update(s, grad, &beta, 1e-2, 1.0, 1.0, 100, CgRoute::kParameter);
  const auto b = natural_gradient_update(s, grad, &beta, 1e-2, 1.0, 1.0, 100, CgRoute::kSample);
  CHECK((a.delta - b.delta).norm() < 1e-8 * a.delta.norm());
  const Matrix st = s.transpose();
  const auto c = natural_gradient_update_columns(st, grad, &beta, 1e-2, 1.0, 1.0, 100, CgRoute::kSample);
  CHECK((c.delta - b.delta).norm() < 1e-12 * b.delta.norm());
  // Dense check of the damped solve.
  const Matrix f = s.transpose() * s / n + 1e-2 * Matrix::Identity(p, p);
  CHECK((f * a.delta - grad).norm() < 1e-6 * grad.norm());
}

TEST_CASE("fisher operator matches dense assembly") {
  Rng rng(8);
  Matrix s(100, 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  const Matrix c = center_scores(s, std::vector<int>(100, 0), 1);
  const FisherOperator f(c);
  Vector v(3);
  v << 1, -2, 0.5;
  CHECK((f(v) - f.dense() * v).norm() < 1e-12);
}

TEST_CASE("electron transform examples") {
  Geometry old_g;
  old_g.positions = Matrix::Zero(2, 3);
  old_g.positions(1, 0) = 4.0;
  Matrix e(1, 3);
  e << 0.5, 0, 0;
  CHECK(transform_electrons(e, old_g, old_g) == e);
  Geometry moved = old_g;
  moved.positions.row(0) << 0, 0, 1;
  const Matrix out = transform_electrons(e, moved, old_g);
  CHECK((out - Matrix(Eigen::RowVector3d(0.5, 0, 1))).norm() < 1e-15);

  Geometry one, one_moved;
  one.positions = Matrix::Zero(1, 3);
  one_moved.positions = Matrix(Eigen::RowVector3d(1, 2, 3));
  Matrix many(3, 3);
  many << 1, 1, 1, -2, 0, 5, 0.1, 0.2, 0.3;
  const Matrix shifted = transform_electrons(many, one_moved, one);
  CHECK((shifted - (many.rowwise() + Eigen::RowVector3d(1, 2, 3))).norm() < 1e-14);
}

TEST_CASE("evaluate_energy: zero variance and 1/sqrt(S) scaling") {
  Molecule h;
  h.charges = {1};
  h.n_up = 1;
  Geometry g;
  g.positions = Matrix::Zero(1, 3);
  EvalOptions o;
  o.n_samples = 4000;
  o.n_walkers = 100;
  o.burn_in = 100;
  o.steps_between = 10;
  const EnergyEstimate exact = evaluate_energy(HydrogenHook(), h, g, o, Rng(9));
  CHECK(exact.energy == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(exact.stderr_naive < 1e-10);
  CHECK(exact.n_samples == 4000);

  const GaussianHook trial(1, 1.0);
  const EnergyEstimate a = evaluate_energy(trial, h, g, o, Rng(10));
  o.n_samples = 16000;
  const EnergyEstimate b = evaluate_energy(trial, h, g, o, Rng(10));
  CHECK(a.stderr_naive / b.stderr_naive == doctest::Approx(2.0).epsilon(0.2));
  CHECK(b.energy > -0.5);  // variational bound
}

TEST_CASE("walker initialisation spreads electrons over nuclei") {
  const Molecule mol = neutral_molecule({1, 1, 1, 1});
  const Geometry g = build_dataset("H4").domain.geometry(build_dataset("H4").domain.center());
  Rng rng(11);
  const WalkerState w = init_walkers(mol, g, 10, rng, 0.1);
  CHECK(w.size() == 10);
  CHECK(w.step == 0.1);
  CHECK(w.electrons[0].rows() == 4);
  CHECK(EnergyStats::batch_sigma(Vector::Constant(5, 2.0)) == 0.0);
  Vector e(4);
  e << 1, -1, 1, -1;
  CHECK(EnergyStats::batch_sigma(e) == doctest::Approx(0.5));
}
