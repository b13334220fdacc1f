// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/vmc.hpp>

#include <algorithm>
#include <cmath>

namespace planet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_sqrt(double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }

}  // namespace

double EnergyStats::batch_sigma(const Vector& e) {
  if (e.size() == 0) return 0.0;
  const double mean = e.mean();
  return std::sqrt((e.array() - mean).square().sum()) / static_cast<double>(e.size());
}

WalkerState init_walkers(const Molecule& molecule, const Geometry& geometry, int n_walkers,
                         Rng& rng, double step) {
  require(n_walkers > 0, ErrorCode::kInvalidArgument, "init_walkers: need at least one walker");
  require(step > 0.0, ErrorCode::kInvalidArgument, "init_walkers: step size must be positive");
  std::vector<int> slots;
  const int max_z = *std::max_element(molecule.charges.begin(), molecule.charges.end());
  for (int round = 0; round < max_z; ++round)
    for (int m = 0; m < molecule.n_nuclei(); ++m)
      if (molecule.charges[static_cast<std::size_t>(m)] > round) slots.push_back(m);
  const int n = molecule.n_electrons();
  WalkerState w;
  w.step = step;
  for (int b = 0; b < n_walkers; ++b) {
    Matrix e(n, 3);
    for (int i = 0; i < n; ++i) {
      const int m = slots[static_cast<std::size_t>(i) % slots.size()];
      for (int k = 0; k < 3; ++k) e(i, k) = geometry.positions(m, k) + rng.normal();
    }
    w.electrons.push_back(std::move(e));
  }
  return w;
}

double potential_energy(const Matrix& e, const Geometry& geometry,
                        const std::vector<int>& charges) {
  const Matrix& r = geometry.positions;
  double v = 0.0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = (e.row(i) - e.row(j)).norm();
      if (d == 0.0) return kNaN;
      v += 1.0 / d;
    }
    for (Eigen::Index m = 0; m < r.rows(); ++m) {
      const double d = (e.row(i) - r.row(m)).norm();
      if (d == 0.0) return kNaN;
      v -= charges[static_cast<std::size_t>(m)] / d;
    }
  }
  for (Eigen::Index a = 0; a < r.rows(); ++a)
    for (Eigen::Index b = 0; b < a; ++b)
      v += charges[static_cast<std::size_t>(a)] * charges[static_cast<std::size_t>(b)] /
           (r.row(a) - r.row(b)).norm();
  return v;
}

double local_energy(const LogPsiDerivs& d, const Matrix& electrons, const Geometry& geometry,
                    const std::vector<int>& charges) {
  if (d.singular()) return kNaN;
  const double kinetic = -0.5 * (d.laplacian + d.grad.squaredNorm());
  return kinetic + potential_energy(electrons, geometry, charges);
}

double mcmc_step(const Ansatz& psi, WalkerState& w, int n_steps, const Rng& stream,
                 const McmcOptions& opt) {
  require(w.step >= 0.0, ErrorCode::kInvalidArgument, "mcmc_step: negative step size");
  require(n_steps >= 0, ErrorCode::kInvalidArgument, "mcmc_step: negative sweep count");
  const int n_walkers = w.size();
  if (n_walkers == 0 || n_steps == 0) return 0.0;
  std::vector<long long> accepted(static_cast<std::size_t>(n_walkers), 0);
  const double step = w.step;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n_walkers; ++b) {
    Rng rng = stream.child(static_cast<std::uint64_t>(b));
    Matrix& e = w.electrons[static_cast<std::size_t>(b)];
    SignedLog cur = psi.log_psi(e);
    Matrix prop(e.rows(), e.cols());
    for (int s = 0; s < n_steps; ++s) {
      for (Eigen::Index i = 0; i < prop.size(); ++i) prop.data()[i] = e.data()[i] + step * rng.normal();
      const SignedLog next = psi.log_psi(prop);
      const double u = rng.uniform();
      bool accept;
      if (next.sign == 0) {
        accept = false;
      } else if (cur.sign == 0) {
        accept = true;
      } else {
        accept = std::log(u) < 2.0 * (next.log_abs - cur.log_abs);
      }
      if (accept) {
        e = prop;
        cur = next;
        ++accepted[static_cast<std::size_t>(b)];
      }
    }
  }
  long long total = 0;
  for (long long a : accepted) total += a;
  const double rate = static_cast<double>(total) / (static_cast<double>(n_walkers) * n_steps);
  if (opt.adapt) {
    if (rate > opt.target_high) w.step *= opt.adapt_factor;
    if (rate < opt.target_low) w.step /= opt.adapt_factor;
  }
  return rate;
}

double median(Vector v) {
  require(v.size() > 0, ErrorCode::kInvalidArgument, "median of an empty set");
  std::sort(v.data(), v.data() + v.size());
  const Eigen::Index n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix clip_local_energies(const Matrix& e, double scale) {
  require(scale > 0.0, ErrorCode::kInvalidArgument, "clip_local_energies: scale must be > 0");
  if (std::isinf(scale)) return e;
  Matrix out = e;
  for (Eigen::Index c = 0; c < e.rows(); ++c) {
    if (e.cols() == 0) continue;
    const Vector row = e.row(c).transpose();
    const double med = median(row);
    const double mad = (row.array() - med).abs().mean();
    const double lo = med - scale * mad, hi = med + scale * mad;
    for (Eigen::Index b = 0; b < e.cols(); ++b) out(c, b) = std::clamp(e(c, b), lo, hi);
  }
  return out;
}

Vector vmc_gradient(const Matrix& scores, const Vector& energies,
                    const std::vector<int>& geometry_of, int n_geometries) {
  const Eigen::Index n = scores.rows();
  require(energies.size() == n && static_cast<Eigen::Index>(geometry_of.size()) == n,
          ErrorCode::kDimension, "vmc_gradient: scores, energies and labels differ in length");
  require(n > 0, ErrorCode::kInvalidArgument, "vmc_gradient: empty batch");
  std::vector<double> sum(static_cast<std::size_t>(n_geometries), 0.0);
  std::vector<int> count(static_cast<std::size_t>(n_geometries), 0);
  for (Eigen::Index s = 0; s < n; ++s) {
    sum[static_cast<std::size_t>(geometry_of[static_cast<std::size_t>(s)])] += energies[s];
    ++count[static_cast<std::size_t>(geometry_of[static_cast<std::size_t>(s)])];
  }
  Vector centered(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto c = static_cast<std::size_t>(geometry_of[static_cast<std::size_t>(s)]);
    centered[s] = energies[s] - sum[c] / count[c];
  }
  return scores.transpose() * centered / static_cast<double>(n);
}

Matrix center_scores(const Matrix& scores, const std::vector<int>& geometry_of, int n_geometries) {
  require(static_cast<Eigen::Index>(geometry_of.size()) == scores.rows(), ErrorCode::kDimension,
          "center_scores: label count mismatch");
  Matrix mean = Matrix::Zero(n_geometries, scores.cols());
  std::vector<int> count(static_cast<std::size_t>(n_geometries), 0);
  for (Eigen::Index s = 0; s < scores.rows(); ++s) {
    mean.row(geometry_of[static_cast<std::size_t>(s)]) += scores.row(s);
    ++count[static_cast<std::size_t>(geometry_of[static_cast<std::size_t>(s)])];
  }
  for (int c = 0; c < n_geometries; ++c)
    if (count[static_cast<std::size_t>(c)] > 0) mean.row(c) /= count[static_cast<std::size_t>(c)];
  Matrix out = scores;
  for (Eigen::Index s = 0; s < scores.rows(); ++s)
    out.row(s) -= mean.row(geometry_of[static_cast<std::size_t>(s)]);
  return out;
}

Vector FisherOperator::operator()(const Vector& v) const {
  require(v.size() == s_.cols(), ErrorCode::kDimension, "Fisher matvec: size mismatch");
  const Vector sv = s_ * v;
  return s_.transpose() * sv / static_cast<double>(s_.rows());
}

Matrix FisherOperator::dense() const {
  return s_.transpose() * s_ / static_cast<double>(s_.rows());
}

CgResult sample_space_cg(const Matrix& gram, const Vector& beta, double damping, int n,
                         int max_iter, Vector* alpha_out) {
  require(gram.rows() == beta.size() && gram.cols() == beta.size(), ErrorCode::kDimension,
          "sample_space_cg: Gram matrix and coefficients differ in size");
  require(damping >= 0.0 && max_iter >= 0, ErrorCode::kInvalidArgument,
          "sample_space_cg: invalid damping or iteration count");
  const double inv_n = 1.0 / n;
  Vector a = Vector::Zero(beta.size());
  Vector rho = beta;
  Vector pi = beta;
  Vector g_rho = gram * rho;
  double rr = rho.dot(g_rho);
  CgResult out;
  out.residual_norms.push_back(safe_sqrt(rr));
  for (int k = 0; k < max_iter; ++k) {
    if (rr <= 0.0) break;
    const Vector g_pi = gram * pi;
    const Vector q = inv_n * g_pi + damping * pi;
    const double pap = g_pi.dot(q);
    if (pap <= 0.0) break;
    const double step = rr / pap;
    a += step * pi;
    rho -= step * q;
    g_rho = gram * rho;
    const double rr_next = rho.dot(g_rho);
    pi = rho + (rr_next / rr) * pi;
    rr = rr_next;
    out.residual_norms.push_back(safe_sqrt(rr));
    ++out.iterations;
  }
  if (alpha_out) *alpha_out = a;
  return out;
}

namespace {

// s: n x P centered scores (a matrix or a transposed view).
template <class S>
NaturalGradientResult natural_gradient_impl(const S& s, const Vector& grad, const Vector* beta,
                                            double damping_base, double sigma_t, double lr,
                                            int cg_steps, CgRoute route) {
  require(grad.size() == s.cols(), ErrorCode::kDimension,
          "natural_gradient_update: gradient does not match the score width");
  NaturalGradientResult out;
  out.damping = damping_base * sigma_t;
  if (route == CgRoute::kAuto)
    route = (beta != nullptr && s.cols() > s.rows()) ? CgRoute::kSample : CgRoute::kParameter;
  if (route == CgRoute::kSample) {
    require(beta != nullptr && beta->size() == s.rows(), ErrorCode::kInvalidArgument,
            "natural_gradient_update: sample route needs gradient coefficients");
    Matrix gram = Matrix::Zero(s.rows(), s.rows());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(s);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    Vector alpha;
    CgResult cg = sample_space_cg(gram, *beta, out.damping, static_cast<int>(s.rows()), cg_steps,
                                  &alpha);
    out.delta = lr * (s.transpose() * alpha);
    out.residual = cg.residual_norms.back();
    out.iterations = cg.iterations;
    return out;
  }
  const double n = static_cast<double>(s.rows());
  CgResult cg = cg_solve(
      [&s, n](const Vector& v) {
        const Vector sv = s * v;
        return Vector(s.transpose() * sv / n);
      },
      grad, out.damping, cg_steps);
  out.delta = lr * cg.x;
  out.residual = cg.residual_norms.back();
  out.iterations = cg.iterations;
  return out;
}

}  // namespace

NaturalGradientResult natural_gradient_update(const Matrix& s, const Vector& grad,
                                              const Vector* beta, double damping_base,
                                              double sigma_t, double lr, int cg_steps,
                                              CgRoute route) {
  return natural_gradient_impl(s, grad, beta, damping_base, sigma_t, lr, cg_steps, route);
}

NaturalGradientResult natural_gradient_update_columns(const Matrix& scores_t, const Vector& grad,
                                                      const Vector* beta, double damping_base,
                                                      double sigma_t, double lr, int cg_steps,
                                                      CgRoute route) {
  return natural_gradient_impl(scores_t.transpose(), grad, beta, damping_base, sigma_t, lr,
                               cg_steps, route);
}

Matrix transform_electrons(const Matrix& electrons, const Geometry& new_geometry,
                           const Geometry& old_geometry) {
  require(new_geometry.size() == old_geometry.size(), ErrorCode::kDimension,
          "transform_electrons: geometries differ in atom count");
  Matrix out = electrons;
  const Matrix& old_r = old_geometry.positions;
  for (Eigen::Index i = 0; i < electrons.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < old_r.rows(); ++m) {
      const double d = (electrons.row(i) - old_r.row(m)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    out.row(i) = new_geometry.positions.row(best) + (electrons.row(i) - old_r.row(best));
  }
  return out;
}

EnergyEstimate evaluate_energy(const Ansatz& psi, const Molecule& molecule,
                               const Geometry& geometry, const EvalOptions& options,
                               const Rng& rng) {
  Rng init = rng.child(2);
  const int n_walkers =
      static_cast<int>(std::min<long long>(options.n_walkers, std::max<long long>(options.n_samples, 1)));
  WalkerState w = init_walkers(molecule, geometry, n_walkers, init, options.init_step);
  return evaluate_energy(psi, w, geometry, molecule.charges, options, rng);
}

EnergyEstimate evaluate_energy(const Ansatz& psi, WalkerState& w, const Geometry& geometry,
                               const std::vector<int>& charges, const EvalOptions& options,
                               const Rng& rng) {
  require(options.n_samples > 0, ErrorCode::kInvalidArgument,
          "evaluate_energy: n_samples must be positive");
  for (int s = 0; s < options.burn_in; ++s) mcmc_step(psi, w, 1, rng.child(0, static_cast<std::uint64_t>(s)));
  std::vector<double> energies;
  energies.reserve(static_cast<std::size_t>(options.n_samples));
  double acc_sum = 0.0;
  int blocks = 0;
  std::vector<double> block(static_cast<std::size_t>(w.size()));
  while (static_cast<long long>(energies.size()) < options.n_samples) {
    McmcOptions fixed;
    fixed.adapt = false;
    acc_sum += mcmc_step(psi, w, options.steps_between,
                         rng.child(1, static_cast<std::uint64_t>(blocks)), fixed);
    ++blocks;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < w.size(); ++b) {
      const Matrix& e = w.electrons[static_cast<std::size_t>(b)];
      block[static_cast<std::size_t>(b)] = local_energy(psi.derivatives(e), e, geometry, charges);
    }
    for (double e : block) {
      if (static_cast<long long>(energies.size()) >= options.n_samples) break;
      if (std::isfinite(e)) energies.push_back(e);
    }
  }
  EnergyEstimate out;
  out.n_samples = static_cast<long long>(energies.size());
  double sum = 0.0;
  for (double e : energies) sum += e;
  out.energy = sum / static_cast<double>(out.n_samples);
  double ss = 0.0;
  for (double e : energies) ss += (e - out.energy) * (e - out.energy);
  out.std_dev = std::sqrt(ss / static_cast<double>(out.n_samples));
  out.stderr_naive = out.std_dev / std::sqrt(static_cast<double>(out.n_samples));
  out.acceptance = blocks > 0 ? acc_sum / blocks : 0.0;
  return out;
}

}  // namespace planet
