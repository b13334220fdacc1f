// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/trainer.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace planet {

namespace {

CgRoute parse_route(const std::string& s) {
  if (s == "parameter") return CgRoute::kParameter;
  if (s == "sample") return CgRoute::kSample;
  return CgRoute::kAuto;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

void apply_domain_overrides(Dataset& d, const SystemConfig& system) {
  if (!system.grid_file.empty()) d.grid = read_grid_csv(d.domain, system.grid_file);
  if (system.domain.empty()) return;
  for (const auto& [name, o] : system.domain) {
    DomainParam& p = d.domain.params()[static_cast<std::size_t>(d.domain.index(name))];
    p.lo = o.lo;
    p.hi = o.hi;
    if (o.step >= 0.0) p.step = o.step;
  }
  if (!system.grid_file.empty()) return;
  std::vector<Vector> kept;
  for (const Vector& g : d.grid)
    if (d.domain.contains(g)) kept.push_back(g);
  if (kept.empty()) kept.push_back(d.domain.center());
  d.grid = kept;
}

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)), surrogate_(config_.surrogate) {
  config_.validate();
  dataset_ = build_dataset(config_.system.name);
  apply_domain_overrides(dataset_, config_.system);
  wf_ = std::make_unique<WaveFunction>(config_.wavefunction, dataset_.molecule);
  if (config_.metagnn_enabled) gnn_ = std::make_unique<MetaGnn>(config_.metagnn, *wf_);
}

TrainState Trainer::init() const {
  TrainState s;
  Rng r1 = stream(kTagWfInit);
  s.wf = wf_->init_params(r1);
  if (gnn_) {
    Rng r2 = stream(kTagGnnInit);
    s.gnn = gnn_->init_params(r2);
  }
  const int c_geom = config_.optim.n_geometries;
  const GeometryDomain& dom = dataset_.domain;
  for (int c = 0; c < c_geom; ++c) {
    Vector p(dom.dim());
    for (int i = 0; i < dom.dim(); ++i) {
      const DomainParam& q = dom.params()[static_cast<std::size_t>(i)];
      p[i] = q.lo + (q.hi - q.lo) * (c + 0.5) / c_geom;
    }
    Rng rw = stream(kTagWalkerInit, static_cast<std::uint64_t>(c));
    WalkerState w = init_walkers(dataset_.molecule, dom.geometry(p), walkers_per_geometry(), rw,
                                 config_.mcmc.init_step);
    w.geometry_params = p;
    s.walkers.push_back(std::move(w));
  }
  if (config_.surrogate_enabled) {
    Rng r3 = stream(kTagSurrogateInit);
    s.surrogate = init_surrogate_trainer(surrogate_, r3, config_.surrogate_trainer);
  }
  if (config_.run.precision == "f32") {
    s.wf.round_to_float();
    if (gnn_) s.gnn.round_to_float();
  }
  return s;
}

Frame Trainer::frame(const Geometry& g) const {
  return config_.optim.canonical_frame ? canonical_frame(g, charges()) : Frame{};
}

ParamTree Trainer::adapted(const TrainState& s, const Geometry& g) const {
  if (!gnn_) return s.wf;
  return apply_adaptation(s.wf, gnn_->adapt(s.gnn, g));
}

std::ptrdiff_t Trainer::n_params() const {
  Rng r(0);
  std::ptrdiff_t n = wf_->init_params(r).size();
  if (gnn_) n += gnn_->init_params(r).size();
  return n;
}

Vector Trainer::flat_params(const TrainState& s) const {
  Vector v(s.wf.size() + s.gnn.size());
  v << s.wf.flat(), s.gnn.flat();
  return v;
}

void Trainer::set_flat_params(TrainState& s, const Vector& theta) const {
  require(theta.size() == s.wf.size() + s.gnn.size(), ErrorCode::kDimension,
          "trainer: parameter vector size mismatch");
  s.wf.flat() = theta.head(s.wf.size());
  s.gnn.flat() = theta.tail(s.gnn.size());
  if (config_.run.precision == "f32") {
    s.wf.round_to_float();
    s.gnn.round_to_float();
  }
}

namespace {

// Moves one geometry walker and its electrons.
Geometry move_geometry(const Dataset& d, WalkerState& w, Rng rng, bool transform) {
  if (d.domain.dim() == 0) return d.domain.geometry(w.geometry_params);
  const Geometry old_g = d.domain.geometry(w.geometry_params);
  const Vector next = geometry_walk(d.domain, w.geometry_params, rng);
  const Geometry new_g = d.domain.geometry(next);
  if (transform && next != w.geometry_params)
    for (Matrix& e : w.electrons) e = transform_electrons(e, new_g, old_g);
  w.geometry_params = next;
  return new_g;
}

}  // namespace

double Trainer::pretrain_step(TrainState& s, long long it, AdamWState& adam,
                              const OrbitalProvider& provider) const {
  const int c_geom = static_cast<int>(s.walkers.size());
  Vector grad = Vector::Zero(s.wf.size() + s.gnn.size());
  double loss = 0.0;
  for (int c = 0; c < c_geom; ++c) {
    WalkerState& w = s.walkers[static_cast<std::size_t>(c)];
    const Geometry g = move_geometry(dataset_, w, stream(kTagPretrainWalk, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(c)),
                                     config_.optim.coordinate_transform);
    const ParamTree a = adapted(s, g);
    const Frame f = frame(g);
    BoundWaveFunction psi(*wf_, a, g, f);
    mcmc_step(psi, w, config_.pretrain.mcmc_steps,
              stream(kTagPretrainMcmc, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(c)));
    Vector gc;
    loss += pretrain_loss(*wf_, a, provider, g, f, w.electrons, &gc);
    if (gnn_) {
      const Matrix row = gc.transpose();
      grad.tail(s.gnn.size()) += gnn_->backprop(s.gnn, g, a, row).row(0).transpose();
      const LeafInfo& z = s.wf.info("embed/z");
      gc.segment(z.offset, z.size()).setZero();
    }
    grad.head(s.wf.size()) += gc;
  }
  grad /= c_geom;
  Vector theta = flat_params(s);
  adamw_step(adam, theta, grad, config_.pretrain.lr, 0.0);
  set_flat_params(s, theta);
  return loss / c_geom;
}

void Trainer::pretrain(TrainState& s, std::ostream* log) const {
  const auto provider = make_provider(config_.pretrain.provider, dataset_.molecule);
  AdamWState adam;
  adam.m = Vector::Zero(s.wf.size() + s.gnn.size());
  adam.v = adam.m;
  if (log) *log << "iteration,loss\n";
  for (long long it = 0; it < config_.pretrain.iterations; ++it) {
    const double loss = pretrain_step(s, it, adam, *provider);
    if (log) *log << it << ',' << num(loss) << '\n';
  }
}

void Trainer::thermalize(TrainState& s, int sweeps, const Rng& base) const {
  for (std::size_t c = 0; c < s.walkers.size(); ++c) {
    WalkerState& w = s.walkers[c];
    const Geometry g = dataset_.domain.geometry(w.geometry_params);
    const ParamTree a = adapted(s, g);
    BoundWaveFunction psi(*wf_, a, g, frame(g));
    for (int k = 0; k < sweeps; ++k) mcmc_step(psi, w, 1, base.child(static_cast<std::uint64_t>(k), c));
  }
}

void Trainer::score_columns(const TrainState& s, const ParamTree& a, const Geometry& g,
                            const std::vector<Matrix>& electrons, Matrix& scores_t,
                            Eigen::Index col0) const {
  const Frame f = frame(g);
  const auto b = static_cast<Eigen::Index>(electrons.size());
  const std::ptrdiff_t p_wf = s.wf.size();
  std::vector<std::string> errors(electrons.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < b; ++i) {
    try {
      scores_t.col(col0 + i).head(p_wf) = wf_->score(a, electrons[static_cast<std::size_t>(i)], g, f);
    } catch (const Error& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) fail(ErrorCode::kNumerical, e);
  if (!gnn_) return;
  const Matrix rows = scores_t.block(0, col0, p_wf, b).transpose();
  scores_t.block(p_wf, col0, s.gnn.size(), b) = gnn_->backprop(s.gnn, g, a, rows).transpose();
  const LeafInfo& z = s.wf.info("embed/z");
  scores_t.block(z.offset, col0, z.size(), b).setZero();
}

StepResult Trainer::step(TrainState& s) const {
  const long long t = s.t;
  const auto tt = static_cast<std::uint64_t>(t);
  const int c_geom = static_cast<int>(s.walkers.size());
  const int b = walkers_per_geometry();
  StepResult r;
  r.lr = config_.optim.lr / (1.0 + static_cast<double>(t) / config_.optim.lr_decay);

  std::vector<Geometry> geoms;
  std::vector<ParamTree> adapted_params;
  for (int c = 0; c < c_geom; ++c) {
    WalkerState& w = s.walkers[static_cast<std::size_t>(c)];
    geoms.push_back(move_geometry(dataset_, w, stream(kTagWalk, tt, static_cast<std::uint64_t>(c)),
                                  config_.optim.coordinate_transform));
    r.geometry_params.push_back(w.geometry_params);
    adapted_params.push_back(adapted(s, geoms.back()));
  }

  Matrix energies(c_geom, b);
  for (int c = 0; c < c_geom; ++c) {
    const auto cs = static_cast<std::size_t>(c);
    const Frame f = frame(geoms[cs]);
    BoundWaveFunction psi(*wf_, adapted_params[cs], geoms[cs], f);
    r.acceptance += mcmc_step(psi, s.walkers[cs], config_.mcmc.steps,
                              stream(kTagMcmc, tt, static_cast<std::uint64_t>(c))) /
                    c_geom;
    const std::vector<Matrix>& el = s.walkers[cs].electrons;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < b; ++i)
      energies(c, i) = local_energy(psi.derivatives(el[static_cast<std::size_t>(i)]),
                                    el[static_cast<std::size_t>(i)], geoms[cs], charges());
  }

  auto abort_step = [&](const std::string& why) {
    r.aborted = true;
    r.diagnostic = why;
    ++s.aborted_steps;
    for (int c = 0; c < c_geom; ++c) {
      WalkerState& w = s.walkers[static_cast<std::size_t>(c)];
      Rng rw = stream(kTagRestart, tt, static_cast<std::uint64_t>(c));
      WalkerState fresh = init_walkers(dataset_.molecule, geoms[static_cast<std::size_t>(c)], b, rw,
                                       config_.mcmc.init_step);
      w.electrons = std::move(fresh.electrons);
    }
    thermalize(s, config_.mcmc.burn_in, stream(kTagRestartBurnIn, tt));
    ++s.t;
    return r;
  };

  if (!energies.allFinite()) return abort_step("non-finite local energy at step " + std::to_string(t));

  for (int c = 0; c < c_geom; ++c) {
    const Vector row = energies.row(c).transpose();
    r.stats.mean.push_back(row.mean());
    r.stats.sigma.push_back(EnergyStats::batch_sigma(row));
  }
  const Matrix clipped = clip_local_energies(energies, config_.optim.clip_scale);

  const Eigen::Index n = static_cast<Eigen::Index>(c_geom) * b;
  const std::ptrdiff_t p = s.wf.size() + s.gnn.size();
  Matrix scores(p, n);
  try {
    for (int c = 0; c < c_geom; ++c)
      score_columns(s, adapted_params[static_cast<std::size_t>(c)], geoms[static_cast<std::size_t>(c)],
                    s.walkers[static_cast<std::size_t>(c)].electrons, scores,
                    static_cast<Eigen::Index>(c) * b);
  } catch (const Error& e) {
    return abort_step(e.what());
  }
  if (!scores.allFinite()) return abort_step("non-finite score at step " + std::to_string(t));

  // Per-geometry centering of scores and clipped energies.
  Vector beta(n);
  for (int c = 0; c < c_geom; ++c) {
    auto blk = scores.middleCols(static_cast<Eigen::Index>(c) * b, b);
    const Vector mean = blk.rowwise().mean();
    blk.colwise() -= mean;
    const double e_mean = clipped.row(c).mean();
    for (int i = 0; i < b; ++i)
      beta[static_cast<Eigen::Index>(c) * b + i] = (clipped(c, i) - e_mean) / static_cast<double>(n);
  }
  const Vector grad = scores * beta;
  double sigma_t = 0.0;
  for (double v : r.stats.sigma) sigma_t += v;
  sigma_t /= c_geom;
  const NaturalGradientResult ng =
      natural_gradient_update_columns(scores, grad, &beta, config_.optim.damping, sigma_t, r.lr,
                                      config_.optim.cg_steps, parse_route(config_.optim.cg_route));
  r.cg_residual = ng.residual;
  if (!ng.delta.allFinite()) return abort_step("non-finite update at step " + std::to_string(t));
  set_flat_params(s, flat_params(s) - ng.delta);

  if (s.surrogate) {
    r.surrogate_loss = online_update(surrogate_, *s.surrogate, geoms, charges(), r.stats,
                                     config_.surrogate_trainer);
    r.gamma = s.surrogate->gamma;
    r.surrogate_active = true;
  }
  ++s.t;
  return r;
}

EnergyEstimate Trainer::evaluate(const TrainState& s, const Vector& params,
                                 const EvalOptions& options, std::uint64_t tag) const {
  const Geometry g = dataset_.domain.geometry(params);
  const ParamTree a = adapted(s, g);
  BoundWaveFunction psi(*wf_, a, g, frame(g));
  return evaluate_energy(psi, dataset_.molecule, g, options, stream(kTagEval, tag));
}

double Trainer::surrogate_energy(const TrainState& s, const Vector& params) const {
  require(s.surrogate.has_value(), ErrorCode::kInvalidArgument,
          "trainer: this run has no surrogate");
  return surrogate_.energy(s.surrogate->merged, dataset_.domain.geometry(params), charges());
}

std::string Trainer::log_header() const {
  std::string h = "t";
  for (int c = 0; c < config_.optim.n_geometries; ++c) h += ",energy_" + std::to_string(c);
  for (int c = 0; c < config_.optim.n_geometries; ++c) h += ",sigma_" + std::to_string(c);
  h += ",acceptance,lr,cg_residual,surrogate_loss,gamma";
  return h;
}

std::string Trainer::log_row(const StepResult& r, long long t) const {
  std::ostringstream o;
  o << t;
  for (double e : r.stats.mean) o << ',' << num(e);
  for (double v : r.stats.sigma) o << ',' << num(v);
  o << ',' << num(r.acceptance) << ',' << num(r.lr) << ',' << num(r.cg_residual) << ',';
  if (r.surrogate_active) o << num(r.surrogate_loss) << ',' << num(r.gamma);
  else o << ',';
  return o.str();
}

}  // namespace planet
