// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/surrogate.hpp>

#include <planet/metagnn.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace planet {

namespace {

constexpr double kSigmaFloor = 1e-12;

void add_dense(ParamTree& t, const std::string& name, int out, int in, bool bias) {
  t.add(name + "/W", out, in);
  if (bias) t.add(name + "/b", out);
}

std::string blk(int b) { return "sur/block" + std::to_string(b); }

}  // namespace

void SurrogateConfig::validate() const {
  require(cutoff > 0.0, ErrorCode::kConfig, "surrogate: cutoff must be positive");
  require(n_rbf > 0 && n_sbf > 0 && n_blocks >= 0 && basis_embed > 0 && interaction_dim > 0 &&
              out_dim > 0 && layers_before_skip >= 0 && layers_after_skip >= 0 &&
              out_layers >= 0 && envelope_exponent > 0 && max_z > 0,
          ErrorCode::kConfig, "surrogate: dimensions must be positive");
}

double poly_envelope(double x, int p) {
  if (x >= 1.0) return 0.0;
  const double xp = std::pow(x, p);
  return 1.0 - 0.5 * (p + 1) * (p + 2) * xp + p * (p + 2) * xp * x - 0.5 * p * (p + 1) * xp * x * x;
}

SurrogateGraph build_surrogate_graph(const SurrogateConfig& c, const Geometry& geometry,
                                     const std::vector<int>& charges) {
  const int m = geometry.size();
  require(static_cast<int>(charges.size()) == m, ErrorCode::kDimension,
          "surrogate: charge count does not match the geometry");
  const Matrix& r = geometry.positions;
  Matrix dist(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) dist(a, b) = (r.row(a) - r.row(b)).norm();

  // Canonical atom order: charge, then the sorted distance list.
  std::vector<std::vector<double>> key(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b)
      if (b != a) key[static_cast<std::size_t>(a)].push_back(dist(a, b));
    std::sort(key[static_cast<std::size_t>(a)].begin(), key[static_cast<std::size_t>(a)].end());
  }
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int za = charges[static_cast<std::size_t>(a)], zb = charges[static_cast<std::size_t>(b)];
    if (za != zb) return za < zb;
    return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
  });

  SurrogateGraph g;
  for (int a : order) {
    const int z = charges[static_cast<std::size_t>(a)];
    require(z >= 1 && z <= c.max_z, ErrorCode::kUnsupported,
            "surrogate: nuclear charge outside the species table");
    g.atom_z.push_back(z);
  }
  std::vector<RowVector> rbf_rows;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double d = dist(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      if (d >= c.cutoff) continue;
      g.edge_i.push_back(i);
      g.edge_j.push_back(j);
      rbf_rows.push_back(bessel_rbf(d, c.n_rbf, c.cutoff) * poly_envelope(d / c.cutoff, c.envelope_exponent));
    }
  const auto n_edges = static_cast<Eigen::Index>(g.edge_i.size());
  g.rbf.resize(n_edges, c.n_rbf);
  for (Eigen::Index e = 0; e < n_edges; ++e) g.rbf.row(e) = rbf_rows[static_cast<std::size_t>(e)];

  std::vector<RowVector> sbf_rows;
  for (Eigen::Index ji = 0; ji < n_edges; ++ji) {
    const int i = g.edge_i[static_cast<std::size_t>(ji)];
    const int j = g.edge_j[static_cast<std::size_t>(ji)];
    for (Eigen::Index kj = 0; kj < n_edges; ++kj) {
      if (g.edge_i[static_cast<std::size_t>(kj)] != j) continue;
      const int k = g.edge_j[static_cast<std::size_t>(kj)];
      if (k == i) continue;
      const RowVector u = r.row(order[static_cast<std::size_t>(i)]) - r.row(order[static_cast<std::size_t>(j)]);
      const RowVector v = r.row(order[static_cast<std::size_t>(k)]) - r.row(order[static_cast<std::size_t>(j)]);
      const double cos_t = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
      RowVector row(c.n_sbf * c.n_rbf);
      // cos(l theta) by the Chebyshev recurrence
      std::vector<double> cheb(static_cast<std::size_t>(std::max(c.n_sbf, 2)));
      cheb[0] = 1.0;
      cheb[1] = cos_t;
      for (std::size_t l = 2; l < cheb.size(); ++l) cheb[l] = 2.0 * cos_t * cheb[l - 1] - cheb[l - 2];
      for (int l = 0; l < c.n_sbf; ++l)
        row.segment(l * c.n_rbf, c.n_rbf) = cheb[static_cast<std::size_t>(l)] * g.rbf.row(kj);
      g.trip_kj.push_back(static_cast<int>(kj));
      g.trip_ji.push_back(static_cast<int>(ji));
      sbf_rows.push_back(row);
    }
  }
  g.atom_graph.assign(static_cast<std::size_t>(m), 0);
  g.sbf.resize(static_cast<Eigen::Index>(sbf_rows.size()), c.n_sbf * c.n_rbf);
  for (std::size_t t = 0; t < sbf_rows.size(); ++t) g.sbf.row(static_cast<Eigen::Index>(t)) = sbf_rows[t];
  return g;
}

Surrogate::Surrogate(SurrogateConfig config) : config_(config) { config_.validate(); }

ParamTree Surrogate::init_params(Rng& rng) const {
  const SurrogateConfig& c = config_;
  const int h = c.interaction_dim;
  ParamTree t;
  t.add("sur/species", c.max_z, h);
  t.add("sur/offset", c.max_z);
  add_dense(t, "sur/embed/rbf", h, c.n_rbf, true);
  add_dense(t, "sur/embed/msg", h, 3 * h, true);
  for (int b = 0; b <= c.n_blocks; ++b) {
    const std::string o = blk(b) + "/out";
    add_dense(t, o + "/rbf", h, c.n_rbf, false);
    add_dense(t, o + "/up", c.out_dim, h, false);
    for (int l = 0; l < c.out_layers; ++l) add_dense(t, o + "/dense" + std::to_string(l), c.out_dim, c.out_dim, true);
    add_dense(t, o + "/final", 1, c.out_dim, false);
    if (b == 0) continue;
    const std::string p = blk(b) + "/int";
    add_dense(t, p + "/ji", h, h, true);
    add_dense(t, p + "/kj", h, h, true);
    add_dense(t, p + "/rbf1", c.basis_embed, c.n_rbf, false);
    add_dense(t, p + "/rbf2", h, c.basis_embed, false);
    add_dense(t, p + "/sbf1", c.basis_embed, c.n_sbf * c.n_rbf, false);
    add_dense(t, p + "/sbf2", h, c.basis_embed, false);
    add_dense(t, p + "/up", h, h, true);
    for (int l = 0; l < c.layers_before_skip; ++l)
      for (int s = 0; s < 2; ++s) add_dense(t, p + "/before" + std::to_string(l) + "_" + std::to_string(s), h, h, true);
    add_dense(t, p + "/skip", h, h, true);
    for (int l = 0; l < c.layers_after_skip; ++l)
      for (int s = 0; s < 2; ++s) add_dense(t, p + "/after" + std::to_string(l) + "_" + std::to_string(s), h, h, true);
  }
  t.freeze();
  const double root3 = std::sqrt(3.0);
  for (const LeafInfo& l : t.leaves()) {
    auto v = t.leaf(l.name);
    if (l.name == "sur/species") {
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = root3 * (2.0 * rng.uniform() - 1.0);
    } else if (l.name.back() == 'W') {
      const double s = 1.0 / std::sqrt(static_cast<double>(l.cols));
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = s * rng.normal();
    }
  }
  for (int b = 0; b <= c.n_blocks; ++b) t.leaf(blk(b) + "/out/final/W").setZero();
  return t;
}

template <class B>
typename B::T Surrogate::forward(B& b, const ParamTree& params, bool track,
                                 const SurrogateGraph& g) const {
  using T = typename B::T;
  const SurrogateConfig& c = config_;
  auto P = [&](const std::string& name) { return params.ref(name, track); };
  auto dense = [&](const T& x, const std::string& name) {
    return b.act(b.linear(x, P(name + "/W"), P(name + "/b")), Act::kSilu);
  };
  auto residual = [&](const T& x, const std::string& name) {
    const T y = dense(dense(x, name + "_0"), name + "_1");
    return b.add(x, y);
  };
  const int m = static_cast<int>(g.atom_z.size());
  const auto n_edges = static_cast<int>(g.edge_i.size());
  std::vector<int> zrow(g.atom_z.size());
  for (std::size_t a = 0; a < g.atom_z.size(); ++a) zrow[a] = g.atom_z[a] - 1;

  const T rbf = b.constant(g.rbf);
  const T sbf = b.constant(g.sbf);
  const T h = b.gather_rows(b.param(P("sur/species")), zrow);
  const T hi = b.gather_rows(h, g.edge_i);
  const T hj = b.gather_rows(h, g.edge_j);
  const T rbf_e = dense(rbf, "sur/embed/rbf");
  T msg = dense(b.concat_cols({&hi, &hj, &rbf_e}), "sur/embed/msg");

  auto output = [&](int blk_id, const T& x) {
    const std::string o = blk(blk_id) + "/out";
    const T w = b.mul(x, b.linear(rbf, P(o + "/rbf/W")));
    T a = b.linear(b.scatter_rows(w, g.edge_i, m), P(o + "/up/W"));
    for (int l = 0; l < c.out_layers; ++l) a = dense(a, o + "/dense" + std::to_string(l));
    return b.linear(a, P(o + "/final/W"));
  };

  T atoms = output(0, msg);
  for (int bi = 1; bi <= c.n_blocks; ++bi) {
    const std::string p = blk(bi) + "/int";
    const T x_ji = dense(msg, p + "/ji");
    const T rbf_p = b.linear(b.linear(rbf, P(p + "/rbf1/W")), P(p + "/rbf2/W"));
    const T x_kj = b.mul(dense(msg, p + "/kj"), rbf_p);
    const T sbf_p = b.linear(b.linear(sbf, P(p + "/sbf1/W")), P(p + "/sbf2/W"));
    const T trip = b.mul(b.gather_rows(x_kj, g.trip_kj), sbf_p);
    const T agg = b.scatter_rows(trip, g.trip_ji, n_edges);
    T y = dense(b.add(x_ji, agg), p + "/up");
    for (int l = 0; l < c.layers_before_skip; ++l) y = residual(y, p + "/before" + std::to_string(l));
    y = b.add(dense(y, p + "/skip"), msg);
    for (int l = 0; l < c.layers_after_skip; ++l) y = residual(y, p + "/after" + std::to_string(l));
    msg = y;
    atoms = b.add(atoms, output(bi, msg));
  }
  const T offsets = b.gather_rows(b.param(P("sur/offset")), zrow);
  return b.scatter_rows(b.add(atoms, offsets), g.atom_graph, g.n_graphs);
}

template ValueBackend::T Surrogate::forward(ValueBackend&, const ParamTree&, bool,
                                            const SurrogateGraph&) const;
template TapeBackend::T Surrogate::forward(TapeBackend&, const ParamTree&, bool,
                                           const SurrogateGraph&) const;

SurrogateGraph merge_graphs(const std::vector<SurrogateGraph>& graphs) {
  SurrogateGraph out;
  out.n_graphs = static_cast<int>(graphs.size());
  Eigen::Index n_edges = 0, n_trip = 0, rbf_cols = 0, sbf_cols = 0;
  for (const SurrogateGraph& g : graphs) {
    n_edges += g.rbf.rows();
    n_trip += g.sbf.rows();
    rbf_cols = std::max(rbf_cols, g.rbf.cols());
    sbf_cols = std::max(sbf_cols, g.sbf.cols());
  }
  out.rbf.resize(n_edges, rbf_cols);
  out.sbf.resize(n_trip, sbf_cols);
  int atom0 = 0, edge0 = 0, trip0 = 0;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const SurrogateGraph& g = graphs[k];
    require(g.n_graphs == 1, ErrorCode::kInvalidArgument, "merge_graphs: inputs must be single graphs");
    out.atom_z.insert(out.atom_z.end(), g.atom_z.begin(), g.atom_z.end());
    out.atom_graph.insert(out.atom_graph.end(), g.atom_z.size(), static_cast<int>(k));
    for (std::size_t e = 0; e < g.edge_i.size(); ++e) {
      out.edge_i.push_back(g.edge_i[e] + atom0);
      out.edge_j.push_back(g.edge_j[e] + atom0);
    }
    for (std::size_t t = 0; t < g.trip_kj.size(); ++t) {
      out.trip_kj.push_back(g.trip_kj[t] + edge0);
      out.trip_ji.push_back(g.trip_ji[t] + edge0);
    }
    if (g.rbf.rows() > 0) out.rbf.middleRows(edge0, g.rbf.rows()) = g.rbf;
    if (g.sbf.rows() > 0) out.sbf.middleRows(trip0, g.sbf.rows()) = g.sbf;
    atom0 += static_cast<int>(g.atom_z.size());
    edge0 += static_cast<int>(g.rbf.rows());
    trip0 += static_cast<int>(g.sbf.rows());
  }
  return out;
}

namespace {

SurrogateGraph batch_graph(const SurrogateConfig& c, const std::vector<Geometry>& geometries,
                           const std::vector<int>& charges) {
  std::vector<SurrogateGraph> gs;
  gs.reserve(geometries.size());
  for (const Geometry& g : geometries) gs.push_back(build_surrogate_graph(c, g, charges));
  return merge_graphs(gs);
}

}  // namespace

double Surrogate::energy(const ParamTree& params, const Geometry& geometry,
                         const std::vector<int>& charges) const {
  ValueBackend b;
  return forward(b, params, false, build_surrogate_graph(config_, geometry, charges))(0, 0);
}

Vector Surrogate::energies(const ParamTree& params, const std::vector<Geometry>& geometries,
                           const std::vector<int>& charges) const {
  if (geometries.empty()) return Vector();
  ValueBackend b;
  return forward(b, params, false, batch_graph(config_, geometries, charges)).col(0);
}

Vector Surrogate::vjp(const ParamTree& params, const std::vector<Geometry>& geometries,
                      const std::vector<int>& charges, const Vector& seeds) const {
  require(seeds.size() == static_cast<Eigen::Index>(geometries.size()), ErrorCode::kDimension,
          "surrogate: one seed per geometry expected");
  if (geometries.empty()) return Vector::Zero(params.size());
  TapeBackend b(params.size());
  const Var out = forward(b, params, true, batch_graph(config_, geometries, charges));
  const std::pair<Var, Matrix> seed{out, Matrix(seeds)};
  b.backward(std::span<const std::pair<Var, Matrix>>(&seed, 1));
  return b.param_grad();
}

Vector Surrogate::value_and_vjp(const ParamTree& params, const std::vector<Geometry>& geometries,
                                const std::vector<int>& charges,
                                const std::function<Vector(const Vector&)>& seeds_of,
                                Vector* energies) const {
  TapeBackend b(params.size());
  const Var out = forward(b, params, true, batch_graph(config_, geometries, charges));
  const Vector e = b.value(out).col(0);
  const std::pair<Var, Matrix> seed{out, Matrix(seeds_of(e))};
  b.backward(std::span<const std::pair<Var, Matrix>>(&seed, 1));
  if (energies) *energies = e;
  return b.param_grad();
}

double surrogate_loss(const Vector& pred, const EnergyStats& stats) {
  const int c = stats.size();
  require(c > 0, ErrorCode::kInvalidArgument, "surrogate_loss: empty batch");
  require(pred.size() == c && static_cast<int>(stats.sigma.size()) == c, ErrorCode::kDimension,
          "surrogate_loss: prediction count mismatch");
  double q = 0.0;
  for (int i = 0; i < c; ++i) {
    const double r = stats.mean[static_cast<std::size_t>(i)] - pred[i];
    q += r * r / std::max(stats.sigma[static_cast<std::size_t>(i)], kSigmaFloor);
  }
  return std::sqrt(q / c);
}

Vector surrogate_loss_grad(const Vector& pred, const EnergyStats& stats) {
  const double loss = surrogate_loss(pred, stats);
  const int c = stats.size();
  Vector g = Vector::Zero(c);
  if (loss == 0.0) return g;
  for (int i = 0; i < c; ++i) {
    const double r = stats.mean[static_cast<std::size_t>(i)] - pred[i];
    g[i] = -r / (std::max(stats.sigma[static_cast<std::size_t>(i)], kSigmaFloor) * c * loss);
  }
  return g;
}

double estimate_mad(const EnergyStats& stats) {
  require(stats.size() > 0, ErrorCode::kInvalidArgument, "estimate_mad: empty batch");
  double s = 0.0;
  for (double v : stats.sigma) s += v;
  return std::sqrt(2.0 / std::numbers::pi) * (s / static_cast<double>(stats.sigma.size()));
}

double adaptive_decay(double loss, double mad, double gamma_base, double gamma_high, double zeta) {
  return loss < zeta * mad ? gamma_base + gamma_high : gamma_base;
}

void SurrogateTrainerOptions::validate() const {
  require(gamma_base > 0.0 && gamma_high >= 0.0 && gamma_base + gamma_high < 1.0,
          ErrorCode::kConfig, "surrogate trainer: need 0 < gamma_base + gamma_high < 1");
  require(zeta > 1.0, ErrorCode::kConfig, "surrogate trainer: zeta must exceed 1");
  require(n_inner >= 0 && ema_decay >= 0.0 && ema_decay < 1.0 && lr >= 0.0 && lr_decay > 0.0 &&
              weight_decay >= 0.0,
          ErrorCode::kConfig, "surrogate trainer: invalid optimizer settings");
}

SurrogateTrainerState init_surrogate_trainer(const Surrogate& model, Rng& rng,
                                             const SurrogateTrainerOptions& options) {
  options.validate();
  SurrogateTrainerState s;
  s.live = model.init_params(rng);
  s.merged = s.live;
  s.adam = AdamWState::like(s.live);
  s.loss_ema = ScalarEma(options.ema_decay);
  s.mad_ema = ScalarEma(options.ema_decay);
  s.gamma = options.gamma_base;
  return s;
}

double online_update(const Surrogate& model, SurrogateTrainerState& s,
                     const std::vector<Geometry>& geometries, const std::vector<int>& charges,
                     const EnergyStats& stats, const SurrogateTrainerOptions& opt) {
  require(static_cast<int>(geometries.size()) == stats.size(), ErrorCode::kDimension,
          "online_update: geometry count does not match the energy batch");
  s.merged.require_same_structure(s.live, "online_update");
  if (!s.offsets_initialized) {
    double mean = 0.0;
    for (double e : stats.mean) mean += e;
    mean /= static_cast<double>(stats.size());
    const double total_z = std::accumulate(charges.begin(), charges.end(), 0.0);
    for (ParamTree* t : {&s.live, &s.merged}) {
      auto off = t->leaf("sur/offset");
      for (int z : charges) off(z - 1, 0) = mean * z / total_z;
    }
    s.offsets_initialized = true;
  }
  const double lr = opt.lr / (1.0 + static_cast<double>(s.t) / opt.lr_decay);
  const double loss = surrogate_loss(model.energies(s.merged, geometries, charges), stats);
  s.live = s.merged;
  for (int k = 0; k < opt.n_inner; ++k) {
    const Vector grad = model.value_and_vjp(
        s.live, geometries, charges, [&](const Vector& pred) { return surrogate_loss_grad(pred, stats); },
        nullptr);
    adamw_step(s.adam, s.live.flat(), grad, lr, opt.weight_decay);
  }
  const double l_smooth = s.loss_ema.update(loss);
  const double d_smooth = s.mad_ema.update(estimate_mad(stats));
  s.gamma = opt.force_gamma >= 0.0
                ? opt.force_gamma
                : adaptive_decay(l_smooth, d_smooth, opt.gamma_base, opt.gamma_high, opt.zeta);
  s.merged = ema_combine(s.merged, s.live, s.gamma);
  s.last_loss = loss;
  ++s.t;
  return loss;
}

}  // namespace planet
