// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/metagnn.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace planet {

namespace {

void add_dense(ParamTree& t, const std::string& prefix, int out, int in) {
  t.add(prefix + "/W", out, in);
  t.add(prefix + "/b", out);
}

}  // namespace

void MetaGnnConfig::validate() const {
  require(n_message_passes >= 0 && node_dim > 0 && message_dim > 0 && n_rbf > 0 && n_sbf >= 0 &&
              mlp_depth > 0 && rbf_cutoff > 0.0,
          ErrorCode::kConfig, "metagnn: dimensions must be positive");
}

RowVector bessel_rbf(double d, int n_rbf, double cutoff) {
  RowVector out(n_rbf);
  const double pref = std::sqrt(2.0 / cutoff);
  for (int n = 1; n <= n_rbf; ++n)
    out[n - 1] = pref * std::sin(n * std::numbers::pi * d / cutoff) / d;
  return out;
}

MetaGnn::MetaGnn(MetaGnnConfig config, const WaveFunction& wf) : config_(config) {
  config_.validate();
  const Molecule& mol = wf.molecule();
  m_ = mol.n_nuclei();
  embed_dim_ = wf.config().nuclei_embed_dim;
  channels_ = wf.n_channels();
  n_det_ = wf.config().n_determinants;
  std::vector<int> z = mol.charges;
  std::sort(z.begin(), z.end());
  z.erase(std::unique(z.begin(), z.end()), z.end());
  n_species_ = static_cast<int>(z.size());
  for (int c : mol.charges)
    species_.push_back(static_cast<int>(std::lower_bound(z.begin(), z.end(), c) - z.begin()));
  for (int a = 0; a < m_; ++a)
    for (int b = 0; b < m_; ++b)
      if (a != b) {
        edge_dst_.push_back(a);
        edge_src_.push_back(b);
      }
}

ParamTree MetaGnn::init_params(Rng& rng) const {
  const MetaGnnConfig& c = config_;
  ParamTree t;
  t.add("gnn/species", n_species_, c.node_dim);
  for (int p = 0; p < c.n_message_passes; ++p) {
    for (int k = 0; k < c.mlp_depth; ++k) {
      const int in = k == 0 ? 2 * c.node_dim + c.n_rbf : c.message_dim;
      add_dense(t, "gnn/pass" + std::to_string(p) + "/msg" + std::to_string(k), c.message_dim, in);
    }
    for (int k = 0; k < c.mlp_depth; ++k) {
      const int in = k == 0 ? c.node_dim + c.message_dim : c.message_dim;
      const int out = k + 1 == c.mlp_depth ? c.node_dim : c.message_dim;
      add_dense(t, "gnn/pass" + std::to_string(p) + "/upd" + std::to_string(k), out, in);
    }
  }
  add_dense(t, "gnn/z", embed_dim_, c.node_dim);
  add_dense(t, "gnn/node", c.message_dim, c.node_dim);
  add_dense(t, "gnn/pi", channels_, c.message_dim);
  add_dense(t, "gnn/sigma", channels_, c.message_dim);
  add_dense(t, "gnn/global", c.message_dim, c.node_dim);
  add_dense(t, "gnn/w", n_det_, c.message_dim);
  add_dense(t, "gnn/bias", channels_, c.message_dim);
  t.freeze();
  for (const LeafInfo& l : t.leaves()) {
    auto v = t.leaf(l.name);
    const bool weight = l.name.back() == 'W';
    if (l.name == "gnn/species") {
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    } else if (weight) {
      const double s = 1.0 / std::sqrt(static_cast<double>(l.cols));
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = s * rng.normal();
    }
  }
  for (const char* head : {"gnn/pi/W", "gnn/sigma/W", "gnn/w/W", "gnn/bias/W"}) t.leaf(head).setZero();
  return t;
}

template <class B>
MetaGnn::Heads<B> MetaGnn::forward(B& b, const ParamTree& params, bool track,
                                   const Geometry& geometry) const {
  using T = typename B::T;
  require(geometry.size() == m_, ErrorCode::kDimension, "metagnn: geometry size mismatch");
  const MetaGnnConfig& c = config_;
  auto P = [&](const std::string& name) { return params.ref(name, track); };
  const Act act = Act::kScaledSilu;

  const std::size_t n_edges = edge_src_.size();
  Matrix rbf(static_cast<Eigen::Index>(n_edges), c.n_rbf);
  for (std::size_t e = 0; e < n_edges; ++e) {
    const double d = (geometry.positions.row(edge_dst_[e]) - geometry.positions.row(edge_src_[e])).norm();
    rbf.row(static_cast<Eigen::Index>(e)) = bessel_rbf(d, c.n_rbf, c.rbf_cutoff);
  }
  const T edge_feat = b.constant(rbf);

  T h = b.gather_rows(b.param(P("gnn/species")), species_);
  for (int p = 0; p < c.n_message_passes; ++p) {
    const std::string pass = "gnn/pass" + std::to_string(p);
    const T hd = b.gather_rows(h, edge_dst_);
    const T hs = b.gather_rows(h, edge_src_);
    T msg = b.concat_cols({&hd, &hs, &edge_feat});
    for (int k = 0; k < c.mlp_depth; ++k) {
      const std::string l = pass + "/msg" + std::to_string(k);
      msg = b.act(b.linear(msg, P(l + "/W"), P(l + "/b")), act);
    }
    const T agg = b.scatter_rows(msg, edge_dst_, m_);
    T upd = b.concat_cols({&h, &agg});
    for (int k = 0; k < c.mlp_depth; ++k) {
      const std::string l = pass + "/upd" + std::to_string(k);
      upd = b.linear(upd, P(l + "/W"), P(l + "/b"));
      if (k + 1 < c.mlp_depth) upd = b.act(upd, act);
    }
    h = b.add(h, upd);
  }

  Heads<B> out;
  out.z = b.linear(h, P("gnn/z/W"), P("gnn/z/b"));
  const T node = b.act(b.linear(h, P("gnn/node/W"), P("gnn/node/b")), act);
  out.d_pi = b.linear(node, P("gnn/pi/W"), P("gnn/pi/b"));
  out.d_sigma = b.linear(node, P("gnn/sigma/W"), P("gnn/sigma/b"));
  const T pooled = b.act(b.linear(b.sum_rows(h), P("gnn/global/W"), P("gnn/global/b")), act);
  out.d_w = b.linear(pooled, P("gnn/w/W"), P("gnn/w/b"));
  out.d_bias = b.linear(pooled, P("gnn/bias/W"), P("gnn/bias/b"));
  return out;
}

template MetaGnn::Heads<ValueBackend> MetaGnn::forward(ValueBackend&, const ParamTree&, bool,
                                                       const Geometry&) const;
template MetaGnn::Heads<TapeBackend> MetaGnn::forward(TapeBackend&, const ParamTree&, bool,
                                                      const Geometry&) const;

ParamAdaptation MetaGnn::adapt(const ParamTree& params, const Geometry& geometry) const {
  ValueBackend b;
  auto h = forward(b, params, false, geometry);
  ParamAdaptation a;
  a.z = h.z;
  a.d_pi = h.d_pi;
  a.d_sigma = h.d_sigma;
  a.d_w = h.d_w.row(0).transpose();
  a.d_bias = h.d_bias.row(0).transpose();
  return a;
}

Matrix MetaGnn::backprop(const ParamTree& params, const Geometry& geometry,
                         const ParamTree& wf, const Matrix& adapted_grads) const {
  require(adapted_grads.cols() == wf.size(), ErrorCode::kDimension,
          "metagnn: gradient rows must match the wave-function parameter count");
  TapeBackend b(params.size());
  auto h = forward(b, params, true, geometry);
  const LeafInfo& z = wf.info("embed/z");
  const LeafInfo& pi = wf.info("env/pi");
  const LeafInfo& sg = wf.info("env/sigma");
  const LeafInfo& w = wf.info("det/w");
  const LeafInfo& bias = wf.info("orb/b");
  Matrix out(adapted_grads.rows(), params.size());
  for (Eigen::Index s = 0; s < adapted_grads.rows(); ++s) {
    const Vector row = adapted_grads.row(s).transpose();
    const double* g = row.data();
    auto view = [&](const LeafInfo& l) { return Eigen::Map<const Matrix>(g + l.offset, l.rows, l.cols); };
    const std::pair<Var, Matrix> seeds[] = {
        {h.z, view(z)},
        {h.d_pi, view(pi).transpose()},
        {h.d_sigma, view(sg).transpose()},
        {h.d_w, view(w).transpose()},
        {h.d_bias, view(bias).transpose()},
    };
    b.backward(seeds);
    out.row(s) = b.param_grad().transpose();
  }
  return out;
}

ParamTree apply_adaptation(const ParamTree& base, const ParamAdaptation& a) {
  ParamTree out = base;
  auto z = out.leaf("embed/z");
  require(z.rows() == a.z.rows() && z.cols() == a.z.cols(), ErrorCode::kDimension,
          "apply_adaptation: z shape mismatch");
  z = a.z;
  auto pi = out.leaf("env/pi");
  auto sigma = out.leaf("env/sigma");
  require(pi.rows() == a.d_pi.cols() && pi.cols() == a.d_pi.rows() &&
              sigma.rows() == a.d_sigma.cols() && sigma.cols() == a.d_sigma.rows(),
          ErrorCode::kDimension, "apply_adaptation: envelope offset shape mismatch");
  pi += a.d_pi.transpose();
  sigma += a.d_sigma.transpose();
  auto w = out.leaf("det/w");
  auto bias = out.leaf("orb/b");
  require(w.rows() == a.d_w.size() && bias.rows() == a.d_bias.size(), ErrorCode::kDimension,
          "apply_adaptation: global offset shape mismatch");
  w += a.d_w;
  bias += a.d_bias;
  return out;
}

}  // namespace planet
