// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/wavefunction.hpp>

#include <cmath>
#include <limits>

namespace planet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string layer_leaf(int l, const char* name) {
  return "layer" + std::to_string(l) + "/" + name;
}

void lecun_normal(Eigen::Map<Matrix> w, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(w.cols(), 1)));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * rng.normal();
}

void bias_init(Eigen::Map<Matrix> b, Rng& rng, bool zero) {
  if (zero) {
    b.setZero();
    return;
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
}

}  // namespace

void WfConfig::validate(const Molecule& molecule) const {
  require(single_width > 0 && pair_width > 0 && n_layers > 0 && n_determinants > 0 &&
              n_jastrow_layers > 0 && nuclei_embed_dim > 0 && jastrow_width >= 0,
          ErrorCode::kConfig, "wavefunction: widths and layer counts must be positive");
  require(!restricted || molecule.n_up == molecule.n_down, ErrorCode::kConfig,
          "wavefunction: restricted mode requires n_up == n_down");
}

WaveFunction::WaveFunction(WfConfig config, Molecule molecule)
    : config_(config), molecule_(std::move(molecule)) {
  molecule_.validate();
  config_.validate(molecule_);
  n_ = molecule_.n_electrons();
  m_ = molecule_.n_nuclei();
  orbitals_ = config_.restricted ? molecule_.n_up : n_;
  const int n_up = molecule_.n_up;

  spin_.resize(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) spin_[static_cast<std::size_t>(i)] = i < n_up ? 0 : 1;

  for (int m = 0; m < m_; ++m) {
    for (int i = 0; i < n_; ++i) {
      en_electron_.push_back(i);
      en_nucleus_.push_back(m);
    }
  }
  for (int i = 0; i < n_; ++i) electron_row_.push_back(i);

  // Restricted layers see spin sums relative to the electron's own spin;
  // unrestricted layers see them in absolute (up, down) order.
  for (int i = 0; i < n_; ++i) {
    const int s = spin_[static_cast<std::size_t>(i)];
    sum_first_.push_back(config_.restricted ? s : 0);
    sum_second_.push_back(config_.restricted ? 1 - s : 1);
  }
  for (int j = 0; j < n_; ++j) {
    for (int i = 0; i < n_; ++i) {
      const int si = spin_[static_cast<std::size_t>(i)];
      const int sj = spin_[static_cast<std::size_t>(j)];
      pair_i_.push_back(i);
      pair_j_.push_back(j);
      pair_same_.push_back(si == sj ? 1 : 0);
      if (config_.restricted) {
        pair_first_.push_back(si == sj ? i : -1);
        pair_second_.push_back(si == sj ? -1 : i);
      } else {
        pair_first_.push_back(sj == 0 ? i : -1);
        pair_second_.push_back(sj == 0 ? -1 : i);
      }
    }
  }

  // Determinant k, row r (orbital o of spin block a), column j (electron of
  // spin b): channel (v K + k) O + o with v = (a != b).
  const int k_det = config_.n_determinants;
  orbital_index_.assign(static_cast<std::size_t>(k_det) * n_ * n_, -1);
  for (int j = 0; j < n_; ++j) {
    for (int k = 0; k < k_det; ++k) {
      for (int r = 0; r < n_; ++r) {
        const int a = r < n_up ? 0 : 1;
        const int b = spin_[static_cast<std::size_t>(j)];
        const int o = config_.restricted ? (a == 0 ? r : r - n_up) : r;
        const int v = a == b ? 0 : 1;
        const std::size_t out = static_cast<std::size_t>(k * n_ + r) +
                                static_cast<std::size_t>(k_det) * n_ * static_cast<std::size_t>(j);
        if (v == 1 && !config_.dense_orbitals) continue;
        orbital_index_[out] = j + n_ * channel(v, k, o);
      }
    }
  }
}

Act WaveFunction::act() const {
  if (config_.activation == WfActivation::kTanh) return Act::kTanh;
  return config_.rescale ? Act::kScaledSilu : Act::kSilu;
}

ParamTree WaveFunction::init_params(Rng& rng) const {
  const WfConfig& c = config_;
  const int w = c.single_width, p = c.pair_width, d = c.nuclei_embed_dim;
  ParamTree t;
  t.add("embed/W", d, 4);
  t.add("embed/z", m_, d);
  t.add("embed/A", w, d);
  t.add("embed/a", w);
  for (int l = 0; l < c.n_layers; ++l) {
    const int w_in = w;
    const int p_in = l == 0 ? 4 : p;
    t.add(layer_leaf(l, "W_single"), w, w_in + 2 * p_in);
    t.add(layer_leaf(l, "b_single"), w);
    t.add(layer_leaf(l, "W_global"), w, 2 * w_in);
    if (l + 1 < c.n_layers) {
      t.add(layer_leaf(l, "W_same"), p, p_in);
      t.add(layer_leaf(l, "b_same"), p);
      t.add(layer_leaf(l, "W_diff"), p, p_in);
      t.add(layer_leaf(l, "b_diff"), p);
    }
  }
  const int ch = n_channels();
  t.add("orb/W", ch, w);
  t.add("orb/b", ch);
  t.add("env/pi", ch, m_);
  t.add("env/sigma", ch, m_);
  t.add("det/w", c.n_determinants);
  if (c.jastrow) {
    const int jw = c.jastrow_hidden();
    for (int k = 0; k < c.n_jastrow_layers; ++k) {
      const int in = k == 0 ? w : jw;
      const int out = k + 1 == c.n_jastrow_layers ? 1 : jw;
      t.add("jastrow/W" + std::to_string(k), out, in);
      if (k + 1 < c.n_jastrow_layers) t.add("jastrow/b" + std::to_string(k), out);
    }
  }
  t.freeze();

  for (const LeafInfo& leaf : t.leaves()) {
    const std::string& n = leaf.name;
    auto v = t.leaf(n);
    const std::string tail = n.substr(n.rfind('/') + 1);
    if (n == "embed/z") {
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    } else if (n == "env/pi" || n == "det/w") {
      v.setOnes();
    } else if (n == "env/sigma") {
      v.setConstant(inverse_softplus(1.0));
    } else if (tail[0] == 'W' || tail == "A") {
      lecun_normal(v, rng);
    } else {
      bias_init(v, rng, c.zero_bias_init);
    }
  }
  // Cross-spin projections start at zero so the dense matrix begins
  // block-diagonal; the final Jastrow layer starts at zero so exp(J) = 1.
  auto ow = t.leaf("orb/W");
  auto ob = t.leaf("orb/b");
  for (int k = 0; k < c.n_determinants; ++k) {
    for (int o = 0; o < orbitals_; ++o) {
      ow.row(channel(1, k, o)).setZero();
      ob(channel(1, k, o), 0) = 0.0;
    }
  }
  if (c.jastrow) t.leaf("jastrow/W" + std::to_string(c.n_jastrow_layers - 1)).setZero();
  return t;
}

template <class B>
WaveFunction::Graph<B> WaveFunction::forward(B& b, const ParamTree& params, bool track,
                                             const Matrix& electrons, const Geometry& geometry,
                                             const Frame& frame, WfFeatures* features) const {
  using T = typename B::T;
  require(electrons.rows() == n_ && electrons.cols() == 3, ErrorCode::kDimension,
          "wavefunction: expected " + std::to_string(n_) + " x 3 electron positions");
  require(geometry.size() == m_, ErrorCode::kDimension,
          "wavefunction: geometry has " + std::to_string(geometry.size()) +
              " nuclei, molecule has " + std::to_string(m_));
  auto P = [&](const std::string& name) { return params.ref(name, track); };
  const Act sigma = act();
  const WfConfig& c = config_;

  const T e = b.coords(electrons);
  const Matrix3 rot = frame.rotation;

  // Electron-nucleus features, row i + N m.
  Matrix nuc(static_cast<Eigen::Index>(n_) * m_, 3);
  for (int r = 0; r < n_ * m_; ++r) nuc.row(r) = geometry.positions.row(en_nucleus_[static_cast<std::size_t>(r)]);
  const T en_diff = b.sub(b.gather_rows(e, en_electron_), b.constant(nuc));
  const T en_dist = b.norm_rows(en_diff);
  const T en_rot = b.right_mul(en_diff, rot);
  const T en_feat = b.concat_cols({&en_rot, &en_dist});
  T x = b.add(b.linear(en_feat, P("embed/W")), b.gather_rows(b.param(P("embed/z")), en_nucleus_));
  x = b.act(x, sigma);
  x = b.act(b.linear(x, P("embed/A"), P("embed/a")), Act::kTanh);
  T h = b.scatter_rows(x, en_electron_, n_);

  // Pair features, row i + N j.
  const T ee_diff = b.sub(b.gather_rows(e, pair_i_), b.gather_rows(e, pair_j_));
  const T ee_dist = b.norm_rows(ee_diff);
  const T ee_rot = b.right_mul(ee_diff, rot);
  T g = b.concat_cols({&ee_rot, &ee_dist});

  if (features) {
    features->h1 = b.value(h);
    features->g1 = b.value(g);
  }

  for (int l = 0; l < c.n_layers; ++l) {
    const T g_first = b.scatter_rows(g, pair_first_, n_);
    const T g_second = b.scatter_rows(g, pair_second_, n_);
    const T sums = b.scatter_rows(h, spin_, 2);
    const T h_first = b.gather_rows(sums, sum_first_);
    const T h_second = b.gather_rows(sums, sum_second_);
    const T single_in = b.concat_cols({&h, &g_first, &g_second});
    const T global_in = b.concat_cols({&h_first, &h_second});
    T pre = b.add(b.linear(single_in, P(layer_leaf(l, "W_single")), P(layer_leaf(l, "b_single"))),
                  b.linear(global_in, P(layer_leaf(l, "W_global"))));
    if (l + 1 < c.n_layers) {
      const T same = b.linear(g, P(layer_leaf(l, "W_same")), P(layer_leaf(l, "b_same")));
      const T diff = b.linear(g, P(layer_leaf(l, "W_diff")), P(layer_leaf(l, "b_diff")));
      g = b.act(b.select_rows(same, diff, pair_same_), sigma);
      if (features) features->g.push_back(b.value(g));
    }
    h = b.act(pre, sigma);
    if (features) features->h.push_back(b.value(h));
  }

  // Orbitals: projection times envelope, gathered into K stacked N x N.
  const T en_dist_mat = b.reshape(en_dist, n_, m_);
  const T proj = b.linear(h, P("orb/W"), P("orb/b"));
  const T env = b.envelope(en_dist_mat, P("env/pi"), P("env/sigma"));
  const T prod = b.mul(proj, env);
  Graph<B> out;
  out.orbitals = b.gather_elems(prod, orbital_index_, c.n_determinants * n_, n_);
  auto det = b.log_det_sum(out.orbitals, c.n_determinants, P("det/w"));
  out.sign = det.sign;
  out.log_abs = det.value;

  if (c.jastrow) {
    T y = h;
    for (int k = 0; k < c.n_jastrow_layers; ++k) {
      const std::string wk = "jastrow/W" + std::to_string(k);
      if (k + 1 < c.n_jastrow_layers) {
        y = b.act(b.linear(y, P(wk), P("jastrow/b" + std::to_string(k))), sigma);
      } else {
        y = b.linear(y, P(wk));
      }
    }
    const T jastrow = b.sum_rows(y);
    if (features) features->jastrow = b.value(jastrow)(0, 0);
    out.log_abs = b.add(out.log_abs, jastrow);
  }
  if (features) {
    const Matrix stacked = b.value(out.orbitals);
    for (int k = 0; k < c.n_determinants; ++k) features->orbitals.push_back(stacked.middleRows(k * n_, n_));
    features->log_psi = {out.sign, out.sign == 0 ? -std::numeric_limits<double>::infinity()
                                                 : b.value(out.log_abs)(0, 0)};
  }
  return out;
}

template WaveFunction::Graph<ValueBackend> WaveFunction::forward(ValueBackend&, const ParamTree&,
                                                                 bool, const Matrix&,
                                                                 const Geometry&, const Frame&,
                                                                 WfFeatures*) const;
template WaveFunction::Graph<DualBackend> WaveFunction::forward(DualBackend&, const ParamTree&,
                                                                bool, const Matrix&,
                                                                const Geometry&, const Frame&,
                                                                WfFeatures*) const;
template WaveFunction::Graph<TapeBackend> WaveFunction::forward(TapeBackend&, const ParamTree&,
                                                                bool, const Matrix&,
                                                                const Geometry&, const Frame&,
                                                                WfFeatures*) const;

SignedLog WaveFunction::log_psi(const ParamTree& params, const Matrix& electrons,
                                const Geometry& geometry, const Frame& frame) const {
  ValueBackend b;
  auto g = forward(b, params, false, electrons, geometry, frame);
  if (g.sign == 0) return {};
  return {g.sign, g.log_abs(0, 0)};
}

LogPsiDerivs WaveFunction::log_psi_derivatives(const ParamTree& params, const Matrix& electrons,
                                               const Geometry& geometry,
                                               const Frame& frame) const {
  DualBackend b(3 * n_);
  auto g = forward(b, params, false, electrons, geometry, frame);
  LogPsiDerivs out;
  out.sign = g.sign;
  out.grad.resize(n_, 3);
  if (g.sign == 0) {
    out.log_abs = -std::numeric_limits<double>::infinity();
    out.grad.setConstant(kNaN);
    out.laplacian = kNaN;
    return out;
  }
  const DualBatch& v = g.log_abs;
  out.log_abs = v.value()(0, 0);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < 3; ++k) out.grad(i, k) = v.jacobian(i * 3 + k)(0, 0);
  out.laplacian = v.laplacian()(0, 0);
  return out;
}

Vector WaveFunction::score(const ParamTree& params, const Matrix& electrons,
                           const Geometry& geometry, const Frame& frame) const {
  TapeBackend b(params.size());
  auto g = forward(b, params, true, electrons, geometry, frame);
  require(g.sign != 0, ErrorCode::kNumerical, "wavefunction: score evaluated at a node");
  b.backward(g.log_abs);
  return b.param_grad();
}

WfFeatures WaveFunction::features(const ParamTree& params, const Matrix& electrons,
                                  const Geometry& geometry, const Frame& frame) const {
  ValueBackend b;
  WfFeatures f;
  forward(b, params, false, electrons, geometry, frame, &f);
  return f;
}

double dead_fraction(const Matrix& x, double eps) {
  require(x.rows() >= 2, ErrorCode::kInvalidArgument,
          "dead_neuron_fraction: needs at least two samples");
  if (x.cols() == 0) return 0.0;
  int dead = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / x.rows());
    if (!(sd >= eps)) ++dead;
  }
  return static_cast<double>(dead) / static_cast<double>(x.cols());
}

double WaveFunction::dead_neuron_fraction(const ParamTree& params, const std::vector<Matrix>& batch,
                                          const Geometry& geometry, const Frame& frame,
                                          double eps) const {
  require(batch.size() >= 2, ErrorCode::kInvalidArgument,
          "dead_neuron_fraction: batch must hold at least two configurations");
  const int w = config_.single_width;
  const int layers = config_.n_layers;
  Matrix samples(static_cast<Eigen::Index>(batch.size()) * n_, static_cast<Eigen::Index>(layers) * w);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    WfFeatures f = features(params, batch[s], geometry, frame);
    for (int l = 0; l < layers; ++l)
      samples.block(static_cast<Eigen::Index>(s) * n_, static_cast<Eigen::Index>(l) * w, n_, w) =
          f.h[static_cast<std::size_t>(l)];
  }
  return dead_fraction(samples, eps);
}

// ---------------------------------------------------------------------------
// Analytic hooks

SignedLog HydrogenHook::log_psi(const Matrix& electrons) const {
  require(electrons.rows() == 1 && electrons.cols() == 3, ErrorCode::kDimension,
          "hydrogen hook: expects a single electron");
  return {1, -z_ * (electrons.row(0).transpose() - center_).norm()};
}

LogPsiDerivs HydrogenHook::derivatives(const Matrix& electrons) const {
  LogPsiDerivs d;
  const Vector3 r = electrons.row(0).transpose() - center_;
  const double n = r.norm();
  d.sign = 1;
  d.log_abs = -z_ * n;
  d.grad = (-z_ / n * r).transpose();
  d.laplacian = -2.0 * z_ / n;
  return d;
}

SignedLog GaussianHook::log_psi(const Matrix& electrons) const {
  return {1, -electrons.squaredNorm() / (4.0 * variance_)};
}

LogPsiDerivs GaussianHook::derivatives(const Matrix& electrons) const {
  LogPsiDerivs d;
  d.sign = 1;
  d.log_abs = -electrons.squaredNorm() / (4.0 * variance_);
  d.grad = -electrons / (2.0 * variance_);
  d.laplacian = -static_cast<double>(electrons.size()) / (2.0 * variance_);
  return d;
}

}  // namespace planet
