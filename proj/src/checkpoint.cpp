// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/checkpoint.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace planet {

namespace {

using nlohmann::json;

json pack(const Vector& v) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(v.size()) * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), v.data(), bytes.size());
  return json::binary(std::move(bytes));
}

Vector unpack(const json& j, std::ptrdiff_t expected, const char* what) {
  require(j.is_binary(), ErrorCode::kIo, std::string("checkpoint: ") + what + " is not binary");
  const auto& b = j.get_binary();
  require(b.size() == static_cast<std::size_t>(expected) * sizeof(double), ErrorCode::kVersion,
          std::string("checkpoint: ") + what + " has the wrong size");
  Vector v(expected);
  if (!b.empty()) std::memcpy(v.data(), b.data(), b.size());
  return v;
}

json layout(const ParamTree& t) {
  json a = json::array();
  for (const LeafInfo& l : t.leaves()) a.push_back({l.name, l.rows, l.cols});
  return a;
}

void load_tree(const json& j, ParamTree& t, const char* what) {
  require(j.at("layout") == layout(t), ErrorCode::kVersion,
          std::string("checkpoint: ") + what + " layout does not match the model");
  t.flat() = unpack(j.at("values"), t.size(), what);
}

json tree(const ParamTree& t) { return {{"layout", layout(t)}, {"values", pack(t.flat())}}; }

}  // namespace

std::string encode_checkpoint(const Trainer& trainer, const TrainState& s) {
  json j;
  j["format"] = "planet-vmc-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(trainer.config(), -1);
  j["t"] = s.t;
  j["aborted_steps"] = s.aborted_steps;
  j["wf"] = tree(s.wf);
  j["gnn"] = tree(s.gnn);
  json w = json::array();
  for (const WalkerState& ws : s.walkers) {
    Vector e(static_cast<std::ptrdiff_t>(ws.electrons.size()) * trainer.wavefunction().n_electrons() * 3);
    std::ptrdiff_t k = 0;
    for (const Matrix& m : ws.electrons) {
      e.segment(k, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
      k += m.size();
    }
    w.push_back({{"n", ws.size()}, {"step", ws.step}, {"params", pack(ws.geometry_params)},
                 {"n_params", ws.geometry_params.size()}, {"electrons", pack(e)}});
  }
  j["walkers"] = w;
  if (s.surrogate) {
    const SurrogateTrainerState& st = *s.surrogate;
    j["surrogate"] = {{"live", tree(st.live)},
                      {"merged", tree(st.merged)},
                      {"adam_m", pack(st.adam.m)},
                      {"adam_v", pack(st.adam.v)},
                      {"adam_step", st.adam.step},
                      {"loss_ema", {st.loss_ema.value(), st.loss_ema.initialized()}},
                      {"mad_ema", {st.mad_ema.value(), st.mad_ema.initialized()}},
                      {"gamma", st.gamma},
                      {"last_loss", st.last_loss},
                      {"t", st.t},
                      {"offsets_initialized", st.offsets_initialized}};
  }
  const std::vector<std::uint8_t> bytes = json::to_cbor(j);
  return std::string(bytes.begin(), bytes.end());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("checkpoint: not a valid container: ") + e.what());
  }
  require(j.is_object() && j.value("format", "") == "planet-vmc-checkpoint", ErrorCode::kIo,
          "checkpoint: not a planet-vmc checkpoint");
  const int version = j.at("version").get<int>();
  require(version == kCheckpointVersion, ErrorCode::kVersion,
          "checkpoint: version " + std::to_string(version) + " cannot be loaded by version " +
              std::to_string(kCheckpointVersion));
  Checkpoint c;
  try {
    c.config = parse_config(j.at("config").get<std::string>());
    const Trainer trainer(c.config);
    c.state = trainer.init();
    TrainState& s = c.state;
    s.t = j.at("t").get<long long>();
    s.aborted_steps = j.at("aborted_steps").get<long long>();
    load_tree(j.at("wf"), s.wf, "wave-function parameters");
    load_tree(j.at("gnn"), s.gnn, "MetaGNN parameters");
    const json& w = j.at("walkers");
    require(w.size() == s.walkers.size(), ErrorCode::kVersion, "checkpoint: walker count mismatch");
    const int n_el = trainer.wavefunction().n_electrons();
    for (std::size_t c_i = 0; c_i < w.size(); ++c_i) {
      WalkerState& ws = s.walkers[c_i];
      const int n = w[c_i].at("n").get<int>();
      ws.step = w[c_i].at("step").get<double>();
      ws.geometry_params = unpack(w[c_i].at("params"), w[c_i].at("n_params").get<std::ptrdiff_t>(), "geometry");
      const Vector e = unpack(w[c_i].at("electrons"), static_cast<std::ptrdiff_t>(n) * n_el * 3, "walkers");
      ws.electrons.assign(static_cast<std::size_t>(n), Matrix(n_el, 3));
      for (int b = 0; b < n; ++b)
        ws.electrons[static_cast<std::size_t>(b)] =
            Eigen::Map<const Matrix>(e.data() + static_cast<std::ptrdiff_t>(b) * n_el * 3, n_el, 3);
    }
    require(j.contains("surrogate") == s.surrogate.has_value(), ErrorCode::kVersion,
            "checkpoint: surrogate state does not match the stored config");
    if (s.surrogate) {
      const json& q = j.at("surrogate");
      SurrogateTrainerState& st = *s.surrogate;
      load_tree(q.at("live"), st.live, "surrogate live parameters");
      load_tree(q.at("merged"), st.merged, "surrogate merged parameters");
      st.adam.m = unpack(q.at("adam_m"), st.live.size(), "surrogate moments");
      st.adam.v = unpack(q.at("adam_v"), st.live.size(), "surrogate moments");
      st.adam.step = q.at("adam_step").get<long long>();
      st.loss_ema.restore(q.at("loss_ema")[0].get<double>(), q.at("loss_ema")[1].get<bool>());
      st.mad_ema.restore(q.at("mad_ema")[0].get<double>(), q.at("mad_ema")[1].get<bool>());
      st.gamma = q.at("gamma").get<double>();
      st.last_loss = q.at("last_loss").get<double>();
      st.t = q.at("t").get<long long>();
      st.offsets_initialized = q.at("offsets_initialized").get<bool>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("checkpoint: malformed: ") + e.what());
  }
  return c;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    require(out.good(), ErrorCode::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  require(!ec, ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::string& path, const Trainer& trainer, const TrainState& state) {
  write_file_atomic(path, encode_checkpoint(trainer, state));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace planet
