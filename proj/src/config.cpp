// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/config.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace planet {

namespace {

using nlohmann::ordered_json;
using Json = ordered_json;

struct Field {
  std::string section;
  std::string key;
  std::function<Json(const RunConfig&)> get;
  std::function<void(RunConfig&, const Json&)> set;
};

[[noreturn]] void type_error(const std::string& path, const char* want) {
  fail(ErrorCode::kConfig, "config: '" + path + "' must be " + want);
}

template <class V>
V convert(const Json& j, const std::string& path) {
  if constexpr (std::is_same_v<V, bool>) {
    if (!j.is_boolean()) type_error(path, "a boolean");
    return j.get<bool>();
  } else if constexpr (std::is_same_v<V, std::uint64_t>) {
    if (!j.is_number_unsigned()) type_error(path, "a non-negative integer");
    return j.get<std::uint64_t>();
  } else if constexpr (std::is_same_v<V, long long>) {
    if (!j.is_number_integer()) type_error(path, "an integer");
    return j.get<long long>();
  } else if constexpr (std::is_integral_v<V>) {
    if (!j.is_number_integer()) type_error(path, "an integer");
    const auto v = j.get<long long>();
    if (v < std::numeric_limits<V>::min() || v > std::numeric_limits<V>::max())
      type_error(path, "an integer in range");
    return static_cast<V>(v);
  } else if constexpr (std::is_floating_point_v<V>) {
    if (j.is_string()) {
      const std::string s = j.get<std::string>();
      if (s == "inf" || s == "infinity") return std::numeric_limits<V>::infinity();
      type_error(path, "a number");
    }
    if (!j.is_number()) type_error(path, "a number");
    return j.get<V>();
  } else {
    if (!j.is_string()) type_error(path, "a string");
    return j.get<std::string>();
  }
}

template <class V>
Json to_json_value(const V& v) {
  if constexpr (std::is_floating_point_v<V>) {
    if (std::isinf(v)) return "inf";
  }
  return Json(v);
}

template <class S, class V>
Field member(std::string section, std::string key, S RunConfig::*s, V S::*m) {
  const std::string path = section + "." + key;
  return {section, key, [s, m](const RunConfig& c) { return to_json_value(c.*s.*m); },
          [s, m, path](RunConfig& c, const Json& j) { c.*s.*m = convert<V>(j, path); }};
}

template <class V>
Field top(std::string section, std::string key, V RunConfig::*m) {
  const std::string path = section + "." + key;
  return {section, key, [m](const RunConfig& c) { return to_json_value(c.*m); },
          [m, path](RunConfig& c, const Json& j) { c.*m = convert<V>(j, path); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    using R = RunConfig;
    v.push_back(member("system", "name", &R::system, &SystemConfig::name));
    v.push_back({"system", "domain",
                 [](const RunConfig& c) {
                   Json d = Json::object();
                   for (const auto& [k, o] : c.system.domain)
                     d[k] = Json{{"lo", o.lo}, {"hi", o.hi}, {"step", o.step}};
                   return d;
                 },
                 [](RunConfig& c, const Json& j) {
                   if (!j.is_object()) type_error("system.domain", "an object");
                   c.system.domain.clear();
                   for (auto it = j.begin(); it != j.end(); ++it) {
                     const std::string p = "system.domain." + it.key();
                     if (!it->is_object()) type_error(p, "an object with lo, hi and step");
                     DomainOverride o;
                     bool has_lo = false, has_hi = false;
                     for (auto f = it->begin(); f != it->end(); ++f) {
                       if (f.key() == "lo") {
                         o.lo = convert<double>(*f, p + ".lo");
                         has_lo = true;
                       } else if (f.key() == "hi") {
                         o.hi = convert<double>(*f, p + ".hi");
                         has_hi = true;
                       } else if (f.key() == "step") {
                         o.step = convert<double>(*f, p + ".step");
                       } else {
                         fail(ErrorCode::kConfig, "config: unknown key '" + p + "." + f.key() + "'");
                       }
                     }
                     require(has_lo && has_hi, ErrorCode::kConfig, "config: '" + p + "' needs lo and hi");
                     c.system.domain[it.key()] = o;
                   }
                 }});
    v.push_back(member("system", "grid_file", &R::system, &SystemConfig::grid_file));

    v.push_back(member("wavefunction", "single_width", &R::wavefunction, &WfConfig::single_width));
    v.push_back(member("wavefunction", "pair_width", &R::wavefunction, &WfConfig::pair_width));
    v.push_back(member("wavefunction", "n_layers", &R::wavefunction, &WfConfig::n_layers));
    v.push_back(member("wavefunction", "n_determinants", &R::wavefunction, &WfConfig::n_determinants));
    v.push_back(member("wavefunction", "n_jastrow_layers", &R::wavefunction, &WfConfig::n_jastrow_layers));
    v.push_back(member("wavefunction", "jastrow_width", &R::wavefunction, &WfConfig::jastrow_width));
    v.push_back(member("wavefunction", "nuclei_embed_dim", &R::wavefunction, &WfConfig::nuclei_embed_dim));
    v.push_back(member("wavefunction", "restricted", &R::wavefunction, &WfConfig::restricted));
    v.push_back(member("wavefunction", "dense_orbitals", &R::wavefunction, &WfConfig::dense_orbitals));
    v.push_back(member("wavefunction", "jastrow", &R::wavefunction, &WfConfig::jastrow));
    v.push_back({"wavefunction", "activation",
                 [](const RunConfig& c) {
                   return Json(c.wavefunction.activation == WfActivation::kTanh ? "tanh" : "silu");
                 },
                 [](RunConfig& c, const Json& j) {
                   const auto s = convert<std::string>(j, "wavefunction.activation");
                   if (s == "silu") {
                     c.wavefunction.activation = WfActivation::kSilu;
                   } else if (s == "tanh") {
                     c.wavefunction.activation = WfActivation::kTanh;
                   } else {
                     fail(ErrorCode::kConfig, "config: wavefunction.activation must be silu or tanh");
                   }
                 }});
    v.push_back(member("wavefunction", "rescale", &R::wavefunction, &WfConfig::rescale));
    v.push_back(member("wavefunction", "zero_bias_init", &R::wavefunction, &WfConfig::zero_bias_init));

    v.push_back(top("metagnn", "enabled", &R::metagnn_enabled));
    v.push_back(member("metagnn", "n_message_passes", &R::metagnn, &MetaGnnConfig::n_message_passes));
    v.push_back(member("metagnn", "node_dim", &R::metagnn, &MetaGnnConfig::node_dim));
    v.push_back(member("metagnn", "message_dim", &R::metagnn, &MetaGnnConfig::message_dim));
    v.push_back(member("metagnn", "n_rbf", &R::metagnn, &MetaGnnConfig::n_rbf));
    v.push_back(member("metagnn", "n_sbf", &R::metagnn, &MetaGnnConfig::n_sbf));
    v.push_back(member("metagnn", "mlp_depth", &R::metagnn, &MetaGnnConfig::mlp_depth));
    v.push_back(member("metagnn", "rbf_cutoff", &R::metagnn, &MetaGnnConfig::rbf_cutoff));

    v.push_back(top("surrogate", "enabled", &R::surrogate_enabled));
    v.push_back(member("surrogate", "cutoff", &R::surrogate, &SurrogateConfig::cutoff));
    v.push_back(member("surrogate", "n_rbf", &R::surrogate, &SurrogateConfig::n_rbf));
    v.push_back(member("surrogate", "n_sbf", &R::surrogate, &SurrogateConfig::n_sbf));
    v.push_back(member("surrogate", "n_blocks", &R::surrogate, &SurrogateConfig::n_blocks));
    v.push_back(member("surrogate", "basis_embed", &R::surrogate, &SurrogateConfig::basis_embed));
    v.push_back(member("surrogate", "interaction_dim", &R::surrogate, &SurrogateConfig::interaction_dim));
    v.push_back(member("surrogate", "out_dim", &R::surrogate, &SurrogateConfig::out_dim));
    v.push_back(member("surrogate", "layers_before_skip", &R::surrogate, &SurrogateConfig::layers_before_skip));
    v.push_back(member("surrogate", "layers_after_skip", &R::surrogate, &SurrogateConfig::layers_after_skip));
    v.push_back(member("surrogate", "out_layers", &R::surrogate, &SurrogateConfig::out_layers));
    v.push_back(member("surrogate", "envelope_exponent", &R::surrogate, &SurrogateConfig::envelope_exponent));
    v.push_back(member("surrogate", "max_z", &R::surrogate, &SurrogateConfig::max_z));

    using ST = SurrogateTrainerOptions;
    v.push_back(member("surrogate_trainer", "gamma_base", &R::surrogate_trainer, &ST::gamma_base));
    v.push_back(member("surrogate_trainer", "gamma_high", &R::surrogate_trainer, &ST::gamma_high));
    v.push_back(member("surrogate_trainer", "zeta", &R::surrogate_trainer, &ST::zeta));
    v.push_back(member("surrogate_trainer", "n_inner", &R::surrogate_trainer, &ST::n_inner));
    v.push_back(member("surrogate_trainer", "ema_decay", &R::surrogate_trainer, &ST::ema_decay));
    v.push_back(member("surrogate_trainer", "lr", &R::surrogate_trainer, &ST::lr));
    v.push_back(member("surrogate_trainer", "lr_decay", &R::surrogate_trainer, &ST::lr_decay));
    v.push_back(member("surrogate_trainer", "weight_decay", &R::surrogate_trainer, &ST::weight_decay));

    v.push_back(member("optim", "iterations", &R::optim, &OptimConfig::iterations));
    v.push_back(member("optim", "batch_size", &R::optim, &OptimConfig::batch_size));
    v.push_back(member("optim", "n_geometries", &R::optim, &OptimConfig::n_geometries));
    v.push_back(member("optim", "lr", &R::optim, &OptimConfig::lr));
    v.push_back(member("optim", "lr_decay", &R::optim, &OptimConfig::lr_decay));
    v.push_back(member("optim", "damping", &R::optim, &OptimConfig::damping));
    v.push_back(member("optim", "cg_steps", &R::optim, &OptimConfig::cg_steps));
    v.push_back(member("optim", "cg_route", &R::optim, &OptimConfig::cg_route));
    v.push_back(member("optim", "clip_scale", &R::optim, &OptimConfig::clip_scale));
    v.push_back(member("optim", "coordinate_transform", &R::optim, &OptimConfig::coordinate_transform));
    v.push_back(member("optim", "canonical_frame", &R::optim, &OptimConfig::canonical_frame));
    v.push_back(member("optim", "max_abort_fraction", &R::optim, &OptimConfig::max_abort_fraction));

    v.push_back(member("mcmc", "steps", &R::mcmc, &McmcConfig::steps));
    v.push_back(member("mcmc", "init_step", &R::mcmc, &McmcConfig::init_step));
    v.push_back(member("mcmc", "burn_in", &R::mcmc, &McmcConfig::burn_in));

    v.push_back(member("pretrain", "iterations", &R::pretrain, &PretrainConfig::iterations));
    v.push_back(member("pretrain", "lr", &R::pretrain, &PretrainConfig::lr));
    v.push_back(member("pretrain", "provider", &R::pretrain, &PretrainConfig::provider));
    v.push_back(member("pretrain", "mcmc_steps", &R::pretrain, &PretrainConfig::mcmc_steps));

    v.push_back(member("evaluation", "n_samples", &R::evaluation, &EvalOptions::n_samples));
    v.push_back(member("evaluation", "n_walkers", &R::evaluation, &EvalOptions::n_walkers));
    v.push_back(member("evaluation", "burn_in", &R::evaluation, &EvalOptions::burn_in));
    v.push_back(member("evaluation", "steps_between", &R::evaluation, &EvalOptions::steps_between));
    v.push_back(member("evaluation", "init_step", &R::evaluation, &EvalOptions::init_step));

    v.push_back(member("run", "seed", &R::run, &RunSettings::seed));
    v.push_back(member("run", "output_dir", &R::run, &RunSettings::output_dir));
    v.push_back(member("run", "precision", &R::run, &RunSettings::precision));
    v.push_back(member("run", "checkpoint_every", &R::run, &RunSettings::checkpoint_every));
    v.push_back(member("run", "threads", &R::run, &RunSettings::threads));
    v.push_back(member("run", "log_every", &R::run, &RunSettings::log_every));
    v.push_back(member("run", "dead_neuron_every", &R::run, &RunSettings::dead_neuron_every));
    return v;
  }();
  return f;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

void check(bool ok, const std::string& what) { require(ok, ErrorCode::kConfig, "config: " + what); }

}  // namespace

void RunConfig::validate() const {
  const auto names = dataset_names();
  check(std::find(names.begin(), names.end(), system.name) != names.end() ||
            system.name.rfind("custom:", 0) == 0,
        "unknown system '" + system.name + "'");
  for (const auto& [k, o] : system.domain) check(o.lo <= o.hi, "domain '" + k + "' has lo > hi");
  const WfConfig& w = wavefunction;
  check(w.single_width > 0 && w.pair_width > 0 && w.n_layers > 0 && w.n_determinants > 0 &&
            w.n_jastrow_layers > 0 && w.jastrow_width >= 0 && w.nuclei_embed_dim > 0,
        "wave-function widths and layer counts must be positive");
  metagnn.validate();
  surrogate.validate();
  surrogate_trainer.validate();
  const OptimConfig& o = optim;
  check(o.iterations >= 0, "optim.iterations must be >= 0");
  check(o.n_geometries > 0 && o.batch_size > 0 && o.batch_size % o.n_geometries == 0,
        "optim.batch_size must be a positive multiple of optim.n_geometries");
  check(o.lr >= 0.0 && o.lr_decay > 0.0, "optim.lr must be >= 0 and optim.lr_decay > 0");
  check(o.damping >= 0.0 && o.cg_steps >= 0, "optim.damping and optim.cg_steps must be >= 0");
  check(o.cg_route == "auto" || o.cg_route == "parameter" || o.cg_route == "sample",
        "optim.cg_route must be auto, parameter or sample");
  check(o.clip_scale > 0.0, "optim.clip_scale must be positive (use \"inf\" to disable)");
  check(o.max_abort_fraction >= 0.0 && o.max_abort_fraction <= 1.0,
        "optim.max_abort_fraction must lie in [0, 1]");
  check(mcmc.steps >= 0 && mcmc.init_step > 0.0 && mcmc.burn_in >= 0, "invalid mcmc settings");
  check(pretrain.iterations >= 0 && pretrain.lr >= 0.0 && pretrain.mcmc_steps >= 0,
        "invalid pretraining settings");
  check(evaluation.n_samples > 0 && evaluation.n_walkers > 0 && evaluation.burn_in >= 0 &&
            evaluation.steps_between > 0 && evaluation.init_step > 0.0,
        "invalid evaluation settings");
  check(run.precision == "f32" || run.precision == "f64", "run.precision must be f32 or f64");
  check(run.checkpoint_every >= 0 && run.threads >= 0 && run.log_every > 0 &&
            run.dead_neuron_every >= 0,
        "invalid run settings");
}

RunConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config: invalid JSON: ") + e.what());
  }
  check(doc.is_object(), "top level must be an object");
  RunConfig c;
  for (auto s = doc.begin(); s != doc.end(); ++s) {
    bool known = false;
    for (const Field& f : fields()) known = known || f.section == s.key();
    check(known, "unknown section '" + s.key() + "'");
    check(s->is_object(), "section '" + s.key() + "' must be an object");
    for (auto k = s->begin(); k != s->end(); ++k) {
      const Field* f = find_field(s.key(), k.key());
      check(f != nullptr, "unknown key '" + s.key() + "." + k.key() + "'");
      f->set(c, *k);
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c, int indent) {
  Json doc = Json::object();
  for (const Field& f : fields()) doc[f.section][f.key] = f.get(c);
  return doc.dump(indent);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.section + "." + f.key);
  return out;
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  check(eq != std::string::npos, "override '" + assignment + "' must look like section.key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto dot = path.find('.');
  check(dot != std::string::npos, "override path '" + path + "' must be section.key");
  const Field* f = find_field(path.substr(0, dot), path.substr(dot + 1));
  check(f != nullptr, "unknown key '" + path + "'");
  Json j;
  try {
    j = Json::parse(value);
  } catch (const nlohmann::json::exception&) {
    j = value;
  }
  f->set(c, j);
  c.validate();
}

}  // namespace planet
