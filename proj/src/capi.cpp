// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet_vmc.h>

#include <planet/pipeline.hpp>

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>
#include <new>

struct planet_config {
  planet::RunConfig value;
};

struct planet_model {
  planet::Checkpoint checkpoint;
  std::unique_ptr<planet::Trainer> trainer;
};

namespace {

thread_local std::string g_last_error;
int g_log_level = -1;
std::mutex g_log_mutex;

int env_log_level() {
  const char* env = std::getenv("PLANET_VMC_LOG");
  if (env == nullptr) return static_cast<int>(planet::LogLevel::kInfo);
  try {
    return static_cast<int>(planet::parse_log_level(env));
  } catch (const planet::Error&) {
    return static_cast<int>(planet::LogLevel::kInfo);
  }
}

void stderr_sink(planet::LogLevel level, const std::string& msg) {
  if (g_log_level < 0) g_log_level = env_log_level();
  if (static_cast<int>(level) > g_log_level) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[planet-vmc " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

planet_status to_status(planet::ErrorCode code) {
  switch (code) {
    case planet::ErrorCode::kConfig: return PLANET_ERR_CONFIG;
    case planet::ErrorCode::kNumerical: return PLANET_ERR_NUMERICAL;
    case planet::ErrorCode::kInvalidArgument:
    case planet::ErrorCode::kDimension: return PLANET_ERR_INVALID_ARGUMENT;
    case planet::ErrorCode::kIo: return PLANET_ERR_IO;
    case planet::ErrorCode::kVersion: return PLANET_ERR_VERSION;
    case planet::ErrorCode::kUnsupported: return PLANET_ERR_UNSUPPORTED;
  }
  return PLANET_ERR_INTERNAL;
}

template <class F>
planet_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return PLANET_OK;
  } catch (const planet::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return PLANET_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  planet::require(p != nullptr, planet::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

planet::Vector params_of(const planet_model* m, const double* params, size_t n) {
  need(m, "model");
  const int dim = m->trainer->dataset().domain.dim();
  planet::require(n == static_cast<size_t>(dim), planet::ErrorCode::kDimension,
                  "expected " + std::to_string(dim) + " geometry parameters");
  planet::require(n == 0 || params != nullptr, planet::ErrorCode::kInvalidArgument, "params is null");
  planet::Vector p(dim);
  for (int i = 0; i < dim; ++i) p[i] = params[i];
  return p;
}

}  // namespace

extern "C" {

const char* planet_last_error(void) { return g_last_error.c_str(); }
const char* planet_version(void) { return "0.1.0"; }
int planet_checkpoint_version(void) { return planet::kCheckpointVersion; }

planet_status planet_set_log_level(int level) {
  return guarded([&] {
    planet::require(level <= 3, planet::ErrorCode::kInvalidArgument, "log level must be <= 3");
    g_log_level = level < 0 ? env_log_level() : level;
  });
}

planet_status planet_config_default(planet_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new planet_config();
  });
}

planet_status planet_config_load(const char* path, planet_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new planet_config{planet::load_config(path)};
  });
}

planet_status planet_config_parse(const char* json, planet_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new planet_config{planet::parse_config(json)};
  });
}

planet_status planet_config_set(planet_config* config, const char* assignment) {
  return guarded([&] {
    need(config, "config");
    need(assignment, "assignment");
    planet::apply_override(config->value, assignment);
  });
}

planet_status planet_config_to_json(const planet_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup(planet::config_to_json(config->value));
  });
}

planet_status planet_config_get(const planet_config* config, const char* path, char** out) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    need(out, "out");
    const nlohmann::json doc = nlohmann::json::parse(planet::config_to_json(config->value));
    const std::string p = path;
    const auto dot = p.find('.');
    const nlohmann::json* node = &doc;
    for (const std::string& k : {p.substr(0, dot), dot == std::string::npos ? std::string() : p.substr(dot + 1)}) {
      if (k.empty()) continue;
      planet::require(node->is_object() && node->contains(k), planet::ErrorCode::kConfig,
                      "unknown config key '" + p + "'");
      node = &node->at(k);
    }
    *out = dup(node->is_string() ? node->get<std::string>() : node->dump());
  });
}

planet_status planet_config_validate(const planet_config* config) {
  return guarded([&] {
    need(config, "config");
    config->value.validate();
  });
}

void planet_config_free(planet_config* config) { delete config; }
void planet_string_free(char* s) { std::free(s); }

planet_status planet_train(const planet_config* config, const char* resume_checkpoint) {
  return guarded([&] {
    need(config, "config");
    planet::cmd_train(config->value, str(resume_checkpoint), stderr_sink);
  });
}

planet_status planet_pretrain(const planet_config* config) {
  return guarded([&] {
    need(config, "config");
    planet::cmd_pretrain(config->value, stderr_sink);
  });
}

planet_status planet_eval_vmc(const char* checkpoint, const char* grid_csv, long long n_samples,
                              const char* output_csv, size_t* n_records) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    const auto r = planet::cmd_eval_vmc(checkpoint, str(grid_csv), n_samples, str(output_csv), stderr_sink);
    if (n_records) *n_records = r.size();
  });
}

planet_status planet_eval_surrogate(const char* checkpoint, const char* grid_csv,
                                    const char* output_csv, size_t* n_records,
                                    double* seconds_per_point) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    const auto r = planet::cmd_eval_surrogate(checkpoint, str(grid_csv), str(output_csv), stderr_sink);
    if (n_records) *n_records = r.records.size();
    if (seconds_per_point) *seconds_per_point = r.seconds_per_point;
  });
}

planet_status planet_eval_surrogate_geometries(const char* checkpoint,
                                               const char* const* geometry_files, size_t n_files,
                                               const char* output_csv, double* seconds_per_point) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    std::vector<std::string> files;
    for (size_t i = 0; i < n_files; ++i) {
      need(geometry_files, "geometry_files");
      need(geometry_files[i], "geometry file");
      files.emplace_back(geometry_files[i]);
    }
    const auto r = planet::cmd_eval_surrogate_geometries(checkpoint, files, str(output_csv), stderr_sink);
    if (seconds_per_point) *seconds_per_point = r.seconds_per_point;
  });
}

planet_status planet_find_min(const char* checkpoint, const char* source, double resolution,
                              const char* const* box_names, const double* box_lo,
                              const double* box_hi, size_t n_box, long long vmc_samples,
                              const char* output_csv, double* argmin, size_t capacity, size_t* dim,
                              double* energy, size_t* n_tied) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    planet::FindMinOptions o;
    if (source != nullptr) o.source = source;
    o.resolution = resolution;
    o.vmc_samples = vmc_samples;
    for (size_t i = 0; i < n_box; ++i) {
      need(box_names, "box_names");
      need(box_lo, "box_lo");
      need(box_hi, "box_hi");
      o.domain[str(box_names[i])] = {box_lo[i], box_hi[i], -1.0};
    }
    const planet::MinimumResult r = planet::cmd_find_min(checkpoint, o, str(output_csv), stderr_sink);
    if (dim) *dim = static_cast<size_t>(r.argmin.size());
    if (argmin)
      for (size_t i = 0; i < capacity && i < static_cast<size_t>(r.argmin.size()); ++i)
        argmin[i] = r.argmin[static_cast<Eigen::Index>(i)];
    if (energy) *energy = r.energy;
    if (n_tied) *n_tied = r.tied.size();
  });
}

planet_status planet_report(const char* run_dir, int* mae_available, double* mae,
                            double* relative_mae) {
  return guarded([&] {
    need(run_dir, "run_dir");
    const planet::ReportSummary s = planet::cmd_report(run_dir, stderr_sink);
    if (mae_available) *mae_available = s.mae_available ? 1 : 0;
    if (mae) *mae = s.mae;
    if (relative_mae) *relative_mae = s.relative_mae;
  });
}

planet_status planet_model_open(const char* checkpoint, planet_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    auto m = std::make_unique<planet_model>();
    m->checkpoint = planet::load_checkpoint(checkpoint);
    m->trainer = std::make_unique<planet::Trainer>(m->checkpoint.config);
    *out = m.release();
  });
}

void planet_model_free(planet_model* model) { delete model; }

planet_status planet_model_dim(const planet_model* model, size_t* dim) {
  return guarded([&] {
    need(model, "model");
    need(dim, "dim");
    *dim = static_cast<size_t>(model->trainer->dataset().domain.dim());
  });
}

planet_status planet_model_surrogate_energy(const planet_model* model, const double* params,
                                            size_t n_params, double* energy) {
  return guarded([&] {
    need(energy, "energy");
    const planet::Vector p = params_of(model, params, n_params);
    *energy = model->trainer->surrogate_energy(model->checkpoint.state, p);
  });
}

planet_status planet_model_vmc_energy(const planet_model* model, const double* params,
                                      size_t n_params, long long n_samples,
                                      unsigned long long tag, double* energy,
                                      double* stderr_naive) {
  return guarded([&] {
    need(energy, "energy");
    const planet::Vector p = params_of(model, params, n_params);
    planet::EvalOptions o = model->checkpoint.config.evaluation;
    if (n_samples > 0) o.n_samples = n_samples;
    const planet::EnergyEstimate e = model->trainer->evaluate(model->checkpoint.state, p, o, tag);
    *energy = e.energy;
    if (stderr_naive) *stderr_naive = e.stderr_naive;
  });
}

planet_status planet_relative_mae(const double* a, const double* b, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    planet::require(n > 0 && a != nullptr && b != nullptr, planet::ErrorCode::kInvalidArgument,
                    "relative_mae: need two non-empty arrays");
    *out = planet::relative_mae(std::vector<double>(a, a + n), std::vector<double>(b, b + n));
  });
}

}  // extern "C"
