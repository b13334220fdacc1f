// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// planet-vmc: command-line front end over the C API.

#include <planet_vmc.h>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
  void operator()(planet_config* c) const { planet_config_free(c); }
};
using ConfigPtr = std::unique_ptr<planet_config, ConfigDeleter>;

int exit_code(planet_status s) {
  if (s == PLANET_OK) return 0;
  return s == PLANET_ERR_NUMERICAL ? 2 : 1;
}

int report(planet_status s, const char* what) {
  if (s != PLANET_OK) std::cerr << "planet-vmc " << what << ": " << planet_last_error() << '\n';
  return exit_code(s);
}

struct Globals {
  std::string config;
  long long seed = -1;
  int threads = -1;
  std::string precision;
  std::string output_dir;
  std::string resume;
  long long iterations = -1;
  bool no_surrogate = false;
  std::vector<std::string> sets;
};

// Config file (or defaults) with flag overrides applied in a fixed order.
planet_status build_config(const Globals& g, ConfigPtr& out) {
  planet_config* raw = nullptr;
  planet_status s = g.config.empty() ? planet_config_default(&raw) : planet_config_load(g.config.c_str(), &raw);
  if (s != PLANET_OK) return s;
  out.reset(raw);
  std::vector<std::string> a = g.sets;
  if (g.seed >= 0) a.push_back("run.seed=" + std::to_string(g.seed));
  if (g.threads >= 0) a.push_back("run.threads=" + std::to_string(g.threads));
  if (!g.precision.empty()) a.push_back("run.precision=" + g.precision);
  if (!g.output_dir.empty()) a.push_back("run.output_dir=\"" + g.output_dir + "\"");
  if (g.iterations >= 0) a.push_back("optim.iterations=" + std::to_string(g.iterations));
  if (g.no_surrogate) a.push_back("surrogate.enabled=false");
  for (const std::string& x : a)
    if ((s = planet_config_set(out.get(), x.c_str())) != PLANET_OK) return s;
  return planet_config_validate(out.get());
}

std::string output_dir_of(const planet_config* c) {
  char* v = nullptr;
  if (planet_config_get(c, "run.output_dir", &v) != PLANET_OK) return "run";
  const std::string dir(v);
  planet_string_free(v);
  return dir;
}

std::string in_dir(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planet-vmc: neural VMC with an online energy surrogate"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Random seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", g.threads, "Worker threads (0: library default)")->check(CLI::NonNegativeNumber);
  app.add_option("--precision", g.precision, "Parameter precision")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--output-dir", g.output_dir, "Run directory");
  app.add_option("--resume", g.resume, "Checkpoint to resume training from");
  app.add_option("--iterations", g.iterations, "Training iterations")->check(CLI::NonNegativeNumber);
  app.add_flag("--no-surrogate", g.no_surrogate, "Train the wave function only");
  app.add_option("--set", g.sets, "Config override section.key=value (repeatable)");

  auto* train = app.add_subcommand("train", "Pretrain, then run the joint optimization");
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the orbitals and write a checkpoint");

  std::string checkpoint, grid, output;
  long long samples = 0;
  auto* eval_vmc = app.add_subcommand("eval-vmc", "Monte Carlo energies on a geometry grid");
  for (auto* sub : {eval_vmc}) {
    sub->add_option("--checkpoint", checkpoint, "Checkpoint (default: <output-dir>/checkpoint.cbor)");
    sub->add_option("--grid", grid, "Parameter-grid CSV (default: dataset grid)");
    sub->add_option("--samples", samples, "Samples per geometry");
    sub->add_option("--output", output, "Output CSV (default: <output-dir>/eval_vmc.csv)");
  }
  std::vector<std::string> geometries;
  auto* eval_sur = app.add_subcommand("eval-surrogate", "Surrogate energies on a grid or geometry files");
  eval_sur->add_option("--checkpoint", checkpoint, "Checkpoint (default: <output-dir>/checkpoint.cbor)");
  eval_sur->add_option("--grid", grid, "Parameter-grid CSV (default: dataset grid)");
  eval_sur->add_option("--geometry", geometries, "Geometry files instead of a grid")->excludes("--grid");
  eval_sur->add_option("--output", output, "Output CSV (default: <output-dir>/eval_surrogate.csv)");

  std::string source = "surrogate";
  double resolution = 1e-3;
  std::vector<std::string> boxes;
  auto* find_min = app.add_subcommand("find-min", "Dense scan plus quadratic refinement");
  find_min->add_option("--checkpoint", checkpoint, "Checkpoint (default: <output-dir>/checkpoint.cbor)");
  find_min->add_option("--source", source, "Energy model")->check(CLI::IsMember({"surrogate", "vmc"}));
  find_min->add_option("--resolution", resolution, "Grid spacing")->check(CLI::PositiveNumber);
  find_min->add_option("--box", boxes, "Scan range name=lo:hi (repeatable)");
  find_min->add_option("--samples", samples, "VMC samples per point");
  find_min->add_option("--output", output, "Output CSV (default: <output-dir>/find_min.csv)");

  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Summary tables and plot data for a run");
  rep->add_option("--run-dir", run_dir, "Run directory (default: <output-dir>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  planet_set_log_level(-1);
  ConfigPtr cfg;
  planet_status s = build_config(g, cfg);
  if (s != PLANET_OK) return report(s, "config");
  const std::string dir = output_dir_of(cfg.get());
  if (checkpoint.empty()) checkpoint = in_dir(dir, "checkpoint.cbor");

  if (train->parsed())
    return report(planet_train(cfg.get(), g.resume.empty() ? nullptr : g.resume.c_str()), "train");
  if (pretrain->parsed()) return report(planet_pretrain(cfg.get()), "pretrain");
  if (eval_vmc->parsed()) {
    if (output.empty()) output = in_dir(dir, "eval_vmc.csv");
    size_t n = 0;
    s = planet_eval_vmc(checkpoint.c_str(), grid.empty() ? nullptr : grid.c_str(), samples, output.c_str(), &n);
    if (s == PLANET_OK) std::cout << n << " records -> " << output << '\n';
    return report(s, "eval-vmc");
  }
  if (eval_sur->parsed()) {
    if (output.empty()) output = in_dir(dir, "eval_surrogate.csv");
    double per_point = 0.0;
    size_t n = geometries.size();
    if (geometries.empty()) {
      s = planet_eval_surrogate(checkpoint.c_str(), grid.empty() ? nullptr : grid.c_str(), output.c_str(), &n,
                                &per_point);
    } else {
      std::vector<const char*> files;
      for (const std::string& f : geometries) files.push_back(f.c_str());
      s = planet_eval_surrogate_geometries(checkpoint.c_str(), files.data(), files.size(), output.c_str(),
                                           &per_point);
    }
    if (s == PLANET_OK)
      std::printf("%zu records -> %s (%.3g us per point)\n", n, output.c_str(), per_point * 1e6);
    return report(s, "eval-surrogate");
  }
  if (find_min->parsed()) {
    if (output.empty()) output = in_dir(dir, "find_min.csv");
    std::vector<std::string> names;
    std::vector<double> lo, hi;
    for (const std::string& b : boxes) {
      const auto eq = b.find('=');
      const auto colon = b.find(':', eq == std::string::npos ? 0 : eq);
      if (eq == std::string::npos || colon == std::string::npos) {
        std::cerr << "planet-vmc find-min: --box expects name=lo:hi, got '" << b << "'\n";
        return 1;
      }
      try {
        names.push_back(b.substr(0, eq));
        lo.push_back(std::stod(b.substr(eq + 1, colon - eq - 1)));
        hi.push_back(std::stod(b.substr(colon + 1)));
      } catch (const std::exception&) {
        std::cerr << "planet-vmc find-min: bad number in --box '" << b << "'\n";
        return 1;
      }
    }
    std::vector<const char*> cnames;
    for (const std::string& n : names) cnames.push_back(n.c_str());
    double argmin[8];
    size_t dim = 0, tied = 0;
    double energy = 0.0;
    s = planet_find_min(checkpoint.c_str(), source.c_str(), resolution, cnames.data(), lo.data(), hi.data(),
                        names.size(), samples, output.c_str(), argmin, 8, &dim, &energy, &tied);
    if (s == PLANET_OK) {
      std::printf("minimum:");
      for (size_t i = 0; i < dim && i < 8; ++i) std::printf(" %.10g", argmin[i]);
      std::printf("  energy %.10g", energy);
      if (tied > 1) std::printf("  (%zu tied grid minima)", tied);
      std::printf("\n");
    }
    return report(s, "find-min");
  }
  if (rep->parsed()) {
    if (run_dir.empty()) run_dir = dir;
    int have = 0;
    double mae = 0.0, rel = 0.0;
    s = planet_report(run_dir.c_str(), &have, &mae, &rel);
    if (s == PLANET_OK) {
      if (have) std::printf("MAE %.6g mHa, relative MAE %.6g mHa\n", mae * 1e3, rel * 1e3);
      else std::printf("MAE unavailable\n");
    }
    return report(s, "report");
  }
  return 1;
}
