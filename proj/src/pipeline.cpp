// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <planet/pipeline.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace planet {

namespace fs = std::filesystem;

namespace {

void emit(const LogSink& log, LogLevel level, const std::string& msg) {
  if (log) log(level, msg);
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string path_in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorCode::kIo, where + ": bad number '" + s + "'");
  return v;
}

EvalOptions eval_options(const RunConfig& c, long long n_samples) {
  EvalOptions o = c.evaluation;
  if (n_samples > 0) o.n_samples = n_samples;
  return o;
}

}  // namespace

LogLevel parse_log_level(const std::string& name) {
  if (name == "error" || name == "0") return LogLevel::kError;
  if (name == "warn" || name == "warning" || name == "1") return LogLevel::kWarn;
  if (name == "info" || name == "2" || name.empty()) return LogLevel::kInfo;
  if (name == "debug" || name == "3") return LogLevel::kDebug;
  fail(ErrorCode::kConfig, "unknown log level '" + name + "'");
}

void apply_thread_setting(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

namespace {

// Training log rows held in memory and flushed together with checkpoints.
struct RunFiles {
  std::string dir;
  std::string train_log;
  std::string diagnostics;

  void flush(const Trainer& trainer, const TrainState& s) const {
    write_file_atomic(path_in(dir, files::kTrainLog), train_log);
    if (!diagnostics.empty()) write_file_atomic(path_in(dir, files::kDiagnostics), diagnostics);
    save_checkpoint(path_in(dir, files::kCheckpoint), trainer, s);
  }
};

// Rows of an existing log with t < t_max, so a resumed run continues it.
std::string truncate_log(const std::string& path, const std::string& header, long long t_max) {
  std::string out = header + "\n";
  if (!fs::exists(path)) return out;
  const std::vector<std::string> rows = lines_of(read_file(path));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string first = rows[i].substr(0, rows[i].find(','));
    if (std::stoll(first) < t_max) out += rows[i] + "\n";
  }
  return out;
}

void record_dead_neurons(const Trainer& tr, const TrainState& s, std::string& out) {
  const WalkerState& w = s.walkers.front();
  const Geometry g = tr.dataset().domain.geometry(w.geometry_params);
  const ParamTree a = tr.adapted(s, g);
  const double frac = tr.wavefunction().dead_neuron_fraction(a, w.electrons, g, tr.frame(g));
  if (out.empty()) out = "t,dead_fraction\n";
  out += std::to_string(s.t) + "," + g17(frac) + "\n";
}

}  // namespace

TrainSummary cmd_train(const RunConfig& config, const std::string& resume, const LogSink& log) {
  config.validate();
  RunConfig cfg = config;
  TrainState state;
  std::optional<Checkpoint> ck;
  if (!resume.empty()) {
    ck = load_checkpoint(resume);
    cfg = ck->config;
    cfg.optim.iterations = config.optim.iterations;
    cfg.run.output_dir = config.run.output_dir;
    cfg.run.threads = config.run.threads;
    cfg.run.log_every = config.run.log_every;
  }
  apply_thread_setting(cfg.run.threads);
  const Trainer tr(cfg);
  RunFiles out{cfg.run.output_dir, {}, {}};
  fs::create_directories(out.dir);
  write_file_atomic(path_in(out.dir, files::kConfig), config_to_json(cfg) + "\n");

  if (ck) {
    state = std::move(ck->state);
    emit(log, LogLevel::kInfo, "resuming at t=" + std::to_string(state.t));
    out.train_log = truncate_log(path_in(out.dir, files::kTrainLog), tr.log_header(), state.t);
    const std::string diag = path_in(out.dir, files::kDiagnostics);
    if (fs::exists(diag)) out.diagnostics = truncate_log(diag, "t,dead_fraction", state.t);
  } else {
    state = tr.init();
    emit(log, LogLevel::kInfo,
         "pretraining " + std::to_string(cfg.pretrain.iterations) + " iterations");
    std::ostringstream plog;
    tr.pretrain(state, &plog);
    write_file_atomic(path_in(out.dir, files::kPretrainLog), plog.str());
    tr.thermalize(state, cfg.mcmc.burn_in, tr.stream(kTagBurnIn));
    out.train_log = tr.log_header() + "\n";
  }

  TrainSummary sum;
  const long long total = cfg.optim.iterations;
  const auto abort_limit = static_cast<long long>(std::floor(cfg.optim.max_abort_fraction *
                                                             static_cast<double>(std::max(total, 1LL))));
  while (state.t < total) {
    const long long t = state.t;
    const StepResult r = tr.step(state);
    ++sum.iterations;
    if (r.aborted) {
      emit(log, LogLevel::kWarn, "step " + std::to_string(t) + " aborted: " + r.diagnostic);
      if (state.aborted_steps > abort_limit) {
        out.flush(tr, state);
        fail(ErrorCode::kNumerical, "training diverged: " + std::to_string(state.aborted_steps) +
                                        " aborted steps (last: " + r.diagnostic + ")");
      }
      continue;
    }
    out.train_log += tr.log_row(r, t) + "\n";
    sum.final_energy = r.stats.mean;
    sum.final_sigma = r.stats.sigma;
    if (cfg.run.dead_neuron_every > 0 && state.t % cfg.run.dead_neuron_every == 0)
      record_dead_neurons(tr, state, out.diagnostics);
    if (cfg.run.log_every > 0 && (t % cfg.run.log_every == 0 || state.t == total)) {
      double e = 0.0, s = 0.0;
      for (int c = 0; c < r.stats.size(); ++c) {
        e += r.stats.mean[static_cast<std::size_t>(c)] / r.stats.size();
        s += r.stats.sigma[static_cast<std::size_t>(c)] / r.stats.size();
      }
      emit(log, LogLevel::kDebug,
           "t=" + std::to_string(t) + " E=" + g17(e) + " sigma=" + g17(s) +
               " acc=" + g17(r.acceptance) + (r.surrogate_active ? " L=" + g17(r.surrogate_loss) : ""));
    }
    if (cfg.run.checkpoint_every > 0 && state.t % cfg.run.checkpoint_every == 0 && state.t < total)
      out.flush(tr, state);
  }
  out.flush(tr, state);
  sum.final_t = state.t;
  sum.aborted_steps = state.aborted_steps;
  emit(log, LogLevel::kInfo, "training finished at t=" + std::to_string(state.t));
  return sum;
}

void cmd_pretrain(const RunConfig& config, const LogSink& log) {
  config.validate();
  apply_thread_setting(config.run.threads);
  const Trainer tr(config);
  fs::create_directories(config.run.output_dir);
  write_file_atomic(path_in(config.run.output_dir, files::kConfig), config_to_json(config) + "\n");
  TrainState state = tr.init();
  std::ostringstream plog;
  tr.pretrain(state, &plog);
  tr.thermalize(state, config.mcmc.burn_in, tr.stream(kTagBurnIn));
  write_file_atomic(path_in(config.run.output_dir, files::kPretrainLog), plog.str());
  save_checkpoint(path_in(config.run.output_dir, files::kCheckpoint), tr, state);
  emit(log, LogLevel::kInfo, "pretraining finished");
}

std::vector<Vector> load_eval_grid(const Trainer& tr, const std::string& grid_csv) {
  if (grid_csv.empty()) return tr.dataset().grid;
  return read_grid_csv(tr.dataset().domain, grid_csv);
}

std::string records_csv(const GeometryDomain& domain, const std::vector<EnergyRecord>& records) {
  std::string out;
  for (const DomainParam& p : domain.params()) out += p.name + ",";
  out += "energy,stderr,source\n";
  for (const EnergyRecord& r : records) {
    for (Eigen::Index i = 0; i < r.params.size(); ++i) out += g17(r.params[i]) + ",";
    out += g17(r.energy) + ",";
    if (r.source == "vmc") out += g17(r.stderr_naive);
    out += "," + r.source + "\n";
  }
  return out;
}

std::vector<EnergyRecord> parse_records_csv(const std::string& text) {
  const std::vector<std::string> rows = lines_of(text);
  require(!rows.empty(), ErrorCode::kIo, "records csv: missing header");
  const std::vector<std::string> head = split_csv(rows[0]);
  require(head.size() >= 3 && head[head.size() - 3] == "energy" && head[head.size() - 2] == "stderr" &&
              head.back() == "source",
          ErrorCode::kIo, "records csv: unexpected header");
  const std::size_t np = head.size() - 3;
  std::vector<EnergyRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::vector<std::string> c = split_csv(rows[i]);
    const std::string where = "records csv row " + std::to_string(i);
    require(c.size() == head.size(), ErrorCode::kIo, where + ": wrong number of cells");
    EnergyRecord r;
    r.params.resize(static_cast<Eigen::Index>(np));
    for (std::size_t k = 0; k < np; ++k) r.params[static_cast<Eigen::Index>(k)] = to_double(c[k], where);
    r.energy = to_double(c[np], where);
    if (!c[np + 1].empty()) r.stderr_naive = to_double(c[np + 1], where);
    r.source = c[np + 2];
    require(r.source == "vmc" || r.source == "surrogate", ErrorCode::kIo, where + ": bad source tag");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EnergyRecord> cmd_eval_vmc(const std::string& checkpoint, const std::string& grid_csv,
                                       long long n_samples, const std::string& output_csv,
                                       const LogSink& log) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Trainer tr(ck.config);
  const std::vector<Vector> grid = load_eval_grid(tr, grid_csv);
  const EvalOptions opts = eval_options(ck.config, n_samples);
  std::vector<EnergyRecord> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const EnergyEstimate e = tr.evaluate(ck.state, grid[i], opts, i);
    require(std::isfinite(e.energy) && std::isfinite(e.stderr_naive), ErrorCode::kNumerical,
            "eval-vmc: non-finite energy at grid point " + std::to_string(i));
    out.push_back({grid[i], e.energy, e.stderr_naive, "vmc"});
    emit(log, LogLevel::kInfo,
         "point " + std::to_string(i) + ": E=" + g17(e.energy) + " +- " + g17(e.stderr_naive));
  }
  if (!output_csv.empty()) write_file_atomic(output_csv, records_csv(tr.dataset().domain, out));
  return out;
}

namespace {

SurrogateEval timed_surrogate(const Trainer& tr, const TrainState& s, const std::vector<Geometry>& geoms) {
  require(s.surrogate.has_value(), ErrorCode::kInvalidArgument,
          "eval-surrogate: checkpoint has no surrogate");
  SurrogateEval out;
  const auto t0 = std::chrono::steady_clock::now();
  const Vector e = geoms.empty() ? Vector() : tr.surrogate().energies(s.surrogate->merged, geoms, tr.charges());
  const auto t1 = std::chrono::steady_clock::now();
  if (!geoms.empty())
    out.seconds_per_point = std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(geoms.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    require(std::isfinite(e[i]), ErrorCode::kNumerical, "eval-surrogate: non-finite energy");
    out.records.push_back({Vector(), e[i], 0.0, "surrogate"});
  }
  return out;
}

}  // namespace

SurrogateEval cmd_eval_surrogate(const std::string& checkpoint, const std::string& grid_csv,
                                 const std::string& output_csv, const LogSink& log) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Trainer tr(ck.config);
  const std::vector<Vector> grid = load_eval_grid(tr, grid_csv);
  std::vector<Geometry> geoms;
  geoms.reserve(grid.size());
  for (const Vector& p : grid) geoms.push_back(tr.dataset().domain.geometry(p));
  SurrogateEval out = timed_surrogate(tr, ck.state, geoms);
  for (std::size_t i = 0; i < grid.size(); ++i) out.records[i].params = grid[i];
  emit(log, LogLevel::kInfo,
       std::to_string(grid.size()) + " points, " + g17(out.seconds_per_point * 1e6) + " us per point");
  if (!output_csv.empty()) write_file_atomic(output_csv, records_csv(tr.dataset().domain, out.records));
  return out;
}

SurrogateEval cmd_eval_surrogate_geometries(const std::string& checkpoint,
                                            const std::vector<std::string>& geometry_files,
                                            const std::string& output_csv, const LogSink& log) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Trainer tr(ck.config);
  std::vector<Geometry> geoms;
  for (const std::string& f : geometry_files) {
    GeometryFile g = read_geometry_file(f);
    require(g.charges == tr.charges(), ErrorCode::kInvalidArgument,
            "eval-surrogate: " + f + " does not match the checkpoint's molecule");
    geoms.push_back(std::move(g.geometry));
  }
  SurrogateEval out = timed_surrogate(tr, ck.state, geoms);
  emit(log, LogLevel::kInfo, std::to_string(geoms.size()) + " geometries");
  if (!output_csv.empty()) {
    std::string csv = "file,energy,source\n";
    for (std::size_t i = 0; i < geoms.size(); ++i)
      csv += geometry_files[i] + "," + g17(out.records[i].energy) + ",surrogate\n";
    write_file_atomic(output_csv, csv);
  }
  return out;
}

MinimumResult cmd_find_min(const std::string& checkpoint, const FindMinOptions& options,
                           const std::string& output_csv, const LogSink& log) {
  require(options.source == "surrogate" || options.source == "vmc", ErrorCode::kInvalidArgument,
          "find-min: source must be surrogate or vmc");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Trainer tr(ck.config);
  const GeometryDomain& dom = tr.dataset().domain;
  Vector base(dom.dim());
  std::vector<int> free;
  std::vector<ScanAxis> axes;
  for (int i = 0; i < dom.dim(); ++i) {
    DomainParam p = dom.params()[static_cast<std::size_t>(i)];
    const auto it = options.domain.find(p.name);
    if (it != options.domain.end()) {
      p.lo = it->second.lo;
      p.hi = it->second.hi;
    }
    base[i] = p.lo;
    if (p.hi > p.lo) {
      free.push_back(i);
      axes.push_back({p.lo, p.hi, options.resolution});
    }
  }
  for (const auto& [name, o] : options.domain) (void)dom.index(name);
  require(!free.empty(), ErrorCode::kInvalidArgument, "find-min: no free parameter in the scan box");
  auto full = [&](const Vector& x) {
    Vector p = base;
    for (std::size_t k = 0; k < free.size(); ++k) p[free[k]] = x[static_cast<Eigen::Index>(k)];
    return p;
  };
  long long tag = 0;
  const EvalOptions opts = eval_options(ck.config, options.vmc_samples);
  auto energies = [&](const std::vector<Vector>& xs) {
    std::vector<double> e;
    if (options.source == "surrogate") {
      require(ck.state.surrogate.has_value(), ErrorCode::kInvalidArgument,
              "find-min: checkpoint has no surrogate");
      std::vector<Geometry> geoms;
      for (const Vector& x : xs) geoms.push_back(dom.geometry(full(x)));
      const Vector v = tr.surrogate().energies(ck.state.surrogate->merged, geoms, tr.charges());
      e.assign(v.data(), v.data() + v.size());
    } else {
      for (const Vector& x : xs)
        e.push_back(tr.evaluate(ck.state, full(x), opts, static_cast<std::uint64_t>(tag++)).energy);
    }
    return e;
  };
  MinimumResult r = find_minimum_batched(energies, axes);
  r.argmin = full(r.argmin);
  r.grid_argmin = full(r.grid_argmin);
  for (Vector& v : r.tied) v = full(v);
  if (r.tied.size() > 1)
    emit(log, LogLevel::kWarn, std::to_string(r.tied.size()) + " tied grid minima");
  emit(log, LogLevel::kInfo, "minimum E=" + g17(r.energy) + " after " + std::to_string(r.n_evaluated) + " evaluations");
  if (!output_csv.empty()) {
    std::string csv = "kind,";
    for (const DomainParam& p : dom.params()) csv += p.name + ",";
    csv += "energy\n";
    auto row = [&](const char* kind, const Vector& p, const std::string& e) {
      csv += kind;
      for (Eigen::Index i = 0; i < p.size(); ++i) csv += "," + g17(p[i]);
      csv += "," + e + "\n";
    };
    row("refined", r.argmin, g17(r.energy));
    row("grid", r.grid_argmin, g17(r.grid_energy));
    for (const Vector& v : r.tied) row("tied", v, g17(r.grid_energy));
    write_file_atomic(output_csv, csv);
  }
  return r;
}

ReportSummary cmd_report(const std::string& dir, const LogSink& log) {
  const std::string vmc_path = path_in(dir, files::kEvalVmc);
  const std::string sur_path = path_in(dir, files::kEvalSurrogate);
  require(fs::exists(vmc_path) || fs::exists(sur_path), ErrorCode::kIo,
          "report: no evaluation records in " + dir);
  std::vector<EnergyRecord> vmc, sur;
  if (fs::exists(vmc_path)) vmc = parse_records_csv(read_file(vmc_path));
  if (fs::exists(sur_path)) sur = parse_records_csv(read_file(sur_path));
  ReportSummary s;
  s.n_vmc = static_cast<long long>(vmc.size());
  s.n_surrogate = static_cast<long long>(sur.size());

  auto key = [](const Vector& p) {
    std::string k;
    for (Eigen::Index i = 0; i < p.size(); ++i) k += g17(p[i]) + ",";
    return k;
  };
  std::map<std::string, const EnergyRecord*> by_key;
  for (const EnergyRecord& r : sur) by_key.emplace(key(r.params), &r);
  std::vector<double> ev, es;
  std::string deltas;
  const std::size_t np = vmc.empty() ? (sur.empty() ? 0 : static_cast<std::size_t>(sur[0].params.size()))
                                     : static_cast<std::size_t>(vmc[0].params.size());
  for (std::size_t i = 0; i < np; ++i) deltas += "p" + std::to_string(i) + ",";
  deltas += "vmc_energy,vmc_stderr,surrogate_energy,delta\n";
  for (const EnergyRecord& r : vmc) {
    const auto it = by_key.find(key(r.params));
    deltas += key(r.params) + g17(r.energy) + "," + g17(r.stderr_naive) + ",";
    if (it == by_key.end()) {
      deltas += ",\n";
      continue;
    }
    ev.push_back(r.energy);
    es.push_back(it->second->energy);
    deltas += g17(it->second->energy) + "," + g17(it->second->energy - r.energy) + "\n";
  }
  s.n_matched = static_cast<long long>(ev.size());
  s.mae_available = !ev.empty();
  if (s.mae_available) {
    s.mae = mae(ev, es);
    s.relative_mae = relative_mae(ev, es);
  }
  if (vmc.empty())
    for (const EnergyRecord& r : sur) deltas += key(r.params) + ",," + g17(r.energy) + ",\n";

  // sigma trace from the training log
  std::string sigma = "t,sigma_mean\n";
  const std::string log_path = path_in(dir, files::kTrainLog);
  if (fs::exists(log_path)) {
    const std::vector<std::string> rows = lines_of(read_file(log_path));
    if (!rows.empty()) {
      const std::vector<std::string> head = split_csv(rows[0]);
      std::vector<std::size_t> cols;
      sigma = "t,sigma_mean";
      for (std::size_t k = 0; k < head.size(); ++k)
        if (head[k].rfind("sigma_", 0) == 0) {
          cols.push_back(k);
          sigma += "," + head[k];
        }
      sigma += "\n";
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::vector<std::string> c = split_csv(rows[i]);
        require(c.size() == head.size(), ErrorCode::kIo, "report: malformed training log row");
        double m = 0.0;
        std::string rest;
        for (std::size_t k : cols) {
          m += to_double(c[k], "train log") / static_cast<double>(cols.size());
          rest += "," + c[k];
        }
        sigma += c[0] + "," + g17(m) + rest + "\n";
        ++s.train_rows;
      }
    }
  }
  const std::string diag = path_in(dir, files::kDiagnostics);
  const std::string dead = fs::exists(diag) ? read_file(diag) : std::string("t,dead_fraction\n");

  std::string summary = "metric,value\n";
  summary += "n_vmc," + std::to_string(s.n_vmc) + "\n";
  summary += "n_surrogate," + std::to_string(s.n_surrogate) + "\n";
  summary += "n_matched," + std::to_string(s.n_matched) + "\n";
  summary += "mae," + (s.mae_available ? g17(s.mae) : std::string("unavailable")) + "\n";
  summary += "relative_mae," + (s.mae_available ? g17(s.relative_mae) : std::string("unavailable")) + "\n";
  summary += "train_rows," + std::to_string(s.train_rows) + "\n";
  write_file_atomic(path_in(dir, files::kReportSummary), summary);
  write_file_atomic(path_in(dir, files::kReportDeltas), deltas);
  write_file_atomic(path_in(dir, files::kReportSigma), sigma);
  write_file_atomic(path_in(dir, files::kReportDead), dead);
  emit(log, LogLevel::kInfo,
       s.mae_available ? "MAE " + g17(s.mae) + " Ha over " + std::to_string(s.n_matched) + " points"
                       : std::string("MAE unavailable: no matched vmc/surrogate pairs"));
  return s;
}

}  // namespace planet
