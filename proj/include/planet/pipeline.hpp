// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef PLANET_PIPELINE_HPP
#define PLANET_PIPELINE_HPP

#include <planet/analysis.hpp>
#include <planet/checkpoint.hpp>
#include <planet/config.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace planet {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };
using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Level from a name ("error", "warn", "info", "debug", or 0-3).
LogLevel parse_log_level(const std::string& name);

/// Run-directory file names.
namespace files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kCheckpoint = "checkpoint.cbor";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kPretrainLog = "pretrain_log.csv";
inline constexpr const char* kDiagnostics = "diagnostics.csv";
inline constexpr const char* kEvalVmc = "eval_vmc.csv";
inline constexpr const char* kEvalSurrogate = "eval_surrogate.csv";
inline constexpr const char* kFindMin = "find_min.csv";
inline constexpr const char* kReportSummary = "report_summary.csv";
inline constexpr const char* kReportDeltas = "report_deltas.csv";
inline constexpr const char* kReportSigma = "report_sigma_trace.csv";
inline constexpr const char* kReportDead = "report_dead_neurons.csv";
}  // namespace files

struct EnergyRecord {
  Vector params;
  double energy = 0.0;
  double stderr_naive = 0.0;  // VMC only
  std::string source;         // "vmc" or "surrogate"
};

struct TrainSummary {
  long long iterations = 0;  // steps taken in this invocation
  long long final_t = 0;
  long long aborted_steps = 0;
  std::vector<double> final_energy;  // per geometry walker
  std::vector<double> final_sigma;
};

/// Sets the OpenMP thread count when `threads` > 0.
void apply_thread_setting(int threads);

/// Pretraining, burn-in and the joint loop. With `resume` set the run
/// continues from that checkpoint (the stored config wins except for
/// run.iterations and run.output_dir). Throws kNumerical when more than
/// optim.max_abort_fraction of the steps diverge.
TrainSummary cmd_train(const RunConfig& config, const std::string& resume = {},
                       const LogSink& log = {});

/// Pretraining only; writes a checkpoint at t = 0.
void cmd_pretrain(const RunConfig& config, const LogSink& log = {});

/// Grid points: `grid_csv` when given, else the dataset grid of the stored config.
std::vector<Vector> load_eval_grid(const Trainer& trainer, const std::string& grid_csv);

/// VMC integration per grid point; n_samples <= 0 keeps the stored setting.
std::vector<EnergyRecord> cmd_eval_vmc(const std::string& checkpoint, const std::string& grid_csv,
                                       long long n_samples, const std::string& output_csv,
                                       const LogSink& log = {});

struct SurrogateEval {
  std::vector<EnergyRecord> records;
  double seconds_per_point = 0.0;
};
SurrogateEval cmd_eval_surrogate(const std::string& checkpoint, const std::string& grid_csv,
                                 const std::string& output_csv, const LogSink& log = {});
/// Surrogate energies for explicit geometry files; the charges must match.
SurrogateEval cmd_eval_surrogate_geometries(const std::string& checkpoint,
                                            const std::vector<std::string>& geometry_files,
                                            const std::string& output_csv,
                                            const LogSink& log = {});

struct FindMinOptions {
  std::string source = "surrogate";  // or "vmc"
  double resolution = 1e-3;
  long long vmc_samples = 0;  // <= 0 keeps the stored setting
  std::map<std::string, DomainOverride> domain;  // scan box; defaults to the training domain
};
/// Frozen parameters (lo == hi) stay fixed; 1 or 2 may vary.
MinimumResult cmd_find_min(const std::string& checkpoint, const FindMinOptions& options,
                           const std::string& output_csv, const LogSink& log = {});

struct ReportSummary {
  long long n_vmc = 0;
  long long n_surrogate = 0;
  long long n_matched = 0;
  bool mae_available = false;
  double mae = 0.0;
  double relative_mae = 0.0;
  long long train_rows = 0;
};
ReportSummary cmd_report(const std::string& run_dir, const LogSink& log = {});

/// CSV of records with one column per domain parameter.
std::string records_csv(const GeometryDomain& domain, const std::vector<EnergyRecord>& records);
std::vector<EnergyRecord> parse_records_csv(const std::string& text);

}  // namespace planet

#endif  // PLANET_PIPELINE_HPP
