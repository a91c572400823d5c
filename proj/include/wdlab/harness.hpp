#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdlab/config.hpp"
#include "wdlab/optim.hpp"
#include "wdlab/probes.hpp"

namespace wdlab {

/// Training state after `step` updates.
struct Snapshot {
  std::int64_t step = 0;
  ParamSet params;
  OptState opt_state;
  AveragerState averager;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

std::string snapshot_to_json(const Snapshot& snapshot);
Snapshot snapshot_from_json(const std::string& text);

struct RunRecord {
  RunConfig config;
  std::vector<ProbeRecord> records;
  std::vector<Snapshot> snapshots;
  ParamSet final_params;
  std::int64_t steps_completed = 0;
  bool diverged = false;
  std::int64_t divergence_step = -1;

  /// Probe records as JSON lines.
  std::string probes_jsonl() const;
};

/// Executes the phases in order. Mini-batches are drawn uniformly with
/// replacement from a generator seeded by (seed, step), so any step can be
/// replayed without earlier random state. A probe record is written at every
/// multiple of probes_every up to the final step, step 0 included, so a
/// complete run has total_steps / probes_every + 1 of them. Snapshots are
/// taken at every multiple of snapshot_every. A detected divergence, or a
/// non-finite loss or update, ends the run with diverged set.
RunRecord run(const RunConfig& config);

/// Continues `config` from `snapshot`. `prefix` holds the probe records
/// written up to and including the snapshot step; they are kept and feed
/// the stabilization and divergence detectors.
RunRecord resume(const RunConfig& config, const Snapshot& snapshot, std::vector<ProbeRecord> prefix);

/// Writes config.json, probes.jsonl, summary.json and snapshots/step_N.json.
void write_run_dir(const RunRecord& record, const std::string& dir);

struct LoadedRun {
  RunConfig config;
  std::vector<ProbeRecord> records;
  std::vector<Snapshot> snapshots;  // ascending step
};

LoadedRun load_run_dir(const std::string& dir);

struct FinetunePoint {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double test_metric = 0.0;
  double trace = 0.0;
  double trace_stderr = 0.0;
};

/// For every snapshot: copy the weights, take ft_steps full-batch gradient
/// steps with lr ft_lr and no weight decay (projected when the run uses
/// sphere_sgd), then measure train loss, test metric and the Hessian trace
/// on the probe subset. Snapshots are processed on `threads` workers.
/// Throws DomainError for fewer than two snapshots.
std::vector<FinetunePoint> finetune_along_trajectory(const RunConfig& config, const std::vector<Snapshot>& snapshots,
                                                     std::int64_t ft_steps, double ft_lr, int trace_probes,
                                                     int threads = 1);

/// step,train_loss,test_metric,trace,trace_stderr
std::string finetune_csv(const std::vector<FinetunePoint>& points);

struct SweepGrid {
  std::vector<double> lr;
  std::vector<double> lambda_wd;
  std::vector<NumericMode> precision;
  std::vector<std::uint64_t> seed;

  std::size_t cells() const;
};

/// "lr=0.1,0.2;lambda_wd=0,0.1;precision=full,bf16;seed=0,1". Axes left out
/// keep the base config's value.
SweepGrid parse_sweep_grid(const std::string& spec, const RunConfig& base);

struct SweepRow {
  std::size_t cell = 0;
  double lr = 0.0;
  double lambda_wd = 0.0;
  std::string precision;
  std::uint64_t seed = 0;
  std::string status;  // ok, diverged or error
  std::int64_t divergence_step = -1;
  double final_train_loss = 0.0;
  double final_test_metric = 0.0;
  double final_param_norm = 0.0;
  std::string error;
};

/// The config of one cell: lr replaces the base lr of the first phase.
RunConfig sweep_cell_config(const RunConfig& base, double lr, double lambda_wd, NumericMode precision,
                            std::uint64_t seed);

/// Runs every cell of the grid in row-major axis order. A cell that throws
/// is recorded with status "error" and the sweep goes on.
std::vector<SweepRow> sweep(const RunConfig& base, const SweepGrid& grid, int threads = 1);

/// cell,lr,lambda_wd,precision,seed,status,divergence_step,final_train_loss,final_test_metric,final_param_norm,error
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct BootstrapInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Percentile bootstrap of the mean of `values`.
BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, double confidence,
                                 std::uint64_t seed);

}  // namespace wdlab
