#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wdlab/data.hpp"
#include "wdlab/models.hpp"
#include "wdlab/optim.hpp"
#include "wdlab/precision.hpp"
#include "wdlab/sa_lab.hpp"

namespace wdlab {

struct Phase {
  std::int64_t steps = 0;
  /// total_steps always equals `steps`.
  Schedule schedule;

  friend bool operator==(const Phase&, const Phase&) = default;
};

struct FinetuneSpec {
  std::int64_t steps = 0;
  double lr = 1e-3;

  friend bool operator==(const FinetuneSpec&, const FinetuneSpec&) = default;
};

/// Measurement settings for the probe records of a run.
struct ProbeOptions {
  int trace_probes = 0;            // 0 disables the Hessian trace
  Index subset_size = 512;         // fixed training subset for trace and noise scale
  bool noise_scale = true;
  Index stabilization_window = 10;
  double stabilization_band = 0.1;
  double divergence_factor = 10.0;
  Index divergence_persist = 3;
  double ema_beta = 0.999;

  friend bool operator==(const ProbeOptions&, const ProbeOptions&) = default;
};

/// Everything a training run depends on. `optimizer.lr_schedule` is unused:
/// each phase carries its own schedule.
struct RunConfig {
  TaskSpec task;
  MLPSpec model;
  OptimizerConfig optimizer;
  MixedPrecisionPolicy precision;
  std::vector<Phase> phases;
  std::int64_t probes_every = 1;
  std::int64_t snapshot_every = 0;  // 0 disables snapshots
  std::optional<FinetuneSpec> finetune;
  std::uint64_t seed = 0;
  Index batch_size = 1;
  ProbeOptions probe;

  std::int64_t total_steps() const;
  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Strict JSON: every field must be present and unknown keys are rejected.
/// Only `finetune` may be null. Schedules list the fields their kind uses.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
/// Pretty-printed, parses back to an equal config.
std::string dump_run_config(const RunConfig& config);

/// Spiral task, 2-32-32-2 ReLU MLP, SGD with weight decay: 1000 steps at
/// lr 0.5 followed by 200 at lr 0.05.
RunConfig default_spiral_config();

/// Six-layer residual MLP without normalization under a bf16 policy.
RunConfig stress_config();

struct SaLabConfig {
  QuadProblem problem;
  Schedule schedule;
  std::int64_t steps = 0;
  int replicas = 1000;
  std::uint64_t seed = 0;
  /// Weight decay for the equivalence demo; absent skips it.
  std::optional<double> demo_lambda;
};

/// {"problem": {"spectrum", "w_star", "noise_var", "w0"} or "default",
///  "schedule", "steps", "replicas", "seed", "demo_lambda" (number or null)}
SaLabConfig parse_sa_lab_config(const std::string& json_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace wdlab
