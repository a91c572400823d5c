// Command-line front end: run, sweep, finetune, sa-lab, bf16-check, plot.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wdlab/config.hpp"
#include "wdlab/conformance.hpp"
#include "wdlab/errors.hpp"
#include "wdlab/harness.hpp"
#include "wdlab/plot.hpp"
#include "wdlab/sa_lab.hpp"

namespace fs = std::filesystem;
using namespace wdlab;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;

std::string default_out(const std::string& config_path, const std::string& suffix) {
  return (fs::path("runs") / (fs::path(config_path).stem().string() + suffix)).string();
}

int cmd_run(const std::string& config_path, std::string out) {
  const RunConfig config = load_run_config(config_path);
  if (out.empty()) out = default_out(config_path, "");
  const RunRecord record = run(config);
  write_run_dir(record, out);
  const ProbeRecord& last = record.records.back();
  std::cout << "steps " << record.steps_completed << "/" << config.total_steps() << ", " << record.records.size()
            << " probe records, final train loss " << last.train_loss << ", test metric " << last.test_metric
            << "\nwrote " << out << "\n";
  if (record.diverged) {
    std::cout << "diverged at step " << record.divergence_step << "\n";
    return kDiverged;
  }
  return kOk;
}

int cmd_finetune(const std::string& dir, std::int64_t steps, double lr, int probes, int threads) {
  const LoadedRun loaded = load_run_dir(dir);
  if (steps < 0 || lr <= 0) {
    if (!loaded.config.finetune) throw ConfigError("finetune: config has no finetune block; pass --steps and --lr");
    if (steps < 0) steps = loaded.config.finetune->steps;
    if (lr <= 0) lr = loaded.config.finetune->lr;
  }
  if (probes <= 0) probes = std::max(loaded.config.probe.trace_probes, 20);
  const auto points = finetune_along_trajectory(loaded.config, loaded.snapshots, steps, lr, probes, threads);
  const std::string csv = finetune_csv(points);
  write_text_file((fs::path(dir) / "finetune.csv").string(), csv);
  std::cout << csv;
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_spec, std::string out, int threads) {
  const RunConfig base = load_run_config(config_path);
  const SweepGrid grid = parse_sweep_grid(grid_spec, base);
  if (out.empty()) out = default_out(config_path, "_sweep.csv");
  const auto rows = sweep(base, grid, threads);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  const std::string csv = sweep_csv(rows);
  write_text_file(out, csv);
  std::cout << csv << "wrote " << out << "\n";
  return kOk;
}

int cmd_sa_lab(const std::string& config_path, std::string out) {
  const SaLabConfig c = parse_sa_lab_config(read_text_file(config_path));
  if (out.empty()) out = default_out(config_path, "_risk.csv");
  const RiskCurve exact = exact_risk(c.problem, c.schedule, c.steps);
  const EmpiricalRisk empirical = simulate_sgd(c.problem, c.schedule, c.steps, c.replicas, c.seed);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ostringstream csv;
  write_risk_csv(csv, exact, &empirical);
  write_text_file(out, csv.str());
  std::cout << "terminal exact risk " << exact.expected_error.back() << " (bias " << exact.bias_part.back()
            << ", variance " << exact.variance_part.back() << "), simulated " << empirical.mean.back() << " +- "
            << empirical.std_error.back() << "\nwrote " << out << "\n";
  if (c.demo_lambda) {
    std::cout << effective_lr_equivalence_demo(c.problem, c.schedule, *c.demo_lambda, c.steps).summary();
  }
  return kOk;
}

int cmd_bf16_check() {
  bool all = true;
  for (const auto& row : precision_conformance()) {
    std::cout << (row.pass ? "PASS  " : "FAIL  ") << row.check << ": expected " << row.expected << ", got "
              << row.actual << "\n";
    all = all && row.pass;
  }
  return all ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-decay laboratory: training runs, probes, sweeps and closed-form SGD risk"};
  app.require_subcommand(1);

  std::string config_path, out, grid_spec, run_dir, kind_name;
  std::vector<std::string> inputs;
  int threads = 1;
  std::int64_t ft_steps = -1;
  double ft_lr = -1;
  int ft_probes = 0;

  auto* run_cmd = app.add_subcommand("run", "Train from a JSON config and write a run directory");
  run_cmd->add_option("config", config_path, "Run config (JSON)")->required();
  run_cmd->add_option("--out", out, "Run directory (default runs/<config name>)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of configs and write a CSV table");
  sweep_cmd->add_option("config", config_path, "Base run config (JSON)")->required();
  sweep_cmd->add_option("--grid", grid_spec, "e.g. lr=0.1,0.2;lambda_wd=0,0.1;precision=full,bf16;seed=0,1")
      ->required();
  sweep_cmd->add_option("--out", out, "CSV path (default runs/<config name>_sweep.csv)");
  sweep_cmd->add_option("--threads", threads, "Concurrent cells")->check(CLI::PositiveNumber);

  auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune every snapshot of a run and measure the trace");
  ft_cmd->add_option("run-dir", run_dir, "Directory written by `run`")->required();
  ft_cmd->add_option("--steps", ft_steps, "Fine-tune steps (default: config finetune.steps)");
  ft_cmd->add_option("--lr", ft_lr, "Fine-tune lr (default: config finetune.lr)");
  ft_cmd->add_option("--probes", ft_probes, "Hutchinson probes per snapshot");
  ft_cmd->add_option("--threads", threads, "Concurrent snapshots")->check(CLI::PositiveNumber);

  auto* sa_cmd = app.add_subcommand("sa-lab", "Exact and simulated SGD risk on a diagonal quadratic");
  sa_cmd->add_option("config", config_path, "SA-lab config (JSON)")->required();
  sa_cmd->add_option("--out", out, "Risk CSV path (default runs/<config name>_risk.csv)");

  auto* bf16_cmd = app.add_subcommand("bf16-check", "Print the emulated-precision conformance table");

  auto* plot_cmd = app.add_subcommand("plot", "Render an SVG chart");
  plot_cmd->add_option("input", inputs, "probes.jsonl / run directory / CSV inputs")->required();
  plot_cmd->add_option("--kind", kind_name, "loss_curve, norm_curve, elr_curve, trace_trend, risk_curve, ushape")
      ->required();
  plot_cmd->add_option("--out", out, "Output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, out);
    if (*sweep_cmd) return cmd_sweep(config_path, grid_spec, out, threads);
    if (*ft_cmd) return cmd_finetune(run_dir, ft_steps, ft_lr, ft_probes, threads);
    if (*sa_cmd) return cmd_sa_lab(config_path, out);
    if (*bf16_cmd) return cmd_bf16_check();
    if (*plot_cmd) {
      write_plot(parse_plot_kind(kind_name), inputs, out);
      std::cout << "wrote " << out << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
