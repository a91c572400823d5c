#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "wdlab/config.hpp"

using namespace wdlab;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + WDLAB_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig small_run() {
  RunConfig c;
  c.task = TaskSpec{TaskKind::spiral, 64, 2, 2, 0.05, 3};
  c.model = MLPSpec{{2, 8, 2}};
  c.optimizer.kind = OptimizerKind::sgd_decoupled_wd;
  c.optimizer.lambda_wd = 1e-3;
  c.phases = {Phase{20, Schedule::constant(0.1, 20)}};
  c.probes_every = 5;
  c.snapshot_every = 10;
  c.batch_size = 4;
  c.probe.subset_size = 32;
  return c;
}

}  // namespace

TEST_CASE("command-line exit codes") {
  const fs::path dir = fs::temp_directory_path() / "wdlab_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();

  write_text_file(d + "/ok.json", dump_run_config(small_run()));
  CHECK(cli("run " + d + "/ok.json --out " + d + "/ok") == 0);
  CHECK(fs::exists(dir / "ok" / "probes.jsonl"));
  CHECK(cli("finetune " + d + "/ok --steps 2 --lr 0.01 --probes 2") == 0);
  CHECK(fs::exists(dir / "ok" / "finetune.csv"));
  CHECK(cli("plot " + d + "/ok --kind loss_curve --out " + d + "/loss.svg") == 0);
  CHECK(cli("plot " + d + "/ok/finetune.csv --kind trace_trend --out " + d + "/trace.svg") == 0);
  CHECK(cli("sweep " + d + "/ok.json --grid \"lr=0.05,0.1\" --out " + d + "/sweep.csv") == 0);
  CHECK(cli("plot " + d + "/sweep.csv --kind ushape --out " + d + "/u.svg") == 0);

  auto j = nlohmann::json::parse(dump_run_config(small_run()));
  j["surprise"] = true;
  write_text_file(d + "/unknown.json", j.dump());
  CHECK(cli("run " + d + "/unknown.json --out " + d + "/unknown") == 2);

  RunConfig wild = small_run();
  wild.optimizer.lambda_wd = 0;
  wild.phases = {Phase{200, Schedule::constant(500.0, 200)}};
  wild.probes_every = 1;
  write_text_file(d + "/wild.json", dump_run_config(wild));
  CHECK(cli("run " + d + "/wild.json --out " + d + "/wild") == 3);

  CHECK(cli("bf16-check") == 0);
  CHECK(cli("plot " + d + "/ok --kind pie --out " + d + "/pie.svg") == 2);
  CHECK_FALSE(fs::exists(dir / "pie.svg"));
  CHECK(cli("run") == 2);
  CHECK(cli("nonsense") == 2);
  CHECK(cli("sa-lab " + std::string(WDLAB_SOURCE_DIR) + "/configs/sa_lab.json --out " + d + "/risk.csv") == 0);
  fs::remove_all(dir);
}
