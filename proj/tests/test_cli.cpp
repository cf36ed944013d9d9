#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mixinterp/records.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MIXINTERP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "mixinterp_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTiny = R"(seeds = 0
models = baseline
data.image_size = 16
data.num_classes = 4
data.min_object = 6
data.max_object = 11
data.train_size = 120
data.val_size = 40
data.eval_pool_size = 80
arch.stage_widths = 8
arch.stage_strides = 1
train.epochs = 2
eval.samples = 4
eval.min_score = 0
eval.min_box_fraction = 0
eval.max_box_fraction = 1
iba.calibration_images = 10
faith.n_orders = 2
dissect.corpus_size = 10
)";

}  // namespace

TEST_CASE("exit codes") {
  const fs::path dir = scratch();
  CHECK(run("") == 2);
  CHECK(run("--list-keys") == 0);
  CHECK(run("train --config /nonexistent.cfg") == 2);
  write(dir / "bad.cfg", "no.such.key = 3\n");
  CHECK(run("train --config " + (dir / "bad.cfg").string()) == 2);
  CHECK(run("eval-faith --method nonsense") == 2);
  CHECK(run("report --run no-such-run --out " + dir.string()) == 3);
  write(dir / "tiny.cfg", kTiny);
  CHECK(run("eval-align --config " + (dir / "tiny.cfg").string() + " --out " + dir.string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("tiny pipeline through the command line") {
  const fs::path dir = scratch();
  const std::string cfg = (dir / "tiny.cfg").string();
  write(dir / "tiny.cfg", kTiny);
  const std::string common = " --config " + cfg + " --out " + dir.string();
  REQUIRE(run("train" + common) == 0);
  CHECK(run("train" + common) == 0);  // cached checkpoints are reused
  CHECK(run("attribute" + common) == 0);
  CHECK(run("eval-align" + common) == 0);
  CHECK(run("eval-faith --method gradcam" + common) == 0);
  CHECK(run("dissect" + common) == 0);

  REQUIRE(fs::exists(dir / "runs"));
  const fs::path run_dir = fs::directory_iterator(dir / "runs")->path();
  const auto records = mixinterp::read_records(run_dir / "records.jsonl");
  bool align = false, faith = false, detectors = false;
  for (const auto& r : records) {
    align |= r.metric == "energy_pg";
    faith |= r.metric.find("deletion") != std::string::npos;
    detectors |= r.metric.find("unique") != std::string::npos;
  }
  CHECK(align);
  CHECK(faith);
  CHECK(detectors);

  CHECK(run("report --run " + run_dir.filename().string() + " --out " + dir.string()) == 0);
  CHECK(fs::exists(run_dir / "report"));
  CHECK(run("train --seed 3 --models cutout,baseline --overwrite" + common) == 0);
  fs::remove_all(dir);
}
