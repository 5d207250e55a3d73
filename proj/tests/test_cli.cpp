#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path work = fs::temp_directory_path() / "sysid_cli_test";

int run(const std::string& args, bool quiet = true) {
  std::string cmd = std::string(SYSID_CLI_PATH) + " " + args;
  if (quiet) cmd += " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Tiny everything: the suite exercises plumbing, not learning.
const std::string tiny_gen = "--groups 2 --group-size 2 --train-len 60 --test-len 80";
const std::string tiny_net =
    "--lstm-sizes 4,8 --bptt-window 20 --max-epochs 2 --stop-tol 0";

struct Fixture {
  Fixture() {
    fs::remove_all(work);
    fs::create_directories(work);
  }
};

Fixture fixture;

std::string at(const char* rel) { return (work / rel).string(); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("gen --out " + at("x")) == 2);  // missing --system
  CHECK(run("gen --system bogus --out " + at("x")) == 2);
  CHECK(run("train --data " + at("nope")) == 2);  // missing --out
  CHECK(run("predict --data " + at("nope") + " --out " + at("o.csv")) == 2);  // no model
}

TEST_CASE("bad system names list the accepted ones") {
  const std::string cmd = std::string(SYSID_CLI_PATH) + " gen --system bogus --out " + at("x") +
                          " 2>" + at("err.txt") + " >/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  const std::string err = slurp(work / "err.txt");
  CHECK(err.find("lti3") != std::string::npos);
  CHECK(err.find("wh") != std::string::npos);
  CHECK(err.find("cheby2") != std::string::npos);
}

TEST_CASE("SYSID_THREADS rejects garbage") {
  const std::string base = std::string(SYSID_CLI_PATH) + " gen --system lti2 " + tiny_gen +
                           " --out " + at("thr") + " >/dev/null 2>&1";
  int status = std::system(("SYSID_THREADS=abc " + base).c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
  status = std::system(("SYSID_THREADS=0 " + base).c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
  status = std::system(("SYSID_THREADS=1 " + base).c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("gen is deterministic and rerunnable") {
  REQUIRE(run("gen --system lti2 " + tiny_gen + " --out " + at("d1")) == 0);
  REQUIRE(run("gen --system lti2 " + tiny_gen + " --out " + at("d2")) == 0);
  CHECK(slurp(work / "d1" / "test.sidd") == slurp(work / "d2" / "test.sidd"));
  CHECK(slurp(work / "d1" / "train_g0.sidd") == slurp(work / "d2" / "train_g0.sidd"));
  CHECK(slurp(work / "d1" / "train_g1.sidd") == slurp(work / "d2" / "train_g1.sidd"));
  CHECK(fs::exists(work / "d1" / "config.json"));

  // Different seed, different bytes.
  REQUIRE(run("gen --system lti2 " + tiny_gen + " --seed 9 --out " + at("d3")) == 0);
  CHECK(slurp(work / "d1" / "test.sidd") != slurp(work / "d3" / "test.sidd"));
}

TEST_CASE("train produces identical artifacts on identical invocations") {
  REQUIRE(run("gen --system lti3 " + tiny_gen + " --out " + at("src")) == 0);
  REQUIRE(run("train --data " + at("d1") + " " + tiny_net + " --seed 3 --out " + at("r1")) == 0);
  REQUIRE(run("train --data " + at("d1") + " " + tiny_net + " --seed 3 --out " + at("r2")) == 0);
  for (const char* f : {"curve.csv", "metrics.json", "model.sidm", "config.json"})
    CHECK(slurp(work / "r1" / f) == slurp(work / "r2" / f));

  const std::string curve = slurp(work / "r1" / "curve.csv");
  CHECK(curve.rfind("epoch,train_mse,test_mse\n", 0) == 0);

  // Two epochs requested with stopping disabled, two epochs recorded.
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);
}

TEST_CASE("missing inputs are runtime errors, not usage errors") {
  CHECK(run("train --data " + at("nowhere") + " " + tiny_net + " --out " + at("r3")) == 1);
  CHECK(run("predict --model " + at("nowhere.sidm") + " --data " + at("d1") + " --out " +
            at("o.csv")) == 1);
  CHECK(run("report --baseline " + at("nowhere.json") + " --transferred " + at("nowhere.json")) ==
        1);
}

TEST_CASE("transfer writes both curves and report compares them") {
  REQUIRE(run("transfer --source-data " + at("src") + " --target-data " + at("d1") +
              " --strategy finetune --source-epochs 1 " + tiny_net +
              " --with-baseline --out " + at("tr")) == 0);
  for (const char* f : {"source_curve.csv", "target_curve.csv", "baseline_curve.csv",
                        "metrics.json", "baseline_metrics.json", "model.sidm", "pretrained.sidm",
                        "report.json"})
    CHECK(fs::exists(work / "tr" / f));

  const json report = json::parse(slurp(work / "tr" / "report.json"));
  CHECK(report.at("source").get<std::string>() == "lti3_source");
  CHECK(report.at("target").get<std::string>() == "lti2_target");
  CHECK(report.at("source_epochs_run").get<std::size_t>() == 1);
  CHECK(report.contains("comparison"));

  CHECK(run("report --baseline " + at("tr/baseline_metrics.json") + " --transferred " +
            at("tr/metrics.json") + " --out " + at("tr/cmp.json")) == 0);
  CHECK(fs::exists(work / "tr" / "cmp.json"));
}

TEST_CASE("report rejects metrics scored against different thresholds") {
  json doctored = json::parse(slurp(work / "tr" / "metrics.json"));
  doctored["constant_threshold"] = 0.5;
  spit(work / "doctored.json", doctored.dump());
  CHECK(run("report --baseline " + at("tr/baseline_metrics.json") + " --transferred " +
            at("doctored.json")) == 1);
}

TEST_CASE("freeze strategy options are validated") {
  CHECK(run("transfer --source-data " + at("src") + " --target-data " + at("d1") +
            " --strategy finetune --frozen LSTM1 " + tiny_net + " --out " + at("trf")) == 2);
  CHECK(run("transfer --source-data " + at("src") + " --target-data " + at("d1") +
            " --strategy freeze --frozen LSTM1 --reinit LSTM1 " + tiny_net + " --out " +
            at("trf")) == 1);
}

TEST_CASE("predict self-test echoes the labels") {
  REQUIRE(run("predict --data " + at("d1") + " --self-test --seq-index 1 --out " +
              at("ov.csv")) == 0);
  std::ifstream in(work / "ov.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,y_true,y_pred");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    CHECK(line.substr(c1 + 1, c2 - c1 - 1) == line.substr(c2 + 1));
    ++rows;
  }
  CHECK(rows == 80);

  CHECK(run("predict --data " + at("d1") + " --self-test --seq-index 99 --out " + at("ov2.csv")) ==
        1);
  CHECK(run("predict --data " + at("d1") + " --self-test --split train:7 --out " +
            at("ov3.csv")) == 1);
}

TEST_CASE("trained model predicts through the CLI") {
  REQUIRE(run("predict --model " + at("r1/model.sidm") + " --data " + at("d1") + " --out " +
              at("pred.csv")) == 0);
  const std::string csv = slurp(work / "pred.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 81);
}
