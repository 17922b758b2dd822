#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"

namespace {

std::string g_binary = "ablate";

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr merged
};

RunResult run_cli(const std::string& args) {
  const std::string command = g_binary + " " + args + " 2>&1";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer;
  while (std::fgets(buffer.data(), buffer.size(), pipe)) result.output += buffer.data();
  const int status = pclose(pipe);
  result.code = WEXITSTATUS(status);
  return result;
}

std::string manifest_path() { return std::string(ABLATE_CONFIG_DIR) + "/desk.json"; }

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// one scratch dir + trained tiny model shared across cases
struct CliFixture {
  test_helpers::TempDir dir{"cli"};
  std::string model;

  CliFixture() {
    model = dir.file("model.ablate");
    const auto result = run_cli("train --manifest " + manifest_path() +
                                " --synth --synth-per-class 20 --epochs 1 --out " + model);
    REQUIRE(result.code == 0);
  }
};

CliFixture& fixture() {
  static CliFixture f;
  return f;
}

}  // namespace

TEST_CASE("help exits 0 and documents every subcommand") {
  const auto result = run_cli("--help");
  CHECK(result.code == 0);
  for (const char* sub : {"train", "eval", "stats", "sweep", "compare", "plotdata"})
    CHECK(contains(result.output, sub));
  for (const char* sub : {"train", "eval", "stats", "sweep", "compare", "plotdata"})
    CHECK(run_cli(std::string(sub) + " --help").code == 0);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("--bogus-flag").code == 1);
  CHECK(run_cli("train --no-such-flag x").code == 1);
  const auto result = run_cli("frobnicate");
  CHECK(result.code == 1);
  CHECK(contains(result.output, "error[usage]"));
}

TEST_CASE("data errors exit 2 with the documented prefix") {
  auto& f = fixture();
  const auto bad_manifest = run_cli("train --manifest /nonexistent.json --synth --out " +
                                    f.dir.file("x.ablate"));
  CHECK(bad_manifest.code == 2);
  CHECK(contains(bad_manifest.output, "error[data]"));

  const auto bad_model = run_cli("eval --model /nonexistent.ablate --synth");
  CHECK(bad_model.code == 2);

  const auto bad_k = run_cli("eval --model " + f.model + " --synth --synth-per-class 20 --top-k 99");
  CHECK(bad_k.code == 2);

  const auto no_dataset = run_cli("eval --model " + f.model);
  CHECK(no_dataset.code == 2);
  CHECK(contains(no_dataset.output, "dataset required"));
}

TEST_CASE("zero-epoch train emits the freshly initialized model") {
  auto& f = fixture();
  const std::string out = f.dir.file("zero.ablate");
  const auto result = run_cli("train --manifest " + manifest_path() +
                              " --synth --synth-per-class 20 --epochs 0 --out " + out);
  CHECK(result.code == 0);
  CHECK(contains(result.output, "parameters=18346"));
  CHECK(std::filesystem::exists(out));
}

TEST_CASE("eval with k equal to the class count reports accuracy 1") {
  auto& f = fixture();
  const auto result = run_cli("eval --model " + f.model +
                              " --synth --synth-per-class 20 --top-k 10");
  CHECK(result.code == 0);
  CHECK(contains(result.output, "accuracy=1 "));
  CHECK(contains(result.output, "n_images=40"));
}

TEST_CASE("stats prints one row per parameter tensor") {
  auto& f = fixture();
  const auto table = run_cli("stats --model " + f.model);
  CHECK(table.code == 0);
  for (const char* row : {"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
                          "dense1.weight", "dense1.bias", "dense2.weight", "dense2.bias"})
    CHECK(contains(table.output, row));

  const auto csv = run_cli("stats --model " + f.model + " --format csv");
  CHECK(csv.code == 0);
  CHECK(contains(csv.output, "layer,size,mean,median,sigma,min,max,kurtosis,skew"));
  CHECK(contains(csv.output, "conv1.weight,72,"));
}

TEST_CASE("sweep writes csv and json, honors config file with flag overrides") {
  auto& f = fixture();
  const std::string config = f.dir.file("sweep.json");
  {
    std::ofstream out(config);
    out << R"({
      "model": ")" << f.model << R"(",
      "dataset": {"synth": {"classes": 10, "per_class": 20, "image_size": 16, "noise": 0.1}, "seed": 7},
      "treatment": "synapse_knockout",
      "layers": ["conv1"],
      "magnitudes": [0.0, 1.0],
      "trials": 2,
      "top_k": 5,
      "base_seed": 11
    })";
  }
  const std::string csv_path = f.dir.file("out.csv");
  const std::string json_path = f.dir.file("out.json");
  const auto result = run_cli("sweep --config " + config + " --trials 3 --out-csv " + csv_path +
                              " --out-json " + json_path);
  CHECK(result.code == 0);

  std::ifstream csv(csv_path);
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 1 + 2 * 3);  // --trials 3 overrode the config's 2

  // magnitude-1 synapse knockout on the balanced split floors at k/C
  const auto compare = run_cli("compare --result " + json_path +
                               " --cell-a conv1:0 --cell-b conv1:0");
  CHECK(compare.code == 0);
  CHECK(contains(compare.output, "p_value=1 "));

  const auto missing = run_cli("compare --result " + json_path +
                               " --cell-a conv1:0.123 --cell-b conv1:0");
  CHECK(missing.code == 2);

  const auto bad_cell = run_cli("compare --result " + json_path +
                                " --cell-a conv1 --cell-b conv1:0");
  CHECK(bad_cell.code == 2);
}

TEST_CASE("sweep outputs are byte-identical for identical configs") {
  auto& f = fixture();
  const std::string args = "sweep --model " + f.model +
                           " --synth --synth-per-class 20 --treatment gaussian"
                           " --layers conv1,conv2 --magnitudes 0,0.5 --trials 2 --seed 4";
  const std::string a = f.dir.file("a.csv"), b = f.dir.file("b.csv");
  CHECK(run_cli(args + " --workers 1 --out-csv " + a).code == 0);
  CHECK(run_cli(args + " --workers 4 --out-csv " + b).code == 0);

  const auto strip_wall = [](const std::string& path) {
    std::ifstream in(path);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  CHECK(strip_wall(a) == strip_wall(b));
}

TEST_CASE("ABLATE_WORKERS is the fallback below flags and config") {
  auto& f = fixture();
  const std::string csv_path = f.dir.file("env.csv");
  const auto result = run_cli("sweep --model " + f.model +
                              " --synth --synth-per-class 20 --treatment synapse_knockout"
                              " --layers conv1 --magnitudes 0 --trials 2 --seed 4 --out-csv " +
                              csv_path);
  CHECK(result.code == 0);
  const auto env_run =
      run_cli("sweep --model " + f.model +
              " --synth --synth-per-class 20 --treatment synapse_knockout"
              " --layers conv1 --magnitudes 0 --trials 2 --seed 4");
  CHECK(env_run.code == 0);

  // invalid env value is a data error
  const std::string command = "ABLATE_WORKERS=banana " + g_binary + " sweep --model " + f.model +
                              " --synth --synth-per-class 20 --treatment synapse_knockout"
                              " --layers conv1 --magnitudes 0 --trials 2 --seed 4 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer;
  std::string output;
  while (std::fgets(buffer.data(), buffer.size(), pipe)) output += buffer.data();
  CHECK(WEXITSTATUS(pclose(pipe)) == 2);
  CHECK(contains(output, "ABLATE_WORKERS"));
}

TEST_CASE("eval accuracy equals the sweep baseline on the same dataset") {
  auto& f = fixture();
  const auto eval = run_cli("eval --model " + f.model + " --synth --synth-per-class 20 --top-k 5");
  CHECK(eval.code == 0);
  const auto sweep = run_cli("sweep --model " + f.model +
                             " --synth --synth-per-class 20 --treatment synapse_knockout"
                             " --layers conv1 --magnitudes 0 --trials 1 --seed 9");
  CHECK(sweep.code == 0);

  const auto grab = [](const std::string& text, const std::string& key) {
    const auto pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    return text.substr(pos + key.size(), text.find_first_of(" \n", pos + key.size()) -
                                             (pos + key.size()));
  };
  CHECK(grab(eval.output, "accuracy=") == grab(sweep.output, "baseline="));
}

TEST_CASE("unwritable output paths are runtime errors") {
  auto& f = fixture();
  const auto result = run_cli("sweep --model " + f.model +
                              " --synth --synth-per-class 20 --treatment synapse_knockout"
                              " --layers conv1 --magnitudes 0 --trials 1 --seed 9"
                              " --out-csv /nonexistent-dir/out.csv");
  CHECK(result.code == 3);
  CHECK(contains(result.output, "error[runtime]"));
}

TEST_CASE("plotdata emits one series file per layer") {
  auto& f = fixture();
  const std::string json_path = f.dir.file("plot.json");
  CHECK(run_cli("sweep --model " + f.model +
                " --synth --synth-per-class 20 --treatment synapse_knockout"
                " --layers conv1,dense1 --magnitudes 0,0.5,1 --trials 2 --seed 4 --out-json " +
                json_path)
            .code == 0);
  const std::string plot_dir = f.dir.file("plots");
  const auto result = run_cli("plotdata --result " + json_path + " --out-dir " + plot_dir);
  CHECK(result.code == 0);
  CHECK(contains(result.output, "series=2"));
  CHECK(std::filesystem::exists(plot_dir + "/series_conv1.csv"));
  CHECK(std::filesystem::exists(plot_dir + "/series_dense1.csv"));

  std::ifstream series(plot_dir + "/series_conv1.csv");
  std::string header;
  std::getline(series, header);
  CHECK(header == "magnitude,mean,std");
  int rows = 0;
  std::string line;
  while (std::getline(series, line)) ++rows;
  CHECK(rows == 3);

  // empty result: no series, still exit 0
  const std::string empty_json = f.dir.file("empty.json");
  {
    std::ofstream out(empty_json);
    out << R"({"baseline": 0, "records": [], "cells": []})";
  }
  const auto empty = run_cli("plotdata --result " + empty_json + " --out-dir " + plot_dir);
  CHECK(empty.code == 0);
  CHECK(contains(empty.output, "series=0"));
}

TEST_CASE("identical train invocations produce identical containers") {
  auto& f = fixture();
  const std::string a = f.dir.file("ta.ablate"), b = f.dir.file("tb.ablate");
  const std::string args = "train --manifest " + manifest_path() +
                           " --synth --synth-per-class 20 --epochs 2 --seed 3 --out ";
  CHECK(run_cli(args + a).code == 0);
  CHECK(run_cli(args + b).code == 0);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().substr(0, 8) == "ABLATEv1");
}

int main(int argc, char** argv) {
  doctest::Context context;
  // last non-option argument is the CLI binary under test
  for (int i = argc - 1; i > 0; --i) {
    const std::string arg = argv[i];
    if (!arg.empty() && arg[0] != '-') {
      g_binary = arg;
      break;
    }
  }
  context.applyCommandLine(argc - 1, argv);
  return context.run();
}
