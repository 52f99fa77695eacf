#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "dimscale/model.hpp"
#include "dimscale/serialize.hpp"
#include "test_support.hpp"

using namespace dimscale;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path log = workdir / "run.log";
  const std::string command = "cd '" + workdir.string() + "' && '" DIMSCALE_CLI_PATH "' " + args +
                              " > '" + log.string() + "' 2>&1";
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.output = test::read_text(log);
  return result;
}

json load_json_file(const fs::path& p) { return json::parse(test::read_text(p)); }

}  // namespace

TEST_CASE("simulate writes the documented shape and is reproducible") {
  test::TempDir dir("cli_sim");
  auto run = run_cli("simulate --n 100 --items 6 --classes 2 --dims 2 --seed 7 --out-dir s1", dir.path);
  REQUIRE(run.exit_code == 0);

  const auto csv = test::read_text(dir.path / "s1" / "data.csv");
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 101);  // header + 100 rows
  CHECK(csv.rfind("item01,", 0) == 0);

  run = run_cli("simulate --n 100 --items 6 --classes 2 --dims 2 --seed 7 --out-dir s2", dir.path);
  REQUIRE(run.exit_code == 0);
  CHECK(test::read_text(dir.path / "s2" / "data.csv") == csv);
  CHECK(test::read_text(dir.path / "s2" / "truth.json") ==
        test::read_text(dir.path / "s1" / "truth.json"));

  const auto manifest = load_json_file(dir.path / "s1" / "manifest.json");
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["outputs"].size() == 2);
}

TEST_CASE("simulate rejects a non-simplex weight spec") {
  test::TempDir dir("cli_badspec");
  auto spec = SimulationSpec::default_spec(10, 4, 2, 2, 1);
  auto j = simulation_spec_to_json(spec);
  j["parameters"]["class_weights"] = {0.6, 0.6};
  test::write_text(dir.path / "spec.json", j.dump());
  const auto run = run_cli("simulate --spec spec.json --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
  CHECK(run.output.find("error") != std::string::npos);
}

TEST_CASE("fit with k=1 writes item means and a manifest") {
  test::TempDir dir("cli_fit");
  REQUIRE(run_cli("simulate --n 150 --items 4 --classes 2 --dims 2 --seed 3 --out-dir sim",
                  dir.path).exit_code == 0);
  const auto run = run_cli("fit sim/data.csv --classes 1 --out-dir fit", dir.path);
  REQUIRE(run.exit_code == 0);

  const auto fit_json = load_json_file(dir.path / "fit" / "fit.json");
  const auto loaded = fit_result_from_json(fit_json);
  // recompute means from the CSV
  const auto csv = test::read_text(dir.path / "sim" / "data.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> sums(4, 0.0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    for (int j = 0; j < 4; ++j) sums[j] += line[2 * j] == '1';
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const double lambda =
        success_probability(loaded.fit.parameters, loaded.fit.partition, j, 0);
    CHECK(lambda == doctest::Approx(sums[j] / static_cast<double>(rows)).epsilon(1e-8));
  }
  CHECK(fs::exists(dir.path / "fit" / "manifest.json"));
  CHECK(fs::exists(dir.path / "fit" / "preprocess.json"));
}

TEST_CASE("fit usage errors exit with code 1") {
  test::TempDir dir("cli_fiterr");
  REQUIRE(run_cli("simulate --n 30 --items 3 --classes 1 --dims 1 --seed 5 --out-dir sim",
                  dir.path).exit_code == 0);
  // missing --classes
  auto run = run_cli("fit sim/data.csv --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
  // bad partition file names the line
  test::write_text(dir.path / "bad.part", "item01,item02\nitem03,itemXX\n");
  run = run_cli("fit sim/data.csv --classes 1 --partition bad.part --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
  CHECK(run.output.find("line 2") != std::string::npos);
  // unsupported --dims value
  run = run_cli("fit sim/data.csv --classes 1 --dims 2 --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
  // missing input file
  run = run_cli("fit nothere.csv --classes 1 --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
}

TEST_CASE("fit reports a degraded result with exit code 2") {
  test::TempDir dir("cli_fit2");
  REQUIRE(run_cli("simulate --n 200 --items 5 --classes 3 --dims 2 --seed 11 --out-dir sim",
                  dir.path).exit_code == 0);
  const auto run = run_cli(
      "fit sim/data.csv --classes 2 --max-iter 3 --starts 2 --out-dir fit", dir.path);
  CHECK(run.exit_code == 2);
  const auto fit_json = load_json_file(dir.path / "fit" / "fit.json");
  CHECK(fit_json["converged"] == false);
}

TEST_CASE("fit accepts a partition file") {
  test::TempDir dir("cli_fitpart");
  REQUIRE(run_cli("simulate --n 80 --items 4 --classes 2 --dims 2 --seed 2 --out-dir sim",
                  dir.path).exit_code == 0);
  test::write_text(dir.path / "groups.part", "item01, item02\nitem03, item04\n");
  const auto run = run_cli(
      "fit sim/data.csv --classes 2 --partition groups.part --starts 2 --out-dir fit", dir.path);
  REQUIRE(run.exit_code == 0);
  const auto fit_json = load_json_file(dir.path / "fit" / "fit.json");
  CHECK(fit_json["n_dimensions"] == 2);
  CHECK(fit_json["partition"].size() == 2);
}

TEST_CASE("cluster writes every artifact and is byte-deterministic") {
  test::TempDir dir("cli_cluster");
  REQUIRE(run_cli("simulate --n 120 --items 5 --classes 2 --dims 2 --seed 19 --out-dir sim",
                  dir.path).exit_code == 0);
  const std::string flags = " --classes 2 --seed 4 --starts 2 --max-iter 800";
  auto run = run_cli("cluster sim/data.csv" + flags + " --out-dir c1", dir.path);
  REQUIRE(run.exit_code == 0);
  for (const char* name : {"path.json", "table.txt", "dendrogram.json", "dendrogram.dot",
                           "selected-partition.txt", "preprocess.json", "manifest.json"}) {
    CHECK(fs::exists(dir.path / "c1" / name));
  }
  run = run_cli("cluster sim/data.csv" + flags + " --out-dir c2", dir.path);
  REQUIRE(run.exit_code == 0);
  for (const char* name : {"path.json", "table.txt", "dendrogram.dot"}) {
    CHECK(test::read_text(dir.path / "c1" / name) == test::read_text(dir.path / "c2" / name));
  }

  // table.txt has J-1 data rows and its BIC column re-parses to path.json
  const auto path_json = load_json_file(dir.path / "c1" / "path.json");
  std::istringstream table(test::read_text(dir.path / "c1" / "table.txt"));
  std::string line;
  std::size_t data_rows = 0;
  while (std::getline(table, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) continue;
    std::istringstream fields(line);
    std::size_t step, s;
    std::string bic_text;
    fields >> step >> bic_text >> s;
    const double from_path = path_json["steps"][step - 1]["bic"].get<double>();
    CHECK(std::stod(bic_text) == from_path);
    ++data_rows;
  }
  CHECK(data_rows == 4);
}

TEST_CASE("cluster on 31 items writes a 30-row table") {
  test::TempDir dir("cli_c31");
  REQUIRE(run_cli("simulate --n 120 --items 31 --classes 1 --dims 31 --seed 6 --out-dir sim",
                  dir.path).exit_code == 0);
  const auto run = run_cli("cluster sim/data.csv --classes 1 --out-dir out", dir.path);
  REQUIRE(run.exit_code == 0);
  std::istringstream table(test::read_text(dir.path / "out" / "table.txt"));
  std::string line;
  std::size_t data_rows = 0;
  std::size_t last_s = 31;
  while (std::getline(table, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) continue;
    ++data_rows;
    std::istringstream fields(line);
    std::size_t step, s;
    std::string bic_text;
    fields >> step >> bic_text >> s;
    CHECK(s == last_s - 1);  // s runs 30 down to 1
    last_s = s;
  }
  CHECK(data_rows == 30);
}

TEST_CASE("cluster rejects single-item input") {
  test::TempDir dir("cli_cluster1");
  test::write_text(dir.path / "one.csv", "only\n1\n0\n1\n");
  const auto run = run_cli("cluster one.csv --classes 1 --out-dir out", dir.path);
  CHECK(run.exit_code == 1);
}

TEST_CASE("summarize produces a descending frequency table") {
  test::TempDir dir("cli_sum");
  REQUIRE(run_cli("simulate --n 100 --items 6 --classes 1 --dims 3 --seed 23 --out-dir sim",
                  dir.path).exit_code == 0);
  test::write_text(dir.path / "groups.part",
                   "item01,item02\nitem03,item04\nitem05,item06\n");
  REQUIRE(run_cli("fit sim/data.csv --classes 1 --partition groups.part --out-dir fit",
                  dir.path).exit_code == 0);
  const auto run = run_cli("summarize --fit fit/fit.json --out-dir sum", dir.path);
  REQUIRE(run.exit_code == 0);

  // k=1: frequencies are plain per-group means of the item means
  const auto summary = load_json_file(dir.path / "sum" / "summary.json");
  REQUIRE(summary.size() == 3);
  double previous = 1.0;
  for (const auto& row : summary) {
    const double f = row["frequency"].get<double>();
    CHECK(f <= previous);
    previous = f;
  }
  const auto text = test::read_text(dir.path / "sum" / "summary.txt");
  CHECK(text.rfind("dimension\titems\tfrequency\n", 0) == 0);

  // partition override with the wrong group count is a mismatch
  test::write_text(dir.path / "bad.part", "item01,item02,item03\nitem04,item05,item06\n");
  const auto mismatch =
      run_cli("summarize --fit fit/fit.json --partition bad.part --out-dir sum2", dir.path);
  CHECK(mismatch.exit_code == 1);
  CHECK(mismatch.output.find("mismatch") != std::string::npos);
}

TEST_CASE("preprocessing flags flow through the pipeline") {
  test::TempDir dir("cli_pre");
  test::write_text(dir.path / "raw.csv",
                   "radio,tv,net1,net2\n"
                   "\"yes, everyday\",no,1,NA\n"
                   "no,no,0,1\n"
                   "NA,\"yes, some days\",1,1\n"
                   "no,no,NA,NA\n");
  test::write_text(dir.path / "agg.rules", "net = OR(net1, net2)\n");
  const auto run = run_cli(
      "fit raw.csv --classes 1 --aggregate-rules agg.rules --out-dir out", dir.path);
  REQUIRE(run.exit_code == 0);
  const auto fit_json = load_json_file(dir.path / "out" / "fit.json");
  CHECK(fit_json["item_ids"] == json({"radio", "tv", "net"}));
  const auto report = load_json_file(dir.path / "out" / "preprocess.json");
  CHECK(report["missing_per_item"]["radio"] == 1);
  CHECK(report["missing_per_item"]["net"] == 1);  // only the all-NA OR row
  // lambda for net: rows give 1, 1, 1, 0 -> mean 0.75
  const auto loaded = fit_result_from_json(fit_json);
  CHECK(success_probability(loaded.fit.parameters, loaded.fit.partition, 2, 0) ==
        doctest::Approx(0.75).epsilon(1e-8));
}

TEST_CASE("drop-degenerate removes constant items") {
  test::TempDir dir("cli_degen");
  test::write_text(dir.path / "raw.csv",
                   "a,always,b\n1,1,0\n0,1,1\n1,1,1\n0,1,0\n");
  const auto run = run_cli(
      "fit raw.csv --classes 1 --drop-degenerate --out-dir out", dir.path);
  REQUIRE(run.exit_code == 0);
  const auto fit_json = load_json_file(dir.path / "out" / "fit.json");
  CHECK(fit_json["item_ids"] == json({"a", "b"}));
  const auto report = load_json_file(dir.path / "out" / "preprocess.json");
  CHECK(report["dropped_items"] == json({"always"}));
  CHECK(report["degenerate_items"] == json({"always"}));
}
