#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "qlab/serialize.hpp"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary, capturing stdout/stderr and the exit code.
CliResult run_cli(const std::string& args) {
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string err_path = (dir / "stderr.txt").string();
  const std::string cmd = std::string(QLAB_CLI_PATH) + " " + args + " 2>" + err_path;

  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) result.out.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

  std::ifstream err(err_path);
  result.err.assign(std::istreambuf_iterator<char>(err), std::istreambuf_iterator<char>());
  return result;
}

std::string temp_out(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("qlab-test-cli-" + tag);
  std::filesystem::remove_all(dir);
  return dir.string();
}

long count_csv_rows(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  long rows = -1;  // discount the header
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return rows;
}

}  // namespace

TEST_CASE("baird subcommand honors flags and exits cleanly") {
  const std::string out = temp_out("baird");
  const CliResult r = run_cli("baird --runs 1 --horizon 10 --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(count_csv_rows(out + "/baird/stats.csv") == 11);
  std::filesystem::remove_all(out);
}

TEST_CASE("baird rejects epsilon outside (0,1] with a usage error") {
  const CliResult r = run_cli("baird --epsilon 0 --runs 1 --horizon 5 --out /tmp/unused");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("epsilon must be in (0,1]") != std::string::npos);
}

TEST_CASE("baird exits 1 when the boundedness check fails") {
  const std::string out = temp_out("baird-diverge");
  const CliResult r = run_cli("baird --alpha 1e9 --runs 2 --horizon 60 --out " + out);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("FAIL") != std::string::npos);
  std::filesystem::remove_all(out);
}

TEST_CASE("unknown flags and subcommands are usage errors") {
  CHECK(run_cli("baird --no-such-flag 1").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("baird --help").exit_code == 0);
}

TEST_CASE("run subcommand reports a missing config by path") {
  const CliResult r = run_cli("run --config /nonexistent/config.json --out /tmp/unused");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/nonexistent/config.json") != std::string::npos);
}

TEST_CASE("run subcommand executes a config file end to end") {
  const std::string out = temp_out("run");
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string config_path = (dir / "config.json").string();
  {
    std::ofstream config(config_path);
    config << R"({
      "name": "tiny",
      "mdp_source": {"kind": "baird"},
      "learner": {"kind": "linear", "behavior": {"epsilon": 0.1, "kappa0": 100.0}},
      "schedule": {"mode": "constant", "alpha": 0.1},
      "horizon": 25, "n_runs": 2, "base_seed": 0,
      "metric": "w_norm_sq", "w0": {"kind": "ones"}
    })";
  }
  const CliResult r = run_cli("run --config " + config_path + " --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(count_csv_rows(out + "/tiny/stats.csv") == 26);
  CHECK(std::filesystem::exists(out + "/tiny/meta.json"));

  // Flag overrides take precedence over file values.
  const CliResult r2 = run_cli("run --config " + config_path + " --horizon 5 --out " + out);
  CHECK(r2.exit_code == 0);
  CHECK(count_csv_rows(out + "/tiny/stats.csv") == 6);
  std::filesystem::remove_all(out);
}

TEST_CASE("run subcommand rejects a config with epsilon zero") {
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string config_path = (dir / "bad.json").string();
  {
    std::ofstream config(config_path);
    config << R"({"learner": {"kind": "linear", "behavior": {"epsilon": 0.0}}})";
  }
  const CliResult r = run_cli("run --config " + config_path + " --out /tmp/unused");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("epsilon must be in (0,1]") != std::string::npos);
}

TEST_CASE("verify emits machine-readable json and honors the exit contract") {
  const CliResult r = run_cli("verify --suite moreau --seeds 100");
  CHECK(r.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(r.out);
  REQUIRE(doc.is_array());
  REQUIRE(doc.size() > 0);
  for (const auto& entry : doc) {
    CHECK(entry.contains("lemma"));
    CHECK(entry.contains("instances"));
    CHECK(entry.contains("violations"));
    CHECK(entry.contains("max_slack"));
    CHECK(entry["violations"] == 0);
  }
}

TEST_CASE("verify rejects unknown suites") {
  CHECK(run_cli("verify --suite nonsense").exit_code == 2);
}

TEST_CASE("verify accepts a fixed mdp file") {
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string mdp_path = (dir / "fixed.json").string();
  const CliResult exported = run_cli("export-mdp --preset random --seed 3 --n-states 3 --out " + mdp_path);
  REQUIRE(exported.exit_code == 0);
  const CliResult r = run_cli("verify --suite mixing --seeds 3 --mdp " + mdp_path);
  CHECK(r.exit_code == 0);
}

TEST_CASE("verify exits 1 when a suite records violations") {
  // A deterministic two-cycle chain has a unique stationary distribution but
  // never mixes, so the geometric fit fails and is reported as a violation.
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string mdp_path = (dir / "cycle.json").string();
  {
    std::ofstream mdp(mdp_path);
    mdp << R"({
      "n_states": 2, "n_actions": 1, "gamma": 0.5,
      "transition": [[[0.0, 1.0]], [[1.0, 0.0]]],
      "reward": [[0.0], [0.0]],
      "initial_dist": [0.5, 0.5]
    })";
  }
  const CliResult r = run_cli("verify --suite mixing --seeds 1 --mdp " + mdp_path);
  CHECK(r.exit_code == 1);
  const nlohmann::json doc = nlohmann::json::parse(r.out);
  bool saw_violation = false;
  for (const auto& entry : doc)
    if (entry["violations"].get<long>() > 0) saw_violation = true;
  CHECK(saw_violation);
}

TEST_CASE("compare writes one directory per selected variant") {
  const std::string out = temp_out("compare");
  const CliResult r =
      run_cli("compare --runs 2 --horizon 40 --variant none,projection --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(out + "/compare-none/stats.csv"));
  CHECK(std::filesystem::exists(out + "/compare-projection/stats.csv"));
  CHECK_FALSE(std::filesystem::exists(out + "/compare-target_network"));

  const std::string out_all = temp_out("compare-all");
  const CliResult all = run_cli("compare --runs 2 --horizon 40 --out " + out_all);
  CHECK(all.exit_code == 0);
  std::ifstream meta(out_all + "/compare-target_network/meta.json");
  REQUIRE(meta.good());
  nlohmann::json doc;
  meta >> doc;
  CHECK(doc["config"]["learner"]["variant"]["sync_period"] == 10);
  CHECK(doc["config"]["learner"]["behavior"]["kappa0"] == 10.0);
  std::filesystem::remove_all(out);
  std::filesystem::remove_all(out_all);
}

TEST_CASE("export-mdp writes the documented schema") {
  const auto dir = std::filesystem::temp_directory_path() / "qlab-test-cli";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "baird-export.json").string();
  const CliResult r = run_cli("export-mdp --preset baird --out " + path);
  REQUIRE(r.exit_code == 0);
  const qlab::LoadedMdp loaded = qlab::load_mdp(path);
  CHECK(loaded.mdp.n_states == 7);
  CHECK(loaded.mdp.gamma == 0.99);
  REQUIRE(loaded.features.has_value());
  CHECK(loaded.features->dim == 16);
  CHECK(run_cli("export-mdp --preset nonsense --out " + path).exit_code == 2);
}
