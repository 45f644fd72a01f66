#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "qlab/experiments.hpp"
#include "qlab/oracles.hpp"
#include "qlab/serialize.hpp"
#include "qlab/verify.hpp"

namespace {

using namespace qlab;

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void print_summary(const std::string& name, const EnsembleStats& stats) {
  const double final_mean = stats.rows() > 0 ? stats.mean.back() : 0.0;
  std::fprintf(stderr, "%s: rows=%ld final_mean=%.6g diverged=%zu\n", name.c_str(),
               stats.rows(), final_mean, stats.diverged.size());
}

/// Stationarity proxy used by the Baird preset: the late-window maximum of
/// the metric must not exceed twice the early-window maximum, no run may
/// diverge, and every value must be finite. Windows are [0, h/3] and
/// [2h/3, h].
bool bounded_check(const EnsembleStats& stats, std::string* why) {
  if (!stats.diverged.empty()) {
    *why = "diverged runs: " + std::to_string(stats.diverged.size());
    return false;
  }
  const long h = stats.rows() - 1;
  for (long t = 0; t <= h; ++t)
    if (!std::isfinite(stats.max[t]) || !std::isfinite(stats.mean[t])) {
      *why = "non-finite value at t=" + std::to_string(t);
      return false;
    }
  double early = 0.0, late = 0.0;
  for (long t = 0; t <= h / 3; ++t) early = std::max(early, stats.max[t]);
  for (long t = 2 * h / 3; t <= h; ++t) late = std::max(late, stats.max[t]);
  if (late > 2.0 * early) {
    *why = "late max " + std::to_string(late) + " exceeds 2x early max " + std::to_string(early);
    return false;
  }
  return true;
}

ExperimentConfig baird_config(double kappa0, double epsilon, double alpha, long horizon,
                              int runs, std::uint64_t seed, int jobs) {
  ExperimentConfig config;
  config.name = "baird";
  config.mdp_source.kind = MdpSource::Kind::baird;
  config.learner.kind = LearnerSpec::Kind::linear;
  config.learner.behavior = {epsilon, kappa0};
  config.schedule = LearningRateSchedule::constant(alpha);
  config.horizon = horizon;
  config.n_runs = runs;
  config.base_seed = seed;
  config.metric = MetricSpec::Kind::w_norm_sq;
  config.w0.kind = W0Spec::Kind::ones;
  config.jobs = jobs;
  return config;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<long> horizon, std::optional<int> runs,
            std::optional<std::uint64_t> seed, int jobs) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: bad config %s: %s\n", config_path.c_str(), e.what());
    return kExitUsage;
  }
  if (horizon) config.horizon = *horizon;
  if (runs) config.n_runs = *runs;
  if (seed) config.base_seed = *seed;
  if (jobs > 0) config.jobs = jobs;
  try {
    config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: bad config: %s\n", e.what());
    return kExitUsage;
  }

  const EnsembleStats stats = run_ensemble(config);
  export_results(stats, std::nullopt, config, out_dir + "/" + config.name);
  print_summary(config.name, stats);
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::optional<long> seeds, const std::string& mdp_path) {
  FixedInstance fixed_storage;
  const FixedInstance* fixed = nullptr;
  if (!mdp_path.empty()) {
    LoadedMdp loaded = load_mdp(mdp_path);
    fixed_storage.mdp = std::move(loaded.mdp);
    fixed_storage.features = std::move(loaded.features);
    fixed = &fixed_storage;
  }

  std::vector<LemmaReport> reports;
  auto run_suite = [&](const std::string& name) {
    auto append = [&reports](std::vector<LemmaReport> more) {
      for (auto& r : more) reports.push_back(std::move(r));
    };
    if (name == "pseudo-contraction") {
      append(verify_pseudo_contraction(seeds.value_or(1000), fixed));
      append(verify_fixed_point(seeds.value_or(100), fixed));
    } else if (name == "negdef") {
      append(verify_negdef(seeds.value_or(50), fixed));
    } else if (name == "moreau") {
      append(verify_moreau(seeds.value_or(10000), std::min<long>(seeds.value_or(1000), 1000), fixed));
    } else if (name == "drift") {
      append(verify_drift(seeds.value_or(10), 5, 1000000, fixed));
    } else if (name == "mixing") {
      append(verify_mixing(seeds.value_or(50), fixed));
    } else {
      throw std::invalid_argument("unknown suite: " + name);
    }
  };

  if (suite == "all") {
    for (const char* name : {"pseudo-contraction", "negdef", "moreau", "drift", "mixing"})
      run_suite(name);
  } else {
    run_suite(suite);
  }

  Json doc = Json::array();
  for (const auto& report : reports) {
    Json entry;
    entry["lemma"] = report.lemma;
    entry["instances"] = report.instances;
    entry["violations"] = report.violations;
    entry["max_slack"] = std::isfinite(report.max_slack) ? Json(report.max_slack) : Json(nullptr);
    entry["first_violation_instance"] =
        report.first_violation >= 0 ? Json(report.first_violation) : Json(nullptr);
    doc.push_back(std::move(entry));
  }
  std::cout << doc.dump(2) << std::endl;
  return all_pass(reports) ? kExitOk : kExitViolation;
}

int cmd_baird(double kappa0, double epsilon, double alpha, long horizon, int runs,
              std::uint64_t seed, const std::string& out_dir, int jobs) {
  ExperimentConfig config = baird_config(kappa0, epsilon, alpha, horizon, runs, seed, jobs);
  try {
    config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  const EnsembleStats stats = run_ensemble(config);
  export_results(stats, std::nullopt, config, out_dir + "/" + config.name);
  print_summary(config.name, stats);
  std::string why;
  if (!bounded_check(stats, &why)) {
    std::fprintf(stderr, "baird: FAIL (%s)\n", why.c_str());
    return kExitViolation;
  }
  std::fprintf(stderr, "baird: PASS (weights stay bounded)\n");
  return kExitOk;
}

int cmd_compare(double kappa0, double epsilon, double alpha, long horizon, int runs,
                std::uint64_t seed, const std::string& out_dir, int jobs,
                const std::string& variants_csv) {
  ExperimentConfig base = baird_config(kappa0, epsilon, alpha, horizon, runs, seed, jobs);
  base.name = "compare";
  try {
    base.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }

  std::vector<std::string> subset;
  if (!variants_csv.empty()) {
    std::size_t pos = 0;
    while (pos != std::string::npos) {
      const std::size_t comma = variants_csv.find(',', pos);
      subset.push_back(variants_csv.substr(pos, comma == std::string::npos ? comma : comma - pos));
      pos = comma == std::string::npos ? comma : comma + 1;
    }
  }

  std::map<std::string, EnsembleStats> results;
  try {
    results = compare_variants(base, subset);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  if (results.empty()) {
    std::fprintf(stderr, "error: no known variant selected from '%s'\n", variants_csv.c_str());
    return kExitUsage;
  }

  const std::vector<std::pair<std::string, Variant>> variant_specs = {
      {"none", Variant::none()},
      {"target_network", Variant::target_network(10)},
      {"projection", Variant::projection(10.0)},
      {"ridge", Variant::ridge(0.01)},
  };
  for (const auto& [name, stats] : results) {
    ExperimentConfig var_config = base;
    var_config.name = "compare-" + name;
    for (const auto& [vname, variant] : variant_specs)
      if (vname == name) var_config.learner.variant = variant;
    export_results(stats, std::nullopt, var_config, out_dir + "/" + var_config.name);
    print_summary(var_config.name, stats);
  }
  return kExitOk;
}

int cmd_export_mdp(const std::string& preset, std::uint64_t seed, int n_states, int n_actions,
                   double gamma, const std::string& out_path) {
  if (preset == "baird") {
    auto [mdp, features] = make_baird();
    save_mdp(out_path, mdp, &features);
  } else if (preset == "random") {
    const Mdp mdp = make_random_mdp(seed, n_states, n_actions, gamma);
    save_mdp(out_path, mdp);
  } else {
    std::fprintf(stderr, "error: unknown preset '%s'\n", preset.c_str());
    return kExitUsage;
  }
  std::fprintf(stderr, "wrote %s\n", out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlab: Q-learning laboratory with exact MDP oracles and seeded ensembles"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string run_config, run_out = "results";
  std::optional<long> run_horizon;
  std::optional<int> run_runs;
  std::optional<std::uint64_t> run_seed;
  int run_jobs = 0;
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Output directory (default: results)");
  run->add_option("--horizon", run_horizon, "Override: number of steps");
  run->add_option("--runs", run_runs, "Override: number of seeded runs");
  run->add_option("--seed", run_seed, "Override: base seed");
  run->add_option("--jobs", run_jobs, "Worker threads (default: available parallelism)");

  // verify
  auto* verify = app.add_subcommand("verify", "Check closed-form properties on seeded instances");
  std::string verify_suite;
  std::optional<long> verify_seeds;
  std::string verify_mdp;
  verify->add_option("--suite", verify_suite,
                     "One of: pseudo-contraction, negdef, moreau, drift, mixing, all")
      ->required();
  verify->add_option("--seeds", verify_seeds, "Number of seeded instances (per-suite default)");
  verify->add_option("--mdp", verify_mdp, "Fixed MDP JSON file instead of random instances");

  // baird
  auto* baird = app.add_subcommand(
      "baird", "Benchmark preset: linear Q-learning on the seven-state counterexample");
  double baird_kappa0 = 100.0, baird_epsilon = 0.1, baird_alpha = 0.1;
  long baird_horizon = 1500;
  int baird_runs = 10, baird_jobs = 0;
  std::uint64_t baird_seed = 0;
  std::string baird_out = "results";
  baird->add_option("--kappa0", baird_kappa0, "Base softmax temperature (default 100)");
  baird->add_option("--epsilon", baird_epsilon, "Exploration floor (default 0.1)");
  baird->add_option("--alpha", baird_alpha, "Constant learning rate (default 0.1)");
  baird->add_option("--horizon", baird_horizon, "Steps per run (default 1500)");
  baird->add_option("--runs", baird_runs, "Independent runs (default 10)");
  baird->add_option("--seed", baird_seed, "Base seed (default 0)");
  baird->add_option("--out", baird_out, "Output directory (default: results)");
  baird->add_option("--jobs", baird_jobs, "Worker threads (default: available parallelism)");

  // compare
  auto* compare = app.add_subcommand(
      "compare", "Compare the unmodified learner against target-network/projection/ridge variants");
  double cmp_kappa0 = 10.0, cmp_epsilon = 0.1, cmp_alpha = 0.1;
  long cmp_horizon = 1500;
  int cmp_runs = 10, cmp_jobs = 0;
  std::uint64_t cmp_seed = 0;
  std::string cmp_out = "results", cmp_variants;
  compare->add_option("--kappa0", cmp_kappa0, "Base softmax temperature (default 10)");
  compare->add_option("--epsilon", cmp_epsilon, "Exploration floor (default 0.1)");
  compare->add_option("--alpha", cmp_alpha, "Constant learning rate (default 0.1)");
  compare->add_option("--horizon", cmp_horizon, "Steps per run (default 1500)");
  compare->add_option("--runs", cmp_runs, "Independent runs (default 10)");
  compare->add_option("--seed", cmp_seed, "Base seed (default 0)");
  compare->add_option("--out", cmp_out, "Output directory (default: results)");
  compare->add_option("--jobs", cmp_jobs, "Worker threads (default: available parallelism)");
  compare->add_option("--variant", cmp_variants,
                      "Comma-separated subset of none,target_network,projection,ridge");

  // export-mdp
  auto* export_cmd = app.add_subcommand("export-mdp", "Write a benchmark MDP as JSON");
  std::string exp_preset = "baird", exp_out = "mdp.json";
  std::uint64_t exp_seed = 0;
  int exp_states = 5, exp_actions = 2;
  double exp_gamma = 0.9;
  export_cmd->add_option("--preset", exp_preset, "baird or random (default baird)");
  export_cmd->add_option("--seed", exp_seed, "Seed for the random preset");
  export_cmd->add_option("--n-states", exp_states, "States for the random preset (default 5)");
  export_cmd->add_option("--n-actions", exp_actions, "Actions for the random preset (default 2)");
  export_cmd->add_option("--gamma", exp_gamma, "Discount for the random preset (default 0.9)");
  export_cmd->add_option("--out", exp_out, "Output file (default mdp.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed())
      return cmd_run(run_config, run_out, run_horizon, run_runs, run_seed, run_jobs);
    if (verify->parsed()) return cmd_verify(verify_suite, verify_seeds, verify_mdp);
    if (baird->parsed())
      return cmd_baird(baird_kappa0, baird_epsilon, baird_alpha, baird_horizon, baird_runs,
                       baird_seed, baird_out, baird_jobs);
    if (compare->parsed())
      return cmd_compare(cmp_kappa0, cmp_epsilon, cmp_alpha, cmp_horizon, cmp_runs, cmp_seed,
                         cmp_out, cmp_jobs, cmp_variants);
    if (export_cmd->parsed())
      return cmd_export_mdp(exp_preset, exp_seed, exp_states, exp_actions, exp_gamma, exp_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
