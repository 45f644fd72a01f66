#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qlab/mdp.hpp"
#include "qlab/sa_engine.hpp"

namespace qlab {

/// Where the experiment's MDP instance comes from.
struct MdpSource {
  enum class Kind { baird, random, file };
  Kind kind = Kind::baird;
  std::uint64_t seed = 0;  // random
  int n_states = 5;        // random
  int n_actions = 2;       // random
  double gamma = 0.9;      // random
  std::string path;        // file
};

/// Initial weight (or q-table) descriptor.
struct W0Spec {
  enum class Kind { ones, zeros, constant, vector };
  Kind kind = Kind::ones;
  double value = 1.0;
  std::vector<double> values;

  Vec realize(Eigen::Index dim) const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  MdpSource mdp_source;
  LearnerSpec learner;
  LearningRateSchedule schedule;
  long horizon = 1500;
  int n_runs = 10;
  std::uint64_t base_seed = 0;
  MetricSpec::Kind metric = MetricSpec::Kind::w_norm_sq;
  W0Spec w0;
  int jobs = 0;  // 0 = hardware concurrency

  void validate() const;
};

/// The config resolved into concrete objects: the MDP, its features, the
/// initial vector, and the metric (with q* solved when needed).
struct ResolvedExperiment {
  Mdp mdp;
  FeatureMap features;
  Vec w0;
  MetricSpec metric;
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& config);

/// Pointwise ensemble statistics across seeded runs. Diverged runs leave the
/// aggregation at their divergence step; n_alive tracks how many runs
/// contribute at each t.
struct EnsembleStats {
  std::vector<double> mean, min, max, var;
  std::vector<int> n_alive;
  std::vector<std::pair<int, long>> diverged;  // (run index, step)

  long rows() const { return static_cast<long>(mean.size()); }
};

/// Runs n_runs trajectories with seeds base_seed + run_index, dispatched over
/// a worker pool, and reduces in run-index order so the result is independent
/// of scheduling.
EnsembleStats run_ensemble(const ExperimentConfig& config);

/// As run_ensemble but on an already-resolved instance.
EnsembleStats run_ensemble(const ExperimentConfig& config, const ResolvedExperiment& resolved);

struct RateFit {
  enum class Model { power_law, exp_poly };
  long t_lo = 0, t_hi = 0;
  Model model = Model::power_law;
  double exponent = 0.0;  // power_law: slope vs ln(t+t0); exp_poly: coefficient on (t+t0)^(1-eps_alpha)
  double r_squared = 0.0;
};

/// Least-squares fit of log(mean metric) over [t_lo, t_hi]:
/// power_law regresses against ln(t + t0), exp_poly against
/// (t + t0)^(1 - eps_alpha). Requires at least 3 usable points and a strictly
/// positive mean on the window.
RateFit fit_rate(const EnsembleStats& stats, long t_lo, long t_hi, RateFit::Model model,
                 double t0, double eps_alpha);

/// Runs the four-variant comparison (unmodified, target network, projection,
/// ridge) with shared seeds. Keys: "none", "target_network", "projection",
/// "ridge". An empty subset selects all four.
std::map<std::string, EnsembleStats> compare_variants(const ExperimentConfig& base,
                                                      const std::vector<std::string>& subset = {});

/// Writes <out_dir>/stats.csv (header t,mean,min,max,var,n_alive, 17
/// significant digits) and <out_dir>/meta.json (config, build stamp, fit).
/// Byte-stable for fixed inputs. Throws std::runtime_error with the path on
/// I/O failure.
void export_results(const EnsembleStats& stats, const std::optional<RateFit>& fit,
                    const ExperimentConfig& config, const std::string& out_dir);

}  // namespace qlab
