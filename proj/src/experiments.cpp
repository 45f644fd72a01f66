#include "qlab/experiments.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "qlab/oracles.hpp"
#include "qlab/serialize.hpp"

namespace qlab {

Vec W0Spec::realize(Eigen::Index dim) const {
  switch (kind) {
    case Kind::ones: return Vec::Ones(dim);
    case Kind::zeros: return Vec::Zero(dim);
    case Kind::constant: return Vec::Constant(dim, value);
    case Kind::vector: {
      if (static_cast<Eigen::Index>(values.size()) != dim)
        throw std::invalid_argument("w0 vector length does not match the learner dimension");
      Vec w(dim);
      for (Eigen::Index i = 0; i < dim; ++i) w[i] = values[i];
      return w;
    }
  }
  return Vec::Zero(dim);
}

void ExperimentConfig::validate() const {
  learner.validate();
  schedule.validate();
  if (horizon < 0) throw std::invalid_argument("config: horizon must be >= 0");
  if (n_runs < 1) throw std::invalid_argument("config: n_runs must be >= 1");
  if (jobs < 0) throw std::invalid_argument("config: jobs must be >= 0");
  if (metric == MetricSpec::Kind::q_error_inf_sq && learner.kind != LearnerSpec::Kind::tabular)
    throw std::invalid_argument("config: q_error_inf_sq metric requires a tabular learner");
}

ResolvedExperiment resolve_experiment(const ExperimentConfig& config) {
  config.validate();
  ResolvedExperiment resolved;
  switch (config.mdp_source.kind) {
    case MdpSource::Kind::baird: {
      auto [mdp, features] = make_baird();
      resolved.mdp = std::move(mdp);
      resolved.features = std::move(features);
      break;
    }
    case MdpSource::Kind::random: {
      resolved.mdp = make_random_mdp(config.mdp_source.seed, config.mdp_source.n_states,
                                     config.mdp_source.n_actions, config.mdp_source.gamma);
      resolved.features = identity_features(resolved.mdp);
      break;
    }
    case MdpSource::Kind::file: {
      LoadedMdp loaded = load_mdp(config.mdp_source.path);
      resolved.mdp = std::move(loaded.mdp);
      resolved.features =
          loaded.features ? std::move(*loaded.features) : identity_features(resolved.mdp);
      break;
    }
  }

  resolved.metric.kind = config.metric;
  if (config.metric == MetricSpec::Kind::q_error_inf_sq)
    resolved.metric.q_star = solve_q_star(resolved.mdp, 1e-12);

  const Eigen::Index dim = config.learner.kind == LearnerSpec::Kind::tabular
                               ? resolved.mdp.n_pairs()
                               : resolved.features.matrix.cols();
  resolved.w0 = config.w0.realize(dim);
  return resolved;
}

EnsembleStats run_ensemble(const ExperimentConfig& config) {
  return run_ensemble(config, resolve_experiment(config));
}

EnsembleStats run_ensemble(const ExperimentConfig& config, const ResolvedExperiment& resolved) {
  config.validate();
  std::vector<TrajectoryResult> runs(config.n_runs);

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= config.n_runs) return;
      try {
        runs[i] = run_trajectory(resolved.mdp, resolved.features, config.learner,
                                 config.schedule, config.horizon,
                                 config.base_seed + static_cast<std::uint64_t>(i), resolved.w0,
                                 resolved.metric);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_threads = config.jobs > 0 ? config.jobs
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, config.n_runs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Deterministic reduction in run-index order, independent of scheduling.
  std::size_t rows = 0;
  for (const auto& run : runs) rows = std::max(rows, run.series.size());

  EnsembleStats stats;
  stats.mean.resize(rows);
  stats.min.resize(rows);
  stats.max.resize(rows);
  stats.var.resize(rows);
  stats.n_alive.resize(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    double sum = 0.0, lo = 0.0, hi = 0.0;
    int alive = 0;
    for (const auto& run : runs) {
      if (t >= run.series.size()) continue;
      const double v = run.series[t];
      if (alive == 0) {
        lo = hi = v;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      sum += v;
      ++alive;
    }
    const double mean = alive > 0 ? sum / alive : 0.0;
    double ss = 0.0;
    for (const auto& run : runs) {
      if (t >= run.series.size()) continue;
      const double d = run.series[t] - mean;
      ss += d * d;
    }
    stats.mean[t] = mean;
    stats.min[t] = lo;
    stats.max[t] = hi;
    stats.var[t] = alive > 1 ? ss / (alive - 1) : 0.0;
    stats.n_alive[t] = alive;
  }
  for (int i = 0; i < config.n_runs; ++i)
    if (runs[i].diverged_at) stats.diverged.emplace_back(i, *runs[i].diverged_at);
  return stats;
}

RateFit fit_rate(const EnsembleStats& stats, long t_lo, long t_hi, RateFit::Model model,
                 double t0, double eps_alpha) {
  if (t_lo < 0 || t_hi >= stats.rows() || t_lo >= t_hi)
    throw std::invalid_argument("fit_rate: window out of range");

  std::vector<double> xs, ys;
  for (long t = t_lo; t <= t_hi; ++t) {
    const double y = stats.mean[t];
    if (!(y > 0.0)) throw std::invalid_argument("fit_rate: metric must be positive on the window");
    const double base = static_cast<double>(t) + t0;
    xs.push_back(model == RateFit::Model::power_law ? std::log(base)
                                                    : std::pow(base, 1.0 - eps_alpha));
    ys.push_back(std::log(y));
  }
  if (xs.size() < 3) throw std::invalid_argument("fit_rate: fewer than 3 points in the window");

  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30)
    throw std::invalid_argument("fit_rate: degenerate regressor on the window");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;

  double ss_res = 0.0, ss_tot = 0.0;
  const double y_mean = sy / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = intercept + slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - y_mean) * (ys[i] - y_mean);
  }

  RateFit fit;
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  fit.model = model;
  fit.exponent = slope;
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

std::map<std::string, EnsembleStats> compare_variants(const ExperimentConfig& base,
                                                      const std::vector<std::string>& subset) {
  if (base.learner.kind != LearnerSpec::Kind::linear)
    throw std::invalid_argument("compare_variants: base learner must be linear");

  const std::vector<std::pair<std::string, Variant>> all = {
      {"none", Variant::none()},
      {"target_network", Variant::target_network(10)},
      {"projection", Variant::projection(10.0)},
      {"ridge", Variant::ridge(0.01)},
  };
  auto selected = [&subset](const std::string& name) {
    if (subset.empty()) return true;
    for (const auto& want : subset)
      if (want == name) return true;
    return false;
  };

  ResolvedExperiment resolved = resolve_experiment(base);
  std::map<std::string, EnsembleStats> out;
  for (const auto& [name, variant] : all) {
    if (!selected(name)) continue;
    ExperimentConfig config = base;
    config.learner.variant = variant;
    config.name = base.name + "-" + name;
    out[name] = run_ensemble(config, resolved);
  }
  return out;
}

void export_results(const EnsembleStats& stats, const std::optional<RateFit>& fit,
                    const ExperimentConfig& config, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create directory: " + out_dir + ": " + ec.message());

  write_stats_csv(out_dir + "/stats.csv", stats);

  Json meta;
  meta["config"] = config_to_json(config);
  meta["build"] = build_stamp();
  if (fit) {
    meta["fit"] = {{"t_lo", fit->t_lo},
                   {"t_hi", fit->t_hi},
                   {"model", fit->model == RateFit::Model::power_law ? "power_law" : "exp_poly"},
                   {"exponent", fit->exponent},
                   {"r_squared", fit->r_squared}};
  } else {
    meta["fit"] = nullptr;
  }
  Json diverged = Json::array();
  for (const auto& [run, step] : stats.diverged) diverged.push_back({run, step});
  meta["diverged_runs"] = std::move(diverged);

  const std::string meta_path = out_dir + "/meta.json";
  std::ofstream out(meta_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + meta_path);
  out << meta.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + meta_path);
}

}  // namespace qlab
