#pragma once

#include <optional>
#include <vector>

#include "qlab/mdp.hpp"
#include "qlab/policies.hpp"
#include "qlab/rng.hpp"

namespace qlab {

/// Learning-rate schedule alpha_t: either alpha/(t + t0)^eps_alpha with
/// eps_alpha in (0.5, 1], or a constant alpha.
struct LearningRateSchedule {
  enum class Mode { polynomial, constant };
  Mode mode = Mode::constant;
  double alpha = 0.1;
  double t0 = 1.0;
  double eps_alpha = 1.0;

  static LearningRateSchedule constant(double alpha) {
    return {Mode::constant, alpha, 1.0, 1.0};
  }
  static LearningRateSchedule polynomial(double alpha, double t0, double eps_alpha) {
    return {Mode::polynomial, alpha, t0, eps_alpha};
  }

  void validate() const;
  double at(long t) const;
};

/// Optional stabilization variants layered on top of the base update.
struct Variant {
  enum class Kind { none, target_network, projection, ridge };
  Kind kind = Kind::none;
  long sync_period = 10;  // target_network: copy w_bar <- w every this many steps
  double radius = 10.0;   // projection: l2-ball radius
  double eta = 0.01;      // ridge: coefficient on the gradient of ||w||_2^2

  static Variant none() { return {}; }
  static Variant target_network(long sync_period) {
    Variant v;
    v.kind = Kind::target_network;
    v.sync_period = sync_period;
    return v;
  }
  static Variant projection(double radius) {
    Variant v;
    v.kind = Kind::projection;
    v.radius = radius;
    return v;
  }
  static Variant ridge(double eta) {
    Variant v;
    v.kind = Kind::ridge;
    v.eta = eta;
    return v;
  }

  void validate() const;
};

struct LearnerSpec {
  enum class Kind { tabular, linear };
  Kind kind = Kind::linear;
  BehaviorConfig behavior;
  Variant variant;

  /// Throws std::invalid_argument on bad parameters; tabular learners accept
  /// only the unmodified update (variants would touch entries other than the
  /// visited one).
  void validate() const;
};

/// One sampled environment step (s, a, r, s').
struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
};

/// Mutable state of one stochastic-approximation run. `w` holds the weight
/// vector (linear) or the flattened q-table (tabular).
struct SaState {
  long t = 0;
  Vec w;
  std::optional<Vec> target_w;
  int env_state = 0;
  CounterRng rng;
  bool diverged = false;
};

/// Any |entry| above this (or any non-finite entry) marks the run diverged;
/// large enough to separate a genuine blow-up from float noise.
inline constexpr double kDivergenceThreshold = 1e12;

/// a ~ policy(.|s), r = r(s,a), s' ~ p(.|s,a), both draws by inverse CDF in
/// ascending index order.
Transition sample_transition(const Mdp& mdp, const PolicyMatrix& policy, int s, CounterRng& rng);

/// One step of linear Q-learning: sample a ~ mu_{w_t}(.|S_t) and s', form the
/// TD error delta = r + gamma*max_a' x(s',a')^T w_tgt - x(s,a)^T w, and update
/// w += alpha_t * delta * x(s,a). Variant hooks: target_network reads w_tgt
/// from the lagged copy (synced after every step whose 1-based index is a
/// multiple of sync_period); projection rescales onto the l2 ball; ridge adds
/// -alpha_t * eta * 2w. Sets state.diverged instead of propagating NaN/inf.
void linear_q_step(SaState& state, const Mdp& mdp, const FeatureMap& X,
                   const LearnerSpec& spec, const LearningRateSchedule& schedule);

/// One step of tabular Q-learning: a ~ mu_{q_t}(.|S_t),
/// delta = r + gamma*max_a' q(s',a') - q(s,a), q(s,a) += alpha_t * delta.
/// Only the visited entry changes.
void tabular_q_step(SaState& state, const Mdp& mdp, const LearnerSpec& spec,
                    const LearningRateSchedule& schedule);

/// Metric recorded along a trajectory.
struct MetricSpec {
  enum class Kind { w_norm_sq, q_error_inf_sq };
  Kind kind = Kind::w_norm_sq;
  Vec q_star;  // required by q_error_inf_sq

  double eval(const Vec& w) const;
};

struct TrajectoryResult {
  /// series[t] = metric at time t, t = 0..horizon (truncated at divergence).
  std::vector<double> series;
  std::optional<long> diverged_at;
};

/// Runs one seeded trajectory: S_0 ~ p0, then `horizon` steps of the chosen
/// learner on a single continuing data stream. Bitwise reproducible for a
/// fixed seed.
TrajectoryResult run_trajectory(const Mdp& mdp, const FeatureMap& X, const LearnerSpec& spec,
                                const LearningRateSchedule& schedule, long horizon,
                                std::uint64_t seed, const Vec& w0, const MetricSpec& metric);

}  // namespace qlab
