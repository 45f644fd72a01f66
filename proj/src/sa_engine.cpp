#include "qlab/sa_engine.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace qlab {

void LearningRateSchedule::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("schedule: alpha must be > 0");
  if (mode == Mode::polynomial) {
    if (!(t0 > 0.0)) throw std::invalid_argument("schedule: t0 must be > 0");
    if (!(eps_alpha > 0.5) || !(eps_alpha <= 1.0))
      throw std::invalid_argument("schedule: eps_alpha must be in (0.5,1]");
  }
}

double LearningRateSchedule::at(long t) const {
  if (mode == Mode::constant) return alpha;
  return alpha / std::pow(static_cast<double>(t) + t0, eps_alpha);
}

void Variant::validate() const {
  if (kind == Kind::target_network && sync_period < 1)
    throw std::invalid_argument("variant: sync_period must be >= 1");
  if (kind == Kind::projection && !(radius > 0.0))
    throw std::invalid_argument("variant: radius must be > 0");
  if (kind == Kind::ridge && !(eta > 0.0))
    throw std::invalid_argument("variant: eta must be > 0");
}

void LearnerSpec::validate() const {
  behavior.validate();
  variant.validate();
  if (kind == Kind::tabular && variant.kind != Variant::Kind::none)
    throw std::invalid_argument("tabular learner supports no variants");
}

double MetricSpec::eval(const Vec& w) const {
  if (kind == Kind::w_norm_sq) return w.squaredNorm();
  const double err = (w - q_star).cwiseAbs().maxCoeff();
  return err * err;
}

namespace {

int inverse_cdf(const double* probs, int n, double u) {
  double cum = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return n - 1;
}

bool weights_ok(const Vec& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!std::isfinite(w[i]) || std::abs(w[i]) > kDivergenceThreshold) return false;
  return true;
}

}  // namespace

Transition sample_transition(const Mdp& mdp, const PolicyMatrix& policy, int s, CounterRng& rng) {
  Transition tr;
  tr.s = s;
  const double u_a = rng.next_double();
  double cum = 0.0;
  tr.a = mdp.n_actions - 1;
  for (int a = 0; a < mdp.n_actions - 1; ++a) {
    cum += policy.probs(s, a);
    if (u_a < cum) {
      tr.a = a;
      break;
    }
  }
  tr.r = mdp.r(s, tr.a);
  tr.s_next = inverse_cdf(mdp.row(s, tr.a), mdp.n_states, rng.next_double());
  return tr;
}

void linear_q_step(SaState& state, const Mdp& mdp, const FeatureMap& X,
                   const LearnerSpec& spec, const LearningRateSchedule& schedule) {
  if (state.diverged) return;
  const double alpha_t = schedule.at(state.t);
  const int s = state.env_state;
  const int n_actions = mdp.n_actions;

  double row_buf[64];
  std::vector<double> big;
  std::span<double> row(row_buf, static_cast<std::size_t>(n_actions));
  if (n_actions > 64) {
    big.resize(n_actions);
    row = big;
  }
  const double kappa_w = adaptive_temperature(state.w, spec.behavior.kappa0);
  linear_eps_softmax_row(state.w, kappa_w, X, s, n_actions, spec.behavior.epsilon, row);

  const int a = inverse_cdf(row.data(), n_actions, state.rng.next_double());
  const double reward = mdp.r(s, a);
  const int s_next = inverse_cdf(mdp.row(s, a), mdp.n_states, state.rng.next_double());

  if (spec.variant.kind == Variant::Kind::target_network && !state.target_w)
    throw std::invalid_argument("linear_q_step: target_network variant needs target_w");
  const Vec& w_tgt =
      spec.variant.kind == Variant::Kind::target_network ? *state.target_w : state.w;
  double max_next = X.matrix.row(s_next * n_actions).dot(w_tgt);
  for (int a2 = 1; a2 < n_actions; ++a2)
    max_next = std::max(max_next, X.matrix.row(s_next * n_actions + a2).dot(w_tgt));

  const auto x_sa = X.matrix.row(s * n_actions + a);
  const double delta = reward + mdp.gamma * max_next - x_sa.dot(state.w);

#ifndef NDEBUG
  {
    // ||H(w,y)|| <= C (||w|| + 1) with C from the instance constants.
    const double c_x = X.feature_bound();
    const double c_r = mdp.reward_bound();
    const double growth = c_x * std::max(c_r, (1.0 + mdp.gamma) * c_x);
    const double w_scale = std::max(state.w.norm(), w_tgt.norm());
    assert(std::abs(delta) * x_sa.norm() <= growth * (w_scale + 1.0) + 1e-9);
  }
#endif

  if (spec.variant.kind == Variant::Kind::ridge) {
    state.w = (1.0 - 2.0 * alpha_t * spec.variant.eta) * state.w +
              (alpha_t * delta) * x_sa.transpose();
  } else {
    state.w += (alpha_t * delta) * x_sa.transpose();
  }
  if (spec.variant.kind == Variant::Kind::projection) {
    const double norm = state.w.norm();
    if (norm > spec.variant.radius) state.w *= spec.variant.radius / norm;
  }

  if (!weights_ok(state.w)) {
    state.diverged = true;
    return;
  }

  state.env_state = s_next;
  ++state.t;
  if (spec.variant.kind == Variant::Kind::target_network &&
      state.t % spec.variant.sync_period == 0)
    state.target_w = state.w;
}

void tabular_q_step(SaState& state, const Mdp& mdp, const LearnerSpec& spec,
                    const LearningRateSchedule& schedule) {
  if (state.diverged) return;
  const double alpha_t = schedule.at(state.t);
  const int s = state.env_state;
  const int n_actions = mdp.n_actions;

  double row_buf[64];
  std::vector<double> big;
  std::span<double> row(row_buf, static_cast<std::size_t>(n_actions));
  if (n_actions > 64) {
    big.resize(n_actions);
    row = big;
  }
  tabular_eps_softmax_row(state.w, s, n_actions, spec.behavior.epsilon, row);

  const int a = inverse_cdf(row.data(), n_actions, state.rng.next_double());
  const double reward = mdp.r(s, a);
  const int s_next = inverse_cdf(mdp.row(s, a), mdp.n_states, state.rng.next_double());

  double max_next = state.w[s_next * n_actions];
  for (int a2 = 1; a2 < n_actions; ++a2)
    max_next = std::max(max_next, state.w[s_next * n_actions + a2]);

  const int idx = s * n_actions + a;
  const double delta = reward + mdp.gamma * max_next - state.w[idx];
  state.w[idx] += alpha_t * delta;

  if (!std::isfinite(state.w[idx]) || std::abs(state.w[idx]) > kDivergenceThreshold) {
    state.diverged = true;
    return;
  }

  state.env_state = s_next;
  ++state.t;
}

TrajectoryResult run_trajectory(const Mdp& mdp, const FeatureMap& X, const LearnerSpec& spec,
                                const LearningRateSchedule& schedule, long horizon,
                                std::uint64_t seed, const Vec& w0, const MetricSpec& metric) {
  spec.validate();
  schedule.validate();
  if (horizon < 0) throw std::invalid_argument("run_trajectory: horizon must be >= 0");
  const Eigen::Index want_dim =
      spec.kind == LearnerSpec::Kind::tabular ? mdp.n_pairs() : X.matrix.cols();
  if (w0.size() != want_dim) throw std::invalid_argument("run_trajectory: w0 dimension mismatch");

  SaState state;
  state.w = w0;
  state.rng = CounterRng::for_stream(seed, 0);
  if (spec.variant.kind == Variant::Kind::target_network) state.target_w = w0;
  state.env_state =
      inverse_cdf(mdp.initial_dist.data(), mdp.n_states, state.rng.next_double());

  TrajectoryResult result;
  result.series.reserve(horizon + 1);
  result.series.push_back(metric.eval(state.w));

#ifndef NDEBUG
  const bool check_q_bound =
      spec.kind == LearnerSpec::Kind::tabular && schedule.at(0) <= 1.0;
  const double q_bound =
      check_q_bound
          ? std::max(w0.cwiseAbs().maxCoeff(),
                     mdp.gamma < 1.0 ? mdp.reward_bound() / (1.0 - mdp.gamma) : 0.0)
          : 0.0;
#endif

  for (long step = 0; step < horizon; ++step) {
    if (spec.kind == LearnerSpec::Kind::linear)
      linear_q_step(state, mdp, X, spec, schedule);
    else
      tabular_q_step(state, mdp, spec, schedule);

    if (state.diverged) {
      result.diverged_at = step;
      break;
    }
#ifndef NDEBUG
    if (check_q_bound && schedule.at(step) <= 1.0)
      assert(state.w.cwiseAbs().maxCoeff() <= q_bound + 1e-12);
#endif
    result.series.push_back(metric.eval(state.w));
  }
  return result;
}

}  // namespace qlab
