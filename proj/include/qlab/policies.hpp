#pragma once

#include <span>

#include "qlab/mdp.hpp"

namespace qlab {

/// Row-stochastic |S| x |A| policy table pi(a|s).
struct PolicyMatrix {
  Mat probs;

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
};

/// Parameters of the epsilon-softmax behavior policy family.
struct BehaviorConfig {
  double epsilon = 0.1;
  double kappa0 = 100.0;

  /// Throws std::invalid_argument unless epsilon in (0,1] and kappa0 > 0.
  void validate() const;
};

/// kappa0 / ||w||_2 when ||w||_2 >= 1, else kappa0. The shrinking temperature
/// is what keeps the expected update Lipschitz as the weights grow.
double adaptive_temperature(const Vec& w, double kappa0);

/// One row mu_w(.|s) of the linear epsilon-softmax policy:
/// eps/|A| + (1-eps) * softmax_b(kappa_w * x(s,b)^T w), with max-logit
/// subtraction. kappa_w must be adaptive_temperature(w, cfg.kappa0); passing
/// it in keeps the per-step engine path and the full-matrix path identical.
void linear_eps_softmax_row(const Vec& w, double kappa_w, const FeatureMap& X, int s,
                            int n_actions, double epsilon, std::span<double> out);

/// One row mu_q(.|s) of the tabular epsilon-softmax policy over q(s,.).
void tabular_eps_softmax_row(const Vec& q, int s, int n_actions, double epsilon,
                             std::span<double> out);

PolicyMatrix linear_eps_softmax(const Vec& w, const FeatureMap& X, int n_states,
                                int n_actions, const BehaviorConfig& cfg);

PolicyMatrix tabular_eps_softmax(const Vec& q, int n_states, int n_actions, double epsilon);

/// Deterministic greedy policy over a per-pair value table, placing all mass
/// on argmax_a values(s,a). Ties break toward the lowest action index.
PolicyMatrix greedy_policy(const Vec& values, int n_states, int n_actions);

PolicyMatrix uniform_policy(int n_states, int n_actions);

}  // namespace qlab
