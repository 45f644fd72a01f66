#include "qlab/policies.hpp"

#include <cmath>
#include <stdexcept>

namespace qlab {

void BehaviorConfig::validate() const {
  if (!(epsilon > 0.0) || !(epsilon <= 1.0))
    throw std::invalid_argument("epsilon must be in (0,1]");
  if (!(kappa0 > 0.0)) throw std::invalid_argument("kappa0 must be > 0");
}

double adaptive_temperature(const Vec& w, double kappa0) {
  if (!(kappa0 > 0.0)) throw std::invalid_argument("kappa0 must be > 0");
  const double norm = w.norm();
  return norm >= 1.0 ? kappa0 / norm : kappa0;
}

namespace {

// eps/n + (1-eps) * softmax(logits), with max subtraction so that tabular
// logits up to C_r/(1-gamma) cannot overflow.
void eps_softmax_from_logits(std::span<double> logits, double epsilon, std::span<double> out) {
  const int n = static_cast<int>(logits.size());
  double max_logit = logits[0];
  for (int a = 1; a < n; ++a) max_logit = std::max(max_logit, logits[a]);
  double sum = 0.0;
  for (int a = 0; a < n; ++a) {
    out[a] = std::exp(logits[a] - max_logit);
    sum += out[a];
  }
  const double floor = epsilon / n;
  const double scale = (1.0 - epsilon) / sum;
  for (int a = 0; a < n; ++a) out[a] = floor + scale * out[a];
}

}  // namespace

void linear_eps_softmax_row(const Vec& w, double kappa_w, const FeatureMap& X, int s,
                            int n_actions, double epsilon, std::span<double> out) {
  double logits_buf[64];
  std::span<double> logits(logits_buf, static_cast<std::size_t>(n_actions));
  std::vector<double> big;
  if (n_actions > 64) {
    big.resize(n_actions);
    logits = big;
  }
  for (int a = 0; a < n_actions; ++a)
    logits[a] = kappa_w * X.matrix.row(s * n_actions + a).dot(w);
  eps_softmax_from_logits(logits, epsilon, out);
}

void tabular_eps_softmax_row(const Vec& q, int s, int n_actions, double epsilon,
                             std::span<double> out) {
  double logits_buf[64];
  std::span<double> logits(logits_buf, static_cast<std::size_t>(n_actions));
  std::vector<double> big;
  if (n_actions > 64) {
    big.resize(n_actions);
    logits = big;
  }
  for (int a = 0; a < n_actions; ++a) logits[a] = q[s * n_actions + a];
  eps_softmax_from_logits(logits, epsilon, out);
}

PolicyMatrix linear_eps_softmax(const Vec& w, const FeatureMap& X, int n_states,
                                int n_actions, const BehaviorConfig& cfg) {
  cfg.validate();
  if (X.matrix.rows() != static_cast<Eigen::Index>(n_states) * n_actions)
    throw std::invalid_argument("feature map row count does not match |S||A|");
  const double kappa_w = adaptive_temperature(w, cfg.kappa0);
  PolicyMatrix pi;
  pi.probs.resize(n_states, n_actions);
  std::vector<double> row(n_actions);
  for (int s = 0; s < n_states; ++s) {
    linear_eps_softmax_row(w, kappa_w, X, s, n_actions, cfg.epsilon, row);
    for (int a = 0; a < n_actions; ++a) pi.probs(s, a) = row[a];
  }
  return pi;
}

PolicyMatrix tabular_eps_softmax(const Vec& q, int n_states, int n_actions, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon <= 1.0))
    throw std::invalid_argument("epsilon must be in (0,1]");
  PolicyMatrix pi;
  pi.probs.resize(n_states, n_actions);
  std::vector<double> row(n_actions);
  for (int s = 0; s < n_states; ++s) {
    tabular_eps_softmax_row(q, s, n_actions, epsilon, row);
    for (int a = 0; a < n_actions; ++a) pi.probs(s, a) = row[a];
  }
  return pi;
}

PolicyMatrix greedy_policy(const Vec& values, int n_states, int n_actions) {
  PolicyMatrix pi;
  pi.probs = Mat::Zero(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
      if (values[s * n_actions + a] > values[s * n_actions + best]) best = a;
    pi.probs(s, best) = 1.0;
  }
  return pi;
}

PolicyMatrix uniform_policy(int n_states, int n_actions) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("counts must be >= 1");
  PolicyMatrix pi;
  pi.probs = Mat::Constant(n_states, n_actions, 1.0 / n_actions);
  return pi;
}

}  // namespace qlab
