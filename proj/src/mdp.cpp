#include "qlab/mdp.hpp"

#include <cmath>
#include <stdexcept>

#include "qlab/rng.hpp"

namespace qlab {

double Mdp::reward_bound() const {
  double b = 0.0;
  for (double v : reward) b = std::max(b, std::abs(v));
  return b;
}

double FeatureMap::feature_bound() const {
  double b = 0.0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) b = std::max(b, matrix.row(i).norm());
  return b;
}

MdpValidationReport validate_mdp(const Mdp& mdp) {
  MdpValidationReport report;
  auto add = [&report](std::string constraint, std::string location, double magnitude) {
    report.ok = false;
    report.violations.push_back({std::move(constraint), std::move(location), magnitude});
  };

  if (mdp.n_states < 1) add("n_states>=1", "n_states", static_cast<double>(1 - mdp.n_states));
  if (mdp.n_actions < 1) add("n_actions>=1", "n_actions", static_cast<double>(1 - mdp.n_actions));
  if (!report.ok) return report;

  const std::size_t want_p = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states;
  if (mdp.transition.size() != want_p) {
    add("transition-shape", "transition", std::abs(static_cast<double>(mdp.transition.size()) - static_cast<double>(want_p)));
    return report;
  }
  if (mdp.reward.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    add("reward-shape", "reward", std::abs(static_cast<double>(mdp.reward.size()) - mdp.n_pairs()));
    return report;
  }
  if (mdp.initial_dist.size() != static_cast<std::size_t>(mdp.n_states)) {
    add("initial-dist-shape", "initial_dist", std::abs(static_cast<double>(mdp.initial_dist.size()) - mdp.n_states));
    return report;
  }

  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double v = mdp.p(s, a, s2);
        if (!(v >= 0.0) || !std::isfinite(v)) {
          add("probability>=0", "p[" + std::to_string(s) + "][" + std::to_string(a) + "][" + std::to_string(s2) + "]", v);
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kStochasticTol) {
        add("row-stochastic", "p[" + std::to_string(s) + "][" + std::to_string(a) + "]", std::abs(sum - 1.0));
      }
    }
  }

  double p0_sum = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    const double v = mdp.initial_dist[s];
    if (!(v >= 0.0) || !std::isfinite(v)) add("probability>=0", "p0[" + std::to_string(s) + "]", v);
    p0_sum += v;
  }
  if (std::abs(p0_sum - 1.0) > kStochasticTol) add("p0-sums-to-1", "p0", std::abs(p0_sum - 1.0));

  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      if (!std::isfinite(mdp.r(s, a)))
        add("reward-finite", "r[" + std::to_string(s) + "][" + std::to_string(a) + "]", mdp.r(s, a));

  if (!(mdp.gamma >= 0.0) || !(mdp.gamma < 1.0)) add("gamma<1", "gamma", mdp.gamma);

  return report;
}

std::pair<Mdp, FeatureMap> make_baird() {
  Mdp mdp;
  mdp.n_states = 7;
  mdp.n_actions = 2;
  mdp.gamma = 0.99;
  mdp.transition.assign(7 * 2 * 7, 0.0);
  mdp.reward.assign(7 * 2, 0.0);
  mdp.initial_dist.assign(7, 1.0 / 7.0);
  for (int s = 0; s < 7; ++s)
    for (int a = 0; a < 2; ++a) mdp.p(s, a, 6) = 1.0;

  // State features: phi(s) = 2*e_s + e_7 for s = 0..5, phi(6) = e_6 + 2*e_7.
  Mat phi = Mat::Zero(7, 8);
  for (int s = 0; s < 6; ++s) {
    phi(s, s) = 2.0;
    phi(s, 7) = 1.0;
  }
  phi(6, 6) = 1.0;
  phi(6, 7) = 2.0;

  // Action-block stacking: x(s,a) = e_a (x) phi(s) in R^16.
  FeatureMap features;
  features.dim = 16;
  features.matrix = Mat::Zero(14, 16);
  for (int s = 0; s < 7; ++s)
    for (int a = 0; a < 2; ++a)
      features.matrix.block(mdp.pair_index(s, a), a * 8, 1, 8) = phi.row(s);

  return {std::move(mdp), std::move(features)};
}

Mdp make_random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("make_random_mdp: counts must be >= 1");
  if (!(gamma >= 0.0) || !(gamma < 1.0)) throw std::invalid_argument("make_random_mdp: gamma must be in [0,1)");

  CounterRng rng = CounterRng::for_stream(seed, 0);
  Mdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  mdp.initial_dist.assign(n_states, 0.0);

  // Dirichlet(1) row = normalized Exp(1) draws, floored at 1e-3 for strict
  // positivity, then renormalized.
  auto dirichlet_row = [&rng](double* out, int n) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      out[i] = -std::log1p(-rng.next_double());
      sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
    sum = 0.0;
    for (int i = 0; i < n; ++i) {
      out[i] = std::max(out[i], 1e-3);
      sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
  };

  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      dirichlet_row(&mdp.transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states], n_states);

  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.r(s, a) = rng.uniform(-1.0, 1.0);

  dirichlet_row(mdp.initial_dist.data(), n_states);
  return mdp;
}

FeatureMap identity_features(const Mdp& mdp) {
  FeatureMap features;
  features.dim = mdp.n_pairs();
  features.matrix = Mat::Identity(mdp.n_pairs(), mdp.n_pairs());
  return features;
}

}  // namespace qlab
