#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace qlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Finite MDP (S, A, p, r, gamma, p0) stored as dense arrays.
/// State-action pairs are flattened row-major: pair_index(s, a) = s*|A| + a.
struct Mdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;    // p[s][a][s'], flattened
  std::vector<double> reward;        // r[s][a], flattened
  double gamma = 0.0;
  std::vector<double> initial_dist;  // p0[s]

  int n_pairs() const { return n_states * n_actions; }
  int pair_index(int s, int a) const { return s * n_actions + a; }
  static std::pair<int, int> pair_to_sa(int idx, int n_actions) {
    return {idx / n_actions, idx % n_actions};
  }

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a) const { return reward[pair_index(s, a)]; }
  double& r(int s, int a) { return reward[pair_index(s, a)]; }

  /// Transition row p(.|s,a) as a span-compatible pointer range.
  const double* row(int s, int a) const {
    return transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states;
  }

  /// max_{s,a} |r(s,a)|.
  double reward_bound() const;
};

/// Feature matrix X with one row x(s,a)^T per state-action pair, in the same
/// row-major (s outer, a inner) order as Mdp::pair_index.
struct FeatureMap {
  int dim = 0;
  Mat matrix;  // (|S||A|) x dim

  /// max_{s,a} ||x(s,a)||_2.
  double feature_bound() const;
};

struct MdpViolation {
  std::string constraint;
  std::string location;
  double magnitude = 0.0;
};

struct MdpValidationReport {
  bool ok = true;
  std::vector<MdpViolation> violations;
};

/// Tolerance for row-stochasticity checks throughout the library.
inline constexpr double kStochasticTol = 1e-12;

/// Checks every structural invariant of an Mdp; violations are reported as
/// data, never thrown.
MdpValidationReport validate_mdp(const Mdp& mdp);

/// Baird's counterexample: seven states, two actions, zero reward,
/// gamma = 0.99, every transition lands in the last state, uniform p0.
/// Features are the classic overparameterized state features (2*e_s + e_7 for
/// the first six states, e_6 + 2*e_7 for the last), block-stacked per action
/// into R^16.
std::pair<Mdp, FeatureMap> make_baird();

/// Random MDP with strictly positive transition rows (symmetric Dirichlet(1)
/// draws floored at 1e-3 and renormalized) and rewards uniform in [-1, 1].
/// Deterministic for a fixed seed. Throws std::invalid_argument on bad sizes
/// or gamma outside [0, 1).
Mdp make_random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma);

/// X = I of dimension |S||A| (tabular learning as a special case of linear).
FeatureMap identity_features(const Mdp& mdp);

}  // namespace qlab
