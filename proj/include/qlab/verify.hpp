#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qlab/mdp.hpp"

namespace qlab {

/// Result of one property suite: how many instances were checked, how many
/// violated the inequality, and the worst LHS - RHS slack seen (a violation
/// has positive slack).
struct LemmaReport {
  std::string lemma;
  long instances = 0;
  long violations = 0;
  double max_slack = -std::numeric_limits<double>::infinity();
  long first_violation = -1;  // seed of the first violating instance, -1 if none

  void note(double slack, long instance_seed = -1) {
    ++instances;
    if (slack > 0.0) {
      ++violations;
      if (first_violation < 0) first_violation = instance_seed;
    }
    max_slack = std::max(max_slack, slack);
  }
};

/// Optional fixed instance (from --mdp) used in place of the random ones.
struct FixedInstance {
  Mdp mdp;
  std::optional<FeatureMap> features;
};

/// Weighted Bellman operator contracts toward q* with the per-q factor
/// 1 - (1-gamma) min d_{mu_q}; `seeds` random (MDP, q, epsilon) triples.
std::vector<LemmaReport> verify_pseudo_contraction(long seeds,
                                                   const FixedInstance* fixed = nullptr);

/// q* is a fixed point of T' and a zero of the tabular drift.
std::vector<LemmaReport> verify_fixed_point(long seeds, const FixedInstance* fixed = nullptr);

/// Negative-definiteness certificate w^T A(w) w <= -beta ||w||^2 whenever the
/// beta formula is positive, plus the drift inner-product bound
/// <w, h(w)> <= -beta||w||^2 + C||w|| with C = |S|^2|A| C_x C_r.
/// `seeds` MDP instances, 100 weight vectors each with ||w|| in [1, 100].
std::vector<LemmaReport> verify_negdef(long seeds, const FixedInstance* fixed = nullptr);

/// Moreau-envelope properties: 2/xi-smoothness descent, infinity-norm
/// equivalence, gradient inner products, finite-difference gradient check,
/// segment-scan agreement with a golden-section oracle, and the tabular drift
/// inner-product bound through the envelope.
std::vector<LemmaReport> verify_moreau(long n_vectors, long n_drift_pairs = 1000,
                                       const FixedInstance* fixed = nullptr);

/// h(w) = E_{y~d}[H(w,y)]: closed-form two-path agreement and a Monte-Carlo
/// stationary average within 3 batch-means standard errors componentwise.
std::vector<LemmaReport> verify_drift(long n_mdps, long n_weights = 5, long mc_steps = 1000000,
                                      const FixedInstance* fixed = nullptr);

/// Geometric mixing: fitted tau matches the closed-form second eigenvalue on
/// two-state kernels, total-variation curves are nonincreasing, and tau_alpha
/// is nonincreasing in the accuracy.
std::vector<LemmaReport> verify_mixing(long seeds, const FixedInstance* fixed = nullptr);

/// True when every report in the list has zero violations.
bool all_pass(const std::vector<LemmaReport>& reports);

}  // namespace qlab
