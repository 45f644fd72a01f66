#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "qlab/mdp.hpp"
#include "qlab/policies.hpp"

namespace qlab {

/// Thrown when a closed-form computation cannot be completed (singular or
/// non-ergodic kernel, iteration cap exceeded). Carries the residual reached.
struct OracleError : std::runtime_error {
  double residual;
  explicit OracleError(const std::string& what, double residual_ = 0.0)
      : std::runtime_error(what), residual(residual_) {}
};

/// Transition matrix of the state-action chain:
/// P[(s,a),(s',a')] = p(s'|s,a) * pi(a'|s').
struct StateActionKernel {
  Mat matrix;
  int size() const { return static_cast<int>(matrix.rows()); }
};

StateActionKernel state_action_kernel(const Mdp& mdp, const PolicyMatrix& pi);

struct StationaryDist {
  Vec dist;
  double residual = 0.0;  // ||d^T P - d^T||_1
};

/// Unique stationary distribution of an ergodic kernel, by direct solve of
/// (I - P^T) d = 0 with a normalization row, falling back to power iteration.
/// Throws OracleError when the invariant distribution is not unique (rank of
/// I - P^T below n-1) or the fallback fails to converge.
StationaryDist stationary_distribution(const StateActionKernel& P, double tol = 1e-12);

/// (T q)(s,a) = sum_s' p(s'|s,a) [r(s,a) + gamma max_a' q(s',a')].
Vec bellman_optimality(const Mdp& mdp, const Vec& q);

/// Value iteration to the fixed point of T, stopping once
/// ||Tq - q||_inf <= tol*(1-gamma)/(2*gamma), which certifies
/// ||q - q*||_inf <= tol. Throws OracleError past the iteration cap.
Vec solve_q_star(const Mdp& mdp, double tol = 1e-12, double* residual_out = nullptr);

/// Weighted Bellman optimality operator T'q = D_{mu_q}(Tq - q) + q, with
/// mu_q the tabular epsilon-softmax policy and D its stationary state-action
/// distribution.
Vec weighted_bellman(const Mdp& mdp, const Vec& q, double epsilon);

/// Per-q contraction factor of T' toward q*:
/// 1 - (1-gamma) * min_{s,a} d_{mu_q}(s,a), in (0,1) whenever epsilon > 0.
double pseudo_contraction_factor(const Mdp& mdp, const Vec& q, double epsilon);

/// Expected-update decomposition of linear Q-learning at weights w:
/// A(w) = X^T D_{mu_w} (gamma P_{pi_w} - I) X,  b(w) = X^T D_{mu_w} r,
/// h(w) = A(w) w + b(w), with pi_w greedy over Xw.
struct DriftLinear {
  Mat A;
  Vec b;
  Vec h;
};

DriftLinear drift_linear(const Mdp& mdp, const FeatureMap& X, const Vec& w,
                         const BehaviorConfig& cfg);

/// Tabular expected update h(q) = D_{mu_q}(Tq - q) = T'q - q.
Vec drift_tabular(const Mdp& mdp, const Vec& q, double epsilon);

/// Negative-definiteness certificate for A(w). quad = w^T A(w) w;
/// beta_formula = [(1-gamma) - eps*gamma*sqrt(1/eps + 1/(1-eps))] * lambda_min(X^T D X)
///                - gamma*(1-eps) * (ln|A|/kappa0) * sqrt(lambda_max(X^T D X)).
/// When beta_formula > 0 and ||w||_2 >= 1, quad <= -beta_formula*||w||^2 is
/// the claimed inequality; `holds` reports it (meaningful only in that
/// regime).
struct NegdefCertificate {
  double quad = 0.0;
  double beta_formula = 0.0;
  bool holds = false;
};

NegdefCertificate negdef_certificate(const Mdp& mdp, const FeatureMap& X, const Vec& w,
                                     const BehaviorConfig& cfg);

/// Closed-form epsilon threshold below which the bracket term of the
/// certificate is positive: (1-gamma)^2 / ((1-gamma)^2 + gamma^2).
double negdef_epsilon_threshold(double gamma);

/// Geometric-mixing profile of an ergodic kernel.
/// tv_curve[n] = max over start pairs y of sum_y' |P^n(y,y') - d(y')| for
/// n = 0..n_max; (c0, tau) fitted by log-linear least squares over the
/// strictly decreasing prefix of entries above 1e-13.
struct MixingProfile {
  std::vector<double> tv_curve;
  double c0 = 0.0;
  double tau = 0.0;
  bool fit_ok = false;

  /// Fewest steps n with distance-to-stationarity at most alpha: the first
  /// empirical hit within the computed curve, extrapolated through the fitted
  /// c0*tau^n tail when the curve never gets there. nullopt when neither
  /// route resolves.
  std::optional<long> tau_alpha(double alpha) const;
};

MixingProfile mixing_profile(const StateActionKernel& P, int n_max);

/// Moreau envelope of (1/2)||.||_inf^2 with parameter xi:
/// M(q) = inf_u { (1/2)||u||_inf^2 + (1/(2 xi)) ||q - u||_2^2 }.
/// value = M(q), grad = (q - u*)/xi, m_norm = sqrt(2 M(q)) (the smooth norm
/// ||q||_m). Solved exactly: the optimal u clips q to [-m, m], reducing to a
/// convex piecewise-quadratic in the clip level m scanned segment by segment.
struct MoreauResult {
  double value = 0.0;
  Vec grad;
  double m_norm = 0.0;
};

MoreauResult moreau_value(const Vec& q, double xi);

/// Norm-equivalence constants tying ||.||_m to ||.||_inf in a given
/// dimension: l_im*||q||_m <= ||q||_inf <= u_im*||q||_m.
struct MoreauToolkit {
  double xi = 0.25;
  int dim = 0;
  double l_it = 0.0;  // l_it*||q||_2 <= ||q||_inf
  double u_it = 0.0;  // ||q||_inf <= u_it*||q||_2
  double l_im = 0.0;
  double u_im = 0.0;

  static MoreauToolkit make(int dim, double xi);
};

}  // namespace qlab
