#include "qlab/verify.hpp"

#include <cmath>

#include "qlab/oracles.hpp"
#include "qlab/policies.hpp"
#include "qlab/rng.hpp"

namespace qlab {

namespace {

constexpr double kSlackTol = 1e-9;

double gaussian(CounterRng& rng) {
  double u1 = rng.next_double();
  while (u1 <= 0.0) u1 = rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vec gaussian_vec(CounterRng& rng, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = gaussian(rng);
  return v;
}

Mdp instance_mdp(const FixedInstance* fixed, CounterRng& rng, std::uint64_t seed,
                 int max_states = 5, int max_actions = 3, double gamma_lo = 0.5,
                 double gamma_hi = 0.95) {
  if (fixed) return fixed->mdp;
  const int n_states = 2 + static_cast<int>(rng.next_u64() % (max_states - 1));
  const int n_actions = 2 + static_cast<int>(rng.next_u64() % (max_actions - 1));
  return make_random_mdp(seed, n_states, n_actions, rng.uniform(gamma_lo, gamma_hi));
}

Vec random_q(CounterRng& rng, int n) {
  Vec q(n);
  for (int i = 0; i < n; ++i) q[i] = rng.uniform(-3.0, 3.0);
  return q;
}

/// One incremental update H(w, y) for y = (s, a, s'), computed exactly the
/// way a learner step would, independent of the matrix algebra in
/// drift_linear.
Vec h_update(const Mdp& mdp, const FeatureMap& X, const Vec& w, int s, int a, int s2) {
  double max_next = X.matrix.row(s2 * mdp.n_actions).dot(w);
  for (int a2 = 1; a2 < mdp.n_actions; ++a2)
    max_next = std::max(max_next, X.matrix.row(s2 * mdp.n_actions + a2).dot(w));
  const double delta =
      mdp.r(s, a) + mdp.gamma * max_next - X.matrix.row(s * mdp.n_actions + a).dot(w);
  return delta * X.matrix.row(s * mdp.n_actions + a).transpose();
}

}  // namespace

bool all_pass(const std::vector<LemmaReport>& reports) {
  for (const auto& report : reports)
    if (report.violations > 0) return false;
  return true;
}

std::vector<LemmaReport> verify_pseudo_contraction(long seeds, const FixedInstance* fixed) {
  LemmaReport contraction{.lemma = "pseudo-contraction"};
  for (long i = 0; i < seeds; ++i) {
    CounterRng rng = CounterRng::for_stream(1000 + i, 7);
    const Mdp mdp = instance_mdp(fixed, rng, 1000 + i);
    const double epsilon = rng.uniform(0.05, 1.0);
    const Vec q = random_q(rng, mdp.n_pairs());
    const Vec q_star = solve_q_star(mdp, 1e-12);
    const double factor = pseudo_contraction_factor(mdp, q, epsilon);
    const double lhs = (weighted_bellman(mdp, q, epsilon) - q_star).cwiseAbs().maxCoeff();
    const double rhs = factor * (q - q_star).cwiseAbs().maxCoeff() + kSlackTol;
    contraction.note(lhs - rhs, 1000 + i);
  }
  return {contraction};
}

std::vector<LemmaReport> verify_fixed_point(long seeds, const FixedInstance* fixed) {
  LemmaReport operator_fp{.lemma = "weighted-bellman-fixed-point"};
  LemmaReport drift_fp{.lemma = "tabular-drift-zero-at-q-star"};
  for (long i = 0; i < seeds; ++i) {
    CounterRng rng = CounterRng::for_stream(2000 + i, 7);
    const Mdp mdp = instance_mdp(fixed, rng, 2000 + i);
    const double epsilon = rng.uniform(0.05, 1.0);
    const Vec q_star = solve_q_star(mdp, 1e-12);
    operator_fp.note((weighted_bellman(mdp, q_star, epsilon) - q_star).cwiseAbs().maxCoeff() -
                         kSlackTol,
                     2000 + i);
    drift_fp.note(drift_tabular(mdp, q_star, epsilon).cwiseAbs().maxCoeff() - kSlackTol, 2000 + i);
  }
  return {operator_fp, drift_fp};
}

std::vector<LemmaReport> verify_negdef(long seeds, const FixedInstance* fixed) {
  LemmaReport quad{.lemma = "negative-definiteness"};
  LemmaReport inner{.lemma = "drift-inner-product"};
  const BehaviorConfig cfg{1e-5, 1e4};
  constexpr int kWeightsPerInstance = 100;

  for (long i = 0; i < seeds; ++i) {
    CounterRng rng = CounterRng::for_stream(3000 + i, 7);
    Mdp mdp;
    FeatureMap features;
    if (fixed) {
      mdp = fixed->mdp;
      if (!fixed->features) throw std::invalid_argument("negdef suite needs features");
      features = *fixed->features;
    } else {
      const int n_states = 2 + static_cast<int>(rng.next_u64() % 3);
      mdp = make_random_mdp(3000 + i, n_states, 2, 0.9);
      // Near-greedy behavior leaves one well-weighted pair per state, so the
      // feature dimension must not exceed |S| for X^T D X to stay well
      // conditioned in the small-epsilon regime.
      features.dim = n_states;
      features.matrix.resize(mdp.n_pairs(), features.dim);
      for (int r = 0; r < mdp.n_pairs(); ++r)
        for (int c = 0; c < features.dim; ++c) features.matrix(r, c) = gaussian(rng);
    }

    const double c_inner = static_cast<double>(mdp.n_states) * mdp.n_states * mdp.n_actions *
                           features.feature_bound() * mdp.reward_bound();

    for (int k = 0; k < kWeightsPerInstance; ++k) {
      Vec w = gaussian_vec(rng, features.dim);
      w *= std::exp(rng.uniform(0.0, std::log(100.0))) / w.norm();  // ||w|| in [1, 100]

      const NegdefCertificate cert = negdef_certificate(mdp, features, w, cfg);
      if (cert.beta_formula <= 0.0) continue;  // inconclusive regime, nothing claimed
      quad.note(cert.quad - (-cert.beta_formula * w.squaredNorm() + kSlackTol), 3000 + i);

      const DriftLinear drift = drift_linear(mdp, features, w, cfg);
      inner.note(w.dot(drift.h) -
                     (-cert.beta_formula * w.squaredNorm() + c_inner * w.norm() + kSlackTol),
                 3000 + i);
    }
  }
  return {quad, inner};
}

namespace {

double golden_section_moreau(const Vec& q, double xi) {
  auto g = [&](double m) {
    double acc = 0.5 * m * m;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const double excess = std::abs(q[i]) - m;
      if (excess > 0.0) acc += excess * excess / (2.0 * xi);
    }
    return acc;
  };
  double lo = 0.0, hi = q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
  if (hi == 0.0) return 0.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double ga = g(a), gb = g(b);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    if (ga < gb) {
      hi = b;
      b = a;
      gb = ga;
      a = hi - phi * (hi - lo);
      ga = g(a);
    } else {
      lo = a;
      a = b;
      ga = gb;
      b = lo + phi * (hi - lo);
      gb = g(b);
    }
  }
  return g(0.5 * (lo + hi));
}

}  // namespace

std::vector<LemmaReport> verify_moreau(long n_vectors, long n_drift_pairs,
                                       const FixedInstance* fixed) {
  LemmaReport smooth{.lemma = "moreau-smoothness"};
  LemmaReport norm_eq{.lemma = "moreau-norm-equivalence"};
  LemmaReport grad_self{.lemma = "moreau-grad-self-inner"};
  LemmaReport grad_cross{.lemma = "moreau-grad-cross-inner"};
  LemmaReport grad_fd{.lemma = "moreau-grad-finite-difference"};
  LemmaReport golden{.lemma = "moreau-golden-section-agreement"};

  constexpr int kDim = 8;
  const double xis[] = {0.1, 0.25, 1.0};
  CounterRng rng = CounterRng::for_stream(4000, 7);

  for (long i = 0; i < n_vectors; ++i) {
    for (const double xi : xis) {
      const Vec x = random_q(rng, kDim);
      const Vec y = random_q(rng, kDim);
      const MoreauResult mx = moreau_value(x, xi);
      const MoreauResult my = moreau_value(y, xi);
      const MoreauToolkit tk = MoreauToolkit::make(kDim, xi);

      smooth.note(my.value -
                      (mx.value + mx.grad.dot(y - x) + (y - x).squaredNorm() / xi + kSlackTol),
                  i);

      const double inf_norm = x.cwiseAbs().maxCoeff();
      norm_eq.note(tk.l_im * mx.m_norm - (inf_norm + kSlackTol), i);
      norm_eq.note(inf_norm - (tk.u_im * mx.m_norm + kSlackTol), i);

      grad_self.note(mx.m_norm * mx.m_norm - kSlackTol - mx.grad.dot(x), i);
      grad_cross.note(mx.grad.dot(y) - (mx.m_norm * my.m_norm + kSlackTol), i);

      golden.note(std::abs(mx.value - golden_section_moreau(x, xi)) - 1e-10, i);

      // Central finite differences, skipping coordinates near the clip level
      // where the envelope's curvature jumps. The prox is u* = x - xi*grad,
      // whose largest magnitude recovers the clip level.
      const double h = 1e-6;
      const double m_level = (x - xi * mx.grad).cwiseAbs().maxCoeff();
      for (int c = 0; c < kDim; ++c) {
        if (std::abs(std::abs(x[c]) - m_level) < 10 * h) continue;
        Vec xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        const double fd = (moreau_value(xp, xi).value - moreau_value(xm, xi).value) / (2 * h);
        const double tol = std::max(1e-4 * std::abs(fd), 1e-7);
        grad_fd.note(std::abs(mx.grad[c] - fd) - tol, i);
      }
    }
  }

  // Drift inner product through the envelope: for xi small enough that
  // 1 - (u_im/l_im) * factor stays positive,
  // <grad M(q - q*), h(q)> <= -(1 - (u_im/l_im) factor) ||q - q*||_m^2.
  LemmaReport drift_inner{.lemma = "tabular-drift-moreau-inner-product"};
  for (long i = 0; i < n_drift_pairs; ++i) {
    CounterRng pair_rng = CounterRng::for_stream(4100 + i, 7);
    const Mdp mdp = instance_mdp(fixed, pair_rng, 4100 + i);
    const double epsilon = pair_rng.uniform(0.05, 1.0);
    const Vec q = random_q(pair_rng, mdp.n_pairs());
    const Vec q_star = solve_q_star(mdp, 1e-12);
    const double factor = pseudo_contraction_factor(mdp, q, epsilon);

    // Largest xi keeping the coefficient positive, halved for headroom.
    const int n = mdp.n_pairs();
    const double c2 = 1.0 / (factor * factor);
    double xi = 0.25;
    if (c2 < static_cast<double>(n)) xi = std::min(0.25, 0.5 * (c2 - 1.0) / (1.0 - c2 / n));
    const MoreauToolkit tk = MoreauToolkit::make(n, xi);
    const double coef = 1.0 - (tk.u_im / tk.l_im) * factor;
    if (!(coef > 0.0)) continue;

    const MoreauResult env = moreau_value(q - q_star, xi);
    const Vec h = drift_tabular(mdp, q, epsilon);
    drift_inner.note(env.grad.dot(h) - (-coef * env.m_norm * env.m_norm + kSlackTol),
                     4100 + i);
  }

  return {smooth, norm_eq, grad_self, grad_cross, grad_fd, golden, drift_inner};
}

std::vector<LemmaReport> verify_drift(long n_mdps, long n_weights, long mc_steps,
                                      const FixedInstance* fixed) {
  LemmaReport closed_form{.lemma = "drift-closed-form-expectation"};
  LemmaReport monte_carlo{.lemma = "drift-monte-carlo"};
  const BehaviorConfig cfg{0.3, 10.0};

  for (long i = 0; i < n_mdps; ++i) {
    CounterRng rng = CounterRng::for_stream(5000 + i, 7);
    Mdp mdp;
    FeatureMap features;
    if (fixed) {
      mdp = fixed->mdp;
      features = fixed->features ? *fixed->features : identity_features(mdp);
    } else {
      const int n_states = 2 + static_cast<int>(rng.next_u64() % 3);
      mdp = make_random_mdp(5000 + i, n_states, 2, rng.uniform(0.5, 0.9));
      features.dim = std::min(4, mdp.n_pairs());
      features.matrix.resize(mdp.n_pairs(), features.dim);
      for (int r = 0; r < mdp.n_pairs(); ++r)
        for (int c = 0; c < features.dim; ++c) features.matrix(r, c) = gaussian(rng);
    }

    for (long k = 0; k < n_weights; ++k) {
      const Vec w = gaussian_vec(rng, features.dim);
      const DriftLinear drift = drift_linear(mdp, features, w, cfg);

      PolicyMatrix mu = linear_eps_softmax(w, features, mdp.n_states, mdp.n_actions, cfg);
      const Vec d = stationary_distribution(state_action_kernel(mdp, mu)).dist;

      // Two-path: direct expectation over the finite Y space.
      Vec expect = Vec::Zero(features.dim);
      for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
          for (int s2 = 0; s2 < mdp.n_states; ++s2) {
            const double weight = d[mdp.pair_index(s, a)] * mdp.p(s, a, s2);
            if (weight > 0.0) expect += weight * h_update(mdp, features, w, s, a, s2);
          }
      closed_form.note((expect - drift.h).cwiseAbs().maxCoeff() - kSlackTol, 5000 + i);

      // Monte Carlo on the stationary chain; batch means absorb the
      // autocorrelation in the standard errors.
      const long n_batches = 1000;
      const long batch_len = std::max(1L, mc_steps / n_batches);
      std::vector<double> mu_rows(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
      for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) mu_rows[mdp.pair_index(s, a)] = mu.probs(s, a);

      std::vector<double> d_flat(d.data(), d.data() + d.size());
      int pair = rng.categorical(d_flat);
      int s = pair / mdp.n_actions, a = pair % mdp.n_actions;

      Mat batch_means(n_batches, features.dim);
      for (long b = 0; b < n_batches; ++b) {
        Vec acc = Vec::Zero(features.dim);
        for (long step = 0; step < batch_len; ++step) {
          const int s2 = rng.categorical(std::span<const double>(mdp.row(s, a), mdp.n_states));
          acc += h_update(mdp, features, w, s, a, s2);
          const int a2 = rng.categorical(std::span<const double>(
              mu_rows.data() + static_cast<std::size_t>(s2) * mdp.n_actions, mdp.n_actions));
          s = s2;
          a = a2;
        }
        batch_means.row(b) = acc.transpose() / static_cast<double>(batch_len);
      }

      for (int c = 0; c < features.dim; ++c) {
        const double mean = batch_means.col(c).mean();
        const double ss = (batch_means.col(c).array() - mean).square().sum();
        const double se = std::sqrt(ss / (n_batches - 1) / n_batches);
        monte_carlo.note(std::abs(mean - drift.h[c]) - 3.0 * se, 5000 + i);
      }
    }
  }
  return {closed_form, monte_carlo};
}

std::vector<LemmaReport> verify_mixing(long seeds, const FixedInstance* fixed) {
  LemmaReport fit{.lemma = "mixing-geometric-fit"};
  LemmaReport monotone{.lemma = "mixing-tv-monotone"};
  LemmaReport tau_alpha{.lemma = "mixing-tau-alpha-monotone"};
  LemmaReport decay{.lemma = "mixing-ergodic-decay"};

  // The 1e-13 fit floor leaves the last usable curve entries with relative
  // noise around 1e-3, which feeds through the regression as a few 1e-6 of
  // tau error for fast-mixing kernels; the random sweep gets headroom for
  // that, the reference kernel does not need it.
  auto check_two_state = [&fit](double a, double b, double tol, long seed) {
    StateActionKernel kernel;
    kernel.matrix.resize(2, 2);
    kernel.matrix << 1 - a, a, b, 1 - b;
    const MixingProfile profile = mixing_profile(kernel, 40);
    const double expected = std::abs(1.0 - a - b);
    fit.note(profile.fit_ok ? std::abs(profile.tau - expected) - tol : 1.0, seed);
  };

  check_two_state(0.3, 0.4, 1e-6, -1);  // closed-form second eigenvalue 0.3
  for (long i = 0; i < seeds; ++i) {
    CounterRng rng = CounterRng::for_stream(6000 + i, 7);
    double a = rng.uniform(0.05, 0.95), b = rng.uniform(0.05, 0.95);
    if (std::abs(1.0 - a - b) < 0.02) a = std::min(0.95, a + 0.05);
    check_two_state(a, b, 2e-5, 6000 + i);

    const Mdp mdp = instance_mdp(fixed, rng, 6000 + i);
    const StateActionKernel kernel =
        state_action_kernel(mdp, uniform_policy(mdp.n_states, mdp.n_actions));
    const MixingProfile profile = mixing_profile(kernel, 30);
    for (std::size_t n = 1; n < profile.tv_curve.size(); ++n)
      monotone.note(profile.tv_curve[n] - profile.tv_curve[n - 1] - 1e-12, 6000 + i);

    // The instance chain itself must reach stationarity: tau_alpha resolves
    // for one-step mixers through the curve and for geometric decay through
    // the fit, but stays unresolved on a non-mixing (e.g. periodic) chain.
    decay.note(profile.tau_alpha(1e-8).has_value() ? -1.0 : 1.0, 6000 + i);

    long prev = -1;
    bool first = true;
    for (double alpha = 1e-6; alpha <= 1.0; alpha *= 10.0) {
      const auto steps = profile.tau_alpha(alpha);
      if (!steps) continue;
      if (!first) tau_alpha.note(static_cast<double>(*steps - prev), 6000 + i);
      prev = *steps;
      first = false;
    }
  }
  return {fit, monotone, tau_alpha, decay};
}

}  // namespace qlab
