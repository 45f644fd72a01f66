#include "qlab/oracles.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace qlab {

StateActionKernel state_action_kernel(const Mdp& mdp, const PolicyMatrix& pi) {
  if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
    throw std::invalid_argument("state_action_kernel: policy shape mismatch");
  const int n = mdp.n_pairs();
  StateActionKernel kernel;
  kernel.matrix.resize(n, n);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int row = mdp.pair_index(s, a);
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2)
          kernel.matrix(row, mdp.pair_index(s2, a2)) = mdp.p(s, a, s2) * pi.probs(s2, a2);
    }
  return kernel;
}

namespace {

double stationarity_residual(const Vec& d, const Mat& P) {
  return (d.transpose() * P - d.transpose()).cwiseAbs().sum();
}

std::optional<Vec> power_iteration(const Mat& P, double tol, long cap) {
  const int n = static_cast<int>(P.rows());
  Vec d = Vec::Constant(n, 1.0 / n);
  for (long it = 0; it < cap; ++it) {
    Vec next = P.transpose() * d;
    next /= next.sum();
    const double delta = (next - d).cwiseAbs().sum();
    d = next;
    if (delta <= tol) return d;
  }
  return std::nullopt;
}

}  // namespace

StationaryDist stationary_distribution(const StateActionKernel& P, double tol) {
  const int n = P.size();
  const Mat& M = P.matrix;

  // Uniqueness: eigenvalue 1 of P must be simple, i.e. rank(I - P^T) = n-1.
  Mat gen = Mat::Identity(n, n) - M.transpose();
  Eigen::ColPivHouseholderQR<Mat> rank_qr(gen);
  rank_qr.setThreshold(1e-10);
  if (rank_qr.rank() < n - 1)
    throw OracleError("stationary_distribution: invariant distribution is not unique", 0.0);

  // Stacked system [I - P^T; 1^T] d = [0; 1], solved by least squares.
  Mat sys(n + 1, n);
  sys.topRows(n) = gen;
  sys.bottomRows(1).setOnes();
  Vec rhs = Vec::Zero(n + 1);
  rhs[n] = 1.0;
  Vec d = sys.colPivHouseholderQr().solve(rhs);

  bool usable = true;
  for (int i = 0; i < n; ++i) {
    if (d[i] < -1e-9 || !std::isfinite(d[i])) usable = false;
    if (d[i] < 0.0) d[i] = 0.0;
  }
  if (usable) {
    d /= d.sum();
    const double res = stationarity_residual(d, M);
    if (res <= std::max(tol, 1e-12)) return {d, res};
  }

  auto fallback = power_iteration(M, 1e-15, 1000000);
  if (fallback) {
    const double res = stationarity_residual(*fallback, M);
    if (res <= std::max(tol, 1e-10)) return {*fallback, res};
    throw OracleError("stationary_distribution: power iteration stalled", res);
  }
  throw OracleError("stationary_distribution: no convergence within iteration cap",
                    usable ? stationarity_residual(d, M) : std::numeric_limits<double>::infinity());
}

Vec bellman_optimality(const Mdp& mdp, const Vec& q) {
  if (q.size() != mdp.n_pairs()) throw std::invalid_argument("bellman_optimality: q size mismatch");
  Vec state_max(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = q[mdp.pair_index(s, 0)];
    for (int a = 1; a < mdp.n_actions; ++a) best = std::max(best, q[mdp.pair_index(s, a)]);
    state_max[s] = best;
  }
  Vec out(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      const double* row = mdp.row(s, a);
      for (int s2 = 0; s2 < mdp.n_states; ++s2) acc += row[s2] * state_max[s2];
      out[mdp.pair_index(s, a)] = mdp.r(s, a) + mdp.gamma * acc;
    }
  return out;
}

Vec solve_q_star(const Mdp& mdp, double tol, double* residual_out) {
  if (!(mdp.gamma < 1.0)) throw std::invalid_argument("solve_q_star: gamma must be < 1");
  const double thresh = mdp.gamma > 0.0 ? tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma) : 0.0;
  Vec q = Vec::Zero(mdp.n_pairs());
  const long cap = 2000000;
  for (long it = 0; it < cap; ++it) {
    Vec next = bellman_optimality(mdp, q);
    const double resid = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (resid <= thresh) {
      const double cert = (bellman_optimality(mdp, q) - q).cwiseAbs().maxCoeff();
      if (residual_out) *residual_out = cert;
      return q;
    }
  }
  throw OracleError("solve_q_star: iteration cap exceeded",
                    (bellman_optimality(mdp, q) - q).cwiseAbs().maxCoeff());
}

namespace {

Vec stationary_under_tabular_policy(const Mdp& mdp, const Vec& q, double epsilon) {
  PolicyMatrix mu = tabular_eps_softmax(q, mdp.n_states, mdp.n_actions, epsilon);
  return stationary_distribution(state_action_kernel(mdp, mu)).dist;
}

}  // namespace

Vec weighted_bellman(const Mdp& mdp, const Vec& q, double epsilon) {
  const Vec d = stationary_under_tabular_policy(mdp, q, epsilon);
  const Vec tq = bellman_optimality(mdp, q);
  return d.cwiseProduct(tq - q) + q;
}

double pseudo_contraction_factor(const Mdp& mdp, const Vec& q, double epsilon) {
  const Vec d = stationary_under_tabular_policy(mdp, q, epsilon);
  return 1.0 - (1.0 - mdp.gamma) * d.minCoeff();
}

namespace {

Vec reward_vector(const Mdp& mdp) {
  Vec r(mdp.n_pairs());
  for (int i = 0; i < mdp.n_pairs(); ++i) r[i] = mdp.reward[i];
  return r;
}

struct DriftParts {
  Vec d;        // stationary distribution of mu_w
  Mat p_greedy;  // state-action kernel of the greedy target policy
};

DriftParts drift_parts(const Mdp& mdp, const FeatureMap& X, const Vec& w,
                       const BehaviorConfig& cfg) {
  PolicyMatrix mu = linear_eps_softmax(w, X, mdp.n_states, mdp.n_actions, cfg);
  Vec d = stationary_distribution(state_action_kernel(mdp, mu)).dist;
  PolicyMatrix greedy = greedy_policy(X.matrix * w, mdp.n_states, mdp.n_actions);
  return {std::move(d), state_action_kernel(mdp, greedy).matrix};
}

}  // namespace

DriftLinear drift_linear(const Mdp& mdp, const FeatureMap& X, const Vec& w,
                         const BehaviorConfig& cfg) {
  DriftParts parts = drift_parts(mdp, X, w, cfg);
  const int n = mdp.n_pairs();
  DriftLinear out;
  out.A = X.matrix.transpose() * parts.d.asDiagonal() *
          (mdp.gamma * parts.p_greedy - Mat::Identity(n, n)) * X.matrix;
  out.b = X.matrix.transpose() * parts.d.cwiseProduct(reward_vector(mdp));
  out.h = out.A * w + out.b;
  return out;
}

Vec drift_tabular(const Mdp& mdp, const Vec& q, double epsilon) {
  const Vec d = stationary_under_tabular_policy(mdp, q, epsilon);
  return d.cwiseProduct(bellman_optimality(mdp, q) - q);
}

NegdefCertificate negdef_certificate(const Mdp& mdp, const FeatureMap& X, const Vec& w,
                                     const BehaviorConfig& cfg) {
  DriftParts parts = drift_parts(mdp, X, w, cfg);
  const int n = mdp.n_pairs();
  const Mat A = X.matrix.transpose() * parts.d.asDiagonal() *
                (mdp.gamma * parts.p_greedy - Mat::Identity(n, n)) * X.matrix;

  Mat cov = X.matrix.transpose() * parts.d.asDiagonal() * X.matrix;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = std::max(0.0, eig.eigenvalues().maxCoeff());

  const double gamma = mdp.gamma;
  const double eps = cfg.epsilon;
  const double bracket = (1.0 - gamma) - eps * gamma * std::sqrt(1.0 / eps + 1.0 / (1.0 - eps));

  NegdefCertificate cert;
  cert.quad = w.dot(A * w);
  cert.beta_formula = bracket * lambda_min -
                      gamma * (1.0 - eps) * (std::log(static_cast<double>(mdp.n_actions)) / cfg.kappa0) *
                          std::sqrt(lambda_max);
  cert.holds = cert.beta_formula > 0.0 && cert.quad <= -cert.beta_formula * w.squaredNorm();
  return cert;
}

double negdef_epsilon_threshold(double gamma) {
  const double one_minus = (1.0 - gamma) * (1.0 - gamma);
  return one_minus / (one_minus + gamma * gamma);
}

MixingProfile mixing_profile(const StateActionKernel& P, int n_max) {
  const int n = P.size();
  const Vec d = stationary_distribution(P).dist;

  MixingProfile profile;
  profile.tv_curve.reserve(n_max + 1);
  // Iterate the deviation matrix P^n - 1 d^T directly: the subtraction
  // happens once at n = 0, so the geometric tail keeps relative precision
  // instead of cancelling O(1) terms.
  Mat deviation = Mat::Identity(n, n) - Vec::Ones(n) * d.transpose();
  for (int step = 0; step <= n_max; ++step) {
    if (step > 0) deviation = deviation * P.matrix;
    double worst = 0.0;
    for (int y = 0; y < n; ++y) worst = std::max(worst, deviation.row(y).cwiseAbs().sum());
    profile.tv_curve.push_back(worst);
  }

  // Log-linear fit over the strictly decreasing prefix, skipping entries at
  // the numerical floor.
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < profile.tv_curve.size(); ++i) {
    if (i > 0 && !(profile.tv_curve[i] < profile.tv_curve[i - 1])) break;
    if (profile.tv_curve[i] > 1e-13)
      points.emplace_back(static_cast<double>(i), std::log(profile.tv_curve[i]));
  }
  if (points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : points) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = points.size();
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    if (slope < 0.0) {
      profile.tau = std::exp(slope);
      profile.c0 = std::exp(intercept);
      profile.fit_ok = true;
    }
  }
  return profile;
}

std::optional<long> MixingProfile::tau_alpha(double alpha) const {
  for (std::size_t i = 0; i < tv_curve.size(); ++i)
    if (tv_curve[i] <= alpha) return static_cast<long>(i);
  if (fit_ok && alpha > 0.0 && c0 > 0.0) {
    const double steps = std::log(alpha / c0) / std::log(tau);
    return std::max(0L, static_cast<long>(std::ceil(steps)));
  }
  return std::nullopt;
}

MoreauResult moreau_value(const Vec& q, double xi) {
  if (!(xi > 0.0)) throw std::invalid_argument("moreau_value: xi must be > 0");
  const int n = static_cast<int>(q.size());
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = std::abs(q[i]);
  std::sort(v.begin(), v.end());

  // Suffix sums: S[k] = sum_{i >= k} v[i]; active set for a clip level m in
  // segment [v[k-1], v[k]] is exactly the indices k..n-1.
  std::vector<double> suffix(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + v[i];

  double best_m = 0.0;
  bool found = false;
  for (int k = 0; k <= n; ++k) {
    const double lo = k == 0 ? 0.0 : v[k - 1];
    const double hi = k == n ? std::numeric_limits<double>::infinity() : v[k];
    const double m_star = suffix[k] / (xi + static_cast<double>(n - k));
    if (m_star >= lo - 1e-15 && m_star <= hi + 1e-15) {
      best_m = std::max(0.0, m_star);
      found = true;
      break;
    }
  }
  if (!found) {
    // Rounding pushed every candidate off its segment; take the best clamped
    // candidate instead.
    auto g = [&](double m) {
      double acc = 0.5 * m * m;
      for (int i = 0; i < n; ++i) {
        const double excess = v[i] - m;
        if (excess > 0.0) acc += excess * excess / (2.0 * xi);
      }
      return acc;
    };
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
      const double lo = k == 0 ? 0.0 : v[k - 1];
      const double hi = k == n ? (n > 0 ? v[n - 1] : 0.0) : v[k];
      const double m = std::clamp(suffix[k] / (xi + static_cast<double>(n - k)), lo, hi);
      if (g(m) < best_val) {
        best_val = g(m);
        best_m = m;
      }
    }
  }

  MoreauResult out;
  out.grad.resize(n);
  double value = 0.5 * best_m * best_m;
  for (int i = 0; i < n; ++i) {
    const double clipped = std::clamp(q[i], -best_m, best_m);
    out.grad[i] = (q[i] - clipped) / xi;
    const double excess = std::abs(q[i]) - best_m;
    if (excess > 0.0) value += excess * excess / (2.0 * xi);
  }
  out.value = value;
  out.m_norm = std::sqrt(2.0 * value);
  return out;
}

MoreauToolkit MoreauToolkit::make(int dim, double xi) {
  if (dim < 1) throw std::invalid_argument("MoreauToolkit: dim must be >= 1");
  if (!(xi > 0.0)) throw std::invalid_argument("MoreauToolkit: xi must be > 0");
  MoreauToolkit tk;
  tk.xi = xi;
  tk.dim = dim;
  tk.l_it = 1.0 / std::sqrt(static_cast<double>(dim));
  tk.u_it = 1.0;
  tk.l_im = std::sqrt(1.0 + xi * tk.l_it * tk.l_it);
  tk.u_im = std::sqrt(1.0 + xi * tk.u_it * tk.u_it);
  return tk;
}

}  // namespace qlab
