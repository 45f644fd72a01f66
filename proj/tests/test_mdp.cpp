#include <doctest.h>

#include <numeric>
#include <set>

#include "qlab/mdp.hpp"
#include "qlab/rng.hpp"

using namespace qlab;

namespace {

Mdp two_state_chain() {
  Mdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.transition = {0.5, 0.5, 0.5, 0.5};
  mdp.reward = {1.0, 0.0};
  mdp.initial_dist = {1.0, 0.0};
  return mdp;
}

}  // namespace

TEST_CASE("validate_mdp accepts a well-formed chain") {
  const MdpValidationReport report = validate_mdp(two_state_chain());
  CHECK(report.ok);
  CHECK(report.violations.empty());
}

TEST_CASE("validate_mdp reports a sub-stochastic row with its deficit") {
  Mdp mdp = two_state_chain();
  mdp.p(0, 0, 1) = 0.4;  // row now sums to 0.9
  const MdpValidationReport report = validate_mdp(mdp);
  REQUIRE_FALSE(report.ok);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "row-stochastic");
  CHECK(report.violations[0].location == "p[0][0]");
  CHECK(report.violations[0].magnitude == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("validate_mdp rejects gamma at the boundary") {
  Mdp mdp = two_state_chain();
  mdp.gamma = 1.0;
  const MdpValidationReport report = validate_mdp(mdp);
  REQUIRE_FALSE(report.ok);
  CHECK(report.violations[0].constraint == "gamma<1");
}

TEST_CASE("baird instance matches its defining constants") {
  const auto [mdp, features] = make_baird();
  CHECK(mdp.gamma == 0.99);
  CHECK(mdp.n_states == 7);
  CHECK(mdp.n_actions == 2);
  for (int s = 0; s < 7; ++s)
    for (int a = 0; a < 2; ++a) {
      CHECK(mdp.r(s, a) == 0.0);
      CHECK(mdp.p(s, a, 6) == 1.0);
    }
  CHECK(mdp.p(2, 1, 6) == 1.0);
  CHECK(validate_mdp(mdp).ok);

  CHECK(features.dim == 16);
  CHECK(features.matrix.rows() == 14);
  // Overparameterized state features, stacked per action block.
  CHECK(features.matrix(mdp.pair_index(0, 0), 0) == 2.0);
  CHECK(features.matrix(mdp.pair_index(0, 0), 7) == 1.0);
  CHECK(features.matrix(mdp.pair_index(6, 0), 6) == 1.0);
  CHECK(features.matrix(mdp.pair_index(6, 0), 7) == 2.0);
  CHECK(features.matrix(mdp.pair_index(0, 1), 8) == 2.0);
  CHECK(features.matrix(mdp.pair_index(0, 1), 15) == 1.0);
  CHECK(features.matrix.row(mdp.pair_index(3, 0)).tail(8).norm() == 0.0);
}

TEST_CASE("baird construction is byte-stable across calls") {
  const auto [mdp1, feat1] = make_baird();
  const auto [mdp2, feat2] = make_baird();
  CHECK(mdp1.transition == mdp2.transition);
  CHECK(mdp1.reward == mdp2.reward);
  CHECK(mdp1.initial_dist == mdp2.initial_dist);
  CHECK((feat1.matrix - feat2.matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random mdp is deterministic for a fixed seed") {
  const Mdp a = make_random_mdp(42, 4, 3, 0.8);
  const Mdp b = make_random_mdp(42, 4, 3, 0.8);
  CHECK(a.transition == b.transition);
  CHECK(a.reward == b.reward);
  CHECK(a.initial_dist == b.initial_dist);
  const Mdp c = make_random_mdp(43, 4, 3, 0.8);
  CHECK(a.transition != c.transition);
}

TEST_CASE("random mdp validates across 1000 seeds") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Mdp mdp = make_random_mdp(seed, 2 + seed % 4, 1 + seed % 3, 0.9);
    const MdpValidationReport report = validate_mdp(mdp);
    REQUIRE(report.ok);
  }
}

TEST_CASE("random mdp rejects invalid gamma and counts") {
  CHECK_THROWS_AS(make_random_mdp(0, 3, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_random_mdp(0, 3, 2, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_random_mdp(0, 0, 2, 0.5), std::invalid_argument);
}

TEST_CASE("random mdp state chain is irreducible and aperiodic") {
  // Brute-force certificate on the uniform-policy state chain: full pairwise
  // reachability plus gcd of cycle lengths equal to one.
  const Mdp mdp = make_random_mdp(1, 3, 2, 0.9);
  const int n = mdp.n_states;
  std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
  for (int s = 0; s < n; ++s)
    for (int s2 = 0; s2 < n; ++s2) {
      double p = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) p += mdp.p(s, a, s2) / mdp.n_actions;
      edge[s][s2] = p > 0.0;
      CHECK(p > 0.0);  // strictly positive rows by construction
    }

  // Reachability closure.
  auto reach = edge;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) REQUIRE(reach[i][j]);

  // Cycle lengths through state 0 up to length n, via path enumeration.
  std::set<int> cycle_lengths;
  std::vector<std::vector<bool>> step = edge;
  for (int len = 1; len <= n; ++len) {
    if (step[0][0]) cycle_lengths.insert(len);
    std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (step[i][k])
          for (int j = 0; j < n; ++j) next[i][j] = next[i][j] || edge[k][j];
    step = next;
  }
  int gcd = 0;
  for (int len : cycle_lengths) gcd = std::gcd(gcd, len);
  CHECK(gcd == 1);
}

TEST_CASE("identity features are the identity map on q") {
  const Mdp mdp = make_random_mdp(3, 2, 2, 0.7);
  const FeatureMap features = identity_features(mdp);
  CHECK(features.dim == 4);
  CHECK((features.matrix - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);

  // Row for (s=1, a=0) is the unit vector at index 2 under row-major order.
  CHECK(features.matrix(mdp.pair_index(1, 0), 2) == 1.0);
  CHECK(features.matrix.row(mdp.pair_index(1, 0)).sum() == 1.0);

  CounterRng rng = CounterRng::for_stream(9, 0);
  Vec q(4);
  for (int i = 0; i < 4; ++i) q[i] = rng.uniform(-2, 2);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a)
      CHECK(features.matrix.row(mdp.pair_index(s, a)).dot(q) == q[mdp.pair_index(s, a)]);
}

TEST_CASE("pair index round-trips with (s,a) decomposition") {
  for (int n_actions : {1, 2, 5}) {
    Mdp mdp;
    mdp.n_states = 6;
    mdp.n_actions = n_actions;
    for (int s = 0; s < 6; ++s)
      for (int a = 0; a < n_actions; ++a) {
        const auto [s2, a2] = Mdp::pair_to_sa(mdp.pair_index(s, a), n_actions);
        CHECK(s2 == s);
        CHECK(a2 == a);
      }
  }
}
