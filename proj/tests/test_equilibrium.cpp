#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pmac/equilibrium.hpp"
#include "test_helpers.hpp"

using namespace pmac;

namespace {

// Exhaustive minimizer of the 2-user 2-channel potential over the product of
// 1-simplices: coarse grid then local refinement, fully independent of the
// mirror-descent solver.
PowerProfile grid_search_2x2(const GameConfig& cfg, const ChannelState& ch) {
  auto eval = [&](double x, double y) {
    auto p = PowerProfile::from_allocation(
        cfg, {{x, cfg.max_power[0] - x}, {y, cfg.max_power[1] - y}});
    return potential(p, ch, cfg);
  };
  double bx = 0.0, by = 0.0, best = eval(0.0, 0.0);
  double lo_x = 0.0, hi_x = cfg.max_power[0], lo_y = 0.0, hi_y = cfg.max_power[1];
  double step_x = cfg.max_power[0] * 1e-3, step_y = cfg.max_power[1] * 1e-3;
  for (int round = 0; round < 4; ++round) {
    for (double x = lo_x; x <= hi_x + 1e-15; x += step_x)
      for (double y = lo_y; y <= hi_y + 1e-15; y += step_y) {
        double xx = std::min(x, cfg.max_power[0]), yy = std::min(y, cfg.max_power[1]);
        double v = eval(xx, yy);
        if (v < best) {
          best = v;
          bx = xx;
          by = yy;
        }
      }
    lo_x = std::max(0.0, bx - 2.0 * step_x);
    hi_x = std::min(cfg.max_power[0], bx + 2.0 * step_x);
    lo_y = std::max(0.0, by - 2.0 * step_y);
    hi_y = std::min(cfg.max_power[1], by + 2.0 * step_y);
    step_x *= 0.01;
    step_y *= 0.01;
  }
  return PowerProfile::from_allocation(
      cfg, {{bx, cfg.max_power[0] - bx}, {by, cfg.max_power[1] - by}});
}

}  // namespace

TEST_CASE("single user symmetric water filling") {
  auto cfg = GameConfig::full_access(1, 2);
  auto ch = ChannelState::from_gains({{1.0, 1.0}});
  auto eq = solve_static(cfg, ch, 1e-10);
  CHECK(eq.profile.allocation[0][0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(eq.kkt_residual <= 1e-10);
  CHECK(eq.support[0].size() == 2);
}

TEST_CASE("single user asymmetric water filling against closed form") {
  // Two channels, b = 1, noise 1, gains g1 > g2; interior optimum satisfies
  // g1/(1+g1 p1) = g2/(1+g2 p2), a linear system in (p1, p2).
  auto cfg = GameConfig::full_access(1, 2);
  double g1 = 2.0, g2 = 1.0;
  auto ch = ChannelState::from_gains({{g1, g2}});
  auto eq = solve_static(cfg, ch, 1e-11);
  double p1 = (1.0 + 1.0 / g2 - 1.0 / g1) / 2.0;  // 0.75, strictly interior
  CHECK(eq.profile.allocation[0][0] == doctest::Approx(p1).epsilon(1e-7));
}

TEST_CASE("solve_static matches grid search on random 2x2 games") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    auto cfg = GameConfig::full_access(2, 2);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    for (double& b : cfg.bandwidth) b = unif(rng);
    for (double& s : cfg.noise_power) s = unif(rng);
    for (double& p : cfg.max_power) p = unif(rng);
    auto ch = test::random_gains(cfg, rng);
    auto eq = solve_static(cfg, ch, 1e-10);
    auto oracle = grid_search_2x2(cfg, ch);
    CHECK(profile_distance_l1(eq.profile, oracle) <= 1e-3);
  }
}

TEST_CASE("equilibrium satisfies randomized Nash deviations") {
  std::mt19937_64 rng(32);
  auto cfg = test::random_game(rng);
  auto ch = test::random_gains(cfg, rng);
  auto eq = solve_static(cfg, ch, 1e-10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<int> user(0, cfg.num_users - 1);
    int k = user(rng);
    auto deviant = eq.profile;
    deviant.allocation[k] = test::random_profile(cfg, rng).allocation[k];
    CHECK(utility(eq.profile, ch, cfg, k) >= utility(deviant, ch, cfg, k) - 1e-8);
  }
}

TEST_CASE("kkt residual definition") {
  auto cfg = GameConfig::full_access(1, 2);
  auto p = PowerProfile::from_allocation(cfg, {{0.75, 0.25}});
  LinkTable<double> v = {{1.0, 2.0}};
  auto [res, level] = kkt_residual(p, v, cfg);
  CHECK(level[0] == doctest::Approx(1.25));
  CHECK(res == doctest::Approx(0.75));  // on-support gap |2 - 1.25|
}

TEST_CASE("re-solving from the solution is a fixed point") {
  std::mt19937_64 rng(33);
  auto cfg = test::random_game(rng);
  auto ch = test::random_gains(cfg, rng);
  auto eq = solve_static(cfg, ch, 1e-10);
  auto again = solve_static(cfg, ch, 1e-10, &eq.profile);
  CHECK(profile_distance_l1(eq.profile, again.profile) <= 1e-7);
}

TEST_CASE("warm start from a vertex can still move") {
  auto cfg = GameConfig::full_access(1, 2);
  auto ch = ChannelState::from_gains({{1.0, 1.0}});
  auto vertex = PowerProfile::vertex(cfg, {0});
  auto eq = solve_static(cfg, ch, 1e-10, &vertex);
  CHECK(eq.profile.allocation[0][0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("uniqueness probe on continuous draws") {
  std::mt19937_64 rng(34);
  auto cfg = GameConfig::full_access(3, 2);  // positive degeneracy index
  auto ch = test::random_gains(cfg, rng);
  auto probe = uniqueness_probe(cfg, ch, 8, 1e-4, 99);
  CHECK(probe.unique_within_tol);
  CHECK(probe.spread <= 1e-4);
  CHECK_THROWS_AS(uniqueness_probe(cfg, ch, 1, 1e-4), std::invalid_argument);
}

TEST_CASE("hand-built degenerate instance reported honestly") {
  // Equal gain rows on both channels: any per-user split with the same
  // channel totals is optimal; the probe must not pretend uniqueness.
  auto cfg = GameConfig::full_access(2, 2);
  auto ch = ChannelState::from_gains({{1.0, 1.0}, {1.0, 1.0}});
  auto probe = uniqueness_probe(cfg, ch, 6, 1e-6, 5);
  CHECK(probe.spread >= 0.0);  // value reported either way
  // The aggregate per-channel received power is still unique.
  for (const auto& sol : probe.solutions) {
    auto s = received_power(sol.profile, ch, cfg);
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("support multigraph construction and acyclicity") {
  auto cfg3 = GameConfig::full_access(1, 3);
  auto p = PowerProfile::uniform(cfg3);
  auto g = support_multigraph(p, cfg3, 1e-6);
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0] == std::pair{0, 1});
  CHECK(g.edges[1] == std::pair{0, 2});
  CHECK(is_acyclic(g));

  auto cfg = GameConfig::full_access(2, 2);
  auto both = PowerProfile::uniform(cfg);
  auto g2 = support_multigraph(both, cfg, 1e-6);
  CHECK(g2.edges.size() == 2);  // multiedge 0-1 twice
  CHECK_FALSE(is_acyclic(g2));

  auto vertex = PowerProfile::vertex(cfg, {0, 1});
  CHECK(support_multigraph(vertex, cfg, 1e-6).edges.empty());
  CHECK(is_acyclic(support_multigraph(vertex, cfg, 1e-6)));
  CHECK_THROWS_AS(support_multigraph(vertex, cfg, 0.0), std::invalid_argument);
}

TEST_CASE("equilibrium supports are acyclic on random games") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = test::random_game(rng, 5, 5);
    auto ch = test::random_gains(cfg, rng);
    auto eq = solve_static(cfg, ch, 1e-10);
    double thr = 1e-6 * *std::max_element(cfg.max_power.begin(), cfg.max_power.end());
    CHECK(is_acyclic(support_multigraph(eq.profile, cfg, thr)));
  }
}

TEST_CASE("solve_ergodic basics") {
  auto cfg = GameConfig::full_access(1, 2);
  auto spec = FadingSpec::uniform(cfg, FadingKind::GaussianFast, 1.0, 0);
  auto eq = solve_ergodic(cfg, spec, 1e-9);
  CHECK(eq.profile.allocation[0][0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(eq.kkt_residual <= 1e-9);

  auto wrong = FadingSpec::uniform(cfg, FadingKind::Static, 1.0, 0);
  CHECK_THROWS_AS(solve_ergodic(cfg, wrong, 1e-9), std::invalid_argument);
}

TEST_CASE("solve_ergodic agrees with monte carlo potential comparison") {
  // The closed-form minimizer must not be beaten (beyond noise) by random
  // feasible points under the Monte-Carlo potential.
  std::mt19937_64 rng(36);
  auto cfg = GameConfig::full_access(2, 2);
  FadingSpec spec = FadingSpec::uniform(cfg, FadingKind::GaussianFast, 0.0, 0);
  spec.variance = {{1.3, 0.4}, {0.6, 2.1}};
  auto eq = solve_ergodic(cfg, spec, 1e-9);
  auto at_eq = ergodic_potential_mc(eq.profile, spec, cfg, 200000, 8);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = test::random_profile(cfg, rng);
    auto at_p = ergodic_potential_mc(p, spec, cfg, 200000, 9 + trial);
    double noise = 3.0 * std::hypot(at_eq.std_error, at_p.std_error);
    CHECK(at_eq.estimate <= at_p.estimate + noise);
  }
}

TEST_CASE("sum capacity basics") {
  auto cfg = GameConfig::full_access(1, 2);
  auto zeros = ChannelState::from_gains(cfg.make_link_table<double>(0.0));
  CHECK(sum_capacity(cfg, zeros) == doctest::Approx(0.0));

  std::mt19937_64 rng(37);
  auto ch = test::random_gains(cfg, rng);
  double c1 = sum_capacity(cfg, ch);
  auto twice = ch;
  for (auto& row : twice.gains)
    for (double& g : row) g *= 2.0;
  CHECK(sum_capacity(cfg, twice) >= c1 - 1e-9);

  // Single user: -potential at the solver optimum equals the best rate found
  // by a fine 1-D scan.
  double best = 0.0;
  for (double x = 0.0; x <= 1.0 + 1e-12; x += 1e-4) {
    auto p = PowerProfile::from_allocation(cfg, {{x, 1.0 - x}});
    best = std::max(best, utility(p, ch, cfg, 0));
  }
  CHECK(sum_capacity(cfg, ch) == doctest::Approx(best).epsilon(1e-6));
}
