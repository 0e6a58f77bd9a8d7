#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pmac/game.hpp"
#include "test_helpers.hpp"

using namespace pmac;

namespace {

GameConfig two_by_two() { return GameConfig::full_access(2, 2); }

// Unvectorized scalar reference for the SINR of one link.
double sinr_reference(const PowerProfile& p, const ChannelState& ch, const GameConfig& cfg,
                      int k, int i) {
  int a = cfg.accessible[k][i];
  double interference = 0.0;
  for (int l = 0; l < cfg.num_users; ++l) {
    if (l == k) continue;
    for (int j = 0; j < cfg.links(l); ++j)
      if (cfg.accessible[l][j] == a) interference += ch.gains[l][j] * p.allocation[l][j];
  }
  return ch.gains[k][i] * p.allocation[k][i] / (cfg.noise_power[a] + interference);
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = two_by_two();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.total_links() == 4);

  GameConfig bad = cfg;
  bad.accessible[0] = {0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.accessible[1] = {1, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.noise_power[0] = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("power profile construction") {
  auto cfg = two_by_two();
  auto u = PowerProfile::uniform(cfg);
  CHECK(u.allocation[0][0] == doctest::Approx(0.5));
  CHECK(u.interior());

  // Small drift renormalizes, large drift rejects.
  auto drift = u.allocation;
  drift[0][0] += 1e-8;
  auto fixed = PowerProfile::from_allocation(cfg, drift);
  CHECK(fixed.allocation[0][0] + fixed.allocation[0][1] == doctest::Approx(1.0).epsilon(1e-12));
  drift[0][0] += 1e-3;
  CHECK_THROWS_AS(PowerProfile::from_allocation(cfg, drift), std::invalid_argument);

  auto v = PowerProfile::vertex(cfg, {0, 1});
  CHECK(v.allocation[0][0] == 1.0);
  CHECK(v.allocation[1][0] == 0.0);
  CHECK_FALSE(v.interior());
}

TEST_CASE("channel state coefficient consistency") {
  auto cfg = two_by_two();
  LinkTable<std::complex<double>> h = {{{1.0, 1.0}, {0.0, 2.0}}, {{3.0, 0.0}, {1.0, -1.0}}};
  auto st = ChannelState::from_coefficients(cfg, h);
  CHECK(st.gains[0][0] == doctest::Approx(2.0));
  CHECK(st.gains[1][0] == doctest::Approx(9.0));
  CHECK_NOTHROW(st.validate(cfg));
  st.gains[0][0] += 1e-6;
  CHECK_THROWS_AS(st.validate(cfg), std::invalid_argument);
}

TEST_CASE("sinr trivial cases") {
  // Single user, g = p = noise = 1 on each channel: SINR = 1.
  auto cfg1 = GameConfig::full_access(1, 2, 2.0);
  auto ones = ChannelState::from_gains(cfg1.make_link_table<double>(1.0));
  auto p1 = PowerProfile::uniform(cfg1);
  auto s1 = sinr(p1, ones, cfg1);
  CHECK(s1[0][0] == doctest::Approx(1.0));

  // Two symmetric users, all power split evenly: each sees the other as noise.
  auto cfg = two_by_two();
  auto ch = ChannelState::from_gains(cfg.make_link_table<double>(1.0));
  auto p = PowerProfile::vertex(cfg, {0, 0});
  auto s = sinr(p, ch, cfg);
  CHECK(s[0][0] == doctest::Approx(0.5));
  CHECK(s[1][0] == doctest::Approx(0.5));
}

TEST_CASE("sinr matches scalar oracle on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto cfg = test::random_game(rng);
    auto ch = test::random_gains(cfg, rng);
    auto p = test::random_profile(cfg, rng);
    auto s = sinr(p, ch, cfg);
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i)
        CHECK(s[k][i] == doctest::Approx(sinr_reference(p, ch, cfg, k, i)).epsilon(1e-12));
  }
}

TEST_CASE("utility examples") {
  auto cfg = GameConfig::full_access(1, 2);
  auto p = PowerProfile::vertex(cfg, {0});
  auto ch = ChannelState::from_gains({{1.0, 0.0}});
  CHECK(utility(p, ch, cfg, 0) == doctest::Approx(std::log(2.0)));

  auto zeros = ChannelState::from_gains(cfg.make_link_table<double>(0.0));
  CHECK(utility(p, zeros, cfg, 0) == doctest::Approx(0.0));

  // Direct sum oracle on a random 3-user instance.
  std::mt19937_64 rng(12);
  auto cfg3 = GameConfig::full_access(3, 3);
  auto ch3 = test::random_gains(cfg3, rng);
  auto p3 = test::random_profile(cfg3, rng);
  auto s = sinr(p3, ch3, cfg3);
  for (int k = 0; k < 3; ++k) {
    double ref = 0.0;
    for (int i = 0; i < 3; ++i) ref += cfg3.bandwidth[i] * std::log(1.0 + s[k][i]);
    CHECK(utility(p3, ch3, cfg3, k) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("marginal utility trivial cases") {
  auto cfg = GameConfig::full_access(1, 2);
  auto p = PowerProfile::vertex(cfg, {0});
  auto ch = ChannelState::from_gains({{1.0, 0.0}});
  auto v = marginal_utility(p, ch, cfg);
  CHECK(v[0][0] == doctest::Approx(0.5));  // b g / (noise + g p) = 1/2
  CHECK(v[0][1] == doctest::Approx(0.0));  // zero gain
}

TEST_CASE("marginal utility matches finite differences") {
  std::mt19937_64 rng(13);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = test::random_game(rng);
    auto ch = test::random_gains(cfg, rng);
    auto p = test::random_profile(cfg, rng);
    auto v = marginal_utility(p, ch, cfg);
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        // Off-simplex perturbation of the raw coordinate; utility and
        // potential are defined on the ambient orthant.
        auto lo = p, hi = p;
        lo.allocation[k][i] -= h;
        hi.allocation[k][i] += h;
        double fd_u = (utility(hi, ch, cfg, k) - utility(lo, ch, cfg, k)) / (2.0 * h);
        double fd_phi = -(potential(hi, ch, cfg) - potential(lo, ch, cfg)) / (2.0 * h);
        double scale = std::max(1.0, std::abs(v[k][i]));
        CHECK(std::abs(fd_u - v[k][i]) <= 1e-6 * scale);
        CHECK(std::abs(fd_phi - v[k][i]) <= 1e-6 * scale);
      }
  }
}

TEST_CASE("potential trivial values") {
  auto cfg = GameConfig::full_access(1, 2);
  auto p = PowerProfile::vertex(cfg, {0});
  auto zeros = ChannelState::from_gains(cfg.make_link_table<double>(0.0));
  CHECK(potential(p, zeros, cfg) == doctest::Approx(0.0));
  auto ch = ChannelState::from_gains({{1.0, 0.0}});
  CHECK(potential(p, ch, cfg) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("exact potential identity on random unilateral deviations") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    auto cfg = test::random_game(rng);
    auto ch = test::random_gains(cfg, rng);
    auto p = test::random_profile(cfg, rng);
    auto p2 = p;
    std::uniform_int_distribution<int> user(0, cfg.num_users - 1);
    int k = user(rng);
    auto dev = test::random_profile(cfg, rng);
    p2.allocation[k] = dev.allocation[k];
    double lhs = utility(p2, ch, cfg, k) - utility(p, ch, cfg, k);
    double rhs = potential(p, ch, cfg) - potential(p2, ch, cfg);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(potential(p, ch, cfg))));
  }
}

TEST_CASE("potential convex along segments") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = test::random_game(rng);
    auto ch = test::random_gains(cfg, rng);
    auto p = test::random_profile(cfg, rng);
    auto p2 = test::random_profile(cfg, rng);
    double lam = unif(rng);
    auto mid = p;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i)
        mid.allocation[k][i] = lam * p.allocation[k][i] + (1.0 - lam) * p2.allocation[k][i];
    CHECK(potential(mid, ch, cfg) <=
          lam * potential(p, ch, cfg) + (1.0 - lam) * potential(p2, ch, cfg) + 1e-12);
  }
}

TEST_CASE("degeneracy index") {
  CHECK(degeneracy_index(GameConfig::full_access(2, 2)) == 0);
  CHECK(degeneracy_index(GameConfig::full_access(3, 2)) == 1);
  GameConfig cfg;
  cfg.num_users = 2;
  cfg.num_channels = 3;
  cfg.accessible = {{0, 1}, {1, 2}};
  cfg.max_power = {1.0, 1.0};
  cfg.bandwidth = {1.0, 1.0, 1.0};
  cfg.noise_power = {1.0, 1.0, 1.0};
  cfg.validate();
  CHECK(degeneracy_index(cfg) == -1);
}

TEST_CASE("profile distance") {
  auto cfg = two_by_two();
  auto a = PowerProfile::vertex(cfg, {0, 0});
  auto b = PowerProfile::vertex(cfg, {1, 0});
  CHECK(profile_distance_l1(a, b) == doctest::Approx(2.0));
  CHECK(profile_distance_l1(a, b, &cfg) == doctest::Approx(2.0));
  CHECK(profile_distance_l1(a, a) == doctest::Approx(0.0));
}
