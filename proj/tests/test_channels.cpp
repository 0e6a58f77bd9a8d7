#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "pmac/channels.hpp"
#include "pmac/game.hpp"

using namespace pmac;

namespace {

GameConfig cfg_2x2() { return GameConfig::full_access(2, 2); }

// Bessel J0 by its power series plus the large-argument asymptotic form;
// independent of the generator under test.
double bessel_j0(double x) {
  double ax = std::abs(x);
  if (ax < 12.0) {
    double term = 1.0, sum = 1.0;
    double q = 0.25 * x * x;
    for (int m = 1; m < 60; ++m) {
      term *= -q / (static_cast<double>(m) * m);
      sum += term;
      if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    }
    return sum;
  }
  double z = 8.0 / ax;
  double z2 = z * z;
  double p0 = 1.0 - 0.1098628627e-2 * z2;
  double q0 = -0.1562499995e-1 * z + 0.1430488765e-3 * z * z2;
  double xx = ax - 0.785398164;
  return std::sqrt(0.636619772 / ax) * (std::cos(xx) * p0 - std::sin(xx) * q0);
}

}  // namespace

TEST_CASE("fading spec validation") {
  auto cfg = cfg_2x2();
  auto spec = FadingSpec::uniform(cfg, FadingKind::Static, 1.0, 7);
  CHECK_NOTHROW(spec.validate(cfg));

  FadingSpec jakes = spec;
  jakes.kind = FadingKind::Jakes;
  CHECK_THROWS_AS(jakes.validate(cfg), std::invalid_argument);
  jakes.carrier_frequency = 2e9;
  jakes.velocity = {1.39, 1.39};
  jakes.sample_period = 3e-3;
  CHECK_NOTHROW(jakes.validate(cfg));
}

TEST_CASE("doppler and coherence time match known operating points") {
  auto cfg = cfg_2x2();
  FadingSpec spec = FadingSpec::uniform(cfg, FadingKind::Jakes, 1.0, 1);
  spec.carrier_frequency = 2e9;
  spec.sample_period = 3e-3;
  // 5 km/h and 15 km/h at 2 GHz: coherence times near 108 ms and 36 ms.
  spec.velocity = {5.0 / 3.6, 15.0 / 3.6};
  CHECK(spec.max_doppler(0) == doctest::Approx(9.26).epsilon(0.01));
  JakesTrack track(spec, cfg);
  CHECK(track.coherence_time(0) == doctest::Approx(0.108).epsilon(0.01));
  CHECK(track.coherence_time(1) == doctest::Approx(0.036).epsilon(0.01));
}

TEST_CASE("static draw determinism and zero variance") {
  auto cfg = cfg_2x2();
  auto spec = FadingSpec::uniform(cfg, FadingKind::Static, 1.0, 42);
  auto a = draw_static(spec, cfg);
  auto b = draw_static(spec, cfg);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i) CHECK(a.gains[k][i] == b.gains[k][i]);

  auto zero = FadingSpec::uniform(cfg, FadingKind::Static, 0.0, 42);
  auto z = draw_static(zero, cfg);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i) CHECK(z.gains[k][i] == 0.0);

  auto wrong = FadingSpec::uniform(cfg, FadingKind::BlockIID, 1.0, 42);
  CHECK_THROWS_AS(draw_static(wrong, cfg), std::invalid_argument);
}

TEST_CASE("static draw mean gain matches variance") {
  auto cfg = GameConfig::full_access(1, 2);
  FadingSpec spec = FadingSpec::uniform(cfg, FadingKind::Static, 1.7, 0);
  const int n = 100000;
  double sum = 0.0;
  for (int r = 0; r < n; ++r) {
    spec.seed = static_cast<std::uint64_t>(r);
    sum += draw_static(spec, cfg).gains[0][0];
  }
  CHECK(sum / n == doctest::Approx(1.7).epsilon(0.02));
}

TEST_CASE("block sequence is uncorrelated and matches the static marginal") {
  auto cfg = GameConfig::full_access(1, 2);
  auto spec = FadingSpec::uniform(cfg, FadingKind::BlockIID, 1.0, 5);
  CHECK(draw_block_sequence(spec, cfg, 0).empty());

  const int n = 100000;
  auto seq = draw_block_sequence(spec, cfg, n);
  std::vector<double> g(n);
  for (int t = 0; t < n; ++t) g[t] = seq[t].gains[0][0];

  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= n;
  double var = 0.0, cov = 0.0;
  for (int t = 0; t < n; ++t) {
    var += (g[t] - mean) * (g[t] - mean);
    if (t + 1 < n) cov += (g[t] - mean) * (g[t + 1] - mean);
  }
  CHECK(std::abs(cov / var) < 0.01);  // lag-1 autocorrelation

  // Two-sample KS against independent static draws, 1e4 points each.
  const int m = 10000;
  std::vector<double> s1(g.begin(), g.begin() + m), s2;
  FadingSpec st = FadingSpec::uniform(cfg, FadingKind::Static, 1.0, 0);
  for (int r = 0; r < m; ++r) {
    st.seed = 900000 + static_cast<std::uint64_t>(r);
    s2.push_back(draw_static(st, cfg).gains[0][0]);
  }
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < s1.size() && j < s2.size()) {
    if (s1[i] <= s2[j]) ++i; else ++j;
    ks = std::max(ks, std::abs(static_cast<double>(i) / m - static_cast<double>(j) / m));
  }
  double critical = 1.36 * std::sqrt(2.0 / m);  // 5% level, equal sizes
  CHECK(ks < critical);
}

TEST_CASE("block fading source replays the batch generator") {
  auto cfg = cfg_2x2();
  auto spec = FadingSpec::uniform(cfg, FadingKind::BlockIID, 1.0, 77);
  auto batch = draw_block_sequence(spec, cfg, 5);
  BlockFadingSource source(spec, cfg);
  for (int t = 0; t < 5; ++t) {
    auto st = source.next();
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i) CHECK(st.gains[k][i] == batch[t].gains[k][i]);
  }
}

TEST_CASE("jakes track statistics") {
  auto cfg = GameConfig::full_access(1, 2);
  FadingSpec spec = FadingSpec::uniform(cfg, FadingKind::Jakes, 1.0, 3);
  spec.carrier_frequency = 2e9;
  spec.velocity = {5.0 / 3.6};
  spec.sample_period = 1e-3;
  double fd = spec.max_doppler(0);

  // A single 64-oscillator realization carries O(1/sqrt(64)) autocorrelation
  // error from the random arrival angles, so average the correlogram over an
  // ensemble of independent links and seeds (1e5 samples total).
  const int n_seeds = 16;
  const int n = 6250;
  const int max_lag = static_cast<int>(2.0 / fd / spec.sample_period);
  std::vector<double> rho_sum(max_lag + 1, 0.0);
  double mean_g = 0.0;
  long n_links = 0;
  for (int s = 0; s < n_seeds; ++s) {
    spec.seed = 100 + static_cast<std::uint64_t>(s);
    auto track = jakes_track(spec, cfg, n + max_lag);
    for (int link = 0; link < 2; ++link) {
      std::vector<std::complex<double>> h(n + max_lag);
      double denom = 0.0;
      for (int t = 0; t < n + max_lag; ++t) {
        h[t] = (*track[t].coefficients)[0][link];
        CHECK(track[t].gains[0][link] == doctest::Approx(std::norm(h[t])).epsilon(1e-12));
        if (t < n) {
          denom += std::norm(h[t]);
          mean_g += std::norm(h[t]);
        }
      }
      for (int lag = 0; lag <= max_lag; ++lag) {
        std::complex<double> acc = 0.0;
        for (int t = 0; t < n; ++t) acc += h[t] * std::conj(h[t + lag]);
        rho_sum[lag] += acc.real() / denom;
      }
      ++n_links;
    }
  }
  CHECK(mean_g / (static_cast<double>(n) * n_links) == doctest::Approx(1.0).epsilon(0.05));
  for (int lag = 0; lag <= max_lag; lag += std::max(1, max_lag / 40)) {
    double rho = rho_sum[lag] / n_links;
    double ref = bessel_j0(2.0 * std::numbers::pi * fd * lag * spec.sample_period);
    CHECK(std::abs(rho - ref) < 0.05);
  }
}

TEST_CASE("jakes determinism under fixed seed") {
  auto cfg = cfg_2x2();
  FadingSpec spec = FadingSpec::uniform(cfg, FadingKind::Jakes, 1.0, 9);
  spec.carrier_frequency = 2e9;
  spec.velocity = {1.0, 2.0};
  spec.sample_period = 1e-3;
  auto a = jakes_track(spec, cfg, 10);
  auto b = jakes_track(spec, cfg, 10);
  for (int t = 0; t < 10; ++t)
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i) CHECK(a[t].gains[k][i] == b[t].gains[k][i]);
}
