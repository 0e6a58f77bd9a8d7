#ifndef PMAC_SPECIAL_FUNCTIONS_HPP
#define PMAC_SPECIAL_FUNCTIONS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmac/channels.hpp"
#include "pmac/game.hpp"

// Exponential-integral machinery and the closed-form ergodic potential
// for i.i.d. complex-Gaussian fading.

namespace pmac {

struct DegenerateParametersError : std::runtime_error {
  int channel;
  explicit DegenerateParametersError(int channel_index)
      : std::runtime_error("ergodic potential: near-coincident scaled powers on channel " +
                           std::to_string(channel_index)),
        channel(channel_index) {}
};

/// zeta(x) = int_0^inf e^{-t}/(x+t) dt = e^x E1(x), with 1/(x+1) < zeta(x) < 1/x.
/// Series for small x, modified Lentz continued fraction otherwise; the CF
/// evaluates e^x E1(x) directly so nothing overflows for large x.
inline double zeta(double x) {
  if (!(x > 0.0)) throw std::domain_error("zeta: argument must be > 0");
  if (x < 1.0) {
    // E1(x) = -gamma - ln x + sum_{n>=1} (-1)^{n+1} x^n / (n n!)
    constexpr double kEulerGamma = 0.57721566490153286060651209008;
    double sum = -kEulerGamma - std::log(x);
    double term = 1.0;
    for (int n = 1; n <= 60; ++n) {
      term *= -x / n;
      double add = -term / n;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return std::exp(x) * sum;
  }
  // e^x E1(x) = 1/(x+1 - 1/(x+3 - 4/(x+5 - 9/(...))))
  const double tiny = 1e-300;
  double f = tiny, c = f, d = 0.0;
  for (int n = 0; n < 300; ++n) {
    double a = (n == 0) ? 1.0 : -static_cast<double>(n) * n;
    double b = x + 2.0 * n + 1.0;
    d = b + a * d;
    if (d == 0.0) d = tiny;
    c = b + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return f;
}

/// Scaled powers r_{ka} = variance * power / noise feeding the closed form.
inline LinkTable<double> scaled_powers(const PowerProfile& profile, const FadingSpec& spec,
                                       const GameConfig& cfg) {
  auto r = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i)
      r[k][i] = spec.variance[k][i] * profile.allocation[k][i] /
                cfg.noise_power[cfg.accessible[k][i]];
  return r;
}

namespace detail {

/// Closed form on explicit per-channel r values. Terms with r == 0 drop out.
/// Active r on a channel must be pairwise separated or the partial-fraction
/// expansion blows up; near-coincident values raise DegenerateParametersError
/// unless jitter_degenerate is set, in which case they get a 1e-5 relative nudge.
inline double ergodic_potential_from_r(const LinkTable<double>& r, const GameConfig& cfg,
                                       bool jitter_degenerate) {
  constexpr double kSeparation = 1e-6;
  double phi = 0.0;
  for (int a = 0; a < cfg.num_channels; ++a) {
    std::vector<double> active;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i)
        if (cfg.accessible[k][i] == a && r[k][i] > 0.0) active.push_back(r[k][i]);
    if (active.empty()) continue;
    bool degenerate = true;
    for (int pass = 0; pass < 3 && degenerate; ++pass) {
      degenerate = false;
      for (std::size_t u = 0; u < active.size() && !degenerate; ++u)
        for (std::size_t w = u + 1; w < active.size(); ++w)
          if (std::abs(1.0 - active[w] / active[u]) < kSeparation) {
            if (!jitter_degenerate) throw DegenerateParametersError(a);
            for (std::size_t j = 0; j < active.size(); ++j)
              active[j] *= 1.0 + 1e-5 * static_cast<double>(j + 1);
            degenerate = true;
            break;
          }
    }
    for (std::size_t u = 0; u < active.size(); ++u) {
      double term = zeta(1.0 / active[u]);
      for (std::size_t w = 0; w < active.size(); ++w)
        if (w != u) term /= 1.0 - active[w] / active[u];
      phi -= cfg.bandwidth[a] * term;
    }
  }
  return phi;
}

}  // namespace detail

inline double ergodic_potential_gaussian(const PowerProfile& profile, const FadingSpec& spec,
                                         const GameConfig& cfg,
                                         bool jitter_degenerate = false) {
  if (spec.kind != FadingKind::GaussianFast)
    throw std::invalid_argument("ergodic_potential_gaussian: spec kind must be GaussianFast");
  return detail::ergodic_potential_from_r(scaled_powers(profile, spec, cfg), cfg,
                                          jitter_degenerate);
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Sample mean of the static potential over independent gain draws.
inline MonteCarloEstimate ergodic_potential_mc(const PowerProfile& profile,
                                               const FadingSpec& spec, const GameConfig& cfg,
                                               long n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("ergodic_potential_mc: need n_samples >= 2");
  spec.validate(cfg);
  std::mt19937_64 rng(seed);
  double mean = 0.0, m2 = 0.0;
  for (long n = 0; n < n_samples; ++n) {
    auto state = detail::draw_gaussian_state(spec, cfg, rng);
    double phi = potential(profile, state, cfg);
    double delta = phi - mean;
    mean += delta / static_cast<double>(n + 1);
    m2 += delta * (phi - mean);
  }
  double var = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

}  // namespace pmac

#endif  // PMAC_SPECIAL_FUNCTIONS_HPP
