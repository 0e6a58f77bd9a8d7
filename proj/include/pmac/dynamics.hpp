#ifndef PMAC_DYNAMICS_HPP
#define PMAC_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmac/channels.hpp"
#include "pmac/equilibrium.hpp"
#include "pmac/game.hpp"
#include "pmac/special_functions.hpp"

// Continuous multiplicative learning flow and its discrete stochastic
// approximation, in static, block-fading and averaged-statistics regimes.

namespace pmac {

inline constexpr double kStepBoundSentinel = 1e300;  // "no bound" (zero field)

struct StepBoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StepSchedule {
  enum class Kind { Constant, Harmonic } kind = Kind::Constant;
  double delta = 0.1;  // Constant value, or Harmonic numerator delta0

  double at(long n) const {  // n >= 1
    return kind == Kind::Constant ? delta : delta / static_cast<double>(n);
  }
  static StepSchedule constant(double d) { return {Kind::Constant, d}; }
  static StepSchedule harmonic(double d0) { return {Kind::Harmonic, d0}; }
};

struct Trajectory {
  std::vector<double> times;  // or step indices
  std::vector<PowerProfile> profiles;
  std::vector<ChannelState> channel_states;        // optional, may be empty
  std::map<std::string, std::vector<double>> metrics;

  std::size_t size() const { return times.size(); }
  const PowerProfile& back() const { return profiles.back(); }
};

/// p_{ka} (v_{ka} - v_k) with v_k the power-weighted user average; the
/// components sum to zero per user, so the flow stays on the simplex.
inline LinkTable<double> replicator_field(const PowerProfile& profile,
                                          const ChannelState& channels,
                                          const GameConfig& cfg) {
  auto v = marginal_utility(profile, channels, cfg);
  auto field = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k) {
    double avg = 0.0;
    for (int i = 0; i < cfg.links(k); ++i)
      avg += profile.allocation[k][i] * v[k][i] / cfg.max_power[k];
    for (int i = 0; i < cfg.links(k); ++i)
      field[k][i] = profile.allocation[k][i] * (v[k][i] - avg);
  }
  return field;
}

/// Interference-free bound on the marginals; any step below 1/bound keeps
/// the discrete scheme inside the simplex.
inline double safe_step_bound(const GameConfig& cfg, const ChannelState& channels) {
  double vmax = 0.0;
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) {
      int a = cfg.accessible[k][i];
      vmax = std::max(vmax, cfg.bandwidth[a] * channels.gains[k][i] / cfg.noise_power[a]);
    }
  return vmax > 0.0 ? 1.0 / vmax : kStepBoundSentinel;
}

namespace detail {

inline PowerProfile euler_step(const PowerProfile& p, const LinkTable<double>& marginals,
                               const GameConfig& cfg, double delta) {
  auto out = p.allocation;
  for (int k = 0; k < cfg.num_users; ++k) {
    double avg = 0.0;
    for (int i = 0; i < cfg.links(k); ++i)
      avg += p.allocation[k][i] * marginals[k][i] / cfg.max_power[k];
    double sum = 0.0;
    for (int i = 0; i < cfg.links(k); ++i) {
      out[k][i] = p.allocation[k][i] * (1.0 + delta * (marginals[k][i] - avg));
      if (out[k][i] < 0.0) out[k][i] = 0.0;  // rounding at the bound
      sum += out[k][i];
    }
    for (int i = 0; i < cfg.links(k); ++i) out[k][i] *= cfg.max_power[k] / sum;
  }
  return PowerProfile{std::move(out)};
}

}  // namespace detail

inline PowerProfile discrete_step(const PowerProfile& p, const ChannelState& channels,
                                  const GameConfig& cfg, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("discrete_step: delta must be > 0");
  if (delta > safe_step_bound(cfg, channels))
    throw StepBoundError("discrete_step: step exceeds simplex-invariance bound");
  return detail::euler_step(p, marginal_utility(p, channels, cfg), cfg, delta);
}

struct OdeOptions {
  double dt = 0.0;        // 0 -> 0.01 / max interference-free marginal
  int record_every = 1;
};

/// Classical 4th-order integration of the learning flow in log coordinates
/// (p = budget-scaled softmax), which keeps positivity and the simplex
/// exactly up to rounding.
inline Trajectory integrate_ode(const PowerProfile& p0, const ChannelState& channels,
                                const GameConfig& cfg, double t_end,
                                OdeOptions opts = {}) {
  if (!p0.interior())
    throw std::invalid_argument("integrate_ode: initial profile must be strictly interior");
  double dt = opts.dt;
  if (dt <= 0.0) dt = 0.01 * safe_step_bound(cfg, channels);
  if (!(dt > 0.0) || dt > t_end) dt = t_end;

  const int n_users = cfg.num_users;
  auto y = cfg.make_link_table<double>();
  for (int k = 0; k < n_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) y[k][i] = std::log(p0.allocation[k][i]);

  auto to_profile = [&](const LinkTable<double>& logc) {
    auto alloc = cfg.make_link_table<double>();
    for (int k = 0; k < n_users; ++k) {
      double m = *std::max_element(logc[k].begin(), logc[k].end());
      double sum = 0.0;
      for (int i = 0; i < cfg.links(k); ++i) {
        alloc[k][i] = std::exp(logc[k][i] - m);
        sum += alloc[k][i];
      }
      for (int i = 0; i < cfg.links(k); ++i) alloc[k][i] *= cfg.max_power[k] / sum;
    }
    return PowerProfile{std::move(alloc)};
  };

  auto field = [&](const LinkTable<double>& logc) {
    auto p = to_profile(logc);
    auto v = marginal_utility(p, channels, cfg);
    auto f = cfg.make_link_table<double>();
    for (int k = 0; k < n_users; ++k) {
      double avg = 0.0;
      for (int i = 0; i < cfg.links(k); ++i)
        avg += p.allocation[k][i] * v[k][i] / cfg.max_power[k];
      for (int i = 0; i < cfg.links(k); ++i) f[k][i] = v[k][i] - avg;
    }
    return f;
  };

  auto axpy = [&](const LinkTable<double>& base, const LinkTable<double>& dir, double c) {
    auto out = base;
    for (int k = 0; k < n_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) out[k][i] += c * dir[k][i];
    return out;
  };

  Trajectory traj;
  auto record = [&](double t) {
    auto p = to_profile(y);
    traj.times.push_back(t);
    traj.metrics["potential"].push_back(potential(p, channels, cfg));
    traj.profiles.push_back(std::move(p));
  };

  long n_steps = static_cast<long>(std::ceil(t_end / dt));
  record(0.0);
  for (long n = 0; n < n_steps; ++n) {
    double h = std::min(dt, t_end - n * dt);
    auto k1 = field(y);
    auto k2 = field(axpy(y, k1, 0.5 * h));
    auto k3 = field(axpy(y, k2, 0.5 * h));
    auto k4 = field(axpy(y, k3, h));
    for (int k = 0; k < n_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i)
        y[k][i] += h / 6.0 * (k1[k][i] + 2.0 * k2[k][i] + 2.0 * k3[k][i] + k4[k][i]);
    if ((n + 1) % opts.record_every == 0 || n + 1 == n_steps)
      record(std::min((n + 1) * dt, t_end));
  }
  return traj;
}

struct BlockFadingOptions {
  int record_every = 1;
  bool record_states = false;
  double step_safety = 0.95;  // fraction of the per-block invariance bound
};

/// Stochastic learning with a fresh channel draw per step. The scheduled
/// step is clipped to the current block's invariance bound.
inline Trajectory run_block_fading(const PowerProfile& p0, const GameConfig& cfg,
                                   FadingSpec spec, const StepSchedule& schedule,
                                   long n_steps, std::uint64_t seed,
                                   BlockFadingOptions opts = {}) {
  spec.seed = seed;
  BlockFadingSource source(spec, cfg);
  Trajectory traj;
  PowerProfile p = p0;
  traj.times.push_back(0.0);
  traj.profiles.push_back(p);
  traj.metrics["delta"].push_back(0.0);
  for (long n = 1; n <= n_steps; ++n) {
    auto state = source.next();
    double delta = std::min(schedule.at(n), opts.step_safety * safe_step_bound(cfg, state));
    if (delta > 0.0) p = detail::euler_step(p, marginal_utility(p, state, cfg), cfg, delta);
    if (n % opts.record_every == 0 || n == n_steps) {
      traj.times.push_back(static_cast<double>(n));
      traj.profiles.push_back(p);
      traj.metrics["delta"].push_back(delta);
      if (opts.record_states) traj.channel_states.push_back(state);
    }
  }
  return traj;
}

enum class MeanMarginalMethod { ClosedFormGradient, MonteCarlo };

struct MeanMarginals {
  LinkTable<double> mean;
  LinkTable<double> std_error;  // zero for the closed-form route
};

inline MeanMarginals mean_marginal_utility(const PowerProfile& profile, const FadingSpec& spec,
                                           const GameConfig& cfg, MeanMarginalMethod method,
                                           long n_samples = 0, std::uint64_t seed = 0) {
  if (spec.kind != FadingKind::GaussianFast)
    throw std::invalid_argument("mean_marginal_utility: spec kind must be GaussianFast");
  spec.validate(cfg);
  if (method == MeanMarginalMethod::ClosedFormGradient)
    return {ergodic_potential_gradient(profile, spec, cfg), cfg.make_link_table<double>()};
  if (n_samples < 2) throw std::invalid_argument("mean_marginal_utility: need n_samples >= 2");
  std::mt19937_64 rng(seed);
  auto mean = cfg.make_link_table<double>();
  auto m2 = cfg.make_link_table<double>();
  for (long n = 0; n < n_samples; ++n) {
    auto state = detail::draw_gaussian_state(spec, cfg, rng);
    auto v = marginal_utility(profile, state, cfg);
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        double d = v[k][i] - mean[k][i];
        mean[k][i] += d / static_cast<double>(n + 1);
        m2[k][i] += d * (v[k][i] - mean[k][i]);
      }
  }
  auto se = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i)
      se[k][i] = std::sqrt(m2[k][i] / static_cast<double>(n_samples - 1) /
                           static_cast<double>(n_samples));
  return {std::move(mean), std::move(se)};
}

/// Invariance bound for the averaged scheme; mean marginals never exceed
/// the interference-free value at mean gain.
inline double mean_safe_step_bound(const GameConfig& cfg, const FadingSpec& spec) {
  double vmax = 0.0;
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) {
      int a = cfg.accessible[k][i];
      vmax = std::max(vmax, cfg.bandwidth[a] * spec.variance[k][i] / cfg.noise_power[a]);
    }
  return vmax > 0.0 ? 1.0 / vmax : kStepBoundSentinel;
}

/// Noise-free averaged iteration driven by the mean marginals.
inline Trajectory run_mean_dynamics(const PowerProfile& p0, const GameConfig& cfg,
                                    const FadingSpec& spec, double delta, long n_steps,
                                    int record_every = 1) {
  if (spec.kind != FadingKind::GaussianFast)
    throw std::invalid_argument("run_mean_dynamics: spec kind must be GaussianFast");
  if (!(delta > 0.0)) throw std::invalid_argument("run_mean_dynamics: delta must be > 0");
  if (delta > mean_safe_step_bound(cfg, spec))
    throw StepBoundError("run_mean_dynamics: step exceeds simplex-invariance bound");
  Trajectory traj;
  PowerProfile p = p0;
  traj.times.push_back(0.0);
  traj.profiles.push_back(p);
  for (long n = 1; n <= n_steps; ++n) {
    auto vbar = ergodic_potential_gradient(p, spec, cfg);
    p = detail::euler_step(p, vbar, cfg, delta);
    if (n % record_every == 0 || n == n_steps) {
      traj.times.push_back(static_cast<double>(n));
      traj.profiles.push_back(p);
    }
  }
  return traj;
}

}  // namespace pmac

#endif  // PMAC_DYNAMICS_HPP
