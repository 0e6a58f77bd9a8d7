#ifndef PMAC_CHANNELS_HPP
#define PMAC_CHANNELS_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "pmac/game.hpp"

// Channel realization generators: a single static draw, uncorrelated
// block sequences, and a time-correlated sum-of-sinusoids Rayleigh track.
// The GaussianFast kind never emits realizations; it only parameterizes
// the closed-form ergodic machinery and its Monte-Carlo oracle.

namespace pmac {

inline constexpr double kSpeedOfLight = 2.998e8;  // m/s

enum class FadingKind { Static, BlockIID, GaussianFast, Jakes };

struct FadingSpec {
  FadingKind kind = FadingKind::Static;
  LinkTable<double> variance;      // E|h|^2 per link
  double carrier_frequency = 0.0;  // Hz, Jakes only
  std::vector<double> velocity;    // m/s per user, Jakes only
  double sample_period = 0.0;      // s, Jakes/BlockIID
  std::uint64_t seed = 0;

  void validate(const GameConfig& cfg) const {
    if (static_cast<int>(variance.size()) != cfg.num_users)
      throw std::invalid_argument("FadingSpec: variance user count mismatch");
    for (int k = 0; k < cfg.num_users; ++k) {
      if (variance[k].size() != cfg.accessible[k].size())
        throw std::invalid_argument("FadingSpec: variance link count mismatch");
      for (double v : variance[k])
        if (!(v >= 0.0)) throw std::invalid_argument("FadingSpec: negative variance");
    }
    if (kind == FadingKind::Jakes) {
      if (!(carrier_frequency > 0.0))
        throw std::invalid_argument("FadingSpec: Jakes needs carrier_frequency > 0");
      if (static_cast<int>(velocity.size()) != cfg.num_users)
        throw std::invalid_argument("FadingSpec: Jakes needs per-user velocity");
      for (double v : velocity)
        if (!(v > 0.0)) throw std::invalid_argument("FadingSpec: velocity must be > 0");
    }
    if (kind == FadingKind::Jakes || kind == FadingKind::BlockIID) {
      if (!(sample_period > 0.0))
        throw std::invalid_argument("FadingSpec: sample_period must be > 0");
    }
  }

  double max_doppler(int user) const {
    return velocity[user] * carrier_frequency / kSpeedOfLight;
  }

  static FadingSpec uniform(const GameConfig& cfg, FadingKind kind, double var,
                            std::uint64_t seed) {
    FadingSpec spec;
    spec.kind = kind;
    spec.variance = cfg.make_link_table<double>(var);
    spec.seed = seed;
    if (kind == FadingKind::BlockIID) spec.sample_period = 1.0;
    return spec;
  }
};

namespace detail {

// Box-Muller; keeps draws identical across standard library implementations.
inline std::complex<double> complex_gaussian(std::mt19937_64& rng, double mean_square) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u1 = 0.0;
  do { u1 = unif(rng); } while (u1 <= 0.0);
  double u2 = unif(rng);
  double radius = std::sqrt(-mean_square * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

inline ChannelState draw_gaussian_state(const FadingSpec& spec, const GameConfig& cfg,
                                        std::mt19937_64& rng) {
  LinkTable<std::complex<double>> h(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k) {
    h[k].resize(cfg.accessible[k].size());
    for (std::size_t i = 0; i < h[k].size(); ++i)
      h[k][i] = complex_gaussian(rng, spec.variance[k][i]);
  }
  return ChannelState::from_coefficients(cfg, std::move(h));
}

}  // namespace detail

inline ChannelState draw_static(const FadingSpec& spec, const GameConfig& cfg) {
  if (spec.kind != FadingKind::Static)
    throw std::invalid_argument("draw_static: spec kind must be Static");
  spec.validate(cfg);
  std::mt19937_64 rng(spec.seed);
  return detail::draw_gaussian_state(spec, cfg, rng);
}

inline std::vector<ChannelState> draw_block_sequence(const FadingSpec& spec,
                                                     const GameConfig& cfg, int n_blocks) {
  if (spec.kind != FadingKind::BlockIID)
    throw std::invalid_argument("draw_block_sequence: spec kind must be BlockIID");
  spec.validate(cfg);
  std::mt19937_64 rng(spec.seed);
  std::vector<ChannelState> out;
  out.reserve(n_blocks);
  for (int n = 0; n < n_blocks; ++n) out.push_back(detail::draw_gaussian_state(spec, cfg, rng));
  return out;
}

/// Stateful block-by-block generator for long learning runs.
class BlockFadingSource {
 public:
  BlockFadingSource(const FadingSpec& spec, const GameConfig& cfg) : spec_(spec), cfg_(cfg) {
    if (spec.kind != FadingKind::BlockIID)
      throw std::invalid_argument("BlockFadingSource: spec kind must be BlockIID");
    spec.validate(cfg);
    rng_.seed(spec.seed);
  }
  ChannelState next() { return detail::draw_gaussian_state(spec_, cfg_, rng_); }

 private:
  FadingSpec spec_;
  GameConfig cfg_;
  std::mt19937_64 rng_;
};

/// Sum of equal-power sinusoids with randomized arrival angles and phases,
/// independent per link. Autocorrelation of h approximates J0(2 pi f_d tau)
/// and |h| is Rayleigh for a large oscillator count.
class JakesTrack {
 public:
  static constexpr int kOscillators = 64;

  JakesTrack(const FadingSpec& spec, const GameConfig& cfg) : spec_(spec), cfg_(cfg) {
    if (spec.kind != FadingKind::Jakes)
      throw std::invalid_argument("JakesTrack: spec kind must be Jakes");
    spec.validate(cfg);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
    doppler_.resize(cfg.num_users);
    angle_freq_ = cfg.make_link_table<std::vector<double>>();
    phase_ = cfg.make_link_table<std::vector<double>>();
    for (int k = 0; k < cfg.num_users; ++k) {
      doppler_[k] = spec.max_doppler(k);
      for (int i = 0; i < cfg.links(k); ++i) {
        angle_freq_[k][i].resize(kOscillators);
        phase_[k][i].resize(kOscillators);
        for (int m = 0; m < kOscillators; ++m) {
          angle_freq_[k][i][m] =
              2.0 * std::numbers::pi * doppler_[k] * std::cos(unif(rng));
          phase_[k][i][m] = unif(rng);
        }
      }
    }
  }

  ChannelState at(double t) const {
    LinkTable<std::complex<double>> h(cfg_.num_users);
    double norm = 1.0 / std::sqrt(static_cast<double>(kOscillators));
    for (int k = 0; k < cfg_.num_users; ++k) {
      h[k].resize(cfg_.accessible[k].size());
      for (int i = 0; i < cfg_.links(k); ++i) {
        std::complex<double> sum = 0.0;
        for (int m = 0; m < kOscillators; ++m) {
          double arg = angle_freq_[k][i][m] * t + phase_[k][i][m];
          sum += std::complex<double>(std::cos(arg), std::sin(arg));
        }
        h[k][i] = std::sqrt(spec_.variance[k][i]) * norm * sum;
      }
    }
    return ChannelState::from_coefficients(cfg_, std::move(h));
  }

  double coherence_time(int user) const { return 1.0 / doppler_[user]; }

 private:
  FadingSpec spec_;
  GameConfig cfg_;
  std::vector<double> doppler_;
  LinkTable<std::vector<double>> angle_freq_;
  LinkTable<std::vector<double>> phase_;
};

inline std::vector<ChannelState> jakes_track(const FadingSpec& spec, const GameConfig& cfg,
                                             int n_steps) {
  JakesTrack track(spec, cfg);
  std::vector<ChannelState> out;
  out.reserve(n_steps);
  for (int n = 0; n < n_steps; ++n) out.push_back(track.at(n * spec.sample_period));
  return out;
}

}  // namespace pmac

#endif  // PMAC_CHANNELS_HPP
