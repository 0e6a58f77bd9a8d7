#ifndef PMAC_GAME_HPP
#define PMAC_GAME_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Data model for the multi-user power-allocation game: who may transmit
// where, with how much power, and the rate/potential functions built on
// top of that.

namespace pmac {

/// Per-(user,channel) table aligned with GameConfig::accessible.
/// values[k][i] belongs to channel accessible[k][i].
template <typename T>
using LinkTable = std::vector<std::vector<T>>;

struct GameConfig {
  int num_users = 0;
  int num_channels = 0;
  std::vector<std::vector<int>> accessible;  // sorted 0-based channel ids per user
  std::vector<double> max_power;             // watts, per user
  std::vector<double> bandwidth;             // Hz, per channel
  std::vector<double> noise_power;           // watts, per channel

  void validate() const {
    if (num_users < 1) throw std::invalid_argument("GameConfig: need at least one user");
    if (num_channels < 1) throw std::invalid_argument("GameConfig: need at least one channel");
    if (static_cast<int>(accessible.size()) != num_users ||
        static_cast<int>(max_power.size()) != num_users)
      throw std::invalid_argument("GameConfig: per-user field size mismatch");
    if (static_cast<int>(bandwidth.size()) != num_channels ||
        static_cast<int>(noise_power.size()) != num_channels)
      throw std::invalid_argument("GameConfig: per-channel field size mismatch");
    for (int k = 0; k < num_users; ++k) {
      if (accessible[k].size() < 2)
        throw std::invalid_argument("GameConfig: user " + std::to_string(k) +
                                    " must access at least 2 channels");
      int prev = -1;
      for (int a : accessible[k]) {
        if (a < 0 || a >= num_channels)
          throw std::invalid_argument("GameConfig: channel id out of range");
        if (a <= prev) throw std::invalid_argument("GameConfig: accessible must be sorted, unique");
        prev = a;
      }
      if (!(max_power[k] > 0.0)) throw std::invalid_argument("GameConfig: max_power must be > 0");
    }
    for (int a = 0; a < num_channels; ++a) {
      if (!(bandwidth[a] > 0.0)) throw std::invalid_argument("GameConfig: bandwidth must be > 0");
      if (!(noise_power[a] > 0.0)) throw std::invalid_argument("GameConfig: noise_power must be > 0");
    }
  }

  int links(int k) const { return static_cast<int>(accessible[k].size()); }

  int total_links() const {
    int q = 0;
    for (const auto& row : accessible) q += static_cast<int>(row.size());
    return q;
  }

  template <typename T>
  LinkTable<T> make_link_table(T fill = T{}) const {
    LinkTable<T> t(num_users);
    for (int k = 0; k < num_users; ++k) t[k].assign(accessible[k].size(), fill);
    return t;
  }

  /// All-access config with unit bandwidths/noise, used all over the tests.
  static GameConfig full_access(int users, int channels, double power = 1.0,
                                double bw = 1.0, double noise = 1.0) {
    GameConfig cfg;
    cfg.num_users = users;
    cfg.num_channels = channels;
    cfg.accessible.resize(users);
    for (int k = 0; k < users; ++k)
      for (int a = 0; a < channels; ++a) cfg.accessible[k].push_back(a);
    cfg.max_power.assign(users, power);
    cfg.bandwidth.assign(channels, bw);
    cfg.noise_power.assign(channels, noise);
    cfg.validate();
    return cfg;
  }
};

struct ChannelState {
  LinkTable<double> gains;                               // |h|^2, dimensionless
  std::optional<LinkTable<std::complex<double>>> coefficients;

  void validate(const GameConfig& cfg) const {
    if (static_cast<int>(gains.size()) != cfg.num_users)
      throw std::invalid_argument("ChannelState: user count mismatch");
    for (int k = 0; k < cfg.num_users; ++k) {
      if (gains[k].size() != cfg.accessible[k].size())
        throw std::invalid_argument("ChannelState: link count mismatch");
      for (double g : gains[k])
        if (!(g >= 0.0)) throw std::invalid_argument("ChannelState: negative gain");
    }
    if (coefficients) {
      for (int k = 0; k < cfg.num_users; ++k)
        for (std::size_t i = 0; i < gains[k].size(); ++i) {
          double g = std::norm((*coefficients)[k][i]);
          double scale = std::max(1.0, gains[k][i]);
          if (std::abs(g - gains[k][i]) > 1e-12 * scale)
            throw std::invalid_argument("ChannelState: gains inconsistent with coefficients");
        }
    }
  }

  static ChannelState from_gains(LinkTable<double> g) { return ChannelState{std::move(g), {}}; }

  static ChannelState from_coefficients(const GameConfig& cfg,
                                        LinkTable<std::complex<double>> h) {
    ChannelState st;
    st.gains = cfg.make_link_table<double>();
    for (std::size_t k = 0; k < h.size(); ++k)
      for (std::size_t i = 0; i < h[k].size(); ++i) st.gains[k][i] = std::norm(h[k][i]);
    st.coefficients = std::move(h);
    return st;
  }
};

/// Point of the product of scaled simplices: sum_a p[k][a] == max_power[k].
/// Construction renormalizes drift below 1e-6 * P_k and rejects anything worse.
struct PowerProfile {
  LinkTable<double> allocation;

  static PowerProfile from_allocation(const GameConfig& cfg, LinkTable<double> alloc) {
    if (static_cast<int>(alloc.size()) != cfg.num_users)
      throw std::invalid_argument("PowerProfile: user count mismatch");
    for (int k = 0; k < cfg.num_users; ++k) {
      if (alloc[k].size() != cfg.accessible[k].size())
        throw std::invalid_argument("PowerProfile: link count mismatch");
      double sum = 0.0;
      for (double p : alloc[k]) {
        if (!(p >= 0.0)) throw std::invalid_argument("PowerProfile: negative power");
        sum += p;
      }
      double pk = cfg.max_power[k];
      if (std::abs(sum - pk) > 1e-6 * pk)
        throw std::invalid_argument("PowerProfile: power budget violated for user " +
                                    std::to_string(k));
      if (std::abs(sum - pk) > 1e-9 * pk) {
        for (double& p : alloc[k]) p *= pk / sum;
      }
    }
    return PowerProfile{std::move(alloc)};
  }

  static PowerProfile uniform(const GameConfig& cfg) {
    auto alloc = cfg.make_link_table<double>();
    for (int k = 0; k < cfg.num_users; ++k) {
      double p = cfg.max_power[k] / static_cast<double>(alloc[k].size());
      for (double& x : alloc[k]) x = p;
    }
    return PowerProfile{std::move(alloc)};
  }

  /// All of user k's power on the given local link index, everyone else uniform.
  static PowerProfile vertex(const GameConfig& cfg, const std::vector<int>& link_of_user) {
    auto alloc = cfg.make_link_table<double>();
    for (int k = 0; k < cfg.num_users; ++k) alloc[k][link_of_user[k]] = cfg.max_power[k];
    return PowerProfile{std::move(alloc)};
  }

  bool interior(double floor = 0.0) const {
    for (const auto& row : allocation)
      for (double p : row)
        if (!(p > floor)) return false;
    return true;
  }
};

/// L1 distance between profiles, optionally normalized per user budget.
inline double profile_distance_l1(const PowerProfile& a, const PowerProfile& b,
                                  const GameConfig* normalize_by = nullptr) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.allocation.size(); ++k) {
    double dk = 0.0;
    for (std::size_t i = 0; i < a.allocation[k].size(); ++i)
      dk += std::abs(a.allocation[k][i] - b.allocation[k][i]);
    d += normalize_by ? dk / normalize_by->max_power[k] : dk;
  }
  return d;
}

/// Total received signal power per channel: sum_k g_{ka} p_{ka}.
inline std::vector<double> received_power(const PowerProfile& profile,
                                          const ChannelState& channels, const GameConfig& cfg) {
  std::vector<double> s(cfg.num_channels, 0.0);
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i)
      s[cfg.accessible[k][i]] += channels.gains[k][i] * profile.allocation[k][i];
  return s;
}

inline LinkTable<double> sinr(const PowerProfile& profile, const ChannelState& channels,
                              const GameConfig& cfg) {
  auto total = received_power(profile, channels, cfg);
  auto out = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) {
      int a = cfg.accessible[k][i];
      double own = channels.gains[k][i] * profile.allocation[k][i];
      out[k][i] = own / (cfg.noise_power[a] + total[a] - own);
    }
  return out;
}

/// Achievable rate of user k in nats/s (natural log, scaled by bandwidth).
inline double utility(const PowerProfile& profile, const ChannelState& channels,
                      const GameConfig& cfg, int k) {
  auto total = received_power(profile, channels, cfg);
  double u = 0.0;
  for (int i = 0; i < cfg.links(k); ++i) {
    int a = cfg.accessible[k][i];
    double own = channels.gains[k][i] * profile.allocation[k][i];
    u += cfg.bandwidth[a] * std::log1p(own / (cfg.noise_power[a] + total[a] - own));
  }
  return u;
}

/// d u_k / d p_{ka}; the denominator includes the user's own received power.
inline LinkTable<double> marginal_utility(const PowerProfile& profile,
                                          const ChannelState& channels, const GameConfig& cfg) {
  auto total = received_power(profile, channels, cfg);
  auto out = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) {
      int a = cfg.accessible[k][i];
      out[k][i] = cfg.bandwidth[a] * channels.gains[k][i] / (cfg.noise_power[a] + total[a]);
    }
  return out;
}

/// Common scalar whose unilateral differences reproduce utility differences;
/// equilibria are its minimizers over the power polytope.
inline double potential(const PowerProfile& profile, const ChannelState& channels,
                        const GameConfig& cfg) {
  auto total = received_power(profile, channels, cfg);
  double phi = 0.0;
  for (int a = 0; a < cfg.num_channels; ++a)
    phi -= cfg.bandwidth[a] * std::log1p(total[a] / cfg.noise_power[a]);
  return phi;
}

/// Q - A - K; positive values flag a non-strictly-convex potential.
inline int degeneracy_index(const GameConfig& cfg) {
  return cfg.total_links() - cfg.num_channels - cfg.num_users;
}

}  // namespace pmac

#endif  // PMAC_GAME_HPP
