#ifndef PMAC_SERIALIZATION_HPP
#define PMAC_SERIALIZATION_HPP

#include <complex>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pmac/channels.hpp"
#include "pmac/dynamics.hpp"
#include "pmac/equilibrium.hpp"
#include "pmac/game.hpp"

// JSON bindings for the scenario-facing types and CSV writers for
// trajectories and channel tracks.

namespace pmac {

using nlohmann::json;

inline void to_json(json& j, const GameConfig& cfg) {
  j = json{{"num_users", cfg.num_users},     {"num_channels", cfg.num_channels},
           {"accessible", cfg.accessible},   {"max_power", cfg.max_power},
           {"bandwidth", cfg.bandwidth},     {"noise_power", cfg.noise_power}};
}

inline void from_json(const json& j, GameConfig& cfg) {
  j.at("num_users").get_to(cfg.num_users);
  j.at("num_channels").get_to(cfg.num_channels);
  j.at("accessible").get_to(cfg.accessible);
  j.at("max_power").get_to(cfg.max_power);
  j.at("bandwidth").get_to(cfg.bandwidth);
  j.at("noise_power").get_to(cfg.noise_power);
  cfg.validate();
}

inline std::string to_string(FadingKind kind) {
  switch (kind) {
    case FadingKind::Static: return "Static";
    case FadingKind::BlockIID: return "BlockIID";
    case FadingKind::GaussianFast: return "GaussianFast";
    case FadingKind::Jakes: return "Jakes";
  }
  throw std::logic_error("unknown fading kind");
}

inline FadingKind fading_kind_from_string(const std::string& s) {
  if (s == "Static") return FadingKind::Static;
  if (s == "BlockIID") return FadingKind::BlockIID;
  if (s == "GaussianFast") return FadingKind::GaussianFast;
  if (s == "Jakes") return FadingKind::Jakes;
  throw std::invalid_argument("unknown fading kind: " + s);
}

inline void to_json(json& j, const FadingSpec& spec) {
  j = json{{"kind", to_string(spec.kind)}, {"variance", spec.variance}, {"seed", spec.seed}};
  if (spec.kind == FadingKind::Jakes) {
    j["carrier_frequency"] = spec.carrier_frequency;
    j["velocity"] = spec.velocity;
  }
  if (spec.kind == FadingKind::Jakes || spec.kind == FadingKind::BlockIID)
    j["sample_period"] = spec.sample_period;
}

inline void from_json(const json& j, FadingSpec& spec) {
  spec.kind = fading_kind_from_string(j.at("kind").get<std::string>());
  j.at("variance").get_to(spec.variance);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.carrier_frequency = j.value("carrier_frequency", 0.0);
  spec.velocity = j.value("velocity", std::vector<double>{});
  spec.sample_period = j.value("sample_period", 0.0);
}

inline void to_json(json& j, const EquilibriumResult& result) {
  j = json{{"profile", result.profile.allocation},
           {"potential_value", result.potential_value},
           {"kkt_residual", result.kkt_residual},
           {"multipliers", result.multipliers},
           {"support", result.support}};
}

inline std::string format_double(double x) {
  std::ostringstream oss;
  oss.precision(17);
  oss << x;
  return oss.str();
}

/// Columns: step/time, user, channel, power, then one column per metric
/// (repeated on each link row of the step).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const GameConfig& cfg) {
  os << "time,user,channel,power";
  for (const auto& [name, _] : traj.metrics) os << ',' << name;
  os << '\n';
  for (std::size_t n = 0; n < traj.size(); ++n) {
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        os << format_double(traj.times[n]) << ',' << k << ',' << cfg.accessible[k][i] << ','
           << format_double(traj.profiles[n].allocation[k][i]);
        for (const auto& [_, values] : traj.metrics)
          os << ',' << (n < values.size() ? format_double(values[n]) : "");
        os << '\n';
      }
  }
}

/// Columns: step, k, alpha, re_h, im_h, g.
inline void write_channel_track_csv(std::ostream& os, const std::vector<ChannelState>& track,
                                    const GameConfig& cfg) {
  os << "step,k,alpha,re_h,im_h,g\n";
  for (std::size_t n = 0; n < track.size(); ++n)
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        std::complex<double> h =
            track[n].coefficients ? (*track[n].coefficients)[k][i] : std::complex<double>{};
        os << n << ',' << k << ',' << cfg.accessible[k][i] << ','
           << format_double(h.real()) << ',' << format_double(h.imag()) << ','
           << format_double(track[n].gains[k][i]) << '\n';
      }
}

}  // namespace pmac

#endif  // PMAC_SERIALIZATION_HPP
