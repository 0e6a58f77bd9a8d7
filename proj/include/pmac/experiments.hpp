#ifndef PMAC_EXPERIMENTS_HPP
#define PMAC_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmac/channels.hpp"
#include "pmac/dynamics.hpp"
#include "pmac/equilibrium.hpp"
#include "pmac/game.hpp"
#include "pmac/metrics.hpp"
#include "pmac/serialization.hpp"

// Figure-level experiments behind the CLI: equilibrium efficiency
// statistics, equilibration curves, fading-track following, and the
// convergence-certificate report. Everything is deterministic given the
// scenario seed; realizations use derived seeds (seed + index).

namespace pmac {

enum class ExperimentKind {
  PhasePortrait,
  SreCdf,
  ErgodicSreVsSnr,
  EqlOverTime,
  JakesTracking,
  CertificateReport,
};

inline std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PhasePortrait: return "PhasePortrait";
    case ExperimentKind::SreCdf: return "SreCdf";
    case ExperimentKind::ErgodicSreVsSnr: return "ErgodicSreVsSnr";
    case ExperimentKind::EqlOverTime: return "EqlOverTime";
    case ExperimentKind::JakesTracking: return "JakesTracking";
    case ExperimentKind::CertificateReport: return "CertificateReport";
  }
  throw std::logic_error("unknown experiment kind");
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "PhasePortrait") return ExperimentKind::PhasePortrait;
  if (s == "SreCdf") return ExperimentKind::SreCdf;
  if (s == "ErgodicSreVsSnr") return ExperimentKind::ErgodicSreVsSnr;
  if (s == "EqlOverTime") return ExperimentKind::EqlOverTime;
  if (s == "JakesTracking") return ExperimentKind::JakesTracking;
  if (s == "CertificateReport") return ExperimentKind::CertificateReport;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

struct DynamicsSettings {
  StepSchedule schedule = StepSchedule::constant(0.0);  // 0 -> clip to invariance bound
  long n_steps = 1000;
  double t_end = 50.0;
  double dt = 0.0;  // 0 -> integrator default
};

struct Scenario {
  std::string name = "scenario";
  GameConfig game;
  FadingSpec fading;
  DynamicsSettings dynamics;
  ExperimentKind experiment = ExperimentKind::SreCdf;
  int n_realizations = 1;
  std::uint64_t seed = 0;
  std::vector<double> snr_sweep;
  std::string output_dir = ".";

  void validate() const {
    game.validate();
    fading.validate(game);
    if (n_realizations < 1) throw std::invalid_argument("Scenario: n_realizations must be >= 1");
    if (experiment == ExperimentKind::ErgodicSreVsSnr && snr_sweep.empty())
      throw std::invalid_argument("Scenario: ErgodicSreVsSnr requires snr_sweep");
  }
};

// ---------------------------------------------------------------------------
// Individual experiments (library level, reused by the acceptance suite)
// ---------------------------------------------------------------------------

struct SreCdfResult {
  std::vector<double> sre_values;  // one per realization, sorted
  double fraction_near_optimal = 0.0;  // SRE > 0.999
};

inline SreCdfResult run_sre_cdf(const GameConfig& cfg, const FadingSpec& fading,
                                int n_realizations, std::uint64_t seed) {
  SreCdfResult result;
  for (int r = 0; r < n_realizations; ++r) {
    FadingSpec spec = fading;
    spec.kind = FadingKind::Static;
    spec.seed = seed + static_cast<std::uint64_t>(r);
    auto state = draw_static(spec, cfg);
    auto eq = solve_static(cfg, state, 1e-10);
    result.sre_values.push_back(sre(eq.profile, state, cfg, -eq.potential_value));
  }
  std::sort(result.sre_values.begin(), result.sre_values.end());
  long hits = std::count_if(result.sre_values.begin(), result.sre_values.end(),
                            [](double s) { return s > 0.999; });
  result.fraction_near_optimal = static_cast<double>(hits) / n_realizations;
  return result;
}

struct EqlOverTimeResult {
  std::vector<std::vector<double>> eql;  // [realization][step]
  std::vector<std::vector<double>> sre;  // [realization][step]
  std::vector<double> mean_eql;          // [step]
};

/// Learning on a fixed static draw, per realization. Each step uses a fixed
/// fraction of the invariance bound at the current profile, 1/max(lambda-v):
/// the a-priori bound 1/max(b g/sigma^2) ignores interference and becomes
/// uselessly conservative in crowded games.
inline EqlOverTimeResult run_eql_over_time(const GameConfig& cfg, const FadingSpec& fading,
                                           int n_realizations, long n_steps,
                                           std::uint64_t seed, double step_fraction = 0.95) {
  EqlOverTimeResult result;
  result.mean_eql.assign(n_steps + 1, 0.0);
  for (int r = 0; r < n_realizations; ++r) {
    FadingSpec spec = fading;
    spec.kind = FadingKind::Static;
    spec.seed = seed + static_cast<std::uint64_t>(r);
    auto state = draw_static(spec, cfg);
    auto eq = solve_static(cfg, state, 1e-10);
    double csum = -eq.potential_value;
    double fallback = step_fraction * safe_step_bound(cfg, state);
    PowerProfile p = PowerProfile::uniform(cfg);
    std::vector<double> eql_series, sre_series;
    for (long n = 0; n <= n_steps; ++n) {
      eql_series.push_back(eql(p, state, cfg, eq));
      sre_series.push_back(sre(p, state, cfg, csum));
      if (n < n_steps) {
        auto v = marginal_utility(p, state, cfg);
        double worst = 0.0;
        for (int k = 0; k < cfg.num_users; ++k) {
          double lambda = 0.0;
          for (int i = 0; i < cfg.links(k); ++i)
            lambda += p.allocation[k][i] * v[k][i] / cfg.max_power[k];
          for (int i = 0; i < cfg.links(k); ++i)
            if (p.allocation[k][i] > 0.0) worst = std::max(worst, lambda - v[k][i]);
        }
        double delta = worst > 0.0 ? step_fraction / worst : fallback;
        p = detail::euler_step(p, v, cfg, delta);
      }
    }
    for (long n = 0; n <= n_steps; ++n) result.mean_eql[n] += eql_series[n] / n_realizations;
    result.eql.push_back(std::move(eql_series));
    result.sre.push_back(std::move(sre_series));
  }
  return result;
}

struct PhasePortraitResult {
  std::vector<Trajectory> trajectories;  // one per initial condition
  EquilibriumResult equilibrium;
};

inline PhasePortraitResult run_phase_portrait(const GameConfig& cfg, const FadingSpec& fading,
                                              int n_inits, double t_end, double dt,
                                              std::uint64_t seed) {
  FadingSpec spec = fading;
  spec.kind = FadingKind::Static;
  auto state = draw_static(spec, cfg);
  auto eq = solve_static(cfg, state, 1e-10);
  PhasePortraitResult result{{}, eq};
  std::mt19937_64 rng(seed);
  for (int r = 0; r < n_inits; ++r) {
    auto p0 = detail::random_interior_profile(cfg, rng);
    OdeOptions opts;
    opts.dt = dt;
    auto traj = integrate_ode(p0, state, cfg, t_end, opts);
    auto& kl = traj.metrics["kl"];
    for (const auto& p : traj.profiles) kl.push_back(kl_divergence(eq.profile, p));
    result.trajectories.push_back(std::move(traj));
  }
  return result;
}

struct ErgodicSrePoint {
  double rho = 0.0;  // max power over noise power
  double sre = 0.0;
};

/// Sweeps the thermal SNR by scaling all noise powers at fixed budgets.
inline std::vector<ErgodicSrePoint> run_ergodic_sre_vs_snr(const GameConfig& cfg,
                                                           const FadingSpec& fading,
                                                           const std::vector<double>& rho_values,
                                                           long n_mc_samples,
                                                           std::uint64_t seed) {
  double pmax = *std::max_element(cfg.max_power.begin(), cfg.max_power.end());
  std::vector<ErgodicSrePoint> points;
  for (std::size_t i = 0; i < rho_values.size(); ++i) {
    GameConfig scaled = cfg;
    double noise = pmax / rho_values[i];
    for (double& s : scaled.noise_power) s = noise;
    FadingSpec spec = fading;
    spec.kind = FadingKind::GaussianFast;
    auto eq = solve_ergodic(scaled, spec, 1e-9);
    double value = sre_ergodic(eq.profile, spec, scaled, -eq.potential_value, n_mc_samples,
                               seed + static_cast<std::uint64_t>(i));
    points.push_back({rho_values[i], value});
  }
  return points;
}

struct JakesTrackingResult {
  std::vector<double> times;
  std::vector<PowerProfile> equilibrium_series;
  std::vector<PowerProfile> learned_series;
  TrackingDelay delay;
  std::vector<double> coherence_time;  // per user, 1/f_d
};

/// Per-step instantaneous equilibrium (warm-started) versus the constant
/// effort learner. The learner's step is a fixed fraction of the invariance
/// bound at the current profile and channel state.
inline JakesTrackingResult run_jakes_tracking(const GameConfig& cfg, const FadingSpec& fading,
                                              long n_steps, std::uint64_t seed,
                                              long discard_transient = 100,
                                              double step_fraction = 0.95) {
  FadingSpec spec = fading;
  spec.kind = FadingKind::Jakes;
  spec.seed = seed;
  JakesTrack track(spec, cfg);
  JakesTrackingResult result;
  for (int k = 0; k < cfg.num_users; ++k)
    result.coherence_time.push_back(track.coherence_time(k));

  PowerProfile p = PowerProfile::uniform(cfg);
  PowerProfile warm = PowerProfile::uniform(cfg);
  for (long n = 0; n < n_steps; ++n) {
    double t = n * spec.sample_period;
    auto state = track.at(t);
    auto eq = solve_static(cfg, state, 1e-8, &warm);
    warm = eq.profile;
    auto v = marginal_utility(p, state, cfg);
    double worst = 0.0;
    for (int k = 0; k < cfg.num_users; ++k) {
      double lambda = 0.0;
      for (int i = 0; i < cfg.links(k); ++i)
        lambda += p.allocation[k][i] * v[k][i] / cfg.max_power[k];
      for (int i = 0; i < cfg.links(k); ++i)
        if (p.allocation[k][i] > 0.0) worst = std::max(worst, lambda - v[k][i]);
    }
    double delta = worst > 0.0 ? step_fraction / worst
                               : step_fraction * safe_step_bound(cfg, state);
    p = detail::euler_step(p, v, cfg, delta);
    // The multiplicative update absorbs at the boundary; a tracking learner
    // must keep every channel warm or it cannot follow a fading crossover.
    for (int k = 0; k < cfg.num_users; ++k) {
      double floor = 1e-4 * cfg.max_power[k];
      double sum = 0.0;
      for (double& x : p.allocation[k]) sum += (x = std::max(x, floor));
      for (double& x : p.allocation[k]) x *= cfg.max_power[k] / sum;
    }
    if (n >= discard_transient) {
      result.times.push_back(t);
      result.equilibrium_series.push_back(eq.profile);
      result.learned_series.push_back(p);
    }
  }
  result.delay =
      tracking_delay(result.equilibrium_series, result.learned_series, spec.sample_period);
  return result;
}

struct CertificateReport {
  EquilibriumResult equilibrium;
  bool strict = false;
  ConvergenceCertificate certificate;
  double measured_final_exponent = 0.0;  // min over users, end of ODE run
  double initial_divergence = 0.0;
};

inline CertificateReport run_certificate_report(const GameConfig& cfg,
                                                const FadingSpec& fading, double t_end,
                                                std::uint64_t seed) {
  FadingSpec spec = fading;
  spec.kind = FadingKind::Static;
  spec.seed = seed;
  auto state = draw_static(spec, cfg);
  auto eq = solve_static(cfg, state, 1e-10);
  PowerProfile p0 = PowerProfile::uniform(cfg);
  CertificateReport report;
  report.equilibrium = eq;
  report.strict = std::all_of(eq.support.begin(), eq.support.end(),
                              [](const auto& s) { return s.size() == 1; });
  report.certificate = report.strict ? strict_certificate(cfg, state, eq, p0)
                                     : general_certificate(cfg, state, eq, p0);
  report.initial_divergence = kl_divergence(eq.profile, p0);
  auto traj = integrate_ode(p0, state, cfg, t_end, {0.0, 10});
  auto series = instantaneous_exponent(traj, eq.profile);
  if (!series.total.empty()) report.measured_final_exponent = series.total.back();
  return report;
}

// ---------------------------------------------------------------------------
// Scenario file handling and the CLI entry points
// ---------------------------------------------------------------------------

inline void from_json(const json& j, DynamicsSettings& d) {
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    std::string kind = s.value("kind", "Constant");
    double delta = s.value("delta", 0.0);
    d.schedule = kind == "Harmonic" ? StepSchedule::harmonic(delta)
                                    : StepSchedule::constant(delta);
  }
  d.n_steps = j.value("n_steps", d.n_steps);
  d.t_end = j.value("t_end", d.t_end);
  d.dt = j.value("dt", d.dt);
}

inline void to_json(json& j, const DynamicsSettings& d) {
  j = json{{"schedule",
            {{"kind", d.schedule.kind == StepSchedule::Kind::Harmonic ? "Harmonic" : "Constant"},
             {"delta", d.schedule.delta}}},
           {"n_steps", d.n_steps},
           {"t_end", d.t_end},
           {"dt", d.dt}};
}

inline void from_json(const json& j, Scenario& s) {
  s.name = j.value("name", "scenario");
  j.at("game").get_to(s.game);
  j.at("fading").get_to(s.fading);
  if (j.contains("dynamics")) j.at("dynamics").get_to(s.dynamics);
  s.experiment = experiment_kind_from_string(j.at("experiment").get<std::string>());
  s.n_realizations = j.value("n_realizations", 1);
  s.seed = j.value("seed", std::uint64_t{0});
  s.snr_sweep = j.value("snr_sweep", std::vector<double>{});
  s.output_dir = j.value("output_dir", ".");
  s.validate();
}

inline void to_json(json& j, const Scenario& s) {
  j = json{{"name", s.name},
           {"game", s.game},
           {"fading", s.fading},
           {"dynamics", s.dynamics},
           {"experiment", to_string(s.experiment)},
           {"n_realizations", s.n_realizations},
           {"seed", s.seed},
           {"snr_sweep", s.snr_sweep},
           {"output_dir", s.output_dir}};
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario parse error in " + path + ": " + e.what());
  }
  Scenario s;
  from_json(j, s);
  return s;
}

inline std::string list_experiments() {
  return
      "PhasePortrait      learning-flow trajectories with divergence level sets (2x2 portrait)\n"
      "                   fields: game, fading(Static), dynamics.t_end/dt, n_realizations, seed\n"
      "SreCdf             CDF of the equilibrium sum-rate efficiency over random static draws\n"
      "                   fields: game, fading(Static), n_realizations, seed\n"
      "ErgodicSreVsSnr    equilibrium sum-rate efficiency vs thermal SNR for averaged channels\n"
      "                   fields: game, fading(GaussianFast), snr_sweep, n_realizations, seed\n"
      "EqlOverTime        mean equilibration level / efficiency over learning iterations\n"
      "                   fields: game, fading(Static), dynamics.n_steps, n_realizations, seed\n"
      "JakesTracking      learned vs instantaneous-equilibrium power on a correlated fading track\n"
      "                   fields: game, fading(Jakes), dynamics.n_steps, n_realizations, seed\n"
      "CertificateReport  equilibrium, decay-rate certificate and measured exponent\n"
      "                   fields: game, fading(Static), dynamics.t_end, seed\n";
}

struct RunOutputs {
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
  std::filesystem::path manifest_path;
};

inline RunOutputs run_scenario(const Scenario& scenario) {
  namespace fs = std::filesystem;
  scenario.validate();
  fs::path dir(scenario.output_dir);
  fs::create_directories(dir);
  RunOutputs out{dir / (scenario.name + "_realizations.csv"),
                 dir / (scenario.name + "_summary.json"),
                 dir / (scenario.name + "_manifest.json")};
  std::ofstream csv(out.csv_path);
  json summary;
  summary["name"] = scenario.name;
  summary["experiment"] = to_string(scenario.experiment);

  switch (scenario.experiment) {
    case ExperimentKind::SreCdf: {
      auto r = run_sre_cdf(scenario.game, scenario.fading, scenario.n_realizations,
                           scenario.seed);
      csv << "realization,sre\n";
      for (std::size_t i = 0; i < r.sre_values.size(); ++i)
        csv << i << ',' << format_double(r.sre_values[i]) << '\n';
      summary["fraction_near_optimal"] = r.fraction_near_optimal;
      summary["n_realizations"] = scenario.n_realizations;
      break;
    }
    case ExperimentKind::EqlOverTime: {
      auto r = run_eql_over_time(scenario.game, scenario.fading, scenario.n_realizations,
                                 scenario.dynamics.n_steps, scenario.seed);
      csv << "realization,step,eql,sre\n";
      for (std::size_t rr = 0; rr < r.eql.size(); ++rr)
        for (std::size_t n = 0; n < r.eql[rr].size(); ++n)
          csv << rr << ',' << n << ',' << format_double(r.eql[rr][n]) << ','
              << format_double(r.sre[rr][n]) << '\n';
      summary["mean_eql_final"] = r.mean_eql.back();
      json curve = json::array();
      for (double e : r.mean_eql) curve.push_back(e);
      summary["mean_eql"] = curve;
      break;
    }
    case ExperimentKind::PhasePortrait: {
      auto r = run_phase_portrait(scenario.game, scenario.fading, scenario.n_realizations,
                                  scenario.dynamics.t_end, scenario.dynamics.dt,
                                  scenario.seed);
      csv << "realization,time,user,channel,power,potential,kl\n";
      for (std::size_t rr = 0; rr < r.trajectories.size(); ++rr) {
        const auto& traj = r.trajectories[rr];
        for (std::size_t n = 0; n < traj.size(); ++n)
          for (int k = 0; k < scenario.game.num_users; ++k)
            for (int i = 0; i < scenario.game.links(k); ++i)
              csv << rr << ',' << format_double(traj.times[n]) << ',' << k << ','
                  << scenario.game.accessible[k][i] << ','
                  << format_double(traj.profiles[n].allocation[k][i]) << ','
                  << format_double(traj.metrics.at("potential")[n]) << ','
                  << format_double(traj.metrics.at("kl")[n]) << '\n';
      }
      summary["equilibrium"] = r.equilibrium;
      break;
    }
    case ExperimentKind::ErgodicSreVsSnr: {
      long n_mc = 20000L * std::max(1, scenario.n_realizations);
      auto points = run_ergodic_sre_vs_snr(scenario.game, scenario.fading, scenario.snr_sweep,
                                           n_mc, scenario.seed);
      csv << "rho,sre\n";
      for (const auto& pt : points)
        csv << format_double(pt.rho) << ',' << format_double(pt.sre) << '\n';
      summary["n_mc_samples"] = n_mc;
      break;
    }
    case ExperimentKind::JakesTracking: {
      csv << "realization,step,time,user,channel,equilibrium_power,learned_power\n";
      json per_seed = json::array();
      for (int rr = 0; rr < scenario.n_realizations; ++rr) {
        auto r = run_jakes_tracking(scenario.game, scenario.fading, scenario.dynamics.n_steps,
                                    scenario.seed + static_cast<std::uint64_t>(rr));
        for (std::size_t n = 0; n < r.times.size(); ++n)
          for (int k = 0; k < scenario.game.num_users; ++k)
            for (int i = 0; i < scenario.game.links(k); ++i)
              csv << rr << ',' << n << ',' << format_double(r.times[n]) << ',' << k << ','
                  << scenario.game.accessible[k][i] << ','
                  << format_double(r.equilibrium_series[n].allocation[k][i]) << ','
                  << format_double(r.learned_series[n].allocation[k][i]) << '\n';
        per_seed.push_back({{"delay_s", r.delay.delay},
                            {"coherence_time_s", r.coherence_time}});
      }
      summary["runs"] = per_seed;
      break;
    }
    case ExperimentKind::CertificateReport: {
      auto r = run_certificate_report(scenario.game, scenario.fading, scenario.dynamics.t_end,
                                      scenario.seed);
      csv << "quantity,value\n";
      csv << "c," << format_double(r.certificate.c) << '\n';
      csv << "measured_final_exponent," << format_double(r.measured_final_exponent) << '\n';
      summary["equilibrium"] = r.equilibrium;
      summary["strict"] = r.strict;
      summary["certificate"] = {{"m", r.certificate.margin_m},
                                {"r", r.certificate.rayleigh_r},
                                {"b", r.certificate.entropy_b},
                                {"q0", r.certificate.q0},
                                {"c", r.certificate.c}};
      summary["measured_final_exponent"] = r.measured_final_exponent;
      summary["initial_divergence"] = r.initial_divergence;
      break;
    }
  }

  std::ofstream(out.summary_path) << summary.dump(2) << '\n';

  json scenario_json = scenario;
  json manifest;
  manifest["scenario"] = scenario_json;
  manifest["config_hash"] = std::hash<std::string>{}(scenario_json.dump());
  manifest["seed"] = scenario.seed;
  manifest["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
  std::ofstream(out.manifest_path) << manifest.dump(2) << '\n';
  return out;
}

}  // namespace pmac

#endif  // PMAC_EXPERIMENTS_HPP
