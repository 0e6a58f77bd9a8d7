#ifndef PMAC_EQUILIBRIUM_HPP
#define PMAC_EQUILIBRIUM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmac/game.hpp"
#include "pmac/special_functions.hpp"

// Equilibrium computation by potential minimization over the product of
// scaled simplices, plus the water-filling optimality check and the
// support-multigraph structural diagnostics.

namespace pmac {

struct EquilibriumResult {
  PowerProfile profile;
  double potential_value = 0.0;
  double kkt_residual = 0.0;
  std::vector<double> multipliers;        // per-user water level
  std::vector<std::vector<int>> support;  // channel ids with mass above threshold
};

struct SolverError : std::runtime_error {
  EquilibriumResult best;
  SolverError(std::string what, EquilibriumResult best_iterate)
      : std::runtime_error(std::move(what)), best(std::move(best_iterate)) {}
};

/// Water-filling optimality: on-support marginals equal the user's water
/// level, off-support marginals must not exceed it.
inline std::pair<double, std::vector<double>> kkt_residual(const PowerProfile& profile,
                                                           const LinkTable<double>& marginals,
                                                           const GameConfig& cfg) {
  double residual = 0.0;
  std::vector<double> level(cfg.num_users, 0.0);
  for (int k = 0; k < cfg.num_users; ++k) {
    double pk = cfg.max_power[k];
    double lambda = 0.0;
    for (int i = 0; i < cfg.links(k); ++i)
      lambda += profile.allocation[k][i] * marginals[k][i] / pk;
    level[k] = lambda;
    double thresh = 1e-6 * pk;
    for (int i = 0; i < cfg.links(k); ++i) {
      double v = marginals[k][i];
      double gap = profile.allocation[k][i] > thresh ? std::abs(v - lambda)
                                                     : std::max(0.0, v - lambda);
      residual = std::max(residual, gap);
    }
  }
  return {residual, level};
}

namespace detail {

struct MirrorDescentOptions {
  double tol = 1e-9;
  long max_iters = 200000;
  double support_threshold_rel = 1e-6;
};

/// Overwrites y with its Euclidean projection onto {p >= 0, sum p = budget}.
inline void project_simplex(std::vector<double>& y, double budget) {
  // Sort-based threshold search: p_i = max(0, y_i - tau).
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = (u[0] - budget);
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    double t = (cum - budget) / static_cast<double>(j + 1);
    if (t < u[j]) tau = t;
  }
  double sum = 0.0;
  for (double& x : y) sum += (x = std::max(0.0, x - tau));
  // One renormalization pass absorbs the rounding drift of the threshold.
  if (sum > 0.0)
    for (double& x : y) x *= budget / sum;
}

/// Two-stage minimization of a convex potential over the product of scaled
/// simplices; `marginals` must return the negative gradient.
///
/// Stage one is exponentiated-gradient descent, whose entropic geometry
/// handles the ill-conditioned interior directions of crowded games well.
/// Components that collapse numerically while strictly dominated are zeroed
/// out, and pruned components whose marginal climbs back above the water
/// level are reinserted.
///
/// Multiplicative iterates can stall once potential decreases fall below
/// rounding noise, so if stage one stops short of the tolerance, stage two
/// polishes with projected-gradient steps: the Euclidean projection zeroes
/// dominated components exactly and acceptance is controlled by the KKT
/// residual, which stays measurable all the way down.
inline EquilibriumResult minimize_potential(
    const GameConfig& cfg, const std::function<double(const PowerProfile&)>& value,
    const std::function<LinkTable<double>(const PowerProfile&)>& marginals,
    PowerProfile p, const MirrorDescentOptions& opts) {
  // Multiplicative iterates cannot leave (or re-enter) the boundary, so
  // start strictly inside; the pruning/reinsertion logic manages zeros.
  for (int k = 0; k < cfg.num_users; ++k) {
    double floor = 1e-9 * cfg.max_power[k];
    double sum = 0.0;
    for (double& x : p.allocation[k]) sum += (x = std::max(x, floor));
    for (double& x : p.allocation[k]) x *= cfg.max_power[k] / sum;
  }
  auto active = cfg.make_link_table<char>(1);
  double step = 1.0;
  double phi = value(p);
  auto v = marginals(p);
  auto [residual, level] = kkt_residual(p, v, cfg);
  long iter = 0;

  auto finish = [&](bool converged) {
    EquilibriumResult res{p, phi, residual, level, {}};
    res.support.resize(cfg.num_users);
    for (int k = 0; k < cfg.num_users; ++k) {
      double thresh = opts.support_threshold_rel * cfg.max_power[k];
      for (int i = 0; i < cfg.links(k); ++i)
        if (p.allocation[k][i] > thresh) res.support[k].push_back(cfg.accessible[k][i]);
    }
    if (!converged)
      throw SolverError("potential minimization: iteration budget exhausted", res);
    return res;
  };

  bool stalled = false;
  while (iter < opts.max_iters && !stalled) {
    if (residual <= opts.tol) {
      // Validate against pruned components before declaring victory.
      bool reinserted = false;
      for (int k = 0; k < cfg.num_users; ++k)
        for (int i = 0; i < cfg.links(k); ++i)
          if (!active[k][i] && v[k][i] > level[k] + opts.tol) {
            p.allocation[k][i] = 1e-8 * cfg.max_power[k];
            active[k][i] = 1;
            reinserted = true;
          }
      if (!reinserted) return finish(true);
      for (int k = 0; k < cfg.num_users; ++k) {
        double sum = std::accumulate(p.allocation[k].begin(), p.allocation[k].end(), 0.0);
        for (double& x : p.allocation[k]) x *= cfg.max_power[k] / sum;
      }
      phi = value(p);
      v = marginals(p);
      std::tie(residual, level) = kkt_residual(p, v, cfg);
    }

    // Multiplicative step with Armijo backtracking on the potential.
    bool accepted = false;
    PowerProfile trial = p;
    for (int bt = 0; bt < 60; ++bt) {
      double vmax = 0.0;
      for (int k = 0; k < cfg.num_users; ++k)
        for (int i = 0; i < cfg.links(k); ++i)
          if (active[k][i]) vmax = std::max(vmax, std::abs(v[k][i]));
      double s = step;
      if (s * vmax > 500.0) s = 500.0 / std::max(vmax, 1e-300);
      double directional = 0.0;
      for (int k = 0; k < cfg.num_users; ++k) {
        double sum = 0.0;
        double vk_max = -1e300;
        for (int i = 0; i < cfg.links(k); ++i)
          if (active[k][i]) vk_max = std::max(vk_max, v[k][i]);
        for (int i = 0; i < cfg.links(k); ++i) {
          trial.allocation[k][i] =
              active[k][i] ? p.allocation[k][i] * std::exp(s * (v[k][i] - vk_max)) : 0.0;
          sum += trial.allocation[k][i];
        }
        for (int i = 0; i < cfg.links(k); ++i) {
          trial.allocation[k][i] *= cfg.max_power[k] / sum;
          directional += (trial.allocation[k][i] - p.allocation[k][i]) * v[k][i];
        }
      }
      double phi_trial = value(trial);
      if (phi_trial <= phi - 1e-4 * directional || directional <= 0.0) {
        p = trial;
        phi = phi_trial;
        step = s * 2.0;
        accepted = true;
        break;
      }
      step = s * 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }

    v = marginals(p);
    std::tie(residual, level) = kkt_residual(p, v, cfg);

    // Drop strictly dominated components that have collapsed numerically;
    // revive any pruned component whose marginal has climbed back above the
    // water level (otherwise its KKT gap would block convergence forever).
    bool changed = false;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        if (active[k][i] && p.allocation[k][i] < 1e-13 * cfg.max_power[k] &&
            v[k][i] < level[k]) {
          p.allocation[k][i] = 0.0;
          active[k][i] = 0;
        } else if (!active[k][i] && v[k][i] > level[k] + opts.tol) {
          p.allocation[k][i] = 1e-8 * cfg.max_power[k];
          active[k][i] = 1;
          changed = true;
        }
      }
    if (changed) {
      for (int k = 0; k < cfg.num_users; ++k) {
        double sum = std::accumulate(p.allocation[k].begin(), p.allocation[k].end(), 0.0);
        for (double& x : p.allocation[k]) x *= cfg.max_power[k] / sum;
      }
      phi = value(p);
      v = marginals(p);
      std::tie(residual, level) = kkt_residual(p, v, cfg);
    }
    ++iter;
  }
  if (residual <= opts.tol) return finish(true);

  // Projected-gradient polish.
  step = 1.0;
  for (long polish = 0; polish < 20000; ++polish) {
    if (residual <= opts.tol) return finish(true);
    bool accepted = false;
    bool have_trial_marginals = false;
    LinkTable<double> v_trial;
    PowerProfile trial = p;
    for (int bt = 0; bt < 60; ++bt) {
      double s = step;
      double directional = 0.0;
      for (int k = 0; k < cfg.num_users; ++k) {
        for (int i = 0; i < cfg.links(k); ++i)
          trial.allocation[k][i] = p.allocation[k][i] + s * v[k][i];
        project_simplex(trial.allocation[k], cfg.max_power[k]);
        for (int i = 0; i < cfg.links(k); ++i)
          directional += (trial.allocation[k][i] - p.allocation[k][i]) * v[k][i];
      }
      double phi_trial = value(trial);
      double noise = 1e-14 * (1.0 + std::abs(phi));
      if (directional > 0.0 && phi_trial <= phi - 1e-4 * directional &&
          phi - phi_trial > noise) {
        p = trial;
        phi = phi_trial;
        step = s * 2.0;
        accepted = true;
        break;
      }
      // Once potential decreases fall below rounding noise the Armijo test
      // is blind; accept on the KKT residual instead.
      if (phi_trial <= phi + noise) {
        v_trial = marginals(trial);
        double res_trial = kkt_residual(trial, v_trial, cfg).first;
        if (res_trial < residual) {
          p = trial;
          phi = phi_trial;
          have_trial_marginals = true;
          step = s * 2.0;
          accepted = true;
          break;
        }
      }
      step = s * 0.5;
    }
    if (!accepted) return finish(residual <= opts.tol * 10.0);
    v = have_trial_marginals ? std::move(v_trial) : marginals(p);
    std::tie(residual, level) = kkt_residual(p, v, cfg);
  }
  return finish(residual <= opts.tol);
}

inline PowerProfile random_interior_profile(const GameConfig& cfg, std::mt19937_64& rng) {
  std::exponential_distribution<double> expd(1.0);
  auto alloc = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k) {
    double sum = 0.0;
    for (double& x : alloc[k]) {
      x = expd(rng) + 1e-9;
      sum += x;
    }
    for (double& x : alloc[k]) x *= cfg.max_power[k] / sum;
  }
  return PowerProfile::from_allocation(cfg, std::move(alloc));
}

}  // namespace detail

inline EquilibriumResult solve_static(const GameConfig& cfg, const ChannelState& channels,
                                      double tol = 1e-9,
                                      const PowerProfile* start = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_static: tol must be > 0");
  detail::MirrorDescentOptions opts;
  opts.tol = tol;
  PowerProfile p0 = start ? *start : PowerProfile::uniform(cfg);
  return detail::minimize_potential(
      cfg, [&](const PowerProfile& p) { return potential(p, channels, cfg); },
      [&](const PowerProfile& p) { return marginal_utility(p, channels, cfg); }, p0, opts);
}

/// Mean marginals as the (numerical) negative gradient of the closed-form
/// ergodic potential; the jitter fallback keeps line searches from dying on
/// the measure-zero coincident-parameter set.
inline LinkTable<double> ergodic_potential_gradient(const PowerProfile& profile,
                                                    const FadingSpec& spec,
                                                    const GameConfig& cfg) {
  auto value = [&](const PowerProfile& p) {
    return detail::ergodic_potential_from_r(scaled_powers(p, spec, cfg), cfg, true);
  };
  auto out = cfg.make_link_table<double>();
  for (int k = 0; k < cfg.num_users; ++k) {
    double h = 1e-6 * cfg.max_power[k];
    for (int i = 0; i < cfg.links(k); ++i) {
      PowerProfile lo = profile, hi = profile;
      double p = profile.allocation[k][i];
      if (p >= h) {
        lo.allocation[k][i] = p - h;
        hi.allocation[k][i] = p + h;
        out[k][i] = -(value(hi) - value(lo)) / (2.0 * h);
      } else {
        hi.allocation[k][i] = p + h;
        out[k][i] = -(value(hi) - value(lo)) / h;
      }
    }
  }
  return out;
}

inline EquilibriumResult solve_ergodic(const GameConfig& cfg, const FadingSpec& spec,
                                       double tol = 1e-9,
                                       const PowerProfile* start = nullptr) {
  if (spec.kind != FadingKind::GaussianFast)
    throw std::invalid_argument("solve_ergodic: spec kind must be GaussianFast");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_ergodic: tol must be > 0");
  detail::MirrorDescentOptions opts;
  opts.tol = tol;
  PowerProfile p0 = start ? *start : PowerProfile::uniform(cfg);
  return detail::minimize_potential(
      cfg,
      [&](const PowerProfile& p) {
        return detail::ergodic_potential_from_r(scaled_powers(p, spec, cfg), cfg, true);
      },
      [&](const PowerProfile& p) { return ergodic_potential_gradient(p, spec, cfg); }, p0,
      opts);
}

struct UniquenessProbe {
  bool unique_within_tol = false;
  double spread = 0.0;
  std::vector<EquilibriumResult> solutions;
};

/// Multi-start stress test of equilibrium uniqueness.
inline UniquenessProbe uniqueness_probe(const GameConfig& cfg, const ChannelState& channels,
                                        int n_starts, double tol,
                                        std::uint64_t seed = 0x9e3779b97f4a7c15ULL) {
  if (n_starts < 2) throw std::invalid_argument("uniqueness_probe: need n_starts >= 2");
  std::mt19937_64 rng(seed);
  UniquenessProbe probe;
  for (int s = 0; s < n_starts; ++s) {
    auto p0 = detail::random_interior_profile(cfg, rng);
    probe.solutions.push_back(solve_static(cfg, channels, std::min(tol * 1e-3, 1e-9), &p0));
  }
  for (std::size_t i = 0; i < probe.solutions.size(); ++i)
    for (std::size_t j = i + 1; j < probe.solutions.size(); ++j)
      probe.spread = std::max(
          probe.spread,
          profile_distance_l1(probe.solutions[i].profile, probe.solutions[j].profile));
  probe.unique_within_tol = probe.spread <= tol;
  return probe;
}

struct SupportMultigraph {
  int num_vertices = 0;                          // channels
  std::vector<std::pair<int, int>> edges;        // multiset, hub-to-spoke per user
};

/// Per-user star graphs on the supported channels, superimposed as a
/// multiset. Hub = lowest-indexed supported channel.
inline SupportMultigraph support_multigraph(const PowerProfile& profile, const GameConfig& cfg,
                                            double support_threshold) {
  if (!(support_threshold > 0.0))
    throw std::invalid_argument("support_multigraph: threshold must be > 0");
  SupportMultigraph g;
  g.num_vertices = cfg.num_channels;
  for (int k = 0; k < cfg.num_users; ++k) {
    std::vector<int> supp;
    for (int i = 0; i < cfg.links(k); ++i)
      if (profile.allocation[k][i] > support_threshold) supp.push_back(cfg.accessible[k][i]);
    for (std::size_t i = 1; i < supp.size(); ++i) g.edges.emplace_back(supp[0], supp[i]);
  }
  return g;
}

/// Union-find cycle check; parallel edges count as cycles.
inline bool is_acyclic(const SupportMultigraph& g) {
  std::vector<int> parent(g.num_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : g.edges) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

/// Aggregate decoding benchmark value at the computed equilibrium.
inline double sum_capacity(const GameConfig& cfg, const ChannelState& channels,
                           double tol = 1e-9) {
  return -solve_static(cfg, channels, tol).potential_value;
}

inline double sum_capacity(const GameConfig& cfg, const FadingSpec& spec, double tol = 1e-9) {
  return -solve_ergodic(cfg, spec, tol).potential_value;
}

}  // namespace pmac

#endif  // PMAC_EQUILIBRIUM_HPP
