#ifndef PMAC_METRICS_HPP
#define PMAC_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmac/dynamics.hpp"
#include "pmac/equilibrium.hpp"
#include "pmac/game.hpp"
#include "pmac/special_functions.hpp"

// Scalar diagnostics: divergence to equilibrium, efficiency ratios,
// convergence exponents and their a-priori certificates, and the
// cross-correlation tracking delay.

namespace pmac {

struct UndefinedRatioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StrictnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StarConvexityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedCorrelationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Relative entropy of p w.r.t. the reference q, summed over q's support.
/// Returns +inf (explicit sentinel) when p has a zero on supp(q).
inline double kl_divergence(const PowerProfile& q, const PowerProfile& p) {
  if (q.allocation.size() != p.allocation.size())
    throw std::invalid_argument("kl_divergence: user count mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < q.allocation.size(); ++k) {
    if (q.allocation[k].size() != p.allocation[k].size())
      throw std::invalid_argument("kl_divergence: link count mismatch");
    for (std::size_t i = 0; i < q.allocation[k].size(); ++i) {
      double qi = q.allocation[k][i];
      if (qi <= 0.0) continue;
      double pi = p.allocation[k][i];
      if (pi <= 0.0) return std::numeric_limits<double>::infinity();
      d += qi * std::log(qi / pi);
    }
  }
  return d;
}

inline double kl_divergence_user(const PowerProfile& q, const PowerProfile& p, int k) {
  double d = 0.0;
  for (std::size_t i = 0; i < q.allocation[k].size(); ++i) {
    double qi = q.allocation[k][i];
    if (qi <= 0.0) continue;
    double pi = p.allocation[k][i];
    if (pi <= 0.0) return std::numeric_limits<double>::infinity();
    d += qi * std::log(qi / pi);
  }
  return d;
}

/// Achieved sum rate over the aggregate decoding benchmark.
inline double sre(const PowerProfile& profile, const ChannelState& channels,
                  const GameConfig& cfg, double csum) {
  if (csum == 0.0) throw UndefinedRatioError("sre: zero sum capacity");
  double total = 0.0;
  for (int k = 0; k < cfg.num_users; ++k) total += utility(profile, channels, cfg, k);
  return total / csum;
}

inline double sre(const PowerProfile& profile, const ChannelState& channels,
                  const GameConfig& cfg) {
  return sre(profile, channels, cfg, sum_capacity(cfg, channels));
}

/// Ergodic variant; per-user mean rates are Monte-Carlo averaged.
inline double sre_ergodic(const PowerProfile& profile, const FadingSpec& spec,
                          const GameConfig& cfg, double csum_bar, long n_samples,
                          std::uint64_t seed) {
  if (csum_bar == 0.0) throw UndefinedRatioError("sre_ergodic: zero sum capacity");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (long n = 0; n < n_samples; ++n) {
    auto state = detail::draw_gaussian_state(spec, cfg, rng);
    for (int k = 0; k < cfg.num_users; ++k) total += utility(profile, state, cfg, k);
  }
  return total / static_cast<double>(n_samples) / csum_bar;
}

/// Potential of the profile relative to its value at equilibrium; 1 means
/// the system has equilibrated.
inline double eql(const PowerProfile& profile, const ChannelState& channels,
                  const GameConfig& cfg, const EquilibriumResult& equilibrium) {
  if (equilibrium.potential_value == 0.0)
    throw UndefinedRatioError("eql: zero equilibrium potential");
  return potential(profile, channels, cfg) / equilibrium.potential_value;
}

inline double eql_ergodic(const PowerProfile& profile, const FadingSpec& spec,
                          const GameConfig& cfg, const EquilibriumResult& equilibrium) {
  if (equilibrium.potential_value == 0.0)
    throw UndefinedRatioError("eql_ergodic: zero equilibrium potential");
  return ergodic_potential_gaussian(profile, spec, cfg, true) / equilibrium.potential_value;
}

struct ExponentSeries {
  std::vector<double> times;                    // t > 0 entries only
  std::vector<std::vector<double>> per_user;    // [k][idx]; empty if user absent
  std::vector<double> total;                    // min over present users
};

/// lambda_k(t) = -(1/t) log(D_k(t)/D_k(0)); users starting at zero
/// divergence are reported absent.
inline ExponentSeries instantaneous_exponent(const Trajectory& traj,
                                             const PowerProfile& equilibrium) {
  int n_users = static_cast<int>(equilibrium.allocation.size());
  std::vector<double> d0(n_users);
  std::vector<bool> present(n_users);
  for (int k = 0; k < n_users; ++k) {
    d0[k] = kl_divergence_user(equilibrium, traj.profiles.front(), k);
    present[k] = d0[k] > 0.0 && std::isfinite(d0[k]);
  }
  ExponentSeries series;
  series.per_user.resize(n_users);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    double t = traj.times[n];
    if (!(t > 0.0)) continue;
    series.times.push_back(t);
    double total = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_users; ++k) {
      if (!present[k]) continue;
      double dk = kl_divergence_user(equilibrium, traj.profiles[n], k);
      double lambda = -std::log(dk / d0[k]) / t;
      series.per_user[k].push_back(lambda);
      total = std::min(total, lambda);
    }
    series.total.push_back(total);
  }
  return series;
}

struct ConvergenceCertificate {
  double margin_m = 0.0;   // off-support optimality slack
  double rayleigh_r = 0.0; // curvature floor along sampled tangent directions
  double entropy_b = 0.0;  // entropy-vs-seminorm comparison constant
  double q0 = 0.0;         // smallest positive equilibrium mass
  double c = 0.0;          // guaranteed divergence decay exponent
  std::map<int, double> per_user_c;
  std::map<int, double> per_user_dv;
  std::map<int, double> gamma;  // initial divergence scaled by budget
};

namespace detail {

inline ConvergenceCertificate strict_certificate_impl(const GameConfig& cfg,
                                                      const LinkTable<double>& v_at_q,
                                                      const EquilibriumResult& equilibrium,
                                                      const PowerProfile& p0) {
  const auto& q = equilibrium.profile;
  ConvergenceCertificate cert;
  double h0 = kl_divergence(q, p0);
  if (!std::isfinite(h0))
    throw std::invalid_argument("strict_certificate: infinite initial divergence");
  cert.q0 = std::numeric_limits<double>::infinity();
  cert.c = std::numeric_limits<double>::infinity();
  cert.margin_m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.num_users; ++k) {
    if (equilibrium.support[k].size() != 1)
      throw StrictnessError("strict_certificate: user " + std::to_string(k) +
                            " has non-singleton support");
    int hub = equilibrium.support[k][0];
    int hub_local = -1;
    for (int i = 0; i < cfg.links(k); ++i)
      if (cfg.accessible[k][i] == hub) hub_local = i;
    double dv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.links(k); ++i)
      if (i != hub_local) dv = std::min(dv, v_at_q[k][hub_local] - v_at_q[k][i]);
    double gk = h0 / cfg.max_power[k];
    double shrink = gk > 1e-12 ? (1.0 - std::exp(-gk)) / gk : 1.0 - gk / 2.0;
    double ck = shrink * dv;
    cert.per_user_dv[k] = dv;
    cert.gamma[k] = gk;
    cert.per_user_c[k] = ck;
    cert.c = std::min(cert.c, ck);
    cert.margin_m = std::min(cert.margin_m, dv);
    cert.q0 = std::min(cert.q0, cfg.max_power[k]);
  }
  return cert;
}

}  // namespace detail

inline ConvergenceCertificate strict_certificate(const GameConfig& cfg,
                                                 const ChannelState& channels,
                                                 const EquilibriumResult& equilibrium,
                                                 const PowerProfile& p0) {
  return detail::strict_certificate_impl(
      cfg, marginal_utility(equilibrium.profile, channels, cfg), equilibrium, p0);
}

inline ConvergenceCertificate strict_certificate(const GameConfig& cfg, const FadingSpec& spec,
                                                 const EquilibriumResult& equilibrium,
                                                 const PowerProfile& p0) {
  return detail::strict_certificate_impl(
      cfg, ergodic_potential_gradient(equilibrium.profile, spec, cfg), equilibrium, p0);
}

namespace detail {

/// Random maximal ray from q: direction toward a random simplex point,
/// scaled out to the boundary.
inline LinkTable<double> random_boundary_ray(const GameConfig& cfg, const PowerProfile& q,
                                             std::mt19937_64& rng) {
  auto target = random_interior_profile(cfg, rng);
  auto z = cfg.make_link_table<double>();
  double theta_max = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i) {
      z[k][i] = target.allocation[k][i] - q.allocation[k][i];
      if (z[k][i] < 0.0) theta_max = std::min(theta_max, -q.allocation[k][i] / z[k][i]);
    }
  if (!std::isfinite(theta_max)) theta_max = 1.0;
  for (auto& row : z)
    for (double& x : row) x *= theta_max;
  return z;
}

}  // namespace detail

struct GeneralCertificateOptions {
  int n_samples = 100;
  double a = 2.0;              // free comparison parameter, fixed here
  double rayleigh_safety = 0.9;
  double support_threshold_rel = 1e-6;
  std::uint64_t seed = 0x5bd1e995u;
};

namespace detail {

/// Shared general-certificate machinery; the quadratic form of the
/// potential Hessian is injected so the static and ergodic variants can
/// supply an analytic and a finite-difference version respectively.
template <typename QuadForm>
ConvergenceCertificate general_certificate_impl(const GameConfig& cfg,
                                                const LinkTable<double>& v_at_q,
                                                const EquilibriumResult& equilibrium,
                                                const PowerProfile& p0, QuadForm&& quad_form,
                                                const GeneralCertificateOptions& opts) {
  const auto& q = equilibrium.profile;
  double h0 = kl_divergence(q, p0);
  if (!std::isfinite(h0))
    throw std::invalid_argument("general_certificate: infinite initial divergence");

  ConvergenceCertificate cert;
  auto supported = cfg.make_link_table<char>(0);
  cert.q0 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.num_users; ++k) {
    double thresh = opts.support_threshold_rel * cfg.max_power[k];
    for (int i = 0; i < cfg.links(k); ++i)
      if (q.allocation[k][i] > thresh) {
        supported[k][i] = 1;
        cert.q0 = std::min(cert.q0, q.allocation[k][i]);
      }
  }

  // m: worst off-support slack relative to the user's water level;
  // +inf when every accessible channel is in the support.
  cert.margin_m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.num_users; ++k)
    for (int i = 0; i < cfg.links(k); ++i)
      if (!supported[k][i])
        cert.margin_m = std::min(cert.margin_m, equilibrium.multipliers[k] - v_at_q[k][i]);

  std::mt19937_64 rng(opts.seed);

  // r: minimum sampled Rayleigh quotient of the Hessian over the solid
  // tangent cone, scaled by a safety factor.
  cert.rayleigh_r = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int s = 0; s < opts.n_samples; ++s) {
    auto w = random_boundary_ray(cfg, q, rng);
    double theta = unif(rng);
    auto point = q.allocation;
    double norm2 = 0.0;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        w[k][i] *= theta;
        point[k][i] += w[k][i];
        norm2 += w[k][i] * w[k][i];
      }
    if (norm2 <= 0.0) continue;
    double rq = quad_form(PowerProfile{std::move(point)}, w) / norm2;
    if (rq < -1e-9)
      throw StarConvexityError("general_certificate: negative sampled curvature");
    cert.rayleigh_r = std::min(cert.rayleigh_r, std::max(rq, 0.0));
  }
  cert.rayleigh_r *= opts.rayleigh_safety;

  // b: entropy-vs-seminorm comparison constant over sampled maximal rays.
  auto entropy_along = [&](const LinkTable<double>& z, double theta) {
    double h = 0.0;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        double qi = q.allocation[k][i];
        if (!supported[k][i] || qi <= 0.0) continue;
        double pi = qi + theta * z[k][i];
        if (pi <= 0.0) return std::numeric_limits<double>::infinity();
        h += qi * std::log(qi / pi);
      }
    return h;
  };
  auto seminorm_coeffs = [&](const LinkTable<double>& z) {
    double perp = 0.0, par_q = 0.0;
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i) {
        if (supported[k][i])
          par_q += z[k][i] * z[k][i] / q.allocation[k][i];
        else
          perp += std::abs(z[k][i]);
      }
    return std::pair{perp, par_q};
  };
  // Increasing fn with fn(lo) < 0 <= fn(hi); bisection to 1e-12.
  auto bisect_root = [](auto&& fn, double lo, double hi) {
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
      double mid = 0.5 * (lo + hi);
      (fn(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  const double a = opts.a;
  std::vector<LinkTable<double>> rays;
  std::vector<std::pair<double, double>> coeffs;
  double h_a = 0.0;
  for (int s = 0; s < opts.n_samples; ++s) {
    auto z = detail::random_boundary_ray(cfg, q, rng);
    auto [perp, par_q] = seminorm_coeffs(z);
    if (perp <= 0.0 && par_q <= 0.0) continue;
    auto gap = [&, perp = perp, par_q = par_q](double th) {
      return entropy_along(z, th) - a * (perp * th + 0.5 * par_q * th * th);
    };
    double theta_a = gap(1.0) < 0.0 ? 1.0 : bisect_root(gap, 1e-12, 1.0);
    h_a = std::max(h_a, std::min(entropy_along(z, theta_a),
                                 std::numeric_limits<double>::max()));
    rays.push_back(std::move(z));
    coeffs.emplace_back(perp, par_q);
  }
  double h_c = std::max(h0, h_a);
  cert.entropy_b = a;
  for (std::size_t s = 0; s < rays.size(); ++s) {
    auto level = [&](double th) { return entropy_along(rays[s], th) - h_c; };
    if (level(1.0) < 0.0) continue;  // ray never reaches the h_c level set
    double theta_c = bisect_root(level, 1e-12, 1.0);
    auto [perp, par_q] = coeffs[s];
    double g = perp * theta_c + 0.5 * par_q * theta_c * theta_c;
    if (g > 0.0) cert.entropy_b = std::max(cert.entropy_b, h_c / g);
  }

  cert.c = std::min(cert.margin_m / cert.entropy_b,
                    cert.rayleigh_r * cert.q0 / cert.entropy_b);
  for (int k = 0; k < cfg.num_users; ++k) cert.gamma[k] = h0 / cfg.max_power[k];
  return cert;
}

}  // namespace detail

/// Certificate for arbitrary (not necessarily strict) equilibria:
/// c = min(m/b, r q0 / b).
inline ConvergenceCertificate general_certificate(const GameConfig& cfg,
                                                  const ChannelState& channels,
                                                  const EquilibriumResult& equilibrium,
                                                  const PowerProfile& p0,
                                                  GeneralCertificateOptions opts = {}) {
  auto quad_form = [&](const PowerProfile& point, const LinkTable<double>& w) {
    auto total = received_power(point, channels, cfg);
    std::vector<double> proj(cfg.num_channels, 0.0);
    for (int k = 0; k < cfg.num_users; ++k)
      for (int i = 0; i < cfg.links(k); ++i)
        proj[cfg.accessible[k][i]] += channels.gains[k][i] * w[k][i];
    double quad = 0.0;
    for (int a = 0; a < cfg.num_channels; ++a) {
      double denom = cfg.noise_power[a] + total[a];
      quad += cfg.bandwidth[a] * proj[a] * proj[a] / (denom * denom);
    }
    return quad;
  };
  return detail::general_certificate_impl(
      cfg, marginal_utility(equilibrium.profile, channels, cfg), equilibrium, p0, quad_form,
      opts);
}

inline ConvergenceCertificate general_certificate(const GameConfig& cfg,
                                                  const FadingSpec& spec,
                                                  const EquilibriumResult& equilibrium,
                                                  const PowerProfile& p0,
                                                  GeneralCertificateOptions opts = {}) {
  auto value = [&](const PowerProfile& p) {
    return detail::ergodic_potential_from_r(scaled_powers(p, spec, cfg), cfg, true);
  };
  // Second central difference along w.
  auto quad_form = [&](const PowerProfile& point, const LinkTable<double>& w) {
    const double h = 1e-4;
    auto shifted = [&](double c) {
      auto alloc = point.allocation;
      for (std::size_t k = 0; k < alloc.size(); ++k)
        for (std::size_t i = 0; i < alloc[k].size(); ++i) {
          alloc[k][i] += c * w[k][i];
          if (alloc[k][i] < 0.0) alloc[k][i] = 0.0;
        }
      return value(PowerProfile{std::move(alloc)});
    };
    return (shifted(h) - 2.0 * value(point) + shifted(-h)) / (h * h);
  };
  return detail::general_certificate_impl(
      cfg, ergodic_potential_gradient(equilibrium.profile, spec, cfg), equilibrium, p0,
      quad_form, opts);
}

struct EvolutionaryIndex {
  double value = 0.0;        // negative KL time-derivative along the flow
  double perp_seminorm = 0.0;
  double par_seminorm = 0.0; // euclidean norm of the supported block
};

/// L_q(p) = -sum (p - q) v(p), with the seminorm split of p - q relative
/// to the support of q.
inline EvolutionaryIndex evolutionary_index(const PowerProfile& profile,
                                            const EquilibriumResult& equilibrium,
                                            const LinkTable<double>& marginals,
                                            double support_threshold_rel = 1e-6) {
  const auto& q = equilibrium.profile;
  EvolutionaryIndex out;
  double par2 = 0.0;
  for (std::size_t k = 0; k < q.allocation.size(); ++k) {
    double user_budget = 0.0;
    for (double x : q.allocation[k]) user_budget += x;
    double thresh = support_threshold_rel * user_budget;
    for (std::size_t i = 0; i < q.allocation[k].size(); ++i) {
      double d = profile.allocation[k][i] - q.allocation[k][i];
      out.value -= d * marginals[k][i];
      if (q.allocation[k][i] > thresh)
        par2 += d * d;
      else
        out.perp_seminorm += std::abs(d);
    }
  }
  out.par_seminorm = std::sqrt(par2);
  return out;
}

struct TrackingDelay {
  double delay = 0.0;               // seconds; positive = learner trails
  std::vector<int> lags;            // sample offsets of the correlogram
  std::vector<double> correlogram;  // link-averaged normalized cross-correlation
};

/// Lag of maximum cross-correlation between the per-link equilibrium and
/// learned power series, averaged over links with nonzero variance.
inline TrackingDelay tracking_delay(const std::vector<PowerProfile>& equilibrium_series,
                                    const std::vector<PowerProfile>& learned_series,
                                    double sample_period) {
  if (equilibrium_series.size() != learned_series.size() || equilibrium_series.size() < 3)
    throw std::invalid_argument("tracking_delay: need equal-length series of length >= 3");
  const long n = static_cast<long>(equilibrium_series.size());
  const long max_lag = std::min<long>(n / 2, 2000);

  // Flatten per-link series with mean removal.
  std::vector<std::vector<double>> eq, lr;
  const auto& shape = equilibrium_series.front().allocation;
  for (std::size_t k = 0; k < shape.size(); ++k)
    for (std::size_t i = 0; i < shape[k].size(); ++i) {
      std::vector<double> a(n), b(n);
      for (long t = 0; t < n; ++t) {
        a[t] = equilibrium_series[t].allocation[k][i];
        b[t] = learned_series[t].allocation[k][i];
      }
      eq.push_back(std::move(a));
      lr.push_back(std::move(b));
    }
  auto variance = [](const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    return var;
  };
  std::vector<std::size_t> usable;
  for (std::size_t j = 0; j < eq.size(); ++j)
    if (variance(eq[j]) > 0.0 && variance(lr[j]) > 0.0) usable.push_back(j);
  if (usable.empty())
    throw UndefinedCorrelationError("tracking_delay: all link series are constant");

  TrackingDelay out;
  double best = -std::numeric_limits<double>::infinity();
  int best_lag = 0;
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    // Pearson correlation over the overlap window, with means and variances
    // taken over the same window: normalizing by global statistics lets a
    // locally volatile far-lag segment outscore the true peak.
    double corr = 0.0;
    long lo = std::max<long>(0, -lag), hi = n - std::max<long>(0, lag);
    double overlap = static_cast<double>(hi - lo);
    std::size_t defined = 0;
    for (std::size_t j : usable) {
      double ma = 0.0, mb = 0.0;
      for (long t = lo; t < hi; ++t) {
        ma += eq[j][t];
        mb += lr[j][t + lag];
      }
      ma /= overlap;
      mb /= overlap;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (long t = lo; t < hi; ++t) {
        double da = eq[j][t] - ma, db = lr[j][t + lag] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      if (saa > 0.0 && sbb > 0.0) {
        corr += sab / std::sqrt(saa * sbb);
        ++defined;
      }
    }
    if (defined == 0) continue;
    corr /= static_cast<double>(defined);
    out.lags.push_back(static_cast<int>(lag));
    out.correlogram.push_back(corr);
    if (corr > best + 1e-15 || (std::abs(corr - best) <= 1e-15 && std::abs(lag) < std::abs(best_lag))) {
      best = corr;
      best_lag = static_cast<int>(lag);
    }
  }
  out.delay = best_lag * sample_period;
  return out;
}

}  // namespace pmac

#endif  // PMAC_METRICS_HPP
