#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "cornerflow/biot_savart.hpp"

namespace cornerflow {

/// L1 and L = -ln|L1| along the trajectory of one tracked particle.
struct LyapunovTrace {
  std::size_t particle_id = 0;
  std::vector<double> times;
  std::vector<double> L1_values;
  std::vector<double> L_values;
  std::vector<double> dtL1_formula;
  std::vector<double> dtL1_finite_diff;
};

inline constexpr double kTinyL1 = 1e-300;

/// L = -ln|L1|, +inf when |L1| < 1e-300.
inline double lyapunov_L(double l1) {
  return std::abs(l1) < kTinyL1 ? std::numeric_limits<double>::infinity() : -std::log(std::abs(l1));
}

inline double stream_L1_from_sources(const ConformalMap& map, std::span<const MappedSource> sources,
                                     const CirculationSpec& circ, Complex x) {
  const Complex zeta = map.eval(x);
  for (const MappedSource& s : sources)
    if (s.delta2 == 0.0 && zeta == Complex{s.re, s.im})
      throw Error(ErrorKind::CoincidesWithParticle, "L1 evaluated on an unregularised particle");
  double value = mapped_stream_sum(zeta, sources);
  if (map.exterior()) value += circ.alpha * std::log(std::abs(zeta));
  return value / kTwoPi;
}

/// Lyapunov functional L1(x): the stream function of the regularised flow,
///   (1/2pi) sum_j Gamma_j ln(ratio_j(x)) + (alpha/2pi) ln|T(x)|   (no alpha term inside).
inline double stream_L1(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ, Complex x) {
  const auto sources = map_sources(map, ens);
  return stream_L1_from_sources(map, sources, circ, x);
}

/// Per-particle quantities reused by the time-derivative formula.
struct ParticleFieldCache {
  std::vector<MappedSource> sources;
  std::vector<Complex> mapped_velocity;  // R[omega](x_j) + alpha T(x_j)^perp/|T(x_j)|^2
  std::vector<double> jacobian;          // |det DT(x_j)| = |T'(x_j)|^2

  ParticleFieldCache(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ)
      : sources(map_sources(map, ens)) {
    mapped_velocity.reserve(ens.size());
    jacobian.reserve(ens.size());
    for (std::size_t j = 0; j < ens.size(); ++j) {
      const Complex eta{sources[j].re, sources[j].im};
      mapped_velocity.push_back(mapped_velocity_vector(eta, sources, circ.alpha, map.exterior()));
      jacobian.push_back(std::norm(map.derivative(ens.particles[j].position)));
    }
  }
};

/// d/dt L1 at a fixed point x, transcribed from the moving-particle sum:
///   (1/4pi^2) sum_j Gamma_j |det DT(x_j)| F_j . (R[omega](x_j) + alpha T(x_j)^perp/|T(x_j)|^2),
///   F_j = (T(x_j)-T(x))/(|T(x_j)-T(x)|^2 + d_j^2) - (T(x_j)-T(x)*)/(|T(x_j)-T(x)*|^2 + d_j^2/|T(x)|^2).
inline double dt_L1_formula(const ConformalMap& map, const ParticleFieldCache& cache, Complex x) {
  const Complex zeta = map.eval(x);
  double acc = 0.0;
  for (std::size_t j = 0; j < cache.sources.size(); ++j) {
    const MappedSource& s = cache.sources[j];
    const Complex eta{s.re, s.im};
    if (s.delta2 == 0.0 && eta == zeta)
      throw Error(ErrorKind::CoincidesWithParticle, "dt_L1 evaluated on an unregularised particle");
    const Complex f = (eta - zeta) / (std::norm(eta - zeta) + s.delta2) - image_term(eta, zeta, s.delta2);
    acc += s.gamma * cache.jacobian[j] * dot(f, cache.mapped_velocity[j]);
  }
  return acc / (kTwoPi * kTwoPi);
}

inline double dt_L1_formula(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                            Complex x) {
  return dt_L1_formula(map, ParticleFieldCache(map, ens, circ), x);
}

/// Length scale used for finite-difference steps around x.
inline double local_length_scale(const ConformalMap& map, std::span<const MappedSource> sources, Complex x) {
  const Complex zeta = map.eval(x);
  const double speed = std::abs(map.derivative(x));
  double scale = std::min(1.0, map.mapped_gap(zeta) / speed);
  for (const MappedSource& s : sources) scale = std::min(scale, std::sqrt(s.delta2) / speed);
  return std::max(scale, 1e-12);
}

/// |u . grad L1| / (|u| |grad L1| + 1e-300), grad L1 by central differences
/// with step 1e-6 times the local length scale.
inline double orthogonality_residual(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                     Complex x) {
  const auto sources = map_sources(map, ens);
  const double h = 1e-6 * local_length_scale(map, sources, x);
  auto l1 = [&](Complex p) { return stream_L1_from_sources(map, sources, circ, p); };
  const Complex grad{(l1(x + h) - l1(x - h)) / (2.0 * h),
                     (l1(x + Complex{0.0, h}) - l1(x - Complex{0.0, h})) / (2.0 * h)};
  const Complex u = velocity_from_sources(map, sources, circ, x);
  return std::abs(dot(u, grad)) / (std::abs(u) * std::abs(grad) + 1e-300);
}

// ---------------------------------------------------------------------------
// Two-sided bounds near the boundary

/// Points T^{-1}(rho e^{i theta}) with mapped gap |rho - 1| log-uniform in
/// [gap_lo, gap_hi] and theta uniform.
inline std::vector<Complex> near_boundary_samples(const ConformalMap& map, std::size_t n, double gap_lo,
                                                  double gap_hi, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complex> out;
  out.reserve(n);
  while (out.size() < n) {
    const double gap = std::exp(std::log(gap_lo) + (std::log(gap_hi) - std::log(gap_lo)) * unit(rng));
    const double theta = kTwoPi * unit(rng);
    const double rho = map.exterior() ? 1.0 + gap : 1.0 - gap;
    const Complex x = map.inverse(std::polar(rho, theta));
    if (map.contains(x)) out.push_back(x);
  }
  return out;
}

struct BoundFit {
  double constant = 0.0;  ///< fitted C1 (upper) or C2 (lower)
  double worst = 0.0;     ///< upper: max/median ratio; lower: min ratio
  bool pass = false;
};

/// Smallest C1 with |L1(x)| <= C1 | |T(x)| - 1 |^{1/2} on the samples; passes
/// when the ratio stays bounded (max/median < 50).
inline BoundFit check_L1_upper(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                               std::span<const Complex> samples) {
  const auto sources = map_sources(map, ens);
  std::vector<double> ratios;
  ratios.reserve(samples.size());
  for (Complex x : samples) {
    const double gap = map.mapped_gap(map.eval(x));
    ratios.push_back(std::abs(stream_L1_from_sources(map, sources, circ, x)) / std::sqrt(gap));
  }
  BoundFit fit;
  if (ratios.empty()) return fit;
  fit.constant = *std::max_element(ratios.begin(), ratios.end());
  std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2), ratios.end());
  const double median = ratios[ratios.size() / 2];
  if (fit.constant == 0.0) {
    fit.worst = 0.0;
    fit.pass = true;
  } else {
    fit.worst = median > 0.0 ? fit.constant / median : std::numeric_limits<double>::infinity();
    fit.pass = fit.worst < 50.0;
  }
  return fit;
}

/// +1 when omega <= 0 and alpha >= 0 (exterior), -1 for the mirrored signs.
/// Throws SignConditionViolated otherwise.
inline double sign_condition_orientation(const ConformalMap& map, const VortexEnsemble& ens,
                                         const CirculationSpec& circ) {
  bool any_pos = false, any_neg = false;
  for (const auto& p : ens.particles) {
    any_pos |= p.circulation > 0.0;
    any_neg |= p.circulation < 0.0;
  }
  const double alpha = map.exterior() ? circ.alpha : 0.0;
  if (!any_pos && alpha >= 0.0 && (any_neg || alpha > 0.0)) return 1.0;
  if (!any_neg && alpha <= 0.0 && (any_pos || alpha < 0.0)) return -1.0;
  throw Error(ErrorKind::SignConditionViolated, "vorticity and alpha do not satisfy a one-signed condition");
}

/// Largest C2 with s L1(x) >= C2 | |T(x)| - 1 | (s = +1, or -1 for mirrored signs).
inline BoundFit check_L1_lower(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                               std::span<const Complex> samples) {
  const double orientation = sign_condition_orientation(map, ens, circ);
  const auto sources = map_sources(map, ens);
  BoundFit fit;
  fit.constant = std::numeric_limits<double>::infinity();
  for (Complex x : samples) {
    const double gap = map.mapped_gap(map.eval(x));
    fit.constant = std::min(fit.constant, orientation * stream_L1_from_sources(map, sources, circ, x) / gap);
  }
  fit.worst = fit.constant;
  fit.pass = fit.constant > 0.0;
  return fit;
}

/// Ratio |dt L1(x)| / ( gap (1 + |ln gap|) ) behind the near-boundary decay bound.
inline double dt_L1_decay_ratio(const ConformalMap& map, const ParticleFieldCache& cache, Complex x) {
  const double gap = map.mapped_gap(map.eval(x));
  return std::abs(dt_L1_formula(map, cache, x)) / (gap * (1.0 + std::abs(std::log(gap))));
}

// ---------------------------------------------------------------------------
// Gronwall envelope

struct GronwallFit {
  double c5 = 0.0;
  double c6 = 0.0;
  double envelope = 0.0;  ///< (L(0) + C5/C6) e^{C6 T*}  (L(0) + C5 T* when C6 = 0)
  double max_L = 0.0;
  bool bound_ok = false;
};

/// Fits C5, C6 >= 0 with L(t_{k+1}) - L(t_k) <= (C5 + C6 L(t_k)) dt_k for every
/// step of the trace, choosing among candidate C6 the one with the tightest
/// envelope; bound_ok iff max L <= envelope with 10% slack.
inline GronwallFit gronwall_monitor(const LyapunovTrace& trace) {
  std::vector<double> t, L;
  for (std::size_t k = 0; k < trace.times.size(); ++k)
    if (std::isfinite(trace.L_values[k])) {
      t.push_back(trace.times[k]);
      L.push_back(trace.L_values[k]);
    }
  if (t.size() < 2) throw Error(ErrorKind::EmptyTrace, "gronwall_monitor needs at least two finite samples");

  const double horizon = t.back() - t.front();
  auto envelope_for = [&](double c6, double& c5) {
    c5 = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const double dt = t[k + 1] - t[k];
      if (dt <= 0.0) continue;
      c5 = std::max(c5, (L[k + 1] - L[k]) / dt - c6 * L[k]);
    }
    return c6 > 0.0 ? (L.front() + c5 / c6) * std::exp(c6 * horizon) : L.front() + c5 * horizon;
  };

  GronwallFit best;
  best.envelope = std::numeric_limits<double>::infinity();
  std::vector<double> candidates{0.0};
  for (double c : log_spaced(1e-4, 1e2, 121)) candidates.push_back(c);
  for (double c6 : candidates) {
    double c5 = 0.0;
    const double env = envelope_for(c6, c5);
    if (env < best.envelope) {
      best.envelope = env;
      best.c5 = c5;
      best.c6 = c6;
    }
  }
  best.max_L = *std::max_element(L.begin(), L.end());
  best.bound_ok = best.max_L <= best.envelope + 0.1 * std::abs(best.envelope);
  return best;
}

// ---------------------------------------------------------------------------
// Singular-integral bound on the mapped exterior

struct TechnicFit {
  double fitted_constant = 0.0;
  std::vector<double> ratios;
};

/// Midpoint quadrature of int_{1<|y|<R_h} |h(y)| / (|y - x| |y - x*|) dy on a
/// polar grid, divided by (|ln(|x| - 1)| + |x|), for each sample x (|x| > 1).
inline double technic_integral(const std::function<double(Complex)>& h, double support_radius, Complex x,
                               int n_radial = 400, int n_angular = 800) {
  const Complex xs = inversion(x);
  const double dr = (support_radius - 1.0) / n_radial, dth = kTwoPi / n_angular;
  double acc = 0.0;
  for (int i = 0; i < n_radial; ++i) {
    const double r = 1.0 + (i + 0.5) * dr;
    for (int k = 0; k < n_angular; ++k) {
      const Complex y = std::polar(r, (k + 0.5) * dth);
      const double hv = std::abs(h(y));
      if (hv == 0.0) continue;
      acc += hv / (std::abs(y - x) * std::abs(y - xs)) * r;
    }
  }
  return acc * dr * dth;
}

inline TechnicFit technic_bound_check(const std::function<double(Complex)>& h, double support_radius,
                                      std::span<const Complex> x_samples, int n_radial = 400, int n_angular = 800) {
  TechnicFit fit;
  for (Complex x : x_samples) {
    const double m = std::abs(x);
    const double ratio =
        technic_integral(h, support_radius, x, n_radial, n_angular) / (std::abs(std::log(m - 1.0)) + m);
    fit.ratios.push_back(ratio);
    fit.fitted_constant = std::max(fit.fitted_constant, ratio);
  }
  return fit;
}

}  // namespace cornerflow
