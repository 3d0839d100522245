#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cornerflow/biot_savart.hpp"
#include "cornerflow/conformal.hpp"
#include "cornerflow/lyapunov.hpp"
#include "cornerflow/transport.hpp"

namespace cornerflow {

/// One line of a validation report.
struct CheckResult {
  std::string name;
  double value = 0.0;      ///< measured error or fitted quantity
  double tolerance = 0.0;  ///< threshold the value is compared against
  bool pass = false;
  std::vector<std::pair<std::string, double>> fitted;  ///< named fitted constants, if any
};

/// Random points T^{-1}(rho e^{i theta}) with mapped gap in [gap_lo, gap_hi],
/// kept at least `corner_clearance` away from corners.
inline std::vector<Complex> random_domain_points(const ConformalMap& map, std::size_t n, double gap_lo, double gap_hi,
                                                 std::uint64_t seed, double corner_clearance = 1e-2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complex> out;
  while (out.size() < n) {
    const double gap = gap_lo + (gap_hi - gap_lo) * unit(rng);
    const double rho = map.exterior() ? 1.0 + gap : 1.0 - gap;
    const Complex x = map.inverse(std::polar(rho, kTwoPi * unit(rng)));
    if (map.contains(x) && map.distance_to_nearest_corner(x) > corner_clearance) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel identities

inline CheckResult check_green_symmetry(const ConformalMap& map, std::size_t pairs = 1000, std::uint64_t seed = 11) {
  const auto xs = random_domain_points(map, pairs, 0.02, 2.0, seed);
  const auto ys = random_domain_points(map, pairs, 0.02, 2.0, seed + 1);
  double err = 0.0;
  for (std::size_t k = 0; k < pairs; ++k)
    err = std::max(err, std::abs(green_function(map, xs[k], ys[k]) - green_function(map, ys[k], xs[k])));
  return {"green_symmetry", err, 1e-12, err < 1e-12, {}};
}

/// K(x, y) against the central-difference perpendicular gradient of G(., y).
inline CheckResult check_kernel_gradient(const ConformalMap& map, std::size_t pairs = 200, std::uint64_t seed = 13) {
  const auto xs = random_domain_points(map, pairs, 0.05, 2.0, seed, 5e-2);
  const auto ys = random_domain_points(map, pairs, 0.05, 2.0, seed + 1, 5e-2);
  double err = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Complex x = xs[k], y = ys[k];
    const double sep = std::abs(x - y);
    if (sep < 1e-2) continue;
    const double h = 1e-5 * std::min({1.0, sep, map.boundary_distance(x), map.distance_to_nearest_corner(x)});
    auto g = [&](Complex p) { return green_function(map, p, y); };
    const double gx = (g(x + h) - g(x - h)) / (2.0 * h);
    const double gy = (g(x + Complex{0.0, h}) - g(x - Complex{0.0, h})) / (2.0 * h);
    const Complex fd = perp(Complex{gx, gy});
    const Complex kx = kernel_K(map, x, y);
    err = std::max(err, std::abs(kx - fd) / std::abs(kx));
  }
  return {"kernel_perp_gradient", err, 1e-5, err < 1e-5, {}};
}

inline CheckResult check_frac_identity(std::size_t pairs = 1000, std::uint64_t seed = 17) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  double err = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Complex a{coord(rng), coord(rng)}, b{coord(rng), coord(rng)};
    const double rhs = frac_identity_rhs(a, b);
    err = std::max(err, std::abs(frac_identity_lhs(a, b) - rhs) / rhs);
  }
  return {"frac_identity", err, 1e-12, err < 1e-12, {}};
}

/// Circulation of H on a circle enclosing the obstacle.
inline CheckResult check_harmonic_circulation(const ConformalMap& map) {
  const CirculationSpec unit{1.0, 1.0};
  const double radius = 2.0 * map.boundary_extent();
  const double c = circulation_probe(map, VortexEnsemble{}, unit, ClosedContour::circle({}, radius, 512));
  return {"harmonic_circulation", std::abs(c - 1.0), 1e-6, std::abs(c - 1.0) < 1e-6, {{"circulation", c}}};
}

/// Log-log slope of |field| along a ray for |x| in [1e2, 1e4].
inline double farfield_slope(const std::function<Complex(Complex)>& field, double direction = 0.7) {
  std::vector<double> lr, lv;
  for (double r : log_spaced(1e2, 1e4, 9)) {
    lr.push_back(std::log(r));
    lv.push_back(std::log(std::abs(field(std::polar(r, direction)))));
  }
  return least_squares_slope(lr, lv);
}

inline CheckResult check_harmonic_decay(const ConformalMap& map) {
  const double s = farfield_slope([&](Complex x) { return harmonic_field(map, x); });
  return {"harmonic_farfield_slope", s, 0.01, std::abs(s + 1.0) < 0.01, {{"expected", -1.0}}};
}

/// Zero total circulation (alpha = 0): one unit vortex balanced by gamma0 = -1.
inline CheckResult check_zero_alpha_decay(const ConformalMap& map) {
  VortexEnsemble ens;
  const Complex x0 = map.inverse(map.exterior() ? Complex{1.5, 0.4} : Complex{0.3, 0.2});
  ens.particles.push_back({x0, 1.0, 0.0});
  const CirculationSpec circ = CirculationSpec::make(map, -1.0, ens);
  const double s = farfield_slope([&](Complex x) { return velocity(map, ens, circ, x); });
  return {"zero_alpha_farfield_slope", s, 0.05, std::abs(s + 2.0) < 0.05, {{"expected", -2.0}}};
}

/// Tangential-velocity jump across the plate [-L, L] for the unit harmonic field,
/// compared with (1/(pi L)) / sqrt(1 - (x/L)^2) at x/L in {0, +-0.3, +-0.6}.
inline CheckResult check_plate_sheet_density(const ConformalMap& map) {
  const double half = detail::param_or(map.spec(), "half_length", 1.0);
  const CirculationSpec unit{1.0, 1.0};
  double err = 0.0;
  for (double s : {0.0, 0.3, -0.3, 0.6, -0.6}) {
    const double theta = std::acos(s);
    const double jump = sheet_density(map, VortexEnsemble{}, unit, theta) +
                        sheet_density(map, VortexEnsemble{}, unit, -theta);
    const double expected = 1.0 / (kPi * half * std::sqrt(1.0 - s * s));
    err = std::max(err, std::abs(jump - expected) / expected);
  }
  return {"plate_sheet_density", err, 0.02, err < 0.02, {}};
}

inline bool is_plate(const ConformalMap& map) { return map.spec().map_id == MapId::exterior_segment; }

inline std::vector<CheckResult> kernel_suite(const ConformalMap& map) {
  std::vector<CheckResult> out{check_green_symmetry(map), check_kernel_gradient(map), check_frac_identity()};
  if (map.exterior()) {
    out.push_back(check_harmonic_circulation(map));
    out.push_back(check_harmonic_decay(map));
    out.push_back(check_zero_alpha_decay(map));
  }
  if (is_plate(map)) out.push_back(check_plate_sheet_density(map));
  return out;
}

// ---------------------------------------------------------------------------
// Map probe

struct CornerProbe {
  CornerSpec corner;
  double expected = 0.0;
  double fitted = 0.0;
  bool pass = false;
};

inline constexpr double kCornerExponentTolerance = 0.05;

/// max |T(T^{-1}(y)) - y| over random y with 1.01 <= |y| <= 10 (exterior) or |y| <= 0.99 (interior).
inline double roundtrip_max_error(const ConformalMap& map, std::size_t samples = 100, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double err = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double rho = map.exterior() ? 1.01 + (10.0 - 1.01) * unit(rng) : 0.99 * std::sqrt(unit(rng));
    const Complex y = std::polar(rho, kTwoPi * unit(rng));
    const Complex x = map.inverse(y);
    if (!map.contains(x)) continue;  // wedge apex images round to the boundary
    err = std::max(err, std::abs(map.eval(x) - y));
  }
  return err;
}

inline std::vector<CornerProbe> probe_corners(const ConformalMap& map) {
  std::vector<CornerProbe> out;
  for (const CornerSpec& c : map.corners()) {
    CornerProbe p{c, kPi / c.angle - 1.0, corner_exponent_probe(map, c, default_probe_radii()), false};
    p.pass = std::abs(p.fitted - p.expected) <= kCornerExponentTolerance;
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lyapunov functional

inline CheckResult check_orthogonality(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                       std::size_t samples = 100, std::uint64_t seed = 23) {
  double worst = 0.0;
  for (Complex x : random_domain_points(map, samples, 0.01, 2.0, seed))
    worst = std::max(worst, orthogonality_residual(map, ens, circ, x));
  return {"orthogonality", worst, 1e-5, worst < 1e-5, {}};
}

/// Residual at points 1e-3 from each corner, spread over the sector.
inline CheckResult check_orthogonality_near_corner(const ConformalMap& map, const VortexEnsemble& ens,
                                                   const CirculationSpec& circ) {
  double worst = 0.0;
  for (const CornerSpec& c : map.corners()) {
    const Complex dir = corner_bisector(map, c);
    for (int k = -3; k <= 3; ++k) {
      const Complex x = c.location + 1e-3 * dir * std::polar(1.0, 0.4 * c.angle * k / 3.0);
      if (!map.contains(x)) continue;
      worst = std::max(worst, orthogonality_residual(map, ens, circ, x));
    }
  }
  return {"orthogonality_near_corner", worst, 1e-4, worst < 1e-4, {}};
}

inline CheckResult check_pinch_upper(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                     std::size_t samples = 1000) {
  const auto pts = near_boundary_samples(map, samples, 1e-4, 1e-1, 29);
  const BoundFit fit = check_L1_upper(map, ens, circ, pts);
  return {"L1_upper_bound", fit.worst, 50.0, fit.pass, {{"C1", fit.constant}}};
}

/// Lower bound with C2 fitted on gaps down to 1e-4 and, for stability, on
/// twice as many samples reaching 5e-5.
inline CheckResult check_pinch_lower(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                     std::size_t samples = 1000) {
  try {
    const BoundFit fit = check_L1_lower(map, ens, circ, near_boundary_samples(map, samples, 1e-4, 1e-1, 31));
    const BoundFit finer = check_L1_lower(map, ens, circ, near_boundary_samples(map, 2 * samples, 5e-5, 1e-1, 37));
    const bool stable = finer.constant > 0.0 && std::abs(finer.constant - fit.constant) <= 0.3 * fit.constant;
    return {"L1_lower_bound", fit.constant, 0.0, fit.pass && stable, {{"C2", fit.constant}, {"C2_finer", finer.constant}}};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SignConditionViolated) throw;
    return {"L1_lower_bound", std::numeric_limits<double>::quiet_NaN(), 0.0, false, {}};
  }
}

/// C3(g) = max |dt L1| / (gap (1 + |ln gap|)) over samples with gap in [g, 1e-1];
/// stable when C3(1e-4) <= 1.3 C3(1e-2).
inline CheckResult check_dtL1_decay(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                    std::size_t samples = 400) {
  const ParticleFieldCache cache(map, ens, circ);
  double coarse = 0.0, fine = 0.0;
  for (Complex x : near_boundary_samples(map, samples, 1e-4, 1e-1, 41)) {
    if (map.distance_to_nearest_corner(x) < 1e-6) continue;
    const double gap = map.mapped_gap(map.eval(x));
    const double r = dt_L1_decay_ratio(map, cache, x);
    fine = std::max(fine, r);
    if (gap >= 1e-2) coarse = std::max(coarse, r);
  }
  const double ratio = coarse > 0.0 ? fine / coarse : (fine == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return {"dtL1_boundary_decay", ratio, 1.3, ratio <= 1.3, {{"C3_gap_1e-2", coarse}, {"C3_gap_1e-4", fine}}};
}

/// dt L1 formula against (L1(t + dt) - L1(t - dt)) / (2 dt) at fixed points,
/// at `times` instants obtained by advancing the state.
inline CheckResult check_dtL1_formula(const FlowState& state, std::size_t points = 5, std::size_t times = 4,
                                      double dt = 1e-4, double spacing = 0.05, int threads = 1) {
  const ConformalMap& map = *state.map;
  const auto xs = random_domain_points(map, points, 0.05, 1.5, 43, 5e-2);
  double worst = 0.0;
  FlowState cur = state;
  for (std::size_t t = 0; t < times; ++t) {
    if (t > 0) cur = advance_rk4(cur, spacing, threads);
    const FlowState fwd = advance_rk4(cur, dt, threads), bwd = advance_rk4(cur, -dt, threads);
    const ParticleFieldCache cache(map, cur.ensemble, cur.circ);
    for (Complex x : xs) {
      const double formula = dt_L1_formula(map, cache, x);
      const double fd = (stream_L1(map, fwd.ensemble, fwd.circ, x) - stream_L1(map, bwd.ensemble, bwd.circ, x)) /
                        (2.0 * dt);
      worst = std::max(worst, std::abs(formula - fd) / std::max(std::abs(fd), 1e-300));
    }
  }
  return {"dtL1_formula_vs_finite_difference", worst, 1e-3, worst < 1e-3, {}};
}

inline CheckResult check_gronwall(const LyapunovTrace& trace) {
  const GronwallFit fit = gronwall_monitor(trace);
  return {"gronwall_envelope_particle_" + std::to_string(trace.particle_id), fit.max_L,
          fit.envelope + 0.1 * std::abs(fit.envelope), fit.bound_ok,
          {{"C5", fit.c5}, {"C6", fit.c6}, {"envelope", fit.envelope}}};
}

/// Every snapshot-level Lyapunov check (the Gronwall check needs a trace).
inline std::vector<CheckResult> lyapunov_suite(const FlowState& state, int threads = 1) {
  const ConformalMap& map = *state.map;
  std::vector<CheckResult> out{check_orthogonality(map, state.ensemble, state.circ)};
  if (!map.corners().empty()) out.push_back(check_orthogonality_near_corner(map, state.ensemble, state.circ));
  out.push_back(check_pinch_upper(map, state.ensemble, state.circ));
  out.push_back(check_pinch_lower(map, state.ensemble, state.circ));
  out.push_back(check_dtL1_decay(map, state.ensemble, state.circ));
  if (!state.ensemble.empty()) out.push_back(check_dtL1_formula(state, 5, 4, 1e-4, 0.05, threads));
  return out;
}

}  // namespace cornerflow
