#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "cornerflow/biot_savart.hpp"
#include "cornerflow/lyapunov.hpp"
#include "cornerflow/parallel.hpp"

namespace cornerflow {

struct FlowState {
  double time = 0.0;
  VortexEnsemble ensemble;
  CirculationSpec circ;
  std::shared_ptr<const ConformalMap> map;
};

struct DiagnosticsRecord {
  double time = 0.0;
  double total_circulation = 0.0;
  double l1_proxy = 0.0;
  double linf_proxy = 0.0;
  double support_radius = 0.0;
  double min_mapped_gap = 0.0;
  double gamma = 0.0;
  double lyapunov_max = 0.0;
};

// ---------------------------------------------------------------------------
// Initial data

enum class PatchShape { disk, square, annulus };

/// Disk: radius = outer. Square: side = outer. Annulus: inner < |x - center| < outer.
struct PatchSpec {
  PatchShape shape = PatchShape::disk;
  Complex center;
  double outer = 0.0;
  double inner = 0.0;

  bool inside(Complex x) const {
    const Complex d = x - center;
    switch (shape) {
      case PatchShape::disk: return std::abs(d) < outer;
      case PatchShape::square: return std::abs(d.real()) < 0.5 * outer && std::abs(d.imag()) < 0.5 * outer;
      case PatchShape::annulus: return std::abs(d) > inner && std::abs(d) < outer;
    }
    return false;
  }

  /// Half-width of the bounding box around the centre.
  double half_extent() const { return shape == PatchShape::square ? 0.5 * outer : outer; }

  /// Points on the outer (and inner) outline.
  std::vector<Complex> outline(int n = 256) const {
    std::vector<Complex> pts;
    for (int k = 0; k < n; ++k) {
      const double t = kTwoPi * k / n;
      if (shape == PatchShape::square) {
        const double s = 4.0 * k / n, a = 0.5 * outer;
        const int side = static_cast<int>(s);
        const double f = 2.0 * (s - side) - 1.0;
        const Complex offsets[4] = {{a, f * a}, {-f * a, a}, {-a, -f * a}, {f * a, -a}};
        pts.push_back(center + offsets[side]);
      } else {
        pts.push_back(center + std::polar(outer, t));
        if (shape == PatchShape::annulus) pts.push_back(center + std::polar(inner, t));
      }
    }
    return pts;
  }
};

inline constexpr int kCellSubsamples = 16;

/// Particles on the lattice center + h (i, j). Cells cut by the patch outline
/// keep their covered fraction (16 x 16 subsamples); the particle sits at the
/// centroid of the covered part with Gamma = omega0(x) h^2 fraction.
inline VortexEnsemble patch_init(const ConformalMap& map, const PatchSpec& patch,
                                 const std::function<double(Complex)>& omega0, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "lattice spacing must be positive");
  VortexEnsemble ens;
  ens.patch_cell_area = h * h;
  const int m = static_cast<int>(std::ceil(patch.half_extent() / h)) + 1;
  for (int j = -m; j <= m; ++j) {
    for (int i = -m; i <= m; ++i) {
      const Complex cell = patch.center + h * Complex{double(i), double(j)};
      int hits = 0;
      Complex sum;
      for (int b = 0; b < kCellSubsamples; ++b)
        for (int a = 0; a < kCellSubsamples; ++a) {
          const Complex p = cell + h * Complex{(a + 0.5) / kCellSubsamples - 0.5, (b + 0.5) / kCellSubsamples - 0.5};
          if (patch.inside(p)) {
            ++hits;
            sum += p;
          }
        }
      if (hits == 0) continue;
      const Complex x = sum / double(hits);
      const double fraction = double(hits) / (kCellSubsamples * kCellSubsamples);
      ens.particles.push_back({x, omega0(x) * h * h * fraction, 0.0});
    }
  }
  for (const auto& p : ens.particles)
    if (!map.contains(p.position) || map.boundary_distance(p.position) <= 2.0 * h)
      throw Error(ErrorKind::PatchTouchesBoundary, "patch particle within 2h of the boundary");
  return ens;
}

/// Shared blob radius: twice the median nearest-neighbour distance in the mapped
/// plane (2 h |T'| for a single particle). `override_radius` replaces it when set.
inline void assign_blob_radius(const ConformalMap& map, VortexEnsemble& ens, double h,
                               std::optional<double> override_radius = std::nullopt) {
  if (ens.empty()) return;
  double delta = 0.0;
  if (override_radius) {
    delta = *override_radius;
  } else if (ens.size() == 1) {
    delta = 2.0 * h * std::abs(map.derivative(ens.particles[0].position));
  } else {
    std::vector<Complex> eta;
    for (const auto& p : ens.particles) eta.push_back(map.eval(p.position));
    std::vector<double> nearest(eta.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < eta.size(); ++i)
      for (std::size_t j = i + 1; j < eta.size(); ++j) {
        const double d = std::abs(eta[i] - eta[j]);
        nearest[i] = std::min(nearest[i], d);
        nearest[j] = std::min(nearest[j], d);
      }
    std::nth_element(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(nearest.size() / 2),
                     nearest.end());
    delta = 2.0 * nearest[nearest.size() / 2];
  }
  for (auto& p : ens.particles) p.blob_radius = delta;
}

// ---------------------------------------------------------------------------
// Velocity and stepping

inline constexpr double kBoundaryContact = 1e-12;

inline double min_mapped_gap(const ConformalMap& map, const VortexEnsemble& ens) {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& p : ens.particles) gap = std::min(gap, map.mapped_gap(map.eval(p.position)));
  return gap;
}

/// Particle velocities u(x_i). The regularised self free term vanishes; the
/// self image term is kept.
inline std::vector<Complex> rhs_at(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                   int threads = 1) {
  const auto sources = map_sources(map, ens);
  for (const MappedSource& s : sources)
    if (map.mapped_gap(Complex{s.re, s.im}) < kBoundaryContact)
      throw Error(ErrorKind::ParticleOnBoundary, "particle within 1e-12 of the boundary in the mapped plane");
  std::vector<Complex> u(ens.size());
  parallel_for(ens.size(), threads, [&](std::size_t i) {
    const Complex eta{sources[i].re, sources[i].im};
    const Complex dt = map.derivative(ens.particles[i].position);
    u[i] = std::conj(dt) * mapped_velocity_vector(eta, sources, circ.alpha, map.exterior()) / kTwoPi;
  });
  return u;
}

inline std::vector<Complex> rhs(const FlowState& state, int threads = 1) {
  return rhs_at(*state.map, state.ensemble, state.circ, threads);
}

/// Smallest mapped gap and largest mapped speed |T'(x_i)| |u(x_i)|.
struct StepLimits {
  double min_gap = std::numeric_limits<double>::infinity();
  double max_mapped_speed = 0.0;
};

inline StepLimits step_limits(const ConformalMap& map, const VortexEnsemble& ens, const std::vector<Complex>& u) {
  StepLimits lim;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Complex x = ens.particles[i].position;
    lim.min_gap = std::min(lim.min_gap, map.mapped_gap(map.eval(x)));
    lim.max_mapped_speed = std::max(lim.max_mapped_speed, std::abs(map.derivative(x)) * std::abs(u[i]));
  }
  return lim;
}

inline constexpr double kAutoDtFactor = 0.25;
inline constexpr double kStepGuardFactor = 0.5;
inline constexpr double kMinAutoDt = 1e-4;
inline constexpr double kMaxAutoDt = 1e-1;

/// 0.25 min_gap / max_mapped_speed clamped to [1e-4, 1e-1].
inline double auto_dt(const FlowState& state, int threads = 1) {
  if (state.ensemble.empty()) return kMaxAutoDt;
  const StepLimits lim = step_limits(*state.map, state.ensemble, rhs(state, threads));
  if (lim.max_mapped_speed == 0.0) return kMaxAutoDt;
  return std::clamp(kAutoDtFactor * lim.min_gap / lim.max_mapped_speed, kMinAutoDt, kMaxAutoDt);
}

/// Largest stage speed seen per particle during a step.
using StageSpeeds = std::vector<double>;

namespace detail {

inline void check_stage(const ConformalMap& map, const VortexEnsemble& from, const VortexEnsemble& stage) {
  for (std::size_t i = 0; i < stage.size(); ++i) {
    const Complex a = from.particles[i].position, b = stage.particles[i].position;
    if (!std::isfinite(b.real()) || !std::isfinite(b.imag()) || !map.contains(b) || map.chord_leaves(a, b))
      throw Error(ErrorKind::ParticleEscapedDomain, "particle " + std::to_string(i) + " left the domain");
  }
}

inline VortexEnsemble displaced(const VortexEnsemble& base, const std::vector<Complex>& k, double scale) {
  VortexEnsemble out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out.particles[i].position += scale * k[i];
  return out;
}

}  // namespace detail

/// Classical RK4 step for any signed dt. Optionally reports each particle's
/// largest stage speed and enforces the stability guard on k1.
inline FlowState advance_rk4(const FlowState& state, double dt, int threads = 1, StageSpeeds* speeds = nullptr,
                             bool guard = false) {
  const ConformalMap& map = *state.map;
  const VortexEnsemble& e0 = state.ensemble;
  FlowState next = state;
  next.time = state.time + dt;
  if (e0.empty() || dt == 0.0) return next;

  const auto k1 = rhs_at(map, e0, state.circ, threads);
  if (guard) {
    const StepLimits lim = step_limits(map, e0, k1);
    if (std::abs(dt) * lim.max_mapped_speed > kStepGuardFactor * lim.min_gap)
      throw Error(ErrorKind::StepTooLarge, "dt exceeds 0.5 min_gap / max_mapped_speed");
  }
  const VortexEnsemble e1 = detail::displaced(e0, k1, 0.5 * dt);
  detail::check_stage(map, e0, e1);
  const auto k2 = rhs_at(map, e1, state.circ, threads);
  const VortexEnsemble e2 = detail::displaced(e0, k2, 0.5 * dt);
  detail::check_stage(map, e0, e2);
  const auto k3 = rhs_at(map, e2, state.circ, threads);
  const VortexEnsemble e3 = detail::displaced(e0, k3, dt);
  detail::check_stage(map, e0, e3);
  const auto k4 = rhs_at(map, e3, state.circ, threads);

  for (std::size_t i = 0; i < e0.size(); ++i)
    next.ensemble.particles[i].position += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  detail::check_stage(map, e0, next.ensemble);

  if (speeds) {
    speeds->assign(e0.size(), 0.0);
    for (std::size_t i = 0; i < e0.size(); ++i)
      (*speeds)[i] = std::max({std::abs(k1[i]), std::abs(k2[i]), std::abs(k3[i]), std::abs(k4[i])});
  }
  return next;
}

/// Forward RK4 step with the stability guard; dt = 0 returns the state unchanged.
inline FlowState step_rk4(const FlowState& state, double dt, int threads = 1, StageSpeeds* speeds = nullptr) {
  if (!(dt >= 0.0)) throw Error(ErrorKind::InvalidArgument, "step_rk4 requires dt >= 0");
  if (dt == 0.0) return state;
  return advance_rk4(state, dt, threads, speeds, true);
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Obstacle circulation from a circle of radius 2 max(support, obstacle extent)
/// minus the enclosed vorticity; zero for interior domains.
inline double probe_gamma(const FlowState& state, int nodes = 512) {
  const ConformalMap& map = *state.map;
  if (!map.exterior()) return 0.0;
  const double radius = 2.0 * std::max(state.ensemble.support_radius(), map.boundary_extent());
  const double total = circulation_probe(map, state.ensemble, state.circ, ClosedContour::circle({}, radius, nodes));
  return total - state.ensemble.total_circulation();
}

inline double tracked_L(const FlowState& state, std::size_t id) {
  return lyapunov_L(stream_L1(*state.map, state.ensemble, state.circ, state.ensemble.particles[id].position));
}

inline DiagnosticsRecord diagnose(const FlowState& state, const std::vector<std::size_t>& tracked) {
  DiagnosticsRecord r;
  r.time = state.time;
  r.total_circulation = state.ensemble.total_circulation();
  r.l1_proxy = state.ensemble.l1_proxy();
  r.linf_proxy = state.ensemble.linf_proxy();
  r.support_radius = state.ensemble.support_radius();
  r.min_mapped_gap = state.ensemble.empty() ? std::numeric_limits<double>::infinity()
                                            : min_mapped_gap(*state.map, state.ensemble);
  r.gamma = probe_gamma(state);
  if (tracked.empty()) {
    r.lyapunov_max = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.lyapunov_max = -std::numeric_limits<double>::infinity();
    for (std::size_t id : tracked) r.lyapunov_max = std::max(r.lyapunov_max, tracked_L(state, id));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Runs

struct SimulationSettings {
  double t_final = 1.0;
  std::optional<double> dt;  ///< nullopt: auto
  int output_stride = 1;
  int snapshot_stride = 0;  ///< 0: initial and final snapshots only
  std::vector<std::size_t> tracked;
  int threads = 1;
};

struct Snapshot {
  std::size_t step = 0;
  double time = 0.0;
  VortexEnsemble ensemble;
};

struct SimulationResult {
  std::vector<DiagnosticsRecord> records;
  std::vector<Snapshot> snapshots;
  std::vector<LyapunovTrace> traces;
  double dt = 0.0;
  std::size_t steps = 0;
  double initial_support = 0.0;  ///< R0
  double support_speed = 0.0;    ///< C: largest speed observed outside B(0, R0)
  FlowState final_state;
};

/// Largest speed on the circle |x| = R0 inside the domain (64 samples).
inline double ring_speed(const FlowState& state, double radius) {
  const ConformalMap& map = *state.map;
  const auto sources = map_sources(map, state.ensemble);
  double best = 0.0;
  for (int k = 0; k < 64; ++k) {
    const Complex x = std::polar(radius, kTwoPi * k / 64);
    if (!map.contains(x) || map.distance_to_nearest_corner(x) < 1e-6) continue;
    best = std::max(best, std::abs(velocity_from_sources(map, sources, state.circ, x)));
  }
  return best;
}

/// Steps dt_eff = T* / ceil(T* / dt) to T*, recording diagnostics every
/// `output_stride` steps (always at t = 0 and t = T*). Lyapunov traces hold L1,
/// the dt L1 formula and the centred difference of L1 at the particle's
/// current position.
inline SimulationResult simulate(const FlowState& initial, const SimulationSettings& settings) {
  if (!(settings.t_final > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_final must be positive");
  if (settings.output_stride < 1) throw Error(ErrorKind::InvalidArgument, "output_stride must be positive");
  for (std::size_t id : settings.tracked)
    if (id >= initial.ensemble.size()) throw Error(ErrorKind::InvalidArgument, "tracked particle index out of range");

  const ConformalMap& map = *initial.map;
  const int threads = settings.threads;
  const double dt_raw = settings.dt ? *settings.dt : auto_dt(initial, threads);
  if (!(dt_raw > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(settings.t_final / dt_raw - 1e-12));
  const double dt = settings.t_final / static_cast<double>(steps);

  SimulationResult result;
  result.dt = dt;
  result.steps = steps;
  result.initial_support = initial.ensemble.support_radius();
  result.support_speed = initial.ensemble.empty() ? 0.0 : ring_speed(initial, result.initial_support);
  for (std::size_t id : settings.tracked) result.traces.push_back(LyapunovTrace{id, {}, {}, {}, {}, {}});

  auto should_output = [&](std::size_t n) { return n % settings.output_stride == 0 || n == steps; };
  auto should_snapshot = [&](std::size_t n) {
    return n == 0 || n == steps || (settings.snapshot_stride > 0 && n % settings.snapshot_stride == 0);
  };

  // Trace entries at step n need the states at n - 1 and n + 1.
  auto record_trace = [&](const FlowState& prev, const FlowState& cur, const FlowState& next) {
    const ParticleFieldCache cache(map, cur.ensemble, cur.circ);
    for (LyapunovTrace& tr : result.traces) {
      const Complex x = cur.ensemble.particles[tr.particle_id].position;
      const double l1 = stream_L1_from_sources(map, cache.sources, cur.circ, x);
      const double lp = stream_L1(map, next.ensemble, next.circ, x);
      const double lm = stream_L1(map, prev.ensemble, prev.circ, x);
      tr.times.push_back(cur.time);
      tr.L1_values.push_back(l1);
      tr.L_values.push_back(lyapunov_L(l1));
      tr.dtL1_formula.push_back(dt_L1_formula(map, cache, x));
      tr.dtL1_finite_diff.push_back((lp - lm) / (next.time - prev.time));
    }
  };

  FlowState prev = result.traces.empty() ? initial : advance_rk4(initial, -dt, threads);
  FlowState cur = initial;
  StageSpeeds speeds;
  for (std::size_t n = 0;; ++n) {
    if (should_output(n)) result.records.push_back(diagnose(cur, settings.tracked));
    if (should_snapshot(n)) result.snapshots.push_back({n, cur.time, cur.ensemble});
    if (n == steps) {
      if (!result.traces.empty() && should_output(n)) record_trace(prev, cur, advance_rk4(cur, dt, threads));
      break;
    }
    FlowState next = step_rk4(cur, dt, threads, &speeds);
    if (n + 1 == steps) next.time = settings.t_final;
    for (std::size_t i = 0; i < speeds.size(); ++i)
      if (std::abs(next.ensemble.particles[i].position) > result.initial_support)
        result.support_speed = std::max(result.support_speed, speeds[i]);
    if (!result.traces.empty() && should_output(n)) record_trace(prev, cur, next);
    prev = std::move(cur);
    cur = std::move(next);
  }
  result.final_state = cur;
  return result;
}

}  // namespace cornerflow
