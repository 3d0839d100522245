#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "cornerflow/biot_savart.hpp"
#include "cornerflow/parallel.hpp"
#include "cornerflow/transport.hpp"

namespace cornerflow {

/// Whole-plane blob field v(x) = sum_j Gamma_j (x - x_j)^perp / (2pi (|x - x_j|^2 + d_j^2)),
/// with d_j the particle's blob radius used as a physical length.
inline Complex freespace_velocity(const VortexEnsemble& ens, Complex x) {
  double sr = 0.0, si = 0.0;
  for (const auto& p : ens.particles) {
    const double ar = x.real() - p.position.real(), ai = x.imag() - p.position.imag();
    const double d = ar * ar + ai * ai + p.blob_radius * p.blob_radius;
    if (d == 0.0) continue;
    const double f = p.circulation / d;
    sr += f * ar;
    si += f * ai;
  }
  return perp(Complex{sr, si}) / kTwoPi;
}

/// Rectangular lattice origin + spacing (i, j), 0 <= i < nx, 0 <= j < ny.
struct GridSpec {
  Complex origin;
  double spacing = 1.0;
  int nx = 0, ny = 0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  Complex point(std::size_t k) const {
    const auto i = static_cast<int>(k % static_cast<std::size_t>(nx));
    const auto j = static_cast<int>(k / static_cast<std::size_t>(nx));
    return origin + spacing * Complex{double(i), double(j)};
  }

  /// Square lattice covering B(0, radius), cell-centred so no node sits on the axes.
  static GridSpec covering(double radius, double spacing) {
    const int n = 2 * static_cast<int>(std::ceil(radius / spacing));
    GridSpec g;
    g.spacing = spacing;
    g.nx = g.ny = n;
    g.origin = Complex{-0.5 * (n - 1) * spacing, -0.5 * (n - 1) * spacing};
    return g;
  }
};

struct SplitField {
  GridSpec grid;
  std::vector<Complex> v_samples;
  std::vector<Complex> w_samples;
};

/// Velocity extended by zero outside the domain.
inline Complex extended_velocity(const ConformalMap& map, std::span<const MappedSource> sources,
                                 const CirculationSpec& circ, Complex x) {
  if (!map.contains(x) || map.distance_to_nearest_corner(x) <= ConformalMap::kCornerTolerance) return {};
  return velocity_from_sources(map, sources, circ, x);
}

inline SplitField split_field(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                              const GridSpec& grid, int threads = 1) {
  SplitField f;
  f.grid = grid;
  f.v_samples.resize(grid.size());
  f.w_samples.resize(grid.size());
  const auto sources = map_sources(map, ens);
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const Complex x = grid.point(k);
    f.v_samples[k] = freespace_velocity(ens, x);
    f.w_samples[k] = extended_velocity(map, sources, circ, x) - f.v_samples[k];
  });
  return f;
}

// ---------------------------------------------------------------------------
// Harmonicity

/// |f(c) - circle average of f| / (|f(c)| + 1e-300), periodic trapezoid with `nodes` points.
inline double mean_value_residual(const std::function<Complex(Complex)>& field, Complex center, double radius,
                                  int nodes = 256) {
  Complex avg;
  for (int k = 0; k < nodes; ++k) avg += field(center + std::polar(radius, kTwoPi * k / nodes));
  avg /= double(nodes);
  const Complex fc = field(center);
  return std::abs(fc - avg) / (std::abs(fc) + 1e-300);
}

inline double collar_blob_radius(const VortexEnsemble& ens) {
  double d = 0.0;
  for (const auto& p : ens.particles) d = std::max(d, p.blob_radius);
  return d;
}

/// Throws DiskContainsVorticity when a particle lies within radius + 3 delta of
/// the centre, DiskLeavesRegion when the disk is not inside the domain.
inline void require_collar_disk(const ConformalMap& map, const VortexEnsemble& ens, Complex center, double radius) {
  const double delta = collar_blob_radius(ens);
  for (const auto& p : ens.particles)
    if (std::abs(p.position - center) < radius + 3.0 * delta)
      throw Error(ErrorKind::DiskContainsVorticity, "a particle lies within radius + 3 delta of the disk centre");
  if (!map.contains(center) || map.boundary_distance(center) <= radius)
    throw Error(ErrorKind::DiskLeavesRegion, "disk is not contained in the domain");
}

/// Boundary correction w = u - v at x.
inline Complex boundary_correction(const ConformalMap& map, std::span<const MappedSource> sources,
                                   const VortexEnsemble& ens, const CirculationSpec& circ, Complex x) {
  return velocity_from_sources(map, sources, circ, x) - freespace_velocity(ens, x);
}

/// Mean-value residual of w on a vorticity-free disk inside the domain.
inline double collar_mean_value_residual(const ConformalMap& map, const VortexEnsemble& ens,
                                         const CirculationSpec& circ, Complex center, double radius,
                                         int nodes = 256) {
  require_collar_disk(map, ens, center, radius);
  const auto sources = map_sources(map, ens);
  return mean_value_residual([&](Complex x) { return boundary_correction(map, sources, ens, circ, x); }, center,
                             radius, nodes);
}

struct HalvingCheck {
  double residual_full = 0.0;
  double residual_half = 0.0;
  bool pass = false;
};

inline constexpr double kResidualNoiseFloor = 1e-12;

/// Residual at radius and radius/2; refinement must at least halve it unless
/// both are at round-off level.
inline HalvingCheck collar_halving_check(const ConformalMap& map, const VortexEnsemble& ens,
                                         const CirculationSpec& circ, Complex center, double radius) {
  HalvingCheck c;
  c.residual_full = collar_mean_value_residual(map, ens, circ, center, radius);
  c.residual_half = collar_mean_value_residual(map, ens, circ, center, 0.5 * radius);
  c.pass = c.residual_full < 1e-4 && c.residual_half <= std::max(0.5 * c.residual_full, kResidualNoiseFloor);
  return c;
}

struct GradientBound {
  double gradient = 0.0;  ///< max over components of |grad w_k(center)|
  double bound = 0.0;     ///< (2/R) max over components of sup_{|x-c|=R} |w_k|
  bool pass = false;
};

/// Interior gradient estimate for harmonic functions, |grad f(c)| <= (2/R) sup_{B(c,R)} |f|,
/// with the gradient from central differences.
inline GradientBound gradient_bound_check(const std::function<Complex(Complex)>& field, Complex center,
                                          double radius, int nodes = 256) {
  const double h = 1e-5 * radius;
  const Complex dx = (field(center + h) - field(center - h)) / (2.0 * h);
  const Complex dy = (field(center + Complex{0.0, h}) - field(center - Complex{0.0, h})) / (2.0 * h);
  double sup_x = 0.0, sup_y = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const Complex f = field(center + std::polar(radius, kTwoPi * k / nodes));
    sup_x = std::max(sup_x, std::abs(f.real()));
    sup_y = std::max(sup_y, std::abs(f.imag()));
  }
  GradientBound g;
  g.gradient = std::max(std::hypot(dx.real(), dy.real()), std::hypot(dx.imag(), dy.imag()));
  g.bound = 2.0 / radius * std::max(sup_x, sup_y);
  g.pass = g.gradient <= g.bound;
  return g;
}

// ---------------------------------------------------------------------------
// L2 comparisons

inline double discrete_l2(const std::vector<Complex>& samples, double spacing) {
  double s = 0.0;
  for (Complex z : samples) s += std::norm(z);
  return std::sqrt(s) * spacing;
}

struct ProjectionCheck {
  double lhs = 0.0;  ///< ||w_a - w_b||
  double rhs = 0.0;  ///< 2 ||v_a - v_b||
  bool pass = false;
};

inline constexpr double kProjectionSlack = 1.05;

/// ||(u_a - u_b) - (v_a - v_b)|| <= 2 ||v_a - v_b|| (times 1.05) on the grid,
/// u extended by zero outside the domain.
inline ProjectionCheck projection_inequality_check(const VortexEnsemble& ens_a, const CirculationSpec& circ_a,
                                                   const VortexEnsemble& ens_b, const CirculationSpec& circ_b,
                                                   const ConformalMap& map, const GridSpec& grid, int threads = 1) {
  const double scale = std::max({1.0, ens_a.l1_proxy(), ens_b.l1_proxy()});
  if (std::abs(ens_a.total_circulation() - ens_b.total_circulation()) > 1e-12 * scale ||
      std::abs(circ_a.gamma0 - circ_b.gamma0) > 1e-12 * std::max(1.0, std::abs(circ_a.gamma0)))
    throw Error(ErrorKind::CirculationMismatch, "ensembles differ in total circulation or gamma0");
  const SplitField a = split_field(map, ens_a, circ_a, grid, threads);
  const SplitField b = split_field(map, ens_b, circ_b, grid, threads);
  std::vector<Complex> dv(grid.size()), dw(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    dv[k] = a.v_samples[k] - b.v_samples[k];
    dw[k] = a.w_samples[k] - b.w_samples[k];
  }
  ProjectionCheck c;
  c.lhs = discrete_l2(dw, grid.spacing);
  c.rhs = 2.0 * discrete_l2(dv, grid.spacing);
  c.pass = c.lhs <= kProjectionSlack * c.rhs;
  return c;
}

/// ||v_a - v_b|| on the grid.
inline double freespace_gap(const VortexEnsemble& a, const VortexEnsemble& b, const GridSpec& grid, int threads = 1) {
  std::vector<Complex> diff(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const Complex x = grid.point(k);
    diff[k] = freespace_velocity(a, x) - freespace_velocity(b, x);
  });
  return discrete_l2(diff, grid.spacing);
}

// ---------------------------------------------------------------------------
// Twin runs

/// Moves every particle by eps in a random direction (seeded), retrying
/// directions that would leave the domain.
inline VortexEnsemble jitter_positions(const ConformalMap& map, const VortexEnsemble& ens, double eps,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  VortexEnsemble out = ens;
  for (auto& p : out.particles) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Complex moved = p.position + std::polar(eps, angle(rng));
      if (map.contains(moved)) {
        p.position = moved;
        break;
      }
    }
  }
  return out;
}

struct TwinSeries {
  std::vector<double> times;
  std::vector<double> gaps;
  double fitted_rate = 0.0;  ///< least-squares slope of ln(gap) against t; 0 when the gap vanishes
};

/// Advances both states with the same fixed dt and records ||v_a - v_b|| every
/// `output_stride` steps (and at t = T*).
inline TwinSeries twin_run_divergence(const FlowState& a0, const FlowState& b0, double t_final, double dt,
                                      int output_stride, const GridSpec& grid, int threads = 1) {
  if (!(t_final > 0.0) || !(dt > 0.0) || output_stride < 1)
    throw Error(ErrorKind::InvalidArgument, "twin run needs positive t_final, dt and stride");
  const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt - 1e-12));
  const double step = t_final / static_cast<double>(steps);
  TwinSeries series;
  FlowState a = a0, b = b0;
  for (std::size_t n = 0;; ++n) {
    if (n % static_cast<std::size_t>(output_stride) == 0 || n == steps) {
      series.times.push_back(a.time);
      series.gaps.push_back(freespace_gap(a.ensemble, b.ensemble, grid, threads));
    }
    if (n == steps) break;
    a = step_rk4(a, step, threads);
    b = step_rk4(b, step, threads);
    if (n + 1 == steps) a.time = b.time = t_final;
  }
  std::vector<double> t, lg;
  for (std::size_t k = 0; k < series.gaps.size(); ++k)
    if (series.gaps[k] > 0.0) {
      t.push_back(series.times[k]);
      lg.push_back(std::log(series.gaps[k]));
    }
  if (t.size() >= 2) series.fitted_rate = least_squares_slope(t, lg);
  return series;
}

}  // namespace cornerflow
