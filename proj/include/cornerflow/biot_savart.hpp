#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cornerflow/conformal.hpp"
#include "cornerflow/core.hpp"

namespace cornerflow {

/// Point vortex blob. `blob_radius` is a length in the mapped plane.
struct VortexParticle {
  Complex position;
  double circulation = 0.0;
  double blob_radius = 0.0;
};

/// Discrete vorticity. Gamma_j = omega0(x_j) * patch_cell_area at initialisation
/// (times the covered fraction of the cell for cells cut by the patch outline).
struct VortexEnsemble {
  std::vector<VortexParticle> particles;
  double patch_cell_area = 1.0;

  std::size_t size() const { return particles.size(); }
  bool empty() const { return particles.empty(); }

  /// Sum of Gamma_j, accumulated in index order.
  double total_circulation() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.circulation;
    return s;
  }
  double l1_proxy() const {
    double s = 0.0;
    for (const auto& p : particles) s += std::abs(p.circulation);
    return s;
  }
  double linf_proxy() const {
    double m = 0.0;
    for (const auto& p : particles) m = std::max(m, std::abs(p.circulation));
    return m / patch_cell_area;
  }
  double support_radius() const {
    double r = 0.0;
    for (const auto& p : particles) r = std::max(r, std::abs(p.position));
    return r;
  }
};

/// Circulation gamma0 around the obstacle and alpha = gamma0 + total circulation
/// (exterior domains only; interior domains carry zeros).
struct CirculationSpec {
  double gamma0 = 0.0;
  double alpha = 0.0;

  static CirculationSpec make(const ConformalMap& map, double gamma0, const VortexEnsemble& ens) {
    if (!map.exterior()) {
      if (gamma0 != 0.0) throw Error(ErrorKind::ValidationError, "interior domains carry no obstacle circulation");
      return {};
    }
    return {gamma0, gamma0 + ens.total_circulation()};
  }
};

// ---------------------------------------------------------------------------
// Exact kernels

/// Dirichlet Green function (1/2pi) ln(|T(x) - T(y)| / (|T(x) - T(y)*| |T(y)|)).
/// Uses |T(x) - T(y)*| |T(y)| = |T(x) conj(T(y)) - 1|, which is also finite when T(y) = 0.
inline double green_function(const ConformalMap& map, Complex x, Complex y) {
  const Complex tx = map.eval(x), ty = map.eval(y);
  if (tx == ty) throw Error(ErrorKind::CoincidentPoints, "green_function at x == y");
  return std::log(std::abs(tx - ty) / std::abs(tx * std::conj(ty) - 1.0)) / kTwoPi;
}

/// Image term (p - q*) / |p - q*|^2 written without forming q* (q may be 0),
/// with optional regularisation: (p - q*) / (|p - q*|^2 + delta2 / |q|^2).
inline Complex image_term(Complex p, Complex q, double delta2 = 0.0) {
  const Complex c = p * std::conj(q) - 1.0;
  return q * c / (std::norm(c) + delta2);
}

/// Biot-Savart kernel K(x, y) = grad_x^perp G(x, y)
///   = (1/2pi) DT(x)^T [ (T(x)-T(y))^perp/|T(x)-T(y)|^2 - (T(x)-T(y)*)^perp/|T(x)-T(y)*|^2 ].
inline Complex kernel_K(const ConformalMap& map, Complex x, Complex y) {
  const Complex tx = map.eval(x), ty = map.eval(y);
  if (tx == ty) throw Error(ErrorKind::CoincidentPoints, "kernel_K at x == y");
  const Complex dtx = map.derivative(x);
  const Complex bracket = (tx - ty) / std::norm(tx - ty) - image_term(tx, ty);
  return std::conj(dtx) * perp(bracket) / kTwoPi;
}

/// Harmonic field H(x) = (1/2pi) DT^T(x) T(x)^perp / |T(x)|^2 (exterior only).
inline Complex harmonic_field(const ConformalMap& map, Complex x) {
  if (!map.exterior())
    throw Error(ErrorKind::InteriorDomainHasNoHarmonicField, "harmonic field exists only for exterior domains");
  const Complex tx = map.eval(x);
  return std::conj(map.derivative(x)) * perp(1.0 / std::conj(tx)) / kTwoPi;
}

/// Both sides of |a/|a|^2 - b/|b|^2| = |a - b| / (|a| |b|).
inline double frac_identity_lhs(Complex a, Complex b) { return std::abs(a / std::norm(a) - b / std::norm(b)); }
inline double frac_identity_rhs(Complex a, Complex b) { return std::abs(a - b) / (std::abs(a) * std::abs(b)); }

// ---------------------------------------------------------------------------
// Regularised particle sums
//
// A blob of mapped radius delta at eta contributes the stream function
//   (Gamma/2pi) * 0.5 * [ ln(|zeta - eta|^2 + delta^2) - ln(|zeta conj(eta) - 1|^2 + delta^2) ]
// which vanishes on |zeta| = 1 for any delta, so the regularised field stays
// exactly tangent to the boundary. Its mapped-plane gradient is
//   (zeta - eta)/(|zeta - eta|^2 + delta^2) - image_term(zeta, eta, delta^2).

/// Particle data in the mapped plane.
struct MappedSource {
  double re = 0.0, im = 0.0;  // eta = T(x_j)
  double gamma = 0.0;
  double delta2 = 0.0;
};

inline std::vector<MappedSource> map_sources(const ConformalMap& map, const VortexEnsemble& ens) {
  std::vector<MappedSource> out;
  out.reserve(ens.size());
  for (const auto& p : ens.particles) {
    const Complex eta = map.eval(p.position);
    out.push_back({eta.real(), eta.imag(), p.circulation, p.blob_radius * p.blob_radius});
  }
  return out;
}

/// Sum_j Gamma_j [ (zeta - eta_j)/(|zeta - eta_j|^2 + d_j^2) - image_term(zeta, eta_j, d_j^2) ],
/// accumulated in index order. The regularised self term vanishes when zeta == eta_j.
inline Complex mapped_gradient_sum(Complex zeta, std::span<const MappedSource> sources) {
  const double zr = zeta.real(), zi = zeta.imag();
  double sr = 0.0, si = 0.0;
  for (const MappedSource& s : sources) {
    const double ar = zr - s.re, ai = zi - s.im;
    const double da = ar * ar + ai * ai + s.delta2;
    const double fa = da > 0.0 ? s.gamma / da : 0.0;  // unregularised self term
    // c = zeta conj(eta) - 1
    const double cr = zr * s.re + zi * s.im - 1.0;
    const double ci = zi * s.re - zr * s.im;
    const double fc = s.gamma / (cr * cr + ci * ci + s.delta2);
    // eta * c
    const double br = s.re * cr - s.im * ci;
    const double bi = s.re * ci + s.im * cr;
    sr += fa * ar - fc * br;
    si += fa * ai - fc * bi;
  }
  return {sr, si};
}

/// Sum_j Gamma_j * 0.5 * ln((|zeta - eta_j|^2 + d_j^2) / (|zeta conj(eta_j) - 1|^2 + d_j^2)).
inline double mapped_stream_sum(Complex zeta, std::span<const MappedSource> sources) {
  const double zr = zeta.real(), zi = zeta.imag();
  double acc = 0.0;
  for (const MappedSource& s : sources) {
    const double ar = zr - s.re, ai = zi - s.im;
    const double cr = zr * s.re + zi * s.im - 1.0;
    const double ci = zi * s.re - zr * s.im;
    acc += s.gamma * 0.5 * std::log((ar * ar + ai * ai + s.delta2) / (cr * cr + ci * ci + s.delta2));
  }
  return acc;
}

/// Mapped-plane circulation vector R[omega](x) + alpha T(x)^perp/|T(x)|^2, whose
/// image under (1/2pi) DT^T(x) is the velocity.
inline Complex mapped_velocity_vector(Complex zeta, std::span<const MappedSource> sources, double alpha,
                                      bool exterior) {
  Complex v = mapped_gradient_sum(zeta, sources);
  if (exterior) v += alpha / std::conj(zeta);
  return perp(v);
}

/// Remainder operator R[omega](x) for the blob ensemble.
inline Complex operator_R(const ConformalMap& map, const VortexEnsemble& ens, Complex x) {
  if (ens.empty()) return {};
  const auto sources = map_sources(map, ens);
  return perp(mapped_gradient_sum(map.eval(x), sources));
}

/// u(x) = (1/2pi) DT^T(x) (R[omega](x) + alpha T(x)^perp / |T(x)|^2).
inline Complex velocity_from_sources(const ConformalMap& map, std::span<const MappedSource> sources,
                                     const CirculationSpec& circ, Complex x) {
  const Complex zeta = map.eval(x);
  const Complex dt = map.derivative(x);
  return std::conj(dt) * mapped_velocity_vector(zeta, sources, circ.alpha, map.exterior()) / kTwoPi;
}

inline Complex velocity(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ, Complex x) {
  const auto sources = map_sources(map, ens);
  return velocity_from_sources(map, sources, circ, x);
}

// ---------------------------------------------------------------------------
// Contours and circulation

/// Closed contour sampled for trapezoid quadrature: each node carries the
/// point and dx = x'(s) ds so that the circulation is sum Re(conj(u) dx).
struct ContourNode {
  Complex point;
  Complex weight;
};

struct ClosedContour {
  std::vector<ContourNode> nodes;

  /// Circle sampled at `n` equispaced angles with the exact tangent (periodic trapezoid rule).
  static ClosedContour circle(Complex center, double radius, int n = 512) {
    ClosedContour c;
    const double h = kTwoPi / n;
    for (int k = 0; k < n; ++k) {
      const Complex e = std::polar(1.0, h * k);
      c.nodes.push_back({center + radius * e, Complex{0.0, 1.0} * radius * e * h});
    }
    return c;
  }

  /// Level curve |T| = rho, parametrised by the mapped angle.
  static ClosedContour mapped_level(const ConformalMap& map, double rho, int n = 512) {
    ClosedContour c;
    const double h = kTwoPi / n;
    for (int k = 0; k < n; ++k) {
      const Complex w = std::polar(rho, h * k);
      c.nodes.push_back({map.inverse(w), map.inverse_derivative(w) * Complex{0.0, 1.0} * w * h});
    }
    return c;
  }

  /// Counter-clockwise polyline; composite trapezoid over its segments.
  static ClosedContour polyline(const std::vector<Complex>& vertices) {
    ClosedContour c;
    const std::size_t n = vertices.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Complex next = vertices[(k + 1) % n], prev = vertices[(k + n - 1) % n];
      c.nodes.push_back({vertices[k], 0.5 * (next - prev)});
    }
    return c;
  }

  /// True when `x` lies inside the contour (winding number test).
  bool encloses(Complex x) const {
    double winding = 0.0;
    const std::size_t n = nodes.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Complex a = nodes[k].point - x, b = nodes[(k + 1) % n].point - x;
      winding += std::arg(b / a);
    }
    return std::abs(winding) > kPi;
  }
};

/// Circulation of the velocity along the contour.
inline double circulation_probe(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                                const ClosedContour& contour) {
  const std::size_t n = contour.nodes.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Complex a = contour.nodes[k].point, b = contour.nodes[(k + 1) % n].point;
    if (!map.contains(a) || map.chord_leaves(a, b))
      throw Error(ErrorKind::ContourLeavesDomain, "contour leaves the domain");
  }
  const auto sources = map_sources(map, ens);
  double total = 0.0;
  for (const ContourNode& node : contour.nodes)
    total += dot(velocity_from_sources(map, sources, circ, node.point), node.weight);
  return total;
}

// ---------------------------------------------------------------------------
// Boundary sheet density

struct BoundaryFrame {
  Complex point;    ///< T^{-1}(e^{i theta})
  Complex inward;   ///< unit normal pointing into the domain
  Complex tangent;  ///< unit tangent, counter-clockwise in theta
};

inline BoundaryFrame boundary_frame(const ConformalMap& map, double theta) {
  const Complex w = std::polar(1.0, theta);
  const Complex dz = map.inverse_derivative(w);
  const Complex radial = dz * w;  // image of the outward radial direction
  BoundaryFrame f;
  f.point = map.boundary_point(theta);
  f.inward = (map.exterior() ? 1.0 : -1.0) * radial / std::abs(radial);
  f.tangent = perp(radial) / std::abs(radial);
  return f;
}

inline constexpr double kSheetCornerClearance = 1e-2;

/// Trace of the tangential velocity at the boundary point T^{-1}(e^{i theta}),
/// extrapolated (Richardson, rho = 1e-2, 5e-3, 2.5e-3) from points offset along
/// the inward normal. Exterior: g = u . tau; interior: g = -u . tau, tau counter-clockwise.
inline double sheet_density(const ConformalMap& map, const VortexEnsemble& ens, const CirculationSpec& circ,
                            double theta) {
  const BoundaryFrame frame = boundary_frame(map, theta);
  if (map.distance_to_nearest_corner(frame.point) <= kSheetCornerClearance)
    throw Error(ErrorKind::TooCloseToCorner, "sheet density requested within 1e-2 of a corner");
  const auto sources = map_sources(map, ens);
  const double sign = map.exterior() ? 1.0 : -1.0;
  auto trace = [&](double rho) {
    return sign * dot(velocity_from_sources(map, sources, circ, frame.point + rho * frame.inward), frame.tangent);
  };
  const double f1 = trace(1e-2), f2 = trace(5e-3), f3 = trace(2.5e-3);
  const double g1 = 2.0 * f2 - f1, g2 = 2.0 * f3 - f2;
  return (4.0 * g2 - g1) / 3.0;
}

}  // namespace cornerflow
