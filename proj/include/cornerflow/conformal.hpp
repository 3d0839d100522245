#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cornerflow/core.hpp"

namespace cornerflow {

enum class DomainKind { interior, exterior };

enum class MapId { unit_disk_identity, scaled_disk, exterior_segment, exterior_ellipse, interior_wedge_lens };

inline std::string_view to_string(DomainKind k) { return k == DomainKind::interior ? "interior" : "exterior"; }

inline std::string_view to_string(MapId id) {
  switch (id) {
    case MapId::unit_disk_identity: return "unit_disk_identity";
    case MapId::scaled_disk: return "scaled_disk";
    case MapId::exterior_segment: return "exterior_segment";
    case MapId::exterior_ellipse: return "exterior_ellipse";
    case MapId::interior_wedge_lens: return "interior_wedge_lens";
  }
  return "unknown";
}

inline std::optional<MapId> map_id_from_string(std::string_view s) {
  for (MapId id : {MapId::unit_disk_identity, MapId::scaled_disk, MapId::exterior_segment, MapId::exterior_ellipse,
                   MapId::interior_wedge_lens})
    if (to_string(id) == s) return id;
  return std::nullopt;
}

/// A boundary corner z_i of interior angle `angle`; `image_on_circle` is T(z_i).
struct CornerSpec {
  Complex location;
  double angle = kPi;
  Complex image_on_circle;
};

inline constexpr double kMinCornerAngle = kPi / 2.0;
inline constexpr double kMaxCornerAngle = kTwoPi;

inline bool admissible_corner_angle(double angle) { return angle > kMinCornerAngle && angle <= kMaxCornerAngle; }

/// Declaration of the physical domain.
///
/// Parameters per map family:
///   unit_disk_identity  : none
///   scaled_disk         : radius
///   exterior_segment    : half_length (default 1), plate [-L, L] x {0}
///   exterior_ellipse    : semi_x, semi_y (semi-axes along x and y)
///   interior_wedge_lens : angle (corner angle at the origin), scale (default 1)
struct DomainSpec {
  DomainKind kind = DomainKind::exterior;
  MapId map_id = MapId::unit_disk_identity;
  std::map<std::string, double> parameters;
  std::vector<CornerSpec> corners;
};

namespace detail {

inline double param_or(const DomainSpec& spec, const std::string& key, double fallback) {
  auto it = spec.parameters.find(key);
  return it == spec.parameters.end() ? fallback : it->second;
}

inline double require_param(const DomainSpec& spec, const std::string& key) {
  auto it = spec.parameters.find(key);
  if (it == spec.parameters.end())
    throw Error(ErrorKind::ValidationError, std::string(to_string(spec.map_id)) + " requires parameter '" + key + "'");
  return it->second;
}

// Distance from the origin to the segment [a, b].
inline double origin_segment_distance(Complex a, Complex b) {
  const Complex d = b - a;
  const double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(a);
  const double s = std::clamp(-dot(a, d) / len2, 0.0, 1.0);
  return std::abs(a + s * d);
}

inline double point_segment_distance(Complex p, Complex a, Complex b) { return origin_segment_distance(a - p, b - p); }

// Centered disk of radius R; T(z) = z / R.
struct DiskMap {
  double radius = 1.0;
  bool exterior = true;

  Complex forward(Complex z) const { return z / radius; }
  Complex derivative(Complex) const { return {1.0 / radius, 0.0}; }
  Complex inverse(Complex w) const { return w * radius; }
  Complex inverse_derivative(Complex) const { return {radius, 0.0}; }
  bool contains(Complex z) const { return exterior ? std::abs(z) > radius : std::abs(z) < radius; }
  bool chord_leaves(Complex a, Complex b) const {
    return exterior ? origin_segment_distance(a, b) <= radius : false;
  }
  std::vector<CornerSpec> corners() const { return {}; }
};

// Exterior of the ellipse (x/a)^2 + (y/b)^2 = 1, b = 0 giving the plate [-a, a].
// T(z) = (z + sqrt(z^2 - c^2)) / (a + b) with c^2 = a^2 - b^2, inverse of the
// Joukowski-type map z = ((a + b) w + (a - b) / w) / 2.
struct EllipseMap {
  double semi_x = 1.0;
  double semi_y = 0.0;

  double c2() const { return semi_x * semi_x - semi_y * semi_y; }

  // sqrt(z^2 - c^2) with the branch ~ z at infinity; the principal root of
  // 1 - c^2/z^2 is discontinuous only on the focal segment.
  Complex root(Complex z) const { return z * std::sqrt(1.0 - c2() / (z * z)); }

  Complex forward(Complex z) const { return (z + root(z)) / (semi_x + semi_y); }
  Complex derivative(Complex z) const {
    return (1.0 + 1.0 / std::sqrt(1.0 - c2() / (z * z))) / (semi_x + semi_y);
  }
  Complex inverse(Complex w) const { return 0.5 * ((semi_x + semi_y) * w + (semi_x - semi_y) / w); }
  Complex inverse_derivative(Complex w) const { return 0.5 * ((semi_x + semi_y) - (semi_x - semi_y) / (w * w)); }

  bool contains(Complex z) const {
    if (semi_y == 0.0) return !(z.imag() == 0.0 && std::abs(z.real()) <= semi_x);
    const double u = z.real() / semi_x, v = z.imag() / semi_y;
    return u * u + v * v > 1.0;
  }

  bool chord_leaves(Complex a, Complex b) const {
    if (semi_y == 0.0) {
      if (!contains(a) || !contains(b)) return true;
      if ((a.imag() > 0.0) == (b.imag() > 0.0) && a.imag() != 0.0 && b.imag() != 0.0) return false;
      if (a.imag() == b.imag()) return false;  // both on the line y = 0 outside the plate
      const double s = a.imag() / (a.imag() - b.imag());
      const double x = a.real() + s * (b.real() - a.real());
      return std::abs(x) <= semi_x;
    }
    const Complex as{a.real() / semi_x, a.imag() / semi_y};
    const Complex bs{b.real() / semi_x, b.imag() / semi_y};
    return origin_segment_distance(as, bs) <= 1.0;
  }

  std::vector<CornerSpec> corners() const {
    if (semi_y != 0.0) return {};
    return {CornerSpec{{semi_x, 0.0}, kTwoPi, {1.0, 0.0}}, CornerSpec{{-semi_x, 0.0}, kTwoPi, {-1.0, 0.0}}};
  }
};

// Bounded lens with a single corner of angle `angle` at the origin:
// { z : |z^(pi/angle) - i| < 1, 0 < arg z < angle }, scaled by `scale`.
// T(z) = e^{i phi} ((z/scale)^(pi/angle) - i) with phi = (angle - pi)/2, which
// sends the lens centre e^{i angle/2} to 0 with T' > 0 there.
struct WedgeLensMap {
  double angle = 1.5 * kPi;
  double scale = 1.0;

  double power() const { return kPi / angle; }
  Complex rotation() const { return std::polar(1.0, 0.5 * (angle - kPi)); }

  // z^(pi/angle) with arg z taken in [0, 2 pi).
  Complex power_map(Complex u) const {
    double arg = std::atan2(u.imag(), u.real());
    if (arg < 0.0) arg += kTwoPi;
    return std::polar(std::pow(std::abs(u), power()), power() * arg);
  }

  Complex forward(Complex z) const { return rotation() * (power_map(z / scale) - Complex{0.0, 1.0}); }
  Complex derivative(Complex z) const {
    const Complex u = z / scale;
    return rotation() * power() * power_map(u) / u / scale;
  }
  Complex inverse(Complex w) const {
    const Complex zeta = std::conj(rotation()) * w + Complex{0.0, 1.0};
    if (zeta == Complex{}) return {};
    return scale * std::pow(zeta, 1.0 / power());
  }
  Complex inverse_derivative(Complex w) const {
    const Complex zeta = std::conj(rotation()) * w + Complex{0.0, 1.0};
    return scale * std::conj(rotation()) * (1.0 / power()) * std::pow(zeta, 1.0 / power() - 1.0);
  }
  bool contains(Complex z) const {
    const Complex u = z / scale;
    if (u == Complex{}) return false;
    double arg = std::atan2(u.imag(), u.real());
    if (arg < 0.0) arg += kTwoPi;
    if (!(arg > 0.0 && arg < angle)) return false;
    return std::abs(power_map(u) - Complex{0.0, 1.0}) < 1.0;
  }
  bool chord_leaves(Complex a, Complex b) const {
    if (!contains(a) || !contains(b)) return true;
    for (double s : {0.25, 0.5, 0.75})
      if (!contains(a + s * (b - a))) return true;
    return false;
  }
  std::vector<CornerSpec> corners() const {
    return {CornerSpec{{0.0, 0.0}, angle, rotation() * Complex{0.0, -1.0}}};
  }
};

using MapFamily = std::variant<DiskMap, EllipseMap, WedgeLensMap>;

}  // namespace detail

/// Closed-form biholomorphism T from the physical domain onto the exterior
/// (or interior) of the unit disk. Immutable after construction.
class ConformalMap {
 public:
  static constexpr double kCornerTolerance = 1e-14;
  static constexpr int kBoundarySamples = 2048;

  explicit ConformalMap(DomainSpec spec) : spec_(std::move(spec)) {
    using namespace detail;
    switch (spec_.map_id) {
      case MapId::unit_disk_identity:
        family_ = DiskMap{1.0, spec_.kind == DomainKind::exterior};
        break;
      case MapId::scaled_disk: {
        const double r = require_param(spec_, "radius");
        if (!(r > 0.0)) throw Error(ErrorKind::ValidationError, "scaled_disk radius must be positive");
        family_ = DiskMap{r, spec_.kind == DomainKind::exterior};
        break;
      }
      case MapId::exterior_segment: {
        if (spec_.kind != DomainKind::exterior)
          throw Error(ErrorKind::ValidationError, "exterior_segment requires an exterior domain");
        const double l = param_or(spec_, "half_length", 1.0);
        if (!(l > 0.0)) throw Error(ErrorKind::ValidationError, "half_length must be positive");
        family_ = EllipseMap{l, 0.0};
        break;
      }
      case MapId::exterior_ellipse: {
        if (spec_.kind != DomainKind::exterior)
          throw Error(ErrorKind::ValidationError, "exterior_ellipse requires an exterior domain");
        const double a = require_param(spec_, "semi_x"), b = require_param(spec_, "semi_y");
        if (!(a > 0.0 && b > 0.0)) throw Error(ErrorKind::ValidationError, "ellipse semi-axes must be positive");
        family_ = EllipseMap{a, b};
        break;
      }
      case MapId::interior_wedge_lens: {
        if (spec_.kind != DomainKind::interior)
          throw Error(ErrorKind::ValidationError, "interior_wedge_lens requires an interior domain");
        const double angle = require_param(spec_, "angle");
        const double s = param_or(spec_, "scale", 1.0);
        if (!admissible_corner_angle(angle))
          throw Error(ErrorKind::ValidationError, "corner angle must lie in (pi/2, 2pi]");
        if (!(s > 0.0)) throw Error(ErrorKind::ValidationError, "scale must be positive");
        family_ = WedgeLensMap{angle, s};
        break;
      }
    }

    corners_ = std::visit([](const auto& f) { return f.corners(); }, family_);
    for (const CornerSpec& c : spec_.corners) {
      if (!admissible_corner_angle(c.angle))
        throw Error(ErrorKind::ValidationError, "corner angle " + std::to_string(c.angle) +
                                                    " outside (pi/2, 2pi]");
      if (std::abs(std::abs(c.image_on_circle) - 1.0) > 1e-12)
        throw Error(ErrorKind::ValidationError, "corner image must lie on the unit circle");
    }

    boundary_.reserve(kBoundarySamples);
    for (int k = 0; k < kBoundarySamples; ++k) boundary_.push_back(boundary_point(kTwoPi * k / kBoundarySamples));

    if (spec_.kind == DomainKind::exterior) {
      if (const auto* d = std::get_if<detail::DiskMap>(&family_)) beta_ = 1.0 / d->radius;
      if (const auto* e = std::get_if<detail::EllipseMap>(&family_)) beta_ = 2.0 / (e->semi_x + e->semi_y);
    }
  }

  const DomainSpec& spec() const { return spec_; }
  DomainKind kind() const { return spec_.kind; }
  bool exterior() const { return spec_.kind == DomainKind::exterior; }

  /// Corners implied by the map family (the plate tips, the lens apex).
  const std::vector<CornerSpec>& corners() const { return corners_; }

  /// Closed-form far-field coefficients T(z) = beta z + beta_tilde + O(1/z).
  double farfield_beta() const { return beta_; }
  Complex farfield_beta_tilde() const { return {}; }

  bool contains(Complex z) const {
    return std::visit([z](const auto& f) { return f.contains(z); }, family_);
  }

  /// True when the straight path a -> b leaves the domain.
  bool chord_leaves(Complex a, Complex b) const {
    return std::visit([=](const auto& f) { return f.chord_leaves(a, b); }, family_);
  }

  /// T(x); throws PointOutsideDomain when x is not in the open domain.
  Complex eval(Complex x) const {
    if (!contains(x)) throw Error(ErrorKind::PointOutsideDomain, "point (" + fmt(x) + ") is not in the domain");
    const Complex w = std::visit([x](const auto& f) { return f.forward(x); }, family_);
    if (!inside_target(w) && std::isfinite(w.real()))
      throw Error(ErrorKind::BranchCutViolation, "T(" + fmt(x) + ") = " + fmt(w) + " left the target region");
    return w;
  }

  /// T^{-1}(y); throws PointOutsideTarget unless |y| > 1 (exterior) or |y| < 1 (interior).
  Complex inverse(Complex y) const {
    if (!inside_target(y)) throw Error(ErrorKind::PointOutsideTarget, "(" + fmt(y) + ") is not in the target region");
    return std::visit([y](const auto& f) { return f.inverse(y); }, family_);
  }

  /// T'(x) as a complex number; DT = [[Re, -Im], [Im, Re]].
  Complex derivative(Complex x) const {
    for (const CornerSpec& c : corners_)
      if (std::abs(x - c.location) <= kCornerTolerance)
        throw Error(ErrorKind::CornerSingularity, "derivative requested at corner (" + fmt(c.location) + ")");
    if (!contains(x)) throw Error(ErrorKind::PointOutsideDomain, "point (" + fmt(x) + ") is not in the domain");
    return std::visit([x](const auto& f) { return f.derivative(x); }, family_);
  }

  /// (T^{-1})'(y), defined up to the unit circle away from corner images.
  Complex inverse_derivative(Complex y) const {
    return std::visit([y](const auto& f) { return f.inverse_derivative(y); }, family_);
  }

  /// T^{-1}(e^{i theta}): boundary point, counter-clockwise in theta.
  Complex boundary_point(double theta) const {
    const Complex w = std::polar(1.0, theta);
    return std::visit([w](const auto& f) { return f.inverse(w); }, family_);
  }

  /// |T| - 1 (exterior) or 1 - |T| (interior); positive inside the domain.
  double mapped_gap(Complex w) const { return exterior() ? std::abs(w) - 1.0 : 1.0 - std::abs(w); }

  /// Euclidean distance to the boundary, from a dense polyline of boundary samples.
  double boundary_distance(Complex x) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < boundary_.size(); ++k) {
      const Complex a = boundary_[k], b = boundary_[(k + 1) % boundary_.size()];
      best = std::min(best, detail::point_segment_distance(x, a, b));
    }
    return best;
  }

  /// Largest |x| over the boundary.
  double boundary_extent() const {
    double r = 0.0;
    for (Complex b : boundary_) r = std::max(r, std::abs(b));
    return r;
  }

  double distance_to_nearest_corner(Complex x) const {
    double d = std::numeric_limits<double>::infinity();
    for (const CornerSpec& c : corners_) d = std::min(d, std::abs(x - c.location));
    return d;
  }

 private:
  bool inside_target(Complex w) const { return exterior() ? std::abs(w) > 1.0 : std::abs(w) < 1.0; }

  static std::string fmt(Complex z) { return std::to_string(z.real()) + ", " + std::to_string(z.imag()); }

  DomainSpec spec_;
  detail::MapFamily family_;
  std::vector<CornerSpec> corners_;
  std::vector<Complex> boundary_;
  double beta_ = 0.0;
};

// ---------------------------------------------------------------------------
// Operations

inline Complex eval_map(const ConformalMap& map, Complex x) { return map.eval(x); }
inline Complex eval_inverse(const ConformalMap& map, Complex y) { return map.inverse(y); }
inline Complex eval_derivative(const ConformalMap& map, Complex x) { return map.derivative(x); }

/// Unit direction bisecting the corner sector, pointing into the domain: the
/// preimage of the radial ray through T(z_i).
inline Complex corner_bisector(const ConformalMap& map, const CornerSpec& corner) {
  const double step = map.exterior() ? 1.01 : 0.99;
  const Complex inside = map.inverse(corner.image_on_circle * step);
  const Complex d = inside - corner.location;
  return d / std::abs(d);
}

/// Log-spaced radii in [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    r[static_cast<std::size_t>(k)] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (n - 1));
  return r;
}

/// Default probe radii: 8 log-spaced values in [1e-4, 1e-2].
inline std::vector<double> default_probe_radii() { return log_spaced(1e-4, 1e-2, 8); }

/// Least-squares slope of ln|T'| against ln r approaching `corner` along its
/// bisector. Expected value pi/angle - 1.
inline double corner_exponent_probe(const ConformalMap& map, const CornerSpec& corner,
                                    const std::vector<double>& radii) {
  if (radii.size() < 5) throw Error(ErrorKind::InsufficientSamples, "corner probe needs at least 5 radii");
  for (double r : radii)
    if (!(r > 1e-5 && r < 1e-1)) throw Error(ErrorKind::InvalidArgument, "probe radii must lie in (1e-5, 1e-1)");
  if (std::all_of(radii.begin(), radii.end(), [&](double r) { return r == radii.front(); }))
    throw Error(ErrorKind::FitDegenerate, "all probe radii are equal");

  const Complex dir = corner_bisector(map, corner);
  std::vector<double> lr, ld;
  for (double r : radii) {
    lr.push_back(std::log(r));
    ld.push_back(std::log(std::abs(map.derivative(corner.location + r * dir))));
  }
  return least_squares_slope(lr, ld);
}

struct FarFieldFit {
  double beta = 0.0;
  Complex beta_tilde;
  double residual = 0.0;      ///< max |T(z) - beta z - beta_tilde| on |z| = 1e3
  double residual_far = 0.0;  ///< same on |z| = 1e4
};

/// Laurent fit of T on large circles: beta = mean T(z)/z, beta_tilde = mean T(z).
inline FarFieldFit farfield_coefficients(const ConformalMap& map, int nodes = 256) {
  if (!map.exterior()) throw Error(ErrorKind::InteriorDomainHasNoFarField, "interior domain has no far field");

  auto fit_on = [&](double radius) {
    Complex c1{}, c0{};
    for (int k = 0; k < nodes; ++k) {
      const Complex z = std::polar(radius, kTwoPi * (k + 0.5) / nodes);
      const Complex t = map.eval(z);
      c1 += t / z;
      c0 += t;
    }
    return std::pair{c1 / static_cast<double>(nodes), c0 / static_cast<double>(nodes)};
  };
  auto residual_on = [&](double radius, double beta, Complex beta_tilde) {
    double res = 0.0;
    for (int k = 0; k < nodes; ++k) {
      const Complex z = std::polar(radius, kTwoPi * (k + 0.5) / nodes);
      res = std::max(res, std::abs(map.eval(z) - beta * z - beta_tilde));
    }
    return res;
  };

  auto [c1, c0] = fit_on(1e3);
  FarFieldFit fit;
  fit.beta = c1.real();
  fit.beta_tilde = c0;
  fit.residual = residual_on(1e3, fit.beta, fit.beta_tilde);
  fit.residual_far = residual_on(1e4, fit.beta, fit.beta_tilde);
  return fit;
}

}  // namespace cornerflow
