#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cornerflow/transport.hpp"

namespace cornerflow {

using Json = nlohmann::json;

struct OmegaSpec {
  enum class Kind { uniform, gaussian };
  Kind kind = Kind::uniform;
  double value = 0.0;      // uniform
  double amplitude = 0.0;  // gaussian: amplitude exp(-|x - center|^2 / width^2)
  double width = 1.0;

  bool identically_zero() const { return kind == Kind::uniform ? value == 0.0 : amplitude == 0.0; }
  bool nonpositive() const { return (kind == Kind::uniform ? value : amplitude) <= 0.0; }
  bool nonnegative() const { return (kind == Kind::uniform ? value : amplitude) >= 0.0; }

  std::function<double(Complex)> field(Complex center) const {
    if (kind == Kind::uniform) return [v = value](Complex) { return v; };
    return [a = amplitude, w = width, center](Complex x) { return a * std::exp(-std::norm(x - center) / (w * w)); };
  }
};

struct PatchConfig {
  PatchSpec shape;
  OmegaSpec omega0;
  double h = 0.05;
  std::optional<double> blob_radius;
};

struct RunConfig {
  DomainSpec domain;
  PatchConfig patch;
  double gamma0 = 0.0;
  double t_final = 1.0;
  std::optional<double> dt;  ///< nullopt: "auto"
  int output_stride = 1;
  int snapshot_stride = 0;
  std::string output_dir = "out";
  std::vector<std::size_t> tracked_particles;
  std::uint64_t seed = 0;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

/// Rejects keys outside `allowed` at this level.
inline void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::ParseError, "field '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!ok.count(item.key()))
      throw Error(ErrorKind::ParseError, "unknown key '" + item.key() + "' in '" + where + "'");
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw Error(ErrorKind::ParseError, "missing field '" + where + key + "'");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& field) {
  if (!v.is_number()) throw Error(ErrorKind::ParseError, "field '" + field + "' must be a number");
  return v.get<double>();
}

inline Complex point(const Json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw Error(ErrorKind::ParseError, "field '" + field + "' must be a [x, y] pair");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline DomainSpec parse_domain(const Json& d) {
  check_keys(d, "domain", {"kind", "map", "parameters", "corners"});
  DomainSpec spec;
  const Json& kind = require(d, "kind", "domain.");
  if (kind == "exterior") spec.kind = DomainKind::exterior;
  else if (kind == "interior") spec.kind = DomainKind::interior;
  else throw Error(ErrorKind::ParseError, "field 'domain.kind' must be \"exterior\" or \"interior\"");
  const Json& map = require(d, "map", "domain.");
  const auto id = map.is_string() ? map_id_from_string(map.get<std::string>()) : std::nullopt;
  if (!id) throw Error(ErrorKind::ParseError, "field 'domain.map' names no known map");
  spec.map_id = *id;
  if (d.contains("parameters")) {
    check_keys(d["parameters"], "domain.parameters", {"radius", "half_length", "semi_x", "semi_y", "angle", "scale"});
    for (const auto& item : d["parameters"].items())
      spec.parameters[item.key()] = number(item.value(), "domain.parameters." + item.key());
  }
  if (d.contains("corners")) {
    if (!d["corners"].is_array()) throw Error(ErrorKind::ParseError, "field 'domain.corners' must be an array");
    for (const Json& c : d["corners"]) {
      check_keys(c, "domain.corners[]", {"location", "angle", "image"});
      CornerSpec corner;
      corner.location = point(require(c, "location", "domain.corners[]."), "domain.corners[].location");
      corner.angle = number(require(c, "angle", "domain.corners[]."), "domain.corners[].angle");
      corner.image_on_circle = c.contains("image") ? point(c["image"], "domain.corners[].image") : Complex{1.0, 0.0};
      spec.corners.push_back(corner);
    }
  }
  return spec;
}

inline PatchConfig parse_patch(const Json& p) {
  check_keys(p, "patch", {"shape", "center", "size", "omega0", "h", "blob_radius"});
  PatchConfig cfg;
  const Json& shape = require(p, "shape", "patch.");
  const Json& size = require(p, "size", "patch.");
  if (shape == "disk" || shape == "square") {
    cfg.shape.shape = shape == "disk" ? PatchShape::disk : PatchShape::square;
    cfg.shape.outer = number(size, "patch.size");
  } else if (shape == "annulus") {
    cfg.shape.shape = PatchShape::annulus;
    if (!size.is_array() || size.size() != 2)
      throw Error(ErrorKind::ParseError, "field 'patch.size' must be [inner, outer] for an annulus");
    cfg.shape.inner = number(size[0], "patch.size[0]");
    cfg.shape.outer = number(size[1], "patch.size[1]");
  } else {
    throw Error(ErrorKind::ParseError, "field 'patch.shape' must be disk, square or annulus");
  }
  cfg.shape.center = point(require(p, "center", "patch."), "patch.center");
  cfg.h = number(require(p, "h", "patch."), "patch.h");
  if (p.contains("blob_radius")) cfg.blob_radius = number(p["blob_radius"], "patch.blob_radius");

  const Json& om = require(p, "omega0", "patch.");
  check_keys(om, "patch.omega0", {"uniform", "gaussian"});
  if (om.size() != 1) throw Error(ErrorKind::ParseError, "field 'patch.omega0' needs exactly one of uniform, gaussian");
  if (om.contains("uniform")) {
    cfg.omega0.kind = OmegaSpec::Kind::uniform;
    cfg.omega0.value = number(om["uniform"], "patch.omega0.uniform");
  } else {
    const Json& g = om["gaussian"];
    check_keys(g, "patch.omega0.gaussian", {"amplitude", "width"});
    cfg.omega0.kind = OmegaSpec::Kind::gaussian;
    cfg.omega0.amplitude = number(require(g, "amplitude", "patch.omega0.gaussian."), "patch.omega0.gaussian.amplitude");
    cfg.omega0.width = number(require(g, "width", "patch.omega0.gaussian."), "patch.omega0.gaussian.width");
  }
  return cfg;
}

inline int positive_int(const Json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw Error(ErrorKind::ParseError, "field '" + field + "' must be a positive integer");
  return v.get<int>();
}

}  // namespace detail

/// Checks that the patch outline lies inside the domain, at least 2h from the boundary.
inline void validate_patch_placement(const ConformalMap& map, const PatchConfig& patch) {
  for (Complex x : patch.shape.outline())
    if (!map.contains(x) || map.boundary_distance(x) <= 2.0 * patch.h)
      throw Error(ErrorKind::ValidationError, "PatchTouchesBoundary: patch outline within 2h of the boundary");
}

/// Parses and validates a JSON run configuration. Unknown keys are rejected at every level.
inline RunConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " +
                                           e.what());
  }
  using namespace detail;
  check_keys(doc, "<root>",
             {"domain", "patch", "gamma0", "t_final", "dt", "output_stride", "snapshot_stride", "output_dir",
              "tracked_particles", "seed"});
  RunConfig cfg;
  cfg.domain = parse_domain(require(doc, "domain", ""));
  cfg.patch = parse_patch(require(doc, "patch", ""));
  cfg.gamma0 = doc.contains("gamma0") ? number(doc["gamma0"], "gamma0") : 0.0;
  cfg.t_final = number(require(doc, "t_final", ""), "t_final");
  if (doc.contains("dt")) {
    const Json& dt = doc["dt"];
    if (dt.is_string() && dt == "auto") cfg.dt.reset();
    else cfg.dt = number(dt, "dt");
  }
  if (doc.contains("output_stride")) cfg.output_stride = positive_int(doc["output_stride"], "output_stride");
  if (doc.contains("snapshot_stride")) cfg.snapshot_stride = positive_int(doc["snapshot_stride"], "snapshot_stride");
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw Error(ErrorKind::ParseError, "field 'output_dir' must be a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("tracked_particles")) {
    const Json& t = doc["tracked_particles"];
    if (!t.is_array()) throw Error(ErrorKind::ParseError, "field 'tracked_particles' must be an array");
    for (const Json& id : t) {
      if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<long long>() >= 0))
        throw Error(ErrorKind::ParseError, "field 'tracked_particles' must hold non-negative integers");
      cfg.tracked_particles.push_back(id.get<std::size_t>());
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) throw Error(ErrorKind::ParseError, "field 'seed' must be an integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  if (!(cfg.t_final > 0.0)) throw Error(ErrorKind::ValidationError, "t_final must be positive");
  if (!(cfg.patch.h > 0.0)) throw Error(ErrorKind::ValidationError, "patch.h must be positive");
  if (cfg.dt && !(*cfg.dt > 0.0)) throw Error(ErrorKind::ValidationError, "dt must be positive or \"auto\"");
  if (!(cfg.patch.shape.outer >= 0.0) || cfg.patch.shape.inner < 0.0 ||
      (cfg.patch.shape.shape == PatchShape::annulus && !(cfg.patch.shape.inner < cfg.patch.shape.outer)))
    throw Error(ErrorKind::ValidationError, "patch size is inconsistent");
  if (cfg.patch.omega0.kind == OmegaSpec::Kind::gaussian && !(cfg.patch.omega0.width > 0.0))
    throw Error(ErrorKind::ValidationError, "gaussian width must be positive");
  if (cfg.patch.blob_radius && !(*cfg.patch.blob_radius > 0.0))
    throw Error(ErrorKind::ValidationError, "blob_radius must be positive");

  const ConformalMap map(cfg.domain);  // throws ValidationError on bad parameters or corner angles
  if (!map.exterior() && cfg.gamma0 != 0.0)
    throw Error(ErrorKind::ValidationError, "interior domains carry no obstacle circulation (gamma0 must be 0)");
  if (cfg.patch.shape.outer > 0.0) validate_patch_placement(map, cfg.patch);
  return cfg;
}

/// Initial state: discretised patch (empty when omega0 vanishes identically),
/// shared blob radius and alpha = gamma0 + sum Gamma_j.
inline FlowState initial_state(const RunConfig& cfg) {
  FlowState s;
  s.map = std::make_shared<const ConformalMap>(cfg.domain);
  if (!cfg.patch.omega0.identically_zero() && cfg.patch.shape.outer > 0.0) {
    s.ensemble = patch_init(*s.map, cfg.patch.shape, cfg.patch.omega0.field(cfg.patch.shape.center), cfg.patch.h);
    assign_blob_radius(*s.map, s.ensemble, cfg.patch.h, cfg.patch.blob_radius);
  } else {
    s.ensemble.patch_cell_area = cfg.patch.h * cfg.patch.h;
  }
  s.circ = CirculationSpec::make(*s.map, cfg.gamma0, s.ensemble);
  return s;
}

/// Sign conditions under which boundary avoidance is asserted: omega0 <= 0 with alpha >= 0,
/// or omega0 >= 0 with alpha <= 0 (alpha ignored inside bounded domains).
inline bool sign_conditions_met(const RunConfig& cfg, const FlowState& s) {
  const bool exterior = s.map->exterior();
  const double alpha = s.circ.alpha;
  if (cfg.patch.omega0.nonpositive() && (!exterior || alpha >= 0.0)) return true;
  if (cfg.patch.omega0.nonnegative() && (!exterior || alpha <= 0.0)) return true;
  return false;
}

}  // namespace cornerflow
