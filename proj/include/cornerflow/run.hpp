#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cornerflow/config.hpp"
#include "cornerflow/harmonic_split.hpp"
#include "cornerflow/suites.hpp"
#include "cornerflow/transport.hpp"

namespace cornerflow {

// ---------------------------------------------------------------------------
// Formatting (17 significant digits everywhere)

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

/// JSON has no inf/nan: those are written as strings.
inline std::string json_number(double v) { return std::isfinite(v) ? fmt17(v) : "\"" + fmt17(v) + "\""; }

inline std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string check_json(const CheckResult& c) {
  std::string s = "{\"check\": " + json_string(c.name) + ", \"max_error\": " + json_number(c.value) +
                  ", \"tolerance\": " + json_number(c.tolerance) + ", \"fitted_constants\": {";
  for (std::size_t k = 0; k < c.fitted.size(); ++k)
    s += (k ? ", " : "") + json_string(c.fitted[k].first) + ": " + json_number(c.fitted[k].second);
  return s + "}, \"pass\": " + (c.pass ? "true" : "false") + "}";
}

inline std::string checks_json(const std::vector<CheckResult>& checks) {
  std::string s = "[\n";
  for (std::size_t k = 0; k < checks.size(); ++k) s += "  " + check_json(checks[k]) + (k + 1 < checks.size() ? ",\n" : "\n");
  return s + "]\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Output files

inline std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& records) {
  std::string s = "t,total_circ,l1,linf,support_radius,min_gap,gamma,lyap_max\n";
  for (const auto& r : records)
    s += fmt17(r.time) + "," + fmt17(r.total_circulation) + "," + fmt17(r.l1_proxy) + "," + fmt17(r.linf_proxy) +
         "," + fmt17(r.support_radius) + "," + fmt17(r.min_mapped_gap) + "," + fmt17(r.gamma) + "," +
         fmt17(r.lyapunov_max) + "\n";
  return s;
}

inline std::string snapshot_json(const VortexEnsemble& ens) {
  std::string s = "[\n";
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const auto& p = ens.particles[k];
    s += "  {\"x\": " + json_number(p.position.real()) + ", \"y\": " + json_number(p.position.imag()) +
         ", \"gamma\": " + json_number(p.circulation) + ", \"delta\": " + json_number(p.blob_radius) + "}" +
         (k + 1 < ens.size() ? ",\n" : "\n");
  }
  return s + "]\n";
}

/// Reads a snapshot written by snapshot_json.
inline VortexEnsemble parse_snapshot(const std::string& text, double cell_area) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ParseError, "snapshot line " + std::to_string(detail::line_of_offset(text, e.byte)));
  }
  if (!doc.is_array()) throw Error(ErrorKind::ParseError, "snapshot must be a JSON array");
  VortexEnsemble ens;
  ens.patch_cell_area = cell_area;
  for (const Json& p : doc) {
    detail::check_keys(p, "snapshot[]", {"x", "y", "gamma", "delta"});
    ens.particles.push_back({{detail::number(detail::require(p, "x", "snapshot[]."), "x"),
                              detail::number(detail::require(p, "y", "snapshot[]."), "y")},
                             detail::number(detail::require(p, "gamma", "snapshot[]."), "gamma"),
                             detail::number(detail::require(p, "delta", "snapshot[]."), "delta")});
  }
  return ens;
}

inline std::string trace_csv(const std::vector<LyapunovTrace>& traces) {
  std::string s = "particle_id,t,L1,L,dtL1_formula,dtL1_finite_diff\n";
  for (const auto& tr : traces)
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      s += std::to_string(tr.particle_id) + "," + fmt17(tr.times[k]) + "," + fmt17(tr.L1_values[k]) + "," +
           fmt17(tr.L_values[k]) + "," + fmt17(tr.dtL1_formula[k]) + "," + fmt17(tr.dtL1_finite_diff[k]) + "\n";
  return s;
}

/// Reads traces written by trace_csv.
inline std::vector<LyapunovTrace> parse_trace_csv(const std::string& text) {
  std::vector<LyapunovTrace> traces;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("particle_id,t,L1,L,", 0) != 0) throw Error(ErrorKind::ParseError, "trace line 1: bad header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    if (cols.size() != 6) throw Error(ErrorKind::ParseError, "trace line " + std::to_string(lineno) + ": 6 columns expected");
    try {
      const auto id = static_cast<std::size_t>(std::stoull(cols[0]));
      if (traces.empty() || traces.back().particle_id != id) traces.push_back(LyapunovTrace{id, {}, {}, {}, {}, {}});
      LyapunovTrace& tr = traces.back();
      tr.times.push_back(std::stod(cols[1]));
      tr.L1_values.push_back(std::stod(cols[2]));
      tr.L_values.push_back(std::stod(cols[3]));
      tr.dtL1_formula.push_back(std::stod(cols[4]));
      tr.dtL1_finite_diff.push_back(std::stod(cols[5]));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ParseError, "trace line " + std::to_string(lineno) + ": bad number");
    }
  }
  return traces;
}

// ---------------------------------------------------------------------------
// Run summary

struct InvariantResult {
  std::string name;
  bool armed = true;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct RunSummary {
  std::vector<InvariantResult> invariants;
  std::vector<std::string> notes;

  bool all_armed_pass() const {
    for (const auto& inv : invariants)
      if (inv.armed && !inv.pass) return false;
    return true;
  }

  std::string json() const {
    std::string s = "{\n  \"all_invariants\": [\n";
    for (std::size_t k = 0; k < invariants.size(); ++k) {
      const auto& i = invariants[k];
      s += "    {\"name\": " + json_string(i.name) + ", \"armed\": " + (i.armed ? "true" : "false") +
           ", \"pass\": " + (i.pass ? "true" : "false") + ", \"value\": " + json_number(i.value) +
           ", \"tolerance\": " + json_number(i.tolerance) + "}" + (k + 1 < invariants.size() ? ",\n" : "\n");
    }
    s += "  ],\n  \"notes\": [";
    for (std::size_t k = 0; k < notes.size(); ++k) s += (k ? ", " : "") + json_string(notes[k]);
    s += "],\n  \"pass\": " + std::string(all_armed_pass() ? "true" : "false") + "\n}\n";
    return s;
  }
};

inline constexpr double kGammaTolerance = 1e-3;
inline constexpr double kGapFloorFraction = 0.5;

/// Evaluates the run invariants; boundary avoidance and Gronwall envelopes are
/// armed only under the sign conditions.
inline RunSummary summarize(const RunConfig& cfg, const SimulationResult& res, bool sign_ok) {
  RunSummary sum;
  const auto& recs = res.records;
  const DiagnosticsRecord& first = recs.front();

  double d_total = 0.0, d_l1 = 0.0, d_linf = 0.0, d_gamma = 0.0, support_excess = -1e300, gap_ratio = 1e300;
  bool bitwise = true;
  for (const auto& r : recs) {
    bitwise = bitwise && r.total_circulation == first.total_circulation && r.l1_proxy == first.l1_proxy &&
              r.linf_proxy == first.linf_proxy;
    d_total = std::max(d_total, std::abs(r.total_circulation - first.total_circulation));
    d_l1 = std::max(d_l1, std::abs(r.l1_proxy - first.l1_proxy));
    d_linf = std::max(d_linf, std::abs(r.linf_proxy - first.linf_proxy));
    d_gamma = std::max(d_gamma, std::abs(r.gamma - cfg.gamma0));
    support_excess = std::max(support_excess, r.support_radius - res.initial_support - res.support_speed * r.time);
    if (std::isfinite(first.min_mapped_gap)) gap_ratio = std::min(gap_ratio, r.min_mapped_gap / first.min_mapped_gap);
  }
  sum.invariants.push_back({"total_circulation_constant", true, d_total == 0.0 && bitwise, d_total, 0.0});
  sum.invariants.push_back({"l1_proxy_constant", true, d_l1 == 0.0, d_l1, 0.0});
  sum.invariants.push_back({"linf_proxy_constant", true, d_linf == 0.0, d_linf, 0.0});
  sum.invariants.push_back({"gamma_conserved", true, d_gamma <= kGammaTolerance, d_gamma, kGammaTolerance});
  const double support_slack = 1e-12 * std::max(1.0, res.initial_support);
  sum.invariants.push_back({"support_bound", true, support_excess <= support_slack, support_excess, support_slack});

  const bool has_particles = std::isfinite(first.min_mapped_gap);
  if (has_particles)
    sum.invariants.push_back(
        {"boundary_avoidance", sign_ok, gap_ratio >= kGapFloorFraction, gap_ratio, kGapFloorFraction});
  for (const auto& tr : res.traces) {
    const CheckResult g = check_gronwall(tr);
    sum.invariants.push_back({g.name, sign_ok, g.pass, g.value, g.tolerance});
  }
  if (!sign_ok) sum.notes.push_back("sign conditions not met");
  sum.notes.push_back("support speed bound C = " + fmt17(res.support_speed));
  sum.notes.push_back("dt = " + fmt17(res.dt) + ", steps = " + std::to_string(res.steps));
  return sum;
}

struct RunOptions {
  std::string out_dir;  ///< overrides the config's output_dir when non-empty
  int threads = 1;
  bool quiet = false;
};

/// Runs a configuration and writes diagnostics.csv, snapshot_<step>.json,
/// lyapunov_trace.csv and summary.json. Returns the process exit code.
inline int run(const RunConfig& cfg, const RunOptions& opt) {
  const std::filesystem::path out = opt.out_dir.empty() ? cfg.output_dir : opt.out_dir;
  std::filesystem::create_directories(out);
  auto log = [&](const std::string& msg) {
    if (!opt.quiet) std::clog << msg << "\n";
  };

  RunSummary failure;
  try {
    const FlowState init = initial_state(cfg);
    const bool sign_ok = sign_conditions_met(cfg, init);
    if (!sign_ok) log("warning: sign conditions not met; boundary-avoidance assertions disarmed");
    log("particles: " + std::to_string(init.ensemble.size()));

    SimulationSettings settings;
    settings.t_final = cfg.t_final;
    settings.dt = cfg.dt;
    settings.output_stride = cfg.output_stride;
    settings.snapshot_stride = cfg.snapshot_stride;
    settings.tracked = cfg.tracked_particles;
    settings.threads = opt.threads;
    const SimulationResult res = simulate(init, settings);
    log("steps: " + std::to_string(res.steps) + ", dt = " + fmt17(res.dt));

    write_text(out / "diagnostics.csv", diagnostics_csv(res.records));
    for (const Snapshot& s : res.snapshots) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%06zu.json", s.step);
      write_text(out / name, snapshot_json(s.ensemble));
    }
    if (!res.traces.empty()) write_text(out / "lyapunov_trace.csv", trace_csv(res.traces));
    const RunSummary sum = summarize(cfg, res, sign_ok);
    write_text(out / "summary.json", sum.json());
    for (const auto& inv : sum.invariants)
      log(std::string(inv.pass ? "PASS " : "FAIL ") + (inv.armed ? "" : "(disarmed) ") + inv.name + " value=" +
          fmt17(inv.value));
    return sum.all_armed_pass() ? 0 : 1;
  } catch (const Error& e) {
    failure.invariants.push_back({"run_completed", true, false, 0.0, 0.0});
    failure.notes.push_back(e.what());
    write_text(out / "summary.json", failure.json());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// Twin runs

struct Perturbation {
  enum class Kind { none, jitter, h_refine };
  Kind kind = Kind::none;
  double eps = 0.0;
};

inline Perturbation parse_perturbation(const std::string& s) {
  if (s == "none") return {};
  if (s == "h_refine") return {Perturbation::Kind::h_refine, 0.0};
  if (s.rfind("jitter:", 0) == 0) {
    try {
      const double eps = std::stod(s.substr(7));
      if (eps > 0.0) return {Perturbation::Kind::jitter, eps};
    } catch (const std::logic_error&) {
    }
  }
  throw Error(ErrorKind::InvalidArgument, "perturbation must be none, h_refine or jitter:EPS with EPS > 0");
}

inline constexpr double kTwinGridMargin = 2.0;
inline constexpr double kTwinGridSpacing = 0.05;

/// Base and perturbed initial states. Both share the base blob radius; the
/// refined twin uses h/2.
inline std::pair<FlowState, FlowState> twin_states(const RunConfig& cfg, const Perturbation& p) {
  const FlowState a = initial_state(cfg);
  FlowState b = a;
  if (p.kind == Perturbation::Kind::jitter) {
    b.ensemble = jitter_positions(*a.map, a.ensemble, p.eps, cfg.seed);
  } else if (p.kind == Perturbation::Kind::h_refine) {
    RunConfig fine = cfg;
    fine.patch.h = 0.5 * cfg.patch.h;
    b = initial_state(fine);
    const double delta = collar_blob_radius(a.ensemble);
    for (auto& q : b.ensemble.particles) q.blob_radius = delta;
    b.circ = CirculationSpec::make(*b.map, cfg.gamma0, b.ensemble);
  }
  return {a, b};
}

inline TwinSeries twin_run(const RunConfig& cfg, const Perturbation& p, int threads = 1) {
  auto [a, b] = twin_states(cfg, p);
  const double dt = cfg.dt ? *cfg.dt : auto_dt(a, threads);
  const double radius = std::max(a.ensemble.support_radius(), b.ensemble.support_radius()) + kTwinGridMargin;
  const GridSpec grid = GridSpec::covering(radius, std::max(cfg.patch.h, kTwinGridSpacing));
  return twin_run_divergence(a, b, cfg.t_final, dt, cfg.output_stride, grid, threads);
}

inline std::string twin_csv(const TwinSeries& s) {
  std::string out = "t,gap_l2,fitted_rate\n";
  for (std::size_t k = 0; k < s.times.size(); ++k)
    out += fmt17(s.times[k]) + "," + fmt17(s.gaps[k]) + "," + fmt17(s.fitted_rate) + "\n";
  return out;
}

}  // namespace cornerflow
