#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cornerflow/run.hpp"

namespace cf = cornerflow;

namespace {

struct Globals {
  std::string config;
  std::string out;
  int threads = 1;
  bool quiet = false;
};

cf::RunConfig load_config(const Globals& g) {
  if (g.config.empty()) throw cf::Error(cf::ErrorKind::InvalidArgument, "--config is required");
  return cf::parse_config(cf::read_text(g.config));
}

/// Prints the report and, with --out, also writes it to <out>/<file>.
void emit(const Globals& g, const std::string& file, const std::string& text) {
  std::cout << text;
  if (!g.out.empty()) {
    std::filesystem::create_directories(g.out);
    cf::write_text(std::filesystem::path(g.out) / file, text);
  }
}

bool all_pass(const std::vector<cf::CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

int cmd_probe_map(const Globals& g) {
  const cf::RunConfig cfg = load_config(g);
  const cf::ConformalMap map(cfg.domain);
  std::string s = "{\n  \"map\": " + cf::json_string(std::string(cf::to_string(map.spec().map_id))) + ",\n";
  if (map.exterior()) {
    const cf::FarFieldFit fit = cf::farfield_coefficients(map);
    s += "  \"beta\": " + cf::json_number(fit.beta) + ",\n  \"beta_tilde\": [" +
         cf::json_number(fit.beta_tilde.real()) + ", " + cf::json_number(fit.beta_tilde.imag()) +
         "],\n  \"farfield_residual_1e3\": " + cf::json_number(fit.residual) +
         ",\n  \"farfield_residual_1e4\": " + cf::json_number(fit.residual_far) + ",\n";
  }
  s += "  \"corner_fits\": [\n";
  bool pass = true;
  const auto probes = cf::probe_corners(map);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto& p = probes[k];
    pass = pass && p.pass;
    s += "    {\"location\": [" + cf::json_number(p.corner.location.real()) + ", " +
         cf::json_number(p.corner.location.imag()) + "], \"angle\": " + cf::json_number(p.corner.angle) +
         ", \"expected_exponent\": " + cf::json_number(p.expected) + ", \"fitted_exponent\": " +
         cf::json_number(p.fitted) + ", \"tolerance\": " + cf::json_number(cf::kCornerExponentTolerance) +
         ", \"pass\": " + (p.pass ? "true" : "false") + "}" + (k + 1 < probes.size() ? ",\n" : "\n");
  }
  const double roundtrip = cf::roundtrip_max_error(map);
  pass = pass && roundtrip < 1e-10;
  s += "  ],\n  \"roundtrip_max_error\": " + cf::json_number(roundtrip) + ",\n  \"pass\": " +
       std::string(pass ? "true" : "false") + "\n}\n";
  emit(g, "probe_map.json", s);
  return pass ? 0 : 1;
}

int cmd_kernel_test(const Globals& g) {
  const cf::RunConfig cfg = load_config(g);
  const cf::ConformalMap map(cfg.domain);
  const auto checks = cf::kernel_suite(map);
  emit(g, "kernel_test.json", cf::checks_json(checks));
  return all_pass(checks) ? 0 : 1;
}

int cmd_validate_lyapunov(const Globals& g, const std::string& snapshot, const std::string& trace) {
  const cf::RunConfig cfg = load_config(g);
  cf::FlowState state;
  state.map = std::make_shared<const cf::ConformalMap>(cfg.domain);
  state.ensemble = snapshot.empty() ? cf::initial_state(cfg).ensemble
                                    : cf::parse_snapshot(cf::read_text(snapshot), cfg.patch.h * cfg.patch.h);
  state.circ = cf::CirculationSpec::make(*state.map, cfg.gamma0, state.ensemble);
  auto checks = cf::lyapunov_suite(state, g.threads);
  if (!trace.empty())
    for (const auto& tr : cf::parse_trace_csv(cf::read_text(trace))) checks.push_back(cf::check_gronwall(tr));
  emit(g, "validate_lyapunov.json", cf::checks_json(checks));
  return all_pass(checks) ? 0 : 1;
}

int cmd_twin_run(const Globals& g, const std::string& perturb) {
  const cf::RunConfig cfg = load_config(g);
  const cf::TwinSeries series = cf::twin_run(cfg, cf::parse_perturbation(perturb), g.threads);
  emit(g, "twin_run.csv", cf::twin_csv(series));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vortex-particle solver for 2D Euler flow around obstacles with corners"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--out", g.out, "output directory (overrides output_dir for simulate)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "suppress progress messages");

  auto* simulate = app.add_subcommand("simulate", "run a configuration and write diagnostics")->fallthrough();
  auto* probe = app.add_subcommand("probe-map", "corner exponents and far-field coefficients")->fallthrough();
  auto* kernel = app.add_subcommand("kernel-test", "Green function and kernel identities")->fallthrough();
  auto* lyap = app.add_subcommand("validate-lyapunov", "Lyapunov functional checks")->fallthrough();
  std::string snapshot, trace;
  lyap->add_option("--snapshot", snapshot, "snapshot JSON (default: the configured initial patch)");
  lyap->add_option("--trace", trace, "lyapunov_trace.csv for the Gronwall check");
  auto* twin = app.add_subcommand("twin-run", "divergence of two nearby runs")->fallthrough();
  std::string perturb = "none";
  twin->add_option("--perturb", perturb, "none | h_refine | jitter:EPS");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cf::run(load_config(g), {g.out, g.threads, g.quiet});
    if (probe->parsed()) return cmd_probe_map(g);
    if (kernel->parsed()) return cmd_kernel_test(g);
    if (lyap->parsed()) return cmd_validate_lyapunov(g, snapshot, trace);
    if (twin->parsed()) return cmd_twin_run(g, perturb);
  } catch (const cf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == cf::ErrorKind::ParseError || e.kind() == cf::ErrorKind::ValidationError ? 3 : 2;
  }
  return 0;
}
