// Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cornerflow/run.hpp"

using namespace cornerflow;

namespace {

// Tolerances and limits.
constexpr double kExponentTol = 0.05;
constexpr double kGreenSymTol = 1e-12;
constexpr double kKernelFdTol = 1e-5;
constexpr double kFracTol = 1e-12;
constexpr double kCirculationTol = 1e-6;
constexpr double kHarmonicSlopeTol = 0.01;
constexpr double kZeroAlphaSlopeTol = 0.05;
constexpr double kSheetTol = 0.02;
constexpr double kGammaTol = 1e-3;
constexpr double kGapFloor = 0.5;
constexpr double kFloorStability = 0.20;
constexpr double kOrthogonalityTol = 1e-5;
constexpr double kDtL1Tol = 1e-3;
constexpr double kGronwallSlack = 0.1;
constexpr double kMeanValueTol = 1e-4;
constexpr double kLinearSlopeLo = 0.95, kLinearSlopeHi = 1.05;
constexpr double kRateStability = 0.30;
constexpr double kRadiusDriftTol = 1e-6;
constexpr double kMinOrder = 3.5;

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int id, const std::string& name, bool pass, double seconds, double limit, const std::string& detail) {
  const bool in_time = seconds < limit;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  std::printf("[%s] %2d %-22s %s | %.2f s (limit %.0f s)%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), seconds, limit, in_time ? "" : " TOO SLOW");
  std::fflush(stdout);
}

std::string g6(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

ConformalMap plate_map() {
  DomainSpec d;
  d.kind = DomainKind::exterior;
  d.map_id = MapId::exterior_segment;
  d.parameters["half_length"] = 1.0;
  return ConformalMap(d);
}

ConformalMap wedge_map(double angle) {
  DomainSpec d;
  d.kind = DomainKind::interior;
  d.map_id = MapId::interior_wedge_lens;
  d.parameters["angle"] = angle;
  return ConformalMap(d);
}

std::string plate_config(Complex center, double radius, double h, double t_final, const std::string& dt,
                         int stride, const std::string& tracked) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                R"({"domain": {"kind": "exterior", "map": "exterior_segment", "parameters": {"half_length": 1.0}},
                    "patch": {"shape": "disk", "center": [%.17g, %.17g], "size": %.17g,
                              "omega0": {"uniform": -1.0}, "h": %.17g},
                    "gamma0": 1.0, "t_final": %.17g, "dt": %s, "output_stride": %d,
                    "tracked_particles": [%s], "seed": 5})",
                center.real(), center.imag(), radius, h, t_final, dt.c_str(), stride, tracked.c_str());
  return buf;
}

SimulationResult run_config(const RunConfig& cfg, FlowState* init_out = nullptr) {
  const FlowState init = initial_state(cfg);
  if (init_out) *init_out = init;
  SimulationSettings s;
  s.t_final = cfg.t_final;
  s.dt = cfg.dt;
  s.output_stride = cfg.output_stride;
  s.tracked = cfg.tracked_particles;
  return simulate(init, s);
}

// Shared plate run for criteria 5, 6, 8 and 9.
struct PlateRun {
  RunConfig cfg;
  FlowState init;
  SimulationResult res;
  double seconds = 0.0;
};

PlateRun& plate_run() {
  static PlateRun run = [] {
    PlateRun r;
    Timer t;
    r.cfg = parse_config(plate_config({1.5, 0.0}, 0.25, 0.014, 5.0, "\"auto\"", 1, "0, 540, 1076"));
    r.res = run_config(r.cfg, &r.init);
    r.seconds = t.seconds();
    return r;
  }();
  return run;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  Timer t;
  const ConformalMap plate = plate_map();
  const ConformalMap wedge = wedge_map(1.5 * kPi);
  const double e_plate = corner_exponent_probe(plate, plate.corners().front(), default_probe_radii());
  const double e_wedge = corner_exponent_probe(wedge, wedge.corners().front(), default_probe_radii());
  const bool pass = std::abs(e_plate + 0.5) <= kExponentTol && std::abs(e_wedge + 1.0 / 3.0) <= kExponentTol;
  report(1, "corner_exponent", pass, t.seconds(), 1,
         "plate " + g6(e_plate) + " (-0.5), wedge 3pi/2 " + g6(e_wedge) + " (-1/3), tol " + g6(kExponentTol));
}

void criterion_2() {
  Timer t;
  double sym = 0.0, fd = 0.0;
  for (const ConformalMap& map : {plate_map(), wedge_map(1.5 * kPi)}) {
    sym = std::max(sym, check_green_symmetry(map, 1000).value);
    fd = std::max(fd, check_kernel_gradient(map, 200).value);
  }
  const double frac = check_frac_identity(1000).value;
  const bool pass = sym < kGreenSymTol && fd < kKernelFdTol && frac < kFracTol;
  report(2, "kernel_identities", pass, t.seconds(), 5,
         "G sym " + g6(sym) + ", K fd rel " + g6(fd) + ", frac " + g6(frac));
}

void criterion_3() {
  Timer t;
  const ConformalMap map = plate_map();
  const CheckResult circ = check_harmonic_circulation(map);
  const CheckResult h_slope = check_harmonic_decay(map);
  const CheckResult u_slope = check_zero_alpha_decay(map);
  const double c = circ.fitted.front().second;
  const bool pass = std::abs(c - 1.0) < kCirculationTol && std::abs(h_slope.value + 1.0) < kHarmonicSlopeTol &&
                    std::abs(u_slope.value + 2.0) < kZeroAlphaSlopeTol;
  report(3, "harmonic_field", pass, t.seconds(), 5,
         "circulation " + g6(c) + ", H slope " + g6(h_slope.value) + ", alpha=0 slope " + g6(u_slope.value));
}

void criterion_4() {
  Timer t;
  const ConformalMap map = plate_map();
  const CirculationSpec unit{1.0, 1.0};
  double err = 0.0;
  for (double x1 : {0.0, 0.3, -0.3, 0.6, -0.6}) {
    const double theta = std::acos(x1);
    const double jump = sheet_density(map, {}, unit, theta) + sheet_density(map, {}, unit, -theta);
    const double expected = 1.0 / kPi / std::sqrt(1.0 - x1 * x1);
    err = std::max(err, std::abs(jump - expected) / expected);
  }
  report(4, "plate_sheet_density", err < kSheetTol, t.seconds(), 10, "max rel err " + g6(err));
}

void criterion_5() {
  PlateRun& r = plate_run();
  const auto& recs = r.res.records;
  bool bitwise = true;
  double gamma_err = 0.0;
  for (const auto& rec : recs) {
    bitwise = bitwise && rec.total_circulation == recs.front().total_circulation &&
              rec.l1_proxy == recs.front().l1_proxy && rec.linf_proxy == recs.front().linf_proxy;
    gamma_err = std::max(gamma_err, std::abs(rec.gamma - r.cfg.gamma0));
  }
  report(5, "conservation", bitwise && gamma_err <= kGammaTol, r.seconds, 300,
         "N " + std::to_string(r.init.ensemble.size()) + ", " + std::to_string(recs.size()) +
             " outputs, bitwise " + (bitwise ? "yes" : "no") + ", max |gamma-gamma0| " + g6(gamma_err));
}

void criterion_6() {
  Timer t;
  PlateRun& r = plate_run();
  double worst = -1e300;
  for (const auto& rec : r.res.records)
    worst = std::max(worst, rec.support_radius - r.res.initial_support - r.res.support_speed * rec.time);
  report(6, "support_bound", worst <= 0.0, t.seconds(), 300,
         "max support(t)-R0-Ct " + g6(worst) + ", R0 " + g6(r.res.initial_support) + ", C " +
             g6(r.res.support_speed));
}

void criterion_7() {
  Timer t;
  // One-signed patch next to the plate tip; (h, dt) and (h/2, dt/2).
  auto floor_ratio = [](double h, double dt, double& floor) {
    const RunConfig cfg = parse_config(plate_config({1.2, 0.12}, 0.1, h, 5.0, g6(dt), 1, ""));
    const SimulationResult res = run_config(cfg);
    floor = 1e300;
    for (const auto& rec : res.records) floor = std::min(floor, rec.min_mapped_gap);
    return floor / res.records.front().min_mapped_gap;
  };
  double floor_c = 0.0, floor_f = 0.0;
  const double ratio_c = floor_ratio(0.02, 0.02, floor_c);
  const double ratio_f = floor_ratio(0.01, 0.01, floor_f);
  const double change = std::abs(floor_f - floor_c) / floor_c;
  const bool pass = ratio_c >= kGapFloor && ratio_f >= kGapFloor && change < kFloorStability;
  report(7, "boundary_avoidance", pass, t.seconds(), 900,
         "floor/gap0 " + g6(ratio_c) + " | " + g6(ratio_f) + ", floor change " + g6(change));
}

void criterion_8() {
  Timer t;
  PlateRun& r = plate_run();
  const FlowState& fin = r.res.final_state;
  const ConformalMap& map = *fin.map;
  const CheckResult orth = check_orthogonality(map, fin.ensemble, fin.circ, 100);
  const CheckResult dt = check_dtL1_formula(fin, 5, 4, 1e-4);
  const CheckResult upper = check_pinch_upper(map, fin.ensemble, fin.circ, 1000);
  const CheckResult lower = check_pinch_lower(map, fin.ensemble, fin.circ, 1000);
  const CheckResult decay = check_dtL1_decay(map, fin.ensemble, fin.circ);
  bool gronwall = !r.res.traces.empty();
  double worst_env = 0.0;
  for (const auto& tr : r.res.traces) {
    const GronwallFit g = gronwall_monitor(tr);
    gronwall = gronwall && g.max_L <= g.envelope + kGronwallSlack * std::abs(g.envelope);
    worst_env = std::max(worst_env, g.max_L / g.envelope);
  }
  const double c2 = lower.fitted.empty() ? 0.0 : lower.fitted.front().second;
  const bool pass = orth.value < kOrthogonalityTol && dt.value < kDtL1Tol && upper.pass && lower.pass && c2 > 0.0 &&
                    decay.pass && gronwall;
  report(8, "lyapunov_suite", pass, t.seconds(), 120,
         "orth " + g6(orth.value) + ", dtL1 rel " + g6(dt.value) + ", C1 " + g6(upper.fitted.front().second) +
             " (max/med " + g6(upper.value) + "), C2 " + g6(c2) + ", C3 ratio " + g6(decay.value) +
             ", maxL/envelope " + g6(worst_env));
}

void criterion_9() {
  Timer t;
  PlateRun& r = plate_run();
  double worst = 0.0;
  bool halving = true;
  for (const FlowState* s : {&r.init, &r.res.final_state}) {
    for (Complex c : {Complex{-0.5, 0.3}, Complex{0.0, -0.35}}) {
      const HalvingCheck h = collar_halving_check(*s->map, s->ensemble, s->circ, c, 0.2);
      worst = std::max(worst, h.residual_full);
      halving = halving && h.pass;
    }
  }
  report(9, "collar_harmonicity", worst < kMeanValueTol && halving, t.seconds(), 30,
         "max residual " + g6(worst) + ", halving " + (halving ? "yes" : "no"));
}

void criterion_10() {
  Timer t;
  const RunConfig cfg = parse_config(plate_config({1.5, 0.0}, 0.25, 0.05, 2.0, "0.05", 4, ""));
  const double same = twin_run(cfg, {}).gaps.back();
  bool zero = true;
  for (double g : twin_run(cfg, {}).gaps) zero = zero && g == 0.0;
  std::vector<double> eps{1e-7, 1e-6, 1e-5}, gaps, rates;
  for (double e : eps) {
    const TwinSeries s = twin_run(cfg, {Perturbation::Kind::jitter, e});
    gaps.push_back(s.gaps.back());
    rates.push_back(s.fitted_rate);
  }
  std::vector<double> le, lg;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    le.push_back(std::log(eps[k]));
    lg.push_back(std::log(gaps[k]));
  }
  const double slope = least_squares_slope(le, lg);
  const double rmin = *std::min_element(rates.begin(), rates.end());
  const double rmax = *std::max_element(rates.begin(), rates.end());
  const double mid = 0.5 * (rmin + rmax);
  const bool stable = std::abs(rmax - rmin) <= kRateStability * std::max(std::abs(mid), 1e-12) ||
                      std::abs(rmax - rmin) <= 1e-3;
  const bool pass = zero && same == 0.0 && slope >= kLinearSlopeLo && slope <= kLinearSlopeHi && stable;
  report(10, "twin_run", pass, t.seconds(), 600,
         "identical gap " + g6(same) + ", end-gap slope in eps " + g6(slope) + ", rates " + g6(rates[0]) + " " +
             g6(rates[1]) + " " + g6(rates[2]));
}

void criterion_11() {
  Timer t;
  DomainSpec d;
  d.kind = DomainKind::exterior;
  d.map_id = MapId::unit_disk_identity;
  auto state = [&](double gamma) {
    FlowState s;
    s.map = std::make_shared<const ConformalMap>(d);
    s.ensemble.particles.push_back({{2.0, 0.0}, gamma, 0.0});
    s.circ = CirculationSpec::make(*s.map, -gamma, s.ensemble);
    return s;
  };
  // Angular speed of a point vortex at distance dist outside the unit disk with alpha = 0.
  auto period = [](double gamma, double dist) {
    const double speed = std::abs(gamma) / (kTwoPi * (dist - 1.0 / dist));
    return kTwoPi * dist / speed;
  };

  const FlowState s0 = state(1.0);
  SimulationSettings set;
  set.t_final = period(1.0, 2.0);
  const SimulationResult res = simulate(s0, set);
  double drift = 0.0;
  for (const auto& rec : res.records) drift = std::max(drift, std::abs(rec.support_radius - 2.0));

  const FlowState s1 = state(kTwoPi);
  const double T = period(kTwoPi, 2.0);
  std::vector<double> errs;
  for (int n : {32, 64, 128}) {
    FlowState s = s1;
    for (int k = 0; k < n; ++k) s = step_rk4(s, T / n);
    errs.push_back(std::abs(s.ensemble.particles[0].position - Complex{2.0, 0.0}));
  }
  const double order1 = std::log2(errs[0] / errs[1]), order2 = std::log2(errs[1] / errs[2]);
  const bool pass = drift < kRadiusDriftTol && std::min(order1, order2) >= kMinOrder;
  report(11, "single_vortex_orbit", pass, t.seconds(), 30,
         "radius drift " + g6(drift) + " (" + std::to_string(res.steps) + " steps), RK4 order " + g6(order1) + ", " +
             g6(order2));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                    criterion_5, criterion_6, criterion_7, criterion_8,
                                                    criterion_9, criterion_10, criterion_11};
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    try {
      criteria[k]();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2zu raised: %s\n", k + 1, e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
