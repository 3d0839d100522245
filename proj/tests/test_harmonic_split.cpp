#include <gtest/gtest.h>

#include "cornerflow/harmonic_split.hpp"
#include "cornerflow/suites.hpp"

using namespace cornerflow;

namespace {

std::shared_ptr<const ConformalMap> plate() {
  return std::make_shared<const ConformalMap>(DomainSpec{DomainKind::exterior, MapId::exterior_segment, {}, {}});
}

FlowState state_of(std::shared_ptr<const ConformalMap> map, VortexEnsemble ens, double gamma0) {
  FlowState s;
  s.circ = CirculationSpec::make(*map, gamma0, ens);
  s.ensemble = std::move(ens);
  s.map = std::move(map);
  return s;
}

VortexEnsemble uniform_disk(const ConformalMap& map, Complex c, double r, double omega, double h) {
  VortexEnsemble e = patch_init(map, {PatchShape::disk, c, r, 0.0}, [&](Complex) { return omega; }, h);
  assign_blob_radius(map, e, h);
  return e;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

double far_slope(const VortexEnsemble& ens) {
  std::vector<double> lr, lv;
  for (double r : log_spaced(1e2, 1e4, 10)) {
    lr.push_back(std::log(r));
    lv.push_back(std::log(std::abs(freespace_velocity(ens, std::polar(r, 0.7)))));
  }
  return least_squares_slope(lr, lv);
}

}  // namespace

// freespace_velocity

TEST(FreespaceVelocity, UnitTangentialSpeed) {
  VortexEnsemble ens;
  ens.particles = {{{0.0, 0.0}, kTwoPi, 1e-9}};
  const Complex v = freespace_velocity(ens, {1.0, 0.0});
  EXPECT_NEAR(v.real(), 0.0, 1e-15);
  EXPECT_NEAR(v.imag(), 1.0, 1e-15);
}

TEST(FreespaceVelocity, DecayBoundAndRates) {
  const auto map = plate();
  const auto ens = uniform_disk(*map, {0.0, 1.0}, 0.3, -1.0, 0.05);
  for (Complex x : {Complex{3.0, 0.0}, Complex{-2.0, 4.0}, Complex{0.0, -5.0}}) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& p : ens.particles) dist = std::min(dist, std::abs(x - p.position));
    EXPECT_LE(std::abs(freespace_velocity(ens, x)), ens.l1_proxy() / (kTwoPi * dist));
  }
  EXPECT_NEAR(far_slope(ens), -1.0, 0.01);
  VortexEnsemble dipole;
  dipole.particles = {{{0.0, 0.5}, 1.0, 0.01}, {{0.0, -0.5}, -1.0, 0.01}};
  EXPECT_NEAR(far_slope(dipole), -2.0, 0.01);
}

// split_field

TEST(SplitField, SumsToVelocityAndVanishesOutside) {
  const auto map = plate();
  const auto ens = uniform_disk(*map, {0.0, 1.0}, 0.3, -1.0, 0.05);
  const auto circ = CirculationSpec::make(*map, 0.5, ens);
  const GridSpec grid = GridSpec::covering(2.0, 0.1);
  const SplitField f = split_field(*map, ens, circ, grid, 2);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Complex x = grid.point(k);
    const Complex u = map->contains(x) ? velocity(*map, ens, circ, x) : Complex{};
    EXPECT_LT(std::abs(f.v_samples[k] + f.w_samples[k] - u), 1e-12 * std::max(1.0, std::abs(u)));
  }
  EXPECT_EQ(grid.size(), 40u * 40u);
  // Cell-centred: no node on the axes, where the plate lies.
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NE(grid.point(k).imag(), 0.0);
}

// Harmonicity

TEST(MeanValue, HarmonicFieldAndNegativeControl) {
  const auto map = plate();
  EXPECT_LT(mean_value_residual([&](Complex x) { return harmonic_field(*map, x); }, {0.0, 2.0}, 0.5), 1e-6);
  const auto ens = uniform_disk(*map, {0.0, 1.5}, 0.4, -1.0, 0.04);
  // v is not harmonic inside the patch.
  EXPECT_GT(mean_value_residual([&](Complex x) { return freespace_velocity(ens, x); }, {0.1, 1.5}, 0.3), 0.1);
}

TEST(MeanValue, CollarCorrectionHarmonicAndHalving) {
  const auto map = plate();
  auto residuals = [&](double h) {
    const auto ens = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, h);
    const auto circ = CirculationSpec::make(*map, 0.5, ens);
    std::vector<HalvingCheck> out;
    for (Complex c : {Complex{-0.5, -0.3}, Complex{0.3, -0.35}, Complex{1.6, 0.25}})
      out.push_back(collar_halving_check(*map, ens, circ, c, 0.2));
    return out;
  };
  const auto fine = residuals(0.02);
  for (const auto& chk : fine) EXPECT_TRUE(chk.pass) << chk.residual_full << " " << chk.residual_half;
  // The residual comes from the blob core and shrinks with the lattice spacing.
  const auto coarse = residuals(0.04);
  for (std::size_t k = 0; k < fine.size(); ++k) EXPECT_LT(fine[k].residual_full, 0.5 * coarse[k].residual_full);
}

TEST(MeanValue, CollarPreconditions) {
  const auto map = plate();
  const auto ens = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.04);
  const auto circ = CirculationSpec::make(*map, 0.5, ens);
  EXPECT_EQ(kind_of([&] { collar_mean_value_residual(*map, ens, circ, {0.0, 1.2}, 0.1); }),
            ErrorKind::DiskContainsVorticity);
  EXPECT_EQ(kind_of([&] { collar_mean_value_residual(*map, ens, circ, {0.0, 0.1}, 0.2); }),
            ErrorKind::DiskLeavesRegion);
}

TEST(GradientBound, BoundaryCorrectionSatisfiesInteriorEstimate) {
  const auto map = plate();
  const auto ens = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.04);
  const auto circ = CirculationSpec::make(*map, 0.5, ens);
  const auto sources = map_sources(*map, ens);
  auto w = [&](Complex x) { return boundary_correction(*map, sources, ens, circ, x); };
  for (Complex c : {Complex{-0.5, 0.3}, Complex{0.0, -0.35}}) {
    require_collar_disk(*map, ens, c, 0.2);
    const GradientBound g = gradient_bound_check(w, c, 0.2);
    EXPECT_TRUE(g.pass) << g.gradient << " vs " << g.bound;
  }
}

// projection_inequality_check

TEST(Projection, IdenticalEnsembles) {
  const auto map = plate();
  const auto ens = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.05);
  const auto circ = CirculationSpec::make(*map, 0.5, ens);
  const ProjectionCheck c = projection_inequality_check(ens, circ, ens, circ, *map, GridSpec::covering(3.0, 0.1));
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs, 0.0);
  EXPECT_TRUE(c.pass);
}

TEST(Projection, RefinedAndTranslatedPatches) {
  const auto map = plate();
  const GridSpec grid = GridSpec::covering(4.0, 0.05);
  const double gamma0 = 0.5;
  // Both discretizations carry the same total circulation (rescaled to the coarse one).
  auto a = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.06);
  auto b = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.03);
  const double scale = a.total_circulation() / b.total_circulation();
  for (auto& p : b.particles) p.circulation *= scale;
  const auto ca = CirculationSpec::make(*map, gamma0, a);
  const auto cb = CirculationSpec::make(*map, gamma0, b);
  const ProjectionCheck refined = projection_inequality_check(a, ca, b, cb, *map, grid, 2);
  EXPECT_TRUE(refined.pass) << refined.lhs << " " << refined.rhs;
  EXPECT_GT(refined.rhs, 0.0);

  VortexEnsemble moved = a;
  for (auto& p : moved.particles) p.position += Complex{0.4, 0.3};
  const ProjectionCheck translated =
      projection_inequality_check(a, ca, moved, CirculationSpec::make(*map, gamma0, moved), *map, grid, 2);
  EXPECT_TRUE(translated.pass) << translated.lhs << " " << translated.rhs;
}

TEST(Projection, CirculationMismatchThrows) {
  const auto map = plate();
  const auto a = uniform_disk(*map, {0.0, 1.2}, 0.3, -1.0, 0.06);
  const auto b = uniform_disk(*map, {0.0, 1.2}, 0.3, -2.0, 0.06);
  const auto grid = GridSpec::covering(2.0, 0.1);
  EXPECT_EQ(kind_of([&] {
              projection_inequality_check(a, CirculationSpec::make(*map, 0.5, a), b, CirculationSpec::make(*map, 0.5, b),
                                          *map, grid);
            }),
            ErrorKind::CirculationMismatch);
}

// Twin runs

namespace {

FlowState twin_base(double h) {
  const auto map = plate();
  auto ens = uniform_disk(*map, {1.5, 0.0}, 0.25, -1.0, h);
  const double total = ens.total_circulation();
  return state_of(map, std::move(ens), -total + 0.5);
}

}  // namespace

TEST(TwinRun, IdenticalRunsStayTogether) {
  const FlowState a = twin_base(0.05);
  const TwinSeries s = twin_run_divergence(a, a, 0.5, 0.05, 2, GridSpec::covering(3.0, 0.1));
  for (double g : s.gaps) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(s.fitted_rate, 0.0);
  EXPECT_EQ(s.times.back(), 0.5);
  EXPECT_EQ(s.times.size(), 6u);
}

TEST(TwinRun, JitterGapLinearInEpsilon) {
  const FlowState a = twin_base(0.05);
  const GridSpec grid = GridSpec::covering(3.5, 0.05);
  auto end_gap = [&](double eps, double& rate) {
    FlowState b = a;
    b.ensemble = jitter_positions(*a.map, a.ensemble, eps, 1);
    const TwinSeries s = twin_run_divergence(a, b, 1.0, 0.05, 5, grid, 2);
    rate = s.fitted_rate;
    return s.gaps.back();
  };
  double r1 = 0.0, r2 = 0.0;
  const double g1 = end_gap(1e-7, r1), g2 = end_gap(1e-6, r2);
  EXPECT_NEAR(g2 / g1, 10.0, 0.5);
  EXPECT_LT(r1, 10.0);
  EXPECT_NEAR(r1, r2, 0.05 * std::max(1.0, std::abs(r1)));
}

TEST(TwinRun, RefinementShrinksGap) {
  const GridSpec grid = GridSpec::covering(3.5, 0.05);
  auto gap = [&](double h) {
    FlowState a = twin_base(h), b = twin_base(0.5 * h);
    b.circ = a.circ;
    // Same total circulation on both sides.
    const double scale = a.ensemble.total_circulation() / b.ensemble.total_circulation();
    for (auto& p : b.ensemble.particles) p.circulation *= scale;
    return twin_run_divergence(a, b, 0.5, 0.05, 5, grid, 2).gaps.back();
  };
  EXPECT_LT(gap(0.05), gap(0.1));
}

TEST(TwinRun, JitterStaysInDomain) {
  const FlowState a = twin_base(0.05);
  const VortexEnsemble j = jitter_positions(*a.map, a.ensemble, 1e-3, 9);
  for (std::size_t i = 0; i < j.size(); ++i) {
    EXPECT_TRUE(a.map->contains(j.particles[i].position));
    EXPECT_NEAR(std::abs(j.particles[i].position - a.ensemble.particles[i].position), 1e-3, 1e-15);
  }
  EXPECT_EQ(kind_of([&] { twin_run_divergence(a, a, 0.0, 0.1, 1, GridSpec::covering(1.0, 0.1)); }),
            ErrorKind::InvalidArgument);
}
