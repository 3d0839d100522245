#include <gtest/gtest.h>

#include <vector>

#include "cornerflow/core.hpp"
#include "cornerflow/parallel.hpp"

using namespace cornerflow;

TEST(Core, PerpRotatesCounterClockwise) {
  EXPECT_EQ(perp({1.0, 0.0}), Complex(0.0, 1.0));
  EXPECT_EQ(perp({0.0, 1.0}), Complex(-1.0, 0.0));
  EXPECT_DOUBLE_EQ(dot({3.0, -2.0}, perp({3.0, -2.0})), 0.0);
}

TEST(Core, InversionAcrossUnitCircle) {
  EXPECT_EQ(inversion({2.0, 0.0}), Complex(0.5, 0.0));
  const Complex z{0.3, -1.7};
  EXPECT_NEAR(std::abs(inversion(z)) * std::abs(z), 1.0, 1e-15);
  EXPECT_NEAR(std::arg(inversion(z)), std::arg(z), 1e-15);
}

TEST(Core, LeastSquaresSlope) {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0};
  EXPECT_NEAR(least_squares_slope(x, y), 2.0, 1e-15);
  const std::vector<double> same{1.0, 1.0, 1.0};
  try {
    least_squares_slope(same, same);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FitDegenerate);
  }
}

TEST(Core, ErrorCarriesKindName) {
  const Error e(ErrorKind::StepTooLarge, "detail");
  EXPECT_EQ(e.kind(), ErrorKind::StepTooLarge);
  EXPECT_NE(std::string(e.what()).find("StepTooLarge"), std::string::npos);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  auto fill = [](int threads) {
    std::vector<double> out(1000);
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = std::sin(double(i)) * 1e3; });
    return out;
  };
  const auto a = fill(1), b = fill(4);
  EXPECT_EQ(a, b);
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 3, [](std::size_t i) {
                 if (i == 57) throw Error(ErrorKind::InvalidArgument, "boom");
               }),
               Error);
}
