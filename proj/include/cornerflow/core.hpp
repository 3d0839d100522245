#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

/// Points of the physical plane and of the mapped plane are both represented
/// as complex numbers; 2-vectors (velocities, kernels) use the same type with
/// x = real part and y = imaginary part.
namespace cornerflow {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// (x1, x2)^perp = (-x2, x1)
inline Complex perp(Complex v) { return {-v.imag(), v.real()}; }

inline double dot(Complex a, Complex b) { return a.real() * b.real() + a.imag() * b.imag(); }

/// Image of a point by inversion across the unit circle, z* = z / |z|^2.
inline Complex inversion(Complex z) { return z / std::norm(z); }

enum class ErrorKind {
  InvalidArgument,
  PointOutsideDomain,
  BranchCutViolation,
  PointOutsideTarget,
  CornerSingularity,
  InsufficientSamples,
  FitDegenerate,
  InteriorDomainHasNoFarField,
  InteriorDomainHasNoHarmonicField,
  CoincidentPoints,
  ContourLeavesDomain,
  TooCloseToCorner,
  ParticleOnBoundary,
  StepTooLarge,
  ParticleEscapedDomain,
  PatchTouchesBoundary,
  CoincidesWithParticle,
  SignConditionViolated,
  EmptyTrace,
  DiskContainsVorticity,
  DiskLeavesRegion,
  CirculationMismatch,
  ParseError,
  ValidationError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorKind::BranchCutViolation: return "BranchCutViolation";
    case ErrorKind::PointOutsideTarget: return "PointOutsideTarget";
    case ErrorKind::CornerSingularity: return "CornerSingularity";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::FitDegenerate: return "FitDegenerate";
    case ErrorKind::InteriorDomainHasNoFarField: return "InteriorDomainHasNoFarField";
    case ErrorKind::InteriorDomainHasNoHarmonicField: return "InteriorDomainHasNoHarmonicField";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::ContourLeavesDomain: return "ContourLeavesDomain";
    case ErrorKind::TooCloseToCorner: return "TooCloseToCorner";
    case ErrorKind::ParticleOnBoundary: return "ParticleOnBoundary";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::ParticleEscapedDomain: return "ParticleEscapedDomain";
    case ErrorKind::PatchTouchesBoundary: return "PatchTouchesBoundary";
    case ErrorKind::CoincidesWithParticle: return "CoincidesWithParticle";
    case ErrorKind::SignConditionViolated: return "SignConditionViolated";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::DiskContainsVorticity: return "DiskContainsVorticity";
    case ErrorKind::DiskLeavesRegion: return "DiskLeavesRegion";
    case ErrorKind::CirculationMismatch: return "CirculationMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Ordinary least-squares slope of ys against xs.
template <class XRange, class YRange>
double least_squares_slope(const XRange& xs, const YRange& ys) {
  const auto n = static_cast<double>(std::size(xs));
  double mx = 0.0, my = 0.0;
  auto yi = std::begin(ys);
  for (double x : xs) {
    mx += x;
    my += *yi++;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  yi = std::begin(ys);
  for (double x : xs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (*yi++ - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::FitDegenerate, "all abscissae are equal");
  return sxy / sxx;
}

}  // namespace cornerflow
