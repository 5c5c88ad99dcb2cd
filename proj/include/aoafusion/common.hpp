#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace aoafusion {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Error hierarchy. Estimators throw; the Monte Carlo harness catches per
// trial and records the failure.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DuplicateAngle : Error { using Error::Error; };
struct RankOverflow : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct NotHermitian : Error { using Error::Error; };
struct InvalidDivisor : Error { using Error::Error; };
struct TooFewAntennas : Error { using Error::Error; };
struct AllPointsDegenerate : Error { using Error::Error; };
struct DegenerateProjection : Error { using Error::Error; };
struct TargetInvisibleEverywhere : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct Unidentifiable : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace aoafusion
