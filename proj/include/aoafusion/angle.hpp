#pragma once

#include <cmath>
#include <vector>

#include "aoafusion/common.hpp"

namespace aoafusion {

// Angle of arrival in radians, restricted to the unambiguous field of view
// of a uniform linear array: (-pi/2, +pi/2).
class Angle {
 public:
  explicit Angle(double radians) : value_(radians) {
    if (!(std::abs(radians) < kPi / 2))
      throw Error("Angle " + std::to_string(radians) +
                  " rad outside open interval (-pi/2, pi/2)");
  }
  static Angle from_degrees(double d) { return Angle(deg2rad(d)); }

  double rad() const { return value_; }
  double deg() const { return rad2deg(value_); }

  friend bool operator==(Angle a, Angle b) { return a.value_ == b.value_; }
  friend auto operator<=>(Angle a, Angle b) { return a.value_ <=> b.value_; }

 private:
  double value_;
};

inline std::vector<double> to_radians(const std::vector<Angle>& a) {
  std::vector<double> r;
  r.reserve(a.size());
  for (const Angle& x : a) r.push_back(x.rad());
  return r;
}

inline std::vector<Angle> to_angles(const std::vector<double>& r) {
  std::vector<Angle> a;
  a.reserve(r.size());
  for (double x : r) a.emplace_back(x);
  return a;
}

}  // namespace aoafusion
