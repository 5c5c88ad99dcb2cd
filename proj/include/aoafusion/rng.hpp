#pragma once

#include <cmath>
#include <cstdint>

#include "aoafusion/common.hpp"

namespace aoafusion {

// Small self-contained generator so that results are bit-identical across
// platforms and standard libraries. SplitMix64 core; streams are derived
// from a master seed plus counters, so each (snr, trial, band) cell gets an
// independent stream and trials can run on any thread schedule.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static RngStream derive(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = mix(master);
    h = mix(h ^ (a + 0x9E3779B97F4A7C15ull));
    h = mix(h ^ (b + 0xC2B2AE3D27D4EB4Full));
    h = mix(h ^ (c + 0x165667B19E3779F9ull));
    return RngStream(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard complex circular Gaussian CN(0, 1) via Box-Muller;
  // real and imaginary parts each N(0, 1/2).
  cxd gaussian() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));  // sqrt(-2 ln u) * sqrt(1/2)
    return {r * std::cos(2 * kPi * u2), r * std::sin(2 * kPi * u2)};
  }

  // One QPSK symbol from {(+-1 +-1j)/sqrt(2)}, unit power.
  cxd qpsk() {
    std::uint64_t bits = next_u64();
    double re = (bits & 1) ? 1.0 : -1.0;
    double im = (bits & 2) ? 1.0 : -1.0;
    return cxd(re, im) / std::sqrt(2.0);
  }

 private:
  std::uint64_t state_;
};

}  // namespace aoafusion
