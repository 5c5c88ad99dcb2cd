#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"

namespace aoafusion {

// 1-D search plan shared by every spectral estimator: coarse scan on a
// fixed grid, then golden-section refinement of selected peaks.
struct GridSpec {
  double lo = deg2rad(-89.5);
  double hi = deg2rad(89.5);
  double coarse_step = deg2rad(0.5);
  double refine_tol = 1e-5;

  void validate() const {
    if (!(lo < hi)) throw ConfigError("grid bounds must satisfy lo < hi");
    if (!(coarse_step > refine_tol) || !(refine_tol > 0))
      throw ConfigError("grid requires coarse_step > refine_tol > 0");
  }
};

// Steering vectors tabulated on the coarse grid (N x G); built once per
// estimator call and shared by all coarse scans.
struct SearchGrid {
  std::vector<double> thetas;
  CMat steer;  // column j = a(thetas[j])

  SearchGrid(const ArrayGeometry& g, const GridSpec& spec) {
    spec.validate();
    const int count =
        static_cast<int>(std::floor((spec.hi - spec.lo) / spec.coarse_step +
                                     1e-9)) + 1;
    thetas.resize(count);
    steer.resize(g.num_antennas, count);
    for (int j = 0; j < count; ++j) {
      thetas[j] = std::min(spec.lo + j * spec.coarse_step, spec.hi);
      steer.col(j) = steering_vector(g, thetas[j]);
    }
  }

  int size() const { return static_cast<int>(thetas.size()); }
};

// Golden-section maximization of f on [a, b] down to interval width tol.
inline double golden_section_max(const std::function<double(double)>& f,
                                 double a, double b, double tol) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct Peak {
  double theta = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

// Local maxima of `values` by the 3-point test, each refined with a
// golden-section pass of `objective` inside its bracket. Result sorted by
// refined height, ties broken toward the smaller angle. Grid endpoints are
// admitted as candidates only when fewer maxima than `min_peaks` exist.
inline std::vector<Peak> refined_peaks(
    const SearchGrid& grid, const std::vector<double>& values,
    const std::function<double(double)>& objective, double refine_tol,
    std::size_t min_peaks = 1) {
  const int g = grid.size();
  std::vector<int> idx;
  for (int i = 1; i + 1 < g; ++i)
    if (values[i] > values[i - 1] && values[i] >= values[i + 1])
      idx.push_back(i);
  if (idx.size() < min_peaks) {
    if (g >= 2 && values[0] > values[1]) idx.push_back(0);
    if (g >= 2 && values[g - 1] > values[g - 2]) idx.push_back(g - 1);
  }
  std::vector<Peak> peaks;
  for (int i : idx) {
    const double lo = grid.thetas[std::max(i - 1, 0)];
    const double hi = grid.thetas[std::min(i + 1, g - 1)];
    Peak p;
    p.theta = golden_section_max(objective, lo, hi, refine_tol);
    p.value = objective(p.theta);
    peaks.push_back(p);
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.theta < b.theta;
  });
  return peaks;
}

// Single best maximum: coarse argmax then one refinement.
inline Peak refined_argmax(const SearchGrid& grid,
                           const std::vector<double>& values,
                           const std::function<double(double)>& objective,
                           double refine_tol) {
  const int g = grid.size();
  int i0 = 0;
  for (int i = 1; i < g; ++i)
    if (values[i] > values[i0]) i0 = i;
  Peak p;
  p.theta = golden_section_max(objective, grid.thetas[std::max(i0 - 1, 0)],
                               grid.thetas[std::min(i0 + 1, g - 1)],
                               refine_tol);
  p.value = objective(p.theta);
  return p;
}

}  // namespace aoafusion
