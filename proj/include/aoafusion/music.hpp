#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/estimate.hpp"
#include "aoafusion/grid.hpp"

namespace aoafusion {

// A sampled spatial spectrum plus its refined peaks.
struct Spectrum {
  std::vector<double> thetas;  // radians, coarse grid
  std::vector<double> values;
  std::vector<Peak> peaks;     // refined, sorted by height descending
};

// Classical MUSIC pseudo-spectrum f(theta) = 1 / ||a^H(theta) U_N||^2.
inline Spectrum music_spectrum(const CMat& noise_basis,
                               const ArrayGeometry& geometry,
                               const GridSpec& spec) {
  SearchGrid grid(geometry, spec);
  Spectrum out;
  out.thetas = grid.thetas;
  out.values.resize(grid.size());
  RVec denom =
      (noise_basis.adjoint() * grid.steer).colwise().squaredNorm();
  for (int j = 0; j < grid.size(); ++j)
    out.values[j] = 1.0 / std::max(denom(j), 1e-300);
  auto f = [&](double th) {
    const CVec a = steering_vector(geometry, th);
    return 1.0 / std::max((noise_basis.adjoint() * a).squaredNorm(), 1e-300);
  };
  out.peaks = refined_peaks(grid, out.values, f, spec.refine_tol);
  return out;
}

namespace detail {
// Pick the top `count` peaks; when the spectrum offers fewer, greedily add
// the highest grid samples away from already chosen angles so the caller
// always receives `count` distinct angles.
inline std::vector<double> select_top_angles(const Spectrum& sp, int count,
                                             double exclusion,
                                             bool* padded = nullptr) {
  std::vector<double> chosen;
  for (const Peak& p : sp.peaks) {
    if (static_cast<int>(chosen.size()) == count) break;
    bool clash = false;
    for (double c : chosen) clash |= std::abs(c - p.theta) < exclusion;
    if (!clash) chosen.push_back(p.theta);
  }
  if (padded) *padded = static_cast<int>(chosen.size()) < count;
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    for (std::size_t j = 0; j < sp.thetas.size(); ++j) {
      bool clash = false;
      for (double c : chosen) clash |= std::abs(c - sp.thetas[j]) < exclusion;
      if (clash) continue;
      if (best < 0 || sp.values[j] > sp.values[best])
        best = static_cast<int>(j);
    }
    if (best < 0) break;
    chosen.push_back(sp.thetas[best]);
  }
  return chosen;
}
}  // namespace detail

// Baseline estimator: average every covariance handed in, split subspaces
// at `num_signals`, and report the top-q MUSIC peaks as targets. Users and
// targets are not told apart; that is the known weakness of the baseline.
inline EstimateResult naive_music(const std::vector<CMat>& covariances,
                                  int num_targets, int num_signals,
                                  const ArrayGeometry& geometry,
                                  const GridSpec& spec) {
  if (covariances.empty()) throw ConfigError("no covariances to average");
  const int n = geometry.num_antennas;
  if (num_signals >= n)
    throw TooFewAntennas("signal dimension must stay below antenna count");
  CMat mean = CMat::Zero(n, n);
  for (const CMat& r : covariances) {
    if (r.rows() != n || r.cols() != n)
      throw ConfigError("covariance dimensions differ from the array");
    mean += r;
  }
  mean /= static_cast<double>(covariances.size());
  if (mean.norm() == 0.0)
    throw TooFewAntennas("degenerate all-zero covariance average");

  SubspacePair sub = evd_split(mean, num_signals);
  Spectrum sp = music_spectrum(sub.noise_basis, geometry, spec);

  EstimateResult res;
  bool padded = false;
  res.target_angles = detail::select_top_angles(
      sp, num_targets, 10 * spec.refine_tol, &padded);
  std::sort(res.target_angles.begin(), res.target_angles.end());
  res.insufficient_peaks = padded;
  res.iterations = 1;
  res.converged = true;
  res.target_trace.push_back(res.target_angles);
  return res;
}

}  // namespace aoafusion
