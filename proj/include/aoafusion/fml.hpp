#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/estimate.hpp"
#include "aoafusion/grid.hpp"

namespace aoafusion {

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Projected Rayleigh ratio (a^H Pp R Pp a) / (a^H Pp a) over the coarse
// grid. Points whose denominator falls under the guard are returned as
// -inf and are never selected.
inline std::vector<double> rayleigh_values(const CMat& pperp, const CMat& r,
                                           const SearchGrid& grid) {
  const int n = static_cast<int>(pperp.rows());
  CMat b = pperp * grid.steer;       // N x G
  CMat c = r * b;                    // N x G
  std::vector<double> vals(grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    const double den = b.col(j).squaredNorm();
    if (den < 1e-9 * n) {
      vals[j] = -kInf;
      continue;
    }
    vals[j] = std::real(b.col(j).dot(c.col(j))) / den;
  }
  return vals;
}

inline double rayleigh_at(const CMat& pperp, const CMat& r,
                          const ArrayGeometry& geometry, double theta) {
  const CVec b = pperp * steering_vector(geometry, theta);
  const double den = b.squaredNorm();
  if (den < 1e-9 * geometry.num_antennas) return -kInf;
  return std::real(b.dot(r * b)) / den;
}

inline int argmax_or_throw(const std::vector<double>& vals) {
  int best = -1;
  for (std::size_t j = 0; j < vals.size(); ++j)
    if (vals[j] > -kInf && (best < 0 || vals[j] > vals[best]))
      best = static_cast<int>(j);
  if (best < 0)
    throw AllPointsDegenerate("every grid point failed the projector guard");
  return best;
}

// Coarse scan + golden refinement of a single Rayleigh criterion.
inline double rayleigh_search(const CMat& pperp, const CMat& r,
                              const ArrayGeometry& geometry,
                              const SearchGrid& grid, double refine_tol,
                              bool* flat = nullptr) {
  std::vector<double> vals = rayleigh_values(pperp, r, grid);
  const int i0 = argmax_or_throw(vals);
  if (flat) {
    double lo = kInf, hi = -kInf;
    for (double v : vals)
      if (v > -kInf) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    *flat = (hi - lo) <= 1e-9 * std::max(std::abs(hi), 1e-300);
  }
  const int g = grid.size();
  return golden_section_max(
      [&](double th) { return rayleigh_at(pperp, r, geometry, th); },
      grid.thetas[std::max(i0 - 1, 0)], grid.thetas[std::min(i0 + 1, g - 1)],
      refine_tol);
}

}  // namespace detail

// Classical alternating-projection initialization run independently per
// band: sources are added one at a time by a 1-D search of the projected
// Rayleigh ratio against the already fixed columns, then swept in place
// until the per-band estimates settle. Maximizes trace(P_A R) per band.
inline std::vector<std::vector<double>> fml_initialize(
    const std::vector<CMat>& covariances,
    const std::vector<int>& sources_per_band, const ArrayGeometry& geometry,
    const GridSpec& spec) {
  if (covariances.size() != sources_per_band.size())
    throw ConfigError("one source count per band expected");
  SearchGrid grid(geometry, spec);
  std::vector<std::vector<double>> estimates;
  for (std::size_t k = 0; k < covariances.size(); ++k) {
    const int d = sources_per_band[k];
    if (d >= geometry.num_antennas)
      throw RankOverflow("band needs fewer sources than antennas");
    std::vector<double> ths;
    for (int j = 0; j < d; ++j) {
      CMat pperp = orth_projector(manifold(geometry, ths),
                                  geometry.num_antennas);
      ths.push_back(detail::rayleigh_search(pperp, covariances[k], geometry,
                                            grid, spec.refine_tol));
    }
    for (int sweep = 0; sweep < 20; ++sweep) {
      double moved = 0.0;
      for (int j = 0; j < d; ++j) {
        std::vector<double> others;
        for (int i = 0; i < d; ++i)
          if (i != j) others.push_back(ths[i]);
        CMat pperp = orth_projector(manifold(geometry, others),
                                    geometry.num_antennas);
        const double updated = detail::rayleigh_search(
            pperp, covariances[k], geometry, grid, spec.refine_tol);
        moved = std::max(moved, std::abs(updated - ths[j]));
        ths[j] = updated;
      }
      if (moved < spec.refine_tol) break;
    }
    std::sort(ths.begin(), ths.end());
    estimates.push_back(std::move(ths));
  }
  return estimates;
}

struct UserUpdate {
  double theta = 0.0;
  bool flat = false;
};

// Phase 1: update one user angle given the band's current target estimates.
// The K per-band searches are independent and may run in any order.
inline UserUpdate fml_phase1_user_update(const CMat& covariance,
                                         const std::vector<double>& targets,
                                         const ArrayGeometry& geometry,
                                         const GridSpec& spec) {
  SearchGrid grid(geometry, spec);
  CMat pperp =
      orth_projector(manifold(geometry, targets), geometry.num_antennas);
  UserUpdate out;
  out.theta = detail::rayleigh_search(pperp, covariance, geometry, grid,
                                      spec.refine_tol, &out.flat);
  return out;
}

// State handed to the phase-2 update: current estimates per band.
struct FmlBandState {
  std::optional<double> user;       // nullopt for the downlink band
  std::vector<int> visible;         // global target indices, 0-based
  std::vector<double> target_est;   // aligned with `visible`
};

namespace detail {
// Deflated projector for band k when re-estimating target m: every current
// column of the band manifold except a(theta_m).
inline CMat deflated_projector(const FmlBandState& band, int m,
                               const ArrayGeometry& geometry) {
  std::vector<double> cols;
  if (band.user) cols.push_back(*band.user);
  for (std::size_t j = 0; j < band.visible.size(); ++j)
    if (band.visible[j] != m) cols.push_back(band.target_est[j]);
  return orth_projector(manifold(geometry, cols), geometry.num_antennas);
}
}  // namespace detail

namespace detail {
inline double phase2_update(const std::vector<CMat>& covariances,
                            const std::vector<FmlBandState>& bands, int m,
                            const ArrayGeometry& geometry,
                            const SearchGrid& grid, double refine_tol) {
  std::vector<int> active;
  std::vector<CMat> pperps;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    if (std::find(bands[k].visible.begin(), bands[k].visible.end(), m) ==
        bands[k].visible.end())
      continue;
    active.push_back(static_cast<int>(k));
    pperps.push_back(detail::deflated_projector(bands[k], m, geometry));
  }
  if (active.empty())
    throw TargetInvisibleEverywhere("target seen by no band");

  std::vector<double> total(grid.size(), 0.0);
  for (std::size_t i = 0; i < active.size(); ++i) {
    std::vector<double> vals =
        detail::rayleigh_values(pperps[i], covariances[active[i]], grid);
    for (int j = 0; j < grid.size(); ++j)
      total[j] = (vals[j] == -detail::kInf) ? -detail::kInf
                                            : total[j] + vals[j];
  }
  const int i0 = detail::argmax_or_throw(total);
  auto objective = [&](double th) {
    double s = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double v =
          detail::rayleigh_at(pperps[i], covariances[active[i]], geometry, th);
      if (v == -detail::kInf) return -detail::kInf;
      s += v;
    }
    return s;
  };
  const int g = grid.size();
  return golden_section_max(objective, grid.thetas[std::max(i0 - 1, 0)],
                            grid.thetas[std::min(i0 + 1, g - 1)], refine_tol);
}
}  // namespace detail

// Phase 2: re-estimate target m by maximizing the sum of projected
// Rayleigh ratios over every band that sees target m.
inline double fml_phase2_target_update(const std::vector<CMat>& covariances,
                                       const std::vector<FmlBandState>& bands,
                                       int m, const ArrayGeometry& geometry,
                                       const GridSpec& spec) {
  SearchGrid grid(geometry, spec);
  return detail::phase2_update(covariances, bands, m, geometry, grid,
                               spec.refine_tol);
}

namespace detail {
// Surrogate objective sum_k trace(P_{A_k} R_k) at the current estimates.
inline double fml_objective(const std::vector<CMat>& covariances,
                            const std::vector<FmlBandState>& bands,
                            const ArrayGeometry& geometry) {
  double total = 0.0;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    std::vector<double> cols;
    if (bands[k].user) cols.push_back(*bands[k].user);
    for (double t : bands[k].target_est) cols.push_back(t);
    CMat basis = detail::column_space_basis(manifold(geometry, cols),
                                            geometry.num_antennas);
    total += std::real((basis.adjoint() * covariances[k] * basis).trace());
  }
  return total;
}
}  // namespace detail

// Alternating maximization of the joint likelihood criterion over all
// bands: per-band initialization, then user sweeps (phase 1) and fused
// target sweeps (phase 2) until the angle change falls below eps. With a
// user prior the phase-1 sweep is bypassed and the prior is used as-is.
inline EstimateResult fml_estimate(
    const std::vector<CMat>& covariances, int num_targets, int num_users,
    const std::vector<std::vector<int>>& visibility,
    const ArrayGeometry& geometry, const GridSpec& spec, double eps = 1e-6,
    int max_iters = 30,
    const std::optional<std::vector<double>>& user_prior = std::nullopt) {
  const int q = num_targets;
  const int bands_n = num_users + 1;
  if (static_cast<int>(covariances.size()) != bands_n)
    throw ConfigError("expected one covariance per band (K+1)");
  if (static_cast<int>(visibility.size()) != bands_n)
    throw ConfigError("expected one visibility set per band (K+1)");
  if (user_prior && static_cast<int>(user_prior->size()) != num_users)
    throw ConfigError("user prior length differs from K");

  SearchGrid grid(geometry, spec);
  std::vector<int> dims;
  for (const auto& phi : visibility) dims.push_back(static_cast<int>(phi.size()));
  std::vector<std::vector<double>> init =
      fml_initialize(covariances, dims, geometry, spec);

  std::vector<FmlBandState> bands(bands_n);
  for (int k = 0; k < bands_n; ++k) {
    bands[k].user = (k > 0 && user_prior)
                        ? std::optional<double>((*user_prior)[k - 1])
                        : std::nullopt;
    bands[k].visible = visibility[k];
    std::sort(bands[k].visible.begin(), bands[k].visible.end());
    bands[k].target_est = init[k];  // both sides sorted ascending
  }

  EstimateResult res;
  std::vector<double> users(num_users, 0.0);
  if (user_prior) users = *user_prior;
  std::vector<double> prev_targets, prev_users;

  for (int p = 0; p < max_iters; ++p) {
    if (!user_prior) {
      for (int k = 1; k < bands_n; ++k) {
        CMat pperp = orth_projector(
            manifold(geometry, bands[k].target_est), geometry.num_antennas);
        bool flat = false;
        users[k - 1] = detail::rayleigh_search(
            pperp, covariances[k], geometry, grid, spec.refine_tol, &flat);
        res.flat_spectrum |= flat;
        bands[k].user = users[k - 1];
      }
    } else {
      for (int k = 1; k < bands_n; ++k) bands[k].user = users[k - 1];
    }

    std::vector<double> targets(q, 0.0);
    for (int m = 0; m < q; ++m) {
      const double updated = detail::phase2_update(covariances, bands, m,
                                                   geometry, grid,
                                                   spec.refine_tol);
      targets[m] = updated;
      for (auto& b : bands)
        for (std::size_t j = 0; j < b.visible.size(); ++j)
          if (b.visible[j] == m) b.target_est[j] = updated;
    }
    std::sort(targets.begin(), targets.end());

    res.objective_trace.push_back(
        detail::fml_objective(covariances, bands, geometry));
    res.target_trace.push_back(targets);
    res.user_trace.push_back(users);
    res.iterations = p + 1;

    if (!prev_targets.empty()) {
      double delta = 0.0;
      for (int m = 0; m < q; ++m)
        delta += (targets[m] - prev_targets[m]) * (targets[m] - prev_targets[m]);
      delta = std::sqrt(delta);
      double du = 0.0;
      for (int k = 0; k < num_users; ++k)
        du += (users[k] - prev_users[k]) * (users[k] - prev_users[k]);
      delta += std::sqrt(du);
      if (delta < eps) {
        res.converged = true;
        prev_targets = targets;
        prev_users = users;
        break;
      }
    }
    prev_targets = targets;
    prev_users = users;
  }

  res.target_angles = prev_targets;
  res.user_angles = prev_users;
  return res;
}

}  // namespace aoafusion
