#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/estimate.hpp"
#include "aoafusion/grid.hpp"
#include "aoafusion/music.hpp"

namespace aoafusion {

struct GSpectrumResult {
  Spectrum spectrum;       // g^-1 sampled on the coarse grid
  double user_angle = 0.0; // refined argmax
  CVec dominant;           // v, the rank-1 direction extracted from P0perp R
};

// User spectrum for one uplink band. The covariance is projected onto the
// orthogonal complement of the current target manifold; the dominant left
// singular direction v then spans the projected user steering vector. The
// spectrum scores each direction by the relative residual of fitting the
// projected steering vector to span(v):
//
//   g(theta) = 1 - |v^H P0perp a(theta)|^2 / ||P0perp a(theta)||^2,
//
// whose reciprocal peaks exactly at the user angle for noiseless data.
// Directions inside the nulled target span are guarded out (g := 1).
inline GSpectrumResult g_spectrum(const CMat& covariance, const CMat& p0perp,
                                  const ArrayGeometry& geometry,
                                  const GridSpec& spec) {
  SearchGrid grid(geometry, spec);
  const int n = geometry.num_antennas;
  CMat projected = p0perp * covariance;
  GSpectrumResult out;
  out.dominant = top_left_singular(projected, 1).basis.col(0);
  const CVec& v = out.dominant;
  const double scale = std::real(v.dot(p0perp * v));
  if (std::abs(scale) < 1e-10)
    throw DegenerateProjection(
        "dominant direction lies inside the nulled span");

  CMat b = p0perp * grid.steer;
  out.spectrum.thetas = grid.thetas;
  out.spectrum.values.resize(grid.size());
  const CVec vp = p0perp * v;
  for (int j = 0; j < grid.size(); ++j) {
    const double den = b.col(j).squaredNorm();
    double g = 1.0;
    if (den >= 1e-9 * n)
      g = 1.0 - std::norm(vp.dot(b.col(j))) / den;
    out.spectrum.values[j] = 1.0 / std::max(g, 1e-300);
  }
  auto objective = [&](double th) {
    const CVec pa = p0perp * steering_vector(geometry, th);
    const double den = pa.squaredNorm();
    if (den < 1e-9 * n) return -std::numeric_limits<double>::infinity();
    return std::norm(v.dot(pa)) / den;
  };
  Peak p = refined_argmax(grid, out.spectrum.values, objective,
                          spec.refine_tol);
  out.user_angle = p.theta;
  out.spectrum.peaks =
      refined_peaks(grid, out.spectrum.values, objective, spec.refine_tol);
  // Report peak heights on the g^-1 scale, matching the sampled values.
  for (Peak& pk : out.spectrum.peaks)
    pk.value = (pk.value == -std::numeric_limits<double>::infinity())
                   ? 0.0
                   : 1.0 / std::max(1.0 - pk.value, 1e-300);
  return out;
}

struct HSpectrumResult {
  Spectrum spectrum;                  // h^-1 sampled on the coarse grid
  std::vector<double> target_angles;  // refined peak positions, sorted
  bool insufficient = false;          // fewer peaks than requested
};

// Fused target spectrum. The sampled cost is
//
//   h(theta) = ||U_N0^H a||^2
//            + sum_k || V_k (Q_k V_k)^+ Q_k a - a ||^2,
//
// i.e. the downlink MUSIC cost plus, per uplink band, the residual of
// fitting a(theta) inside the user-deflated target subspace. The per-band
// residual splits into a part measured inside range(Q_k) plus the user
// beam pattern |a_u^H a|^2 / N; the latter suppresses spurious peaks near
// user angles but offsets the minima slightly, so peak positions are
// refined on the in-range part alone, whose zeros sit exactly on the
// targets for noiseless data.
inline HSpectrumResult h_spectrum(const CMat& dl_noise_basis,
                                  const std::vector<CMat>& target_bases,
                                  const std::vector<CMat>& user_deflators,
                                  int num_targets,
                                  const ArrayGeometry& geometry,
                                  const GridSpec& spec) {
  if (target_bases.size() != user_deflators.size())
    throw ConfigError("one deflator per target basis expected");
  SearchGrid grid(geometry, spec);
  const int n = geometry.num_antennas;
  const int g = grid.size();
  const std::size_t nk = target_bases.size();

  // Precompute M_k = V_k (Q_k V_k)^+ Q_k - I and its in-range counterpart
  // W_k = M_k Q_k.
  std::vector<CMat> m_ops(nk), w_ops(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    const CMat& v = target_bases[k];
    const CMat& q = user_deflators[k];
    CMat fit = v * pinv(q * v) * q;
    m_ops[k] = fit - CMat::Identity(n, n);
    w_ops[k] = m_ops[k] * q;
  }

  std::vector<double> h_full(g, 0.0), h_range(g, 0.0);
  {
    RVec music = (dl_noise_basis.adjoint() * grid.steer).colwise().squaredNorm();
    for (int j = 0; j < g; ++j) h_full[j] = h_range[j] = music(j);
  }
  for (std::size_t k = 0; k < nk; ++k) {
    RVec full = (m_ops[k] * grid.steer).colwise().squaredNorm();
    RVec part = (w_ops[k] * grid.steer).colwise().squaredNorm();
    for (int j = 0; j < g; ++j) {
      h_full[j] += full(j);
      h_range[j] += part(j);
    }
  }

  HSpectrumResult out;
  out.spectrum.thetas = grid.thetas;
  out.spectrum.values.resize(g);
  for (int j = 0; j < g; ++j)
    out.spectrum.values[j] = 1.0 / std::max(h_full[j], 1e-300);

  auto h_range_inv = [&](double th) {
    const CVec a = steering_vector(geometry, th);
    double val = (dl_noise_basis.adjoint() * a).squaredNorm();
    for (std::size_t k = 0; k < nk; ++k) val += (w_ops[k] * a).squaredNorm();
    return 1.0 / std::max(val, 1e-300);
  };

  // Peaks are located, polished, and ranked on the in-range cost, whose
  // zeros sit on the targets; the emitted spectrum stays the full cost.
  // Near a closely spaced user the beam-pattern penalty inside the full
  // cost is wide enough to bury a genuine target peak, so the full cost is
  // not used for selection.
  std::vector<int> idx;
  for (int j = 1; j + 1 < g; ++j)
    if (h_range[j] < h_range[j - 1] && h_range[j] <= h_range[j + 1])
      idx.push_back(j);
  std::vector<Peak> peaks;
  for (int j : idx) {
    Peak p;
    p.theta = golden_section_max(h_range_inv, grid.thetas[j - 1],
                                 grid.thetas[j + 1], spec.refine_tol);
    p.value = h_range_inv(p.theta);
    bool dup = false;
    for (const Peak& other : peaks)
      dup |= std::abs(other.theta - p.theta) < 10 * spec.refine_tol;
    if (!dup) peaks.push_back(p);
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.theta < b.theta;
  });
  out.spectrum.peaks = peaks;
  out.insufficient = static_cast<int>(peaks.size()) < num_targets;
  for (int i = 0; i < std::min<int>(num_targets, peaks.size()); ++i)
    out.target_angles.push_back(peaks[i].theta);
  std::sort(out.target_angles.begin(), out.target_angles.end());
  return out;
}

// Alternating project-then-fuse subspace estimator. Initialization takes
// the downlink noise subspace from the covariance EVD and nulls the
// downlink target span; each pass then estimates every user (g spectra),
// deflates it, extracts the per-band target subspaces, fuses them in the
// h spectrum, and refreshes the nulling projector from the new targets.
inline EstimateResult fused_subspace_estimate(
    const std::vector<CMat>& covariances, int num_targets, int num_users,
    const std::vector<std::vector<int>>& visibility,
    const ArrayGeometry& geometry, const GridSpec& spec, double eps = 1e-6,
    int max_iters = 30) {
  const int q = num_targets;
  const int n = geometry.num_antennas;
  if (static_cast<int>(covariances.size()) != num_users + 1)
    throw ConfigError("expected one covariance per band (K+1)");
  if (static_cast<int>(visibility.size()) != num_users + 1)
    throw ConfigError("expected one visibility set per band (K+1)");
  const int dl_dim = static_cast<int>(visibility[0].size());
  if (dl_dim >= n) throw RankOverflow("downlink needs fewer targets than antennas");

  SubspacePair dl = evd_split(covariances[0], dl_dim);
  CMat p0perp = CMat::Identity(n, n) - dl.signal_basis * dl.signal_basis.adjoint();

  EstimateResult res;
  std::vector<double> users(num_users, 0.0);
  std::vector<double> targets, prev_targets, prev_users;

  for (int p = 0; p < max_iters; ++p) {
    std::vector<CMat> bases, deflators;
    res.g_values.assign(num_users, {});
    for (int k = 1; k <= num_users; ++k) {
      GSpectrumResult gs =
          g_spectrum(covariances[k], p0perp, geometry, spec);
      users[k - 1] = gs.user_angle;
      res.g_values[k - 1] = gs.spectrum.values;
      const CVec au = steering_vector(geometry, users[k - 1]);
      CMat qperp = CMat::Identity(n, n) -
                   (au * au.adjoint()) / au.squaredNorm();
      CMat sk = qperp * covariances[k];
      const int dk = static_cast<int>(visibility[k].size());
      bases.push_back(top_left_singular(sk, dk).basis);
      deflators.push_back(std::move(qperp));
    }

    HSpectrumResult hs = h_spectrum(dl.noise_basis, bases, deflators, q,
                                    geometry, spec);
    res.h_values = hs.spectrum.values;
    targets = hs.target_angles;
    if (hs.insufficient) {
      res.insufficient_peaks = true;
      // Fill missing slots from the previous pass (or the spectrum's
      // highest free samples on the first pass), keeping angles distinct.
      auto distinct = [&](double c) {
        for (double t : targets)
          if (std::abs(t - c) < 10 * spec.refine_tol) return false;
        return true;
      };
      for (double t : prev_targets) {
        if (static_cast<int>(targets.size()) == q) break;
        if (distinct(t)) targets.push_back(t);
      }
      std::size_t j = 0;
      std::vector<std::size_t> order(hs.spectrum.values.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return hs.spectrum.values[a] > hs.spectrum.values[b];
      });
      while (static_cast<int>(targets.size()) < q && j < order.size()) {
        const double c = hs.spectrum.thetas[order[j++]];
        if (distinct(c)) targets.push_back(c);
      }
      std::sort(targets.begin(), targets.end());
    }

    p0perp = orth_projector(manifold(geometry, targets), n);

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
