#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/scene.hpp"

namespace aoafusion {

// Derivative of the steering vector w.r.t. the angle: entry n equals
// j * 2*pi * spacing * n * cos(theta) * a_n(theta).
inline CVec manifold_derivative(const ArrayGeometry& g, double theta_rad) {
  CVec d = steering_vector(g, theta_rad);
  const double factor = 2.0 * kPi * g.spacing * std::cos(theta_rad);
  for (int n = 0; n < g.num_antennas; ++n)
    d(n) *= cxd(0.0, factor * n);
  return d;
}

// Everything the bound needs for one band: the manifold at the true
// angles, its columnwise derivative, the realized source symbols, and the
// selection pattern mapping band columns to global target indices.
struct CrbBand {
  CMat manifold;        // A_k, N x d_k
  CMat derivative;      // D_k, N x d_k
  CMat sources;         // X_k, d_k x T_k
  std::vector<int> selection;  // length d_k; global target index or -1
};

struct CrbInputs {
  int num_targets = 0;
  double noise_power = 0.0;
  std::vector<CrbBand> bands;
};

// Assemble CRB inputs from a scene and the realized band data.
inline CrbInputs make_crb_inputs(const SceneConfig& scene,
                                 const ArrayGeometry& geometry,
                                 const std::vector<BandData>& bands) {
  scene.validate();
  if (bands.size() != scene.visibility.size())
    throw ConfigError("band data count differs from the scene");
  CrbInputs in;
  in.num_targets = scene.num_targets();
  in.noise_power = scene.noise_power;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    CrbBand band;
    Manifold m = band_manifold(scene, geometry, static_cast<int>(k));
    band.manifold = m.matrix;
    band.derivative.resize(m.matrix.rows(), m.cols());
    for (int j = 0; j < m.cols(); ++j)
      band.derivative.col(j) = manifold_derivative(geometry, m.angles[j]);
    band.sources = bands[k].sources.matrix;
    if (band.sources.rows() != m.cols())
      throw ConfigError("source rows differ from band manifold columns");
    if (k > 0) band.selection.push_back(-1);  // user column
    for (int t : scene.visibility[k]) band.selection.push_back(t);
    in.bands.push_back(std::move(band));
  }
  return in;
}

struct CrbResult {
  RMat matrix;               // q x q, symmetric positive definite
  RVec per_target_variance;  // diagonal, radians^2
};

namespace detail {
// Fisher contribution of one band, accumulated over all snapshots:
//   sum_l Re{ diag(X(:,l))^* H diag(X(:,l)) } = Re{ H .* conj(X X^H) }
// with H = D^H (I - P_A) D.
inline RMat band_fisher(const CrbBand& band, int num_targets) {
  const int n = static_cast<int>(band.manifold.rows());
  const int d = static_cast<int>(band.manifold.cols());
  Eigen::JacobiSVD<CMat> svd(band.manifold, Eigen::ComputeThinU);
  CMat u = svd.matrixU();
  CMat pperp = CMat::Identity(n, n) - u * u.adjoint();
  CMat h = band.derivative.adjoint() * pperp * band.derivative;
  CMat gram = band.sources * band.sources.adjoint();
  RMat f = (h.array() * gram.conjugate().array()).real();
  RMat sel = RMat::Zero(num_targets, d);
  for (int j = 0; j < d; ++j)
    if (band.selection[j] >= 0) sel(band.selection[j], j) = 1.0;
  return sel * f * sel.transpose();
}
}  // namespace detail

// Hybrid bound on the target angles: CRB = (sigma^2 / 2) * J^-1 with J the
// Fisher sum over the requested bands. Conditional (deterministic-signal)
// form: the realized source symbols of the evaluated trial enter directly.
inline CrbResult crb_targets_for_bands(const CrbInputs& in,
                                       const std::vector<int>& band_subset) {
  const int q = in.num_targets;
  RMat fisher = RMat::Zero(q, q);
  for (int k : band_subset)
    fisher += detail::band_fisher(in.bands[k], q);
  Eigen::SelfAdjointEigenSolver<RMat> es(fisher);
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmax > 0) || es.eigenvalues().minCoeff() < 1e-12 * lmax)
    throw Unidentifiable("Fisher information is rank deficient");
  RMat crb = in.noise_power / 2.0 *
             fisher.ldlt().solve(RMat::Identity(q, q));
  crb = 0.5 * (crb + crb.transpose()).eval();
  CrbResult out;
  out.matrix = crb;
  out.per_target_variance = crb.diagonal();
  return out;
}

inline CrbResult crb_targets(const CrbInputs& in) {
  std::vector<int> all;
  for (std::size_t k = 0; k < in.bands.size(); ++k)
    all.push_back(static_cast<int>(k));
  return crb_targets_for_bands(in, all);
}

enum class CrbMode { kMonostatic, kBistatic };

// Special cases used as benchmarks: the downlink band alone, or a single
// uplink band alone (k = 1).
inline CrbResult crb_special(CrbMode mode, const CrbInputs& in) {
  if (mode == CrbMode::kMonostatic) return crb_targets_for_bands(in, {0});
  if (in.bands.size() < 2)
    throw ConfigError("bistatic bound needs at least one uplink band");
  return crb_targets_for_bands(in, {1});
}

}  // namespace aoafusion
