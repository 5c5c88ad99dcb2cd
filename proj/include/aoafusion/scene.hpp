#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "aoafusion/angle.hpp"
#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/rng.hpp"

namespace aoafusion {

// The scene: q targets shared by every band, one user per uplink band, and
// per-band visibility sets (0-based indices into target_angles).
struct SceneConfig {
  std::vector<Angle> target_angles;          // q entries
  std::vector<Angle> user_angles;            // K entries, band k = index k-1
  std::vector<std::vector<int>> visibility;  // K+1 entries, bands 0..K
  double noise_power = 0.0;                  // sigma^2
  double snr_db = 0.0;                       // per-path power / sigma^2 in dB

  int num_targets() const { return static_cast<int>(target_angles.size()); }
  int num_users() const { return static_cast<int>(user_angles.size()); }

  void validate() const {
    const int q = num_targets();
    if (q < 1) throw ConfigError("scene needs at least one target");
    if (visibility.size() != static_cast<std::size_t>(num_users()) + 1)
      throw ConfigError("visibility needs one set per band (K+1)");
    if (visibility[0].empty())
      throw ConfigError("downlink band must see at least one target");
    for (const auto& phi : visibility)
      for (int m : phi)
        if (m < 0 || m >= q)
          throw ConfigError("visibility index outside target list");
    if (noise_power < 0) throw ConfigError("noise power must be >= 0");
  }
};

// OFDM resource block for one band. Snapshot count is symbols x
// subcarriers. Carrier and timing constants are metadata only; the spatial
// snapshot model does not consume them.
struct BandConfig {
  int band_index = 0;
  int num_symbols = 32;      // L_k
  int num_subcarriers = 32;  // |C_k|
  double carrier_hz = 24e9;
  double subcarrier_spacing_hz = 240e3;

  int snapshots() const { return num_symbols * num_subcarriers; }
  double symbol_duration_s() const { return 1.0 / subcarrier_spacing_hz; }
  double cyclic_prefix_s() const { return 0.25 * symbol_duration_s(); }
};

// Per-path transmit symbols: row 0 of an uplink band is the user's direct
// path, remaining rows are target reflections. Rows are independent unit
// power QPSK streams, so the source covariance is diagonal in expectation.
struct SourceMatrix {
  CMat matrix;  // d_k x T_k
};

struct BandData {
  CMat snapshots;       // Y_k, N x T_k
  CMat covariance;      // (1/T) Y Y^H, Hermitian
  BandConfig config;
  SourceMatrix sources; // realized X_k (kept for CRB evaluation)
};

// i.i.d. QPSK symbols, unit average power.
inline CVec qpsk_stream(int count, RngStream& rng) {
  if (count < 0) throw ConfigError("qpsk_stream count must be >= 0");
  CVec x(count);
  for (int i = 0; i < count; ++i) x(i) = rng.qpsk();
  return x;
}

// Sample covariance (1/T) Y Y^H, symmetrized exactly.
inline CMat sample_covariance(const CMat& y) {
  if (y.cols() < 1) throw ConfigError("sample covariance needs T >= 1");
  CMat r = y * y.adjoint() / static_cast<double>(y.cols());
  return 0.5 * (r + r.adjoint());
}

// Band manifold: A_0 = targets visible in the downlink; A_k = [a(user_k),
// visible targets] for uplink bands.
inline Manifold band_manifold(const SceneConfig& scene,
                              const ArrayGeometry& geometry, int band) {
  std::vector<double> cols;
  if (band > 0) cols.push_back(scene.user_angles[band - 1].rad());
  for (int m : scene.visibility[band])
    cols.push_back(scene.target_angles[m].rad());
  return manifold(geometry, cols);
}

// Realize one band: Y = A X + W with independent unit-power QPSK rows and
// circular complex Gaussian noise of power sigma^2 per antenna.
inline BandData synthesize_band(const SceneConfig& scene,
                                const BandConfig& band,
                                const ArrayGeometry& geometry,
                                RngStream& rng) {
  scene.validate();
  Manifold a = band_manifold(scene, geometry, band.band_index);
  const int d = a.cols();
  const int t = band.snapshots();
  const int n = geometry.num_antennas;
  if (d > n) throw RankOverflow("more paths than antennas in band");

  CMat x(d, t);
  for (int p = 0; p < d; ++p)
    x.row(p) = qpsk_stream(t, rng).transpose();
  CMat y = a.matrix * x;
  if (scene.noise_power > 0) {
    const double scale = std::sqrt(scene.noise_power);
    for (int j = 0; j < t; ++j)
      for (int i = 0; i < n; ++i) y(i, j) += scale * rng.gaussian();
  }
  BandData out;
  out.snapshots = std::move(y);
  out.covariance = sample_covariance(out.snapshots);
  out.config = band;
  out.sources.matrix = std::move(x);
  return out;
}

// Paper-style resource allocations. Scenario 1 keeps the per-user
// time-frequency product constant: |C_k| = 32/K subcarriers and L_k = 16K
// symbols. Scenario 2 fixes L_k = 32 and |C_k| = 32 per user. The downlink
// band mirrors the per-user allocation of the scenario.
inline std::pair<SceneConfig, std::vector<BandConfig>> make_scenario(
    int which, int num_users, int num_antennas, int num_targets,
    double snr_db) {
  (void)num_antennas;
  if (which != 1 && which != 2) throw ConfigError("scenario must be 1 or 2");
  if (num_users < 0) throw ConfigError("user count must be >= 0");
  if (num_targets < 1 || num_targets > 3)
    throw ConfigError("default target table covers q in 1..3");
  if (which == 1 && num_users >= 1 && 32 % num_users != 0)
    throw InvalidDivisor("scenario 1 requires K to divide 32");

  SceneConfig scene;
  const double defaults[3] = {0.0, 30.0, 60.0};
  for (int m = 0; m < num_targets; ++m)
    scene.target_angles.push_back(Angle::from_degrees(defaults[m]));
  for (int k = 1; k <= num_users; ++k) {
    const double d = (num_users >= 2)
                         ? -10.0 - (k - 1) * 60.0 / (num_users - 1)
                         : -10.0;
    scene.user_angles.push_back(Angle::from_degrees(d));
  }
  std::vector<int> all(num_targets);
  for (int m = 0; m < num_targets; ++m) all[m] = m;
  scene.visibility.assign(num_users + 1, all);
  scene.snr_db = snr_db;
  scene.noise_power = std::pow(10.0, -snr_db / 10.0);

  const int ku = std::max(num_users, 1);
  const int sym = (which == 1) ? 16 * ku : 32;
  const int sub = (which == 1) ? 32 / ku : 32;
  std::vector<BandConfig> bands;
  for (int k = 0; k <= num_users; ++k) {
    BandConfig b;
    b.band_index = k;
    b.num_symbols = sym;
    b.num_subcarriers = sub;
    bands.push_back(b);
  }
  scene.validate();
  return {scene, bands};
}

}  // namespace aoafusion
