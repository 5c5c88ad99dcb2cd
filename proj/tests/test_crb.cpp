#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aoafusion/crb.hpp"
#include "aoafusion/rng.hpp"
#include "aoafusion/scene.hpp"

using namespace aoafusion;

namespace {

struct Realization {
  SceneConfig scene;
  std::vector<BandData> data;
};

Realization realize(int scenario, int users, int antennas, int targets,
                    double snr_db, std::uint64_t seed) {
  Realization r;
  auto [scene, bands] = make_scenario(scenario, users, antennas, targets,
                                      snr_db);
  r.scene = scene;
  ArrayGeometry g(antennas);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    RngStream rng = RngStream::derive(seed, b);
    r.data.push_back(synthesize_band(scene, bands[b], g, rng));
  }
  return r;
}

}  // namespace

TEST_CASE("manifold derivative entries") {
  ArrayGeometry g(3);
  CVec d = manifold_derivative(g, 0.0);
  REQUIRE(std::abs(d(0)) < 1e-15);
  REQUIRE(std::abs(d(1) - cxd(0, kPi)) < 1e-12);
  REQUIRE(std::abs(d(2) - cxd(0, 2 * kPi)) < 1e-12);

  // Central difference oracle.
  ArrayGeometry g8(8);
  const double th = 0.4, h = 1e-6;
  CVec fd = (steering_vector(g8, th + h) - steering_vector(g8, th - h)) /
            (2 * h);
  REQUIRE((fd - manifold_derivative(g8, th)).norm() < 1e-6);

  // cos(theta) kills the derivative toward endfire.
  REQUIRE(manifold_derivative(g8, kPi / 2 - 1e-9).norm() <
          1e-6 * manifold_derivative(g8, 0.0).norm());
}

TEST_CASE("derivative columns pass the central-difference check") {
  ArrayGeometry g(6);
  RngStream rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const double th = (rng.uniform() - 0.5) * kPi * 0.9;
    const double h = 1e-6;
    CVec fd = (steering_vector(g, th + h) - steering_vector(g, th - h)) /
              (2 * h);
    CVec an = manifold_derivative(g, th);
    REQUIRE((fd - an).norm() / an.norm() < 1e-6);
  }
}

TEST_CASE("noise power enters the bound linearly") {
  Realization r = realize(1, 1, 5, 1, 10.0, 7);
  CrbInputs in = make_crb_inputs(r.scene, ArrayGeometry(5), r.data);
  CrbResult c1 = crb_targets(in);
  in.noise_power *= 2.0;
  CrbResult c2 = crb_targets(in);
  REQUIRE(c2.matrix(0, 0) == c1.matrix(0, 0) * 2.0);  // scalar prefactor
  in.noise_power *= 3.5;
  CrbResult c7 = crb_targets(in);
  REQUIRE(c7.matrix(0, 0) == Catch::Approx(c1.matrix(0, 0) * 7.0));
}

TEST_CASE("hybrid bound beats the monostatic bound") {
  Realization r = realize(1, 2, 5, 1, 0.0, 11);
  CrbInputs in = make_crb_inputs(r.scene, ArrayGeometry(5), r.data);
  CrbResult hybrid = crb_targets(in);
  CrbResult mono = crb_special(CrbMode::kMonostatic, in);
  CrbResult bi = crb_special(CrbMode::kBistatic, in);
  REQUIRE(hybrid.matrix(0, 0) < mono.matrix(0, 0));
  REQUIRE(hybrid.matrix(0, 0) < bi.matrix(0, 0));
  REQUIRE(bi.matrix(0, 0) > 0.0);

  // Monostatic special case is the K=0 bound on the same downlink data.
  CrbInputs dl_only = in;
  dl_only.bands.resize(1);
  CrbResult mono2 = crb_targets(dl_only);
  REQUIRE(mono.matrix(0, 0) == Catch::Approx(mono2.matrix(0, 0)));
}

TEST_CASE("doubling the user count buys 2-4 dB of CRB") {
  double c1 = 0.0, c2 = 0.0;
  const int reps = 20;
  for (int i = 0; i < reps; ++i) {
    Realization r1 = realize(1, 1, 5, 1, 0.0, 100 + i);
    Realization r2 = realize(1, 2, 5, 1, 0.0, 200 + i);
    c1 += crb_targets(make_crb_inputs(r1.scene, ArrayGeometry(5), r1.data))
              .per_target_variance.mean();
    c2 += crb_targets(make_crb_inputs(r2.scene, ArrayGeometry(5), r2.data))
              .per_target_variance.mean();
  }
  const double gain_db = 10.0 * std::log10(c1 / c2);
  REQUIRE(gain_db >= 2.0);
  REQUIRE(gain_db <= 4.0);
}

TEST_CASE("Fisher additivity: dropping a band never helps") {
  Realization r = realize(2, 3, 6, 2, 5.0, 13);
  CrbInputs in = make_crb_inputs(r.scene, ArrayGeometry(6), r.data);
  CrbResult full = crb_targets(in);
  for (int drop = 0; drop < 4; ++drop) {
    std::vector<int> keep;
    for (int k = 0; k < 4; ++k)
      if (k != drop) keep.push_back(k);
    CrbResult partial = crb_targets_for_bands(in, keep);
    for (int m = 0; m < 2; ++m)
      REQUIRE(partial.per_target_variance(m) >=
              full.per_target_variance(m) * (1.0 - 1e-12));
  }
}

TEST_CASE("bound is symmetric and positive definite") {
  Realization r = realize(2, 2, 6, 3, 10.0, 17);
  CrbInputs in = make_crb_inputs(r.scene, ArrayGeometry(6), r.data);
  CrbResult c = crb_targets(in);
  REQUIRE((c.matrix - c.matrix.transpose()).norm() <
          1e-12 * c.matrix.norm());
  Eigen::SelfAdjointEigenSolver<RMat> es(c.matrix);
  REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("degenerate sources are unidentifiable") {
  Realization r = realize(1, 1, 5, 1, 0.0, 19);
  CrbInputs in = make_crb_inputs(r.scene, ArrayGeometry(5), r.data);
  for (auto& b : in.bands) b.sources.setZero();
  REQUIRE_THROWS_AS(crb_targets(in), Unidentifiable);
}

TEST_CASE("doubling the snapshot count halves the bound") {
  ArrayGeometry g(5);
  double ratio = 0.0;
  const int reps = 50;
  for (int i = 0; i < reps; ++i) {
    SceneConfig s;
    s.target_angles = {Angle::from_degrees(5.0)};
    s.user_angles = {Angle::from_degrees(-35.0)};
    s.visibility = {{0}, {0}};
    s.noise_power = 1.0;
    BandConfig short_band;
    short_band.num_symbols = 8;
    short_band.num_subcarriers = 16;
    BandConfig long_band;
    long_band.num_symbols = 16;
    long_band.num_subcarriers = 16;
    auto run = [&](const BandConfig& proto, std::uint64_t salt) {
      std::vector<BandData> data;
      for (int b = 0; b <= 1; ++b) {
        BandConfig cfg = proto;
        cfg.band_index = b;
        RngStream rng = RngStream::derive(4000 + i, b, salt);
        data.push_back(synthesize_band(s, cfg, g, rng));
      }
      return crb_targets(make_crb_inputs(s, g, data))
          .per_target_variance(0);
    };
    ratio += run(short_band, 0) / run(long_band, 1);
  }
  ratio /= reps;
  REQUIRE(ratio > 1.6);
  REQUIRE(ratio < 2.4);
}
