#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aoafusion/common.hpp"
#include "aoafusion/crb.hpp"
#include "aoafusion/fml.hpp"
#include "aoafusion/fused.hpp"
#include "aoafusion/music.hpp"
#include "aoafusion/rng.hpp"
#include "aoafusion/scene.hpp"

namespace aoafusion {

struct ExperimentSpec {
  int scenario = 1;
  int num_users = 1;     // K
  int num_antennas = 5;  // N
  int num_targets = 1;   // q
  std::optional<std::vector<double>> target_angles_deg;
  std::vector<double> snr_grid_db = {10.0};
  int trials = 200;
  std::vector<std::string> algorithms = {"fml", "fml-prior", "fused",
                                         "naive"};
  bool include_crb = false;
  std::uint64_t master_seed = 1;
  std::string output_dir = ".";
  double grid_step_deg = 0.5;
  double eps = 1e-6;
  int max_iters = 30;
  bool naive_include_dl = true;
  bool dump_spectra = false;
  bool dump_trace = false;
  int threads = 1;

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (snr_grid_db.empty()) throw ConfigError("SNR grid must be nonempty");
    if (algorithms.empty()) throw ConfigError("select at least one algorithm");
    for (const std::string& a : algorithms)
      if (a != "fml" && a != "fml-prior" && a != "fused" && a != "naive")
        throw ConfigError("unknown algorithm: " + a);
    if (num_antennas < 2) throw ConfigError("need at least 2 antennas");
    if (num_targets < 1) throw ConfigError("need at least one target");
    if (num_targets > num_antennas - 1)
      throw ConfigError("targets must number at most N-1");
    if (num_users < 0) throw ConfigError("user count must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (!(grid_step_deg > 0)) throw ConfigError("grid step must be positive");
    if (!(eps > 0)) throw ConfigError("eps must be positive");
    if (max_iters < 1) throw ConfigError("max iterations must be >= 1");
    if (target_angles_deg &&
        static_cast<int>(target_angles_deg->size()) != num_targets)
      throw ConfigError("target list length differs from q");
  }

  GridSpec grid() const {
    GridSpec g;
    g.coarse_step = deg2rad(grid_step_deg);
    g.refine_tol = std::min(1e-5, g.coarse_step / 10.0);
    return g;
  }
};

struct MseRow {
  std::string algorithm;
  double snr_db = 0.0;
  double mse_rad2 = 0.0;
  std::optional<double> crb_rad2;
  int trials_used = 0;
  int failures = 0;
};

struct MseTable {
  std::vector<MseRow> rows;
};

// MSE over trials with sorted-order association:
// (1/(qE)) * sum_e sum_p (est_p(e) - truth_p)^2, in radians^2.
inline double mse(const std::vector<std::vector<double>>& estimates,
                  const std::vector<double>& truth) {
  const std::size_t q = truth.size();
  std::vector<double> t = truth;
  std::sort(t.begin(), t.end());
  if (estimates.empty()) throw LengthMismatch("no estimates");
  double acc = 0.0;
  for (const auto& e : estimates) {
    if (e.size() != q)
      throw LengthMismatch("estimate length differs from truth");
    std::vector<double> s = e;
    std::sort(s.begin(), s.end());
    for (std::size_t p = 0; p < q; ++p)
      acc += (s[p] - t[p]) * (s[p] - t[p]);
  }
  return acc / (static_cast<double>(q) * estimates.size());
}

namespace detail {

inline std::pair<SceneConfig, std::vector<BandConfig>> scene_for(
    const ExperimentSpec& spec, double snr_db) {
  auto [scene, bands] =
      make_scenario(spec.scenario, spec.num_users, spec.num_antennas,
                    spec.target_angles_deg ? static_cast<int>(
                                                 spec.target_angles_deg->size())
                                           : spec.num_targets,
                    snr_db);
  if (spec.target_angles_deg) {
    scene.target_angles.clear();
    for (double d : *spec.target_angles_deg)
      scene.target_angles.push_back(Angle::from_degrees(d));
  }
  return {scene, bands};
}

inline std::vector<BandData> synthesize_all(
    const SceneConfig& scene, const std::vector<BandConfig>& bands,
    const ArrayGeometry& geometry, std::uint64_t master, std::uint64_t snr_i,
    std::uint64_t trial) {
  std::vector<BandData> out;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    RngStream rng = RngStream::derive(
        master, (snr_i << 32) ^ trial, b, 0x5ce7e5u);
    out.push_back(synthesize_band(scene, bands[b], geometry, rng));
  }
  return out;
}

inline EstimateResult run_algorithm(const std::string& algo,
                                    const ExperimentSpec& spec,
                                    const SceneConfig& scene,
                                    const ArrayGeometry& geometry,
                                    const std::vector<CMat>& covs,
                                    const GridSpec& grid) {
  const int q = scene.num_targets();
  const int k = scene.num_users();
  if (algo == "fml")
    return fml_estimate(covs, q, k, scene.visibility, geometry, grid,
                        spec.eps, spec.max_iters);
  if (algo == "fml-prior")
    return fml_estimate(covs, q, k, scene.visibility, geometry, grid,
                        spec.eps, spec.max_iters,
                        to_radians(scene.user_angles));
  if (algo == "fused")
    return fused_subspace_estimate(covs, q, k, scene.visibility, geometry,
                                   grid, spec.eps, spec.max_iters);
  if (algo == "naive") {
    std::vector<CMat> pool;
    for (std::size_t i = spec.naive_include_dl ? 0 : 1; i < covs.size(); ++i)
      pool.push_back(covs[i]);
    if (pool.empty()) pool.push_back(covs[0]);
    const int nsig =
        std::min(q + k, geometry.num_antennas - 1);
    return naive_music(pool, q, nsig, geometry, grid);
  }
  throw ConfigError("unknown algorithm: " + algo);
}

struct TrialOutcome {
  std::vector<std::optional<std::vector<double>>> estimates;  // per algo
  std::vector<bool> nonconverged;
  std::optional<double> crb_mean_diag;
};

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for write: " + path);
  out << body;
}

inline std::string fmt(double v, const char* f = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace detail

inline std::string to_csv(const MseTable& table) {
  std::ostringstream out;
  out << "algorithm,snr_db,mse_rad2,crb_rad2,trials_used,failures\n";
  for (const MseRow& r : table.rows) {
    out << r.algorithm << ',' << detail::fmt(r.snr_db, "%.10g") << ','
        << detail::fmt(r.mse_rad2) << ','
        << (r.crb_rad2 ? detail::fmt(*r.crb_rad2) : std::string()) << ','
        << r.trials_used << ',' << r.failures << '\n';
  }
  return out.str();
}

inline MseTable parse_results_csv(const std::string& body) {
  MseTable table;
  std::istringstream in(body);
  std::string line;
  if (!std::getline(in, line) ||
      line != "algorithm,snr_db,mse_rad2,crb_rad2,trials_used,failures")
    throw Error("unexpected results header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    MseRow r;
    std::getline(ls, r.algorithm, ',');
    std::getline(ls, field, ',');
    r.snr_db = std::stod(field);
    std::getline(ls, field, ',');
    r.mse_rad2 = std::stod(field);
    std::getline(ls, field, ',');
    if (!field.empty()) r.crb_rad2 = std::stod(field);
    std::getline(ls, field, ',');
    r.trials_used = std::stoi(field);
    std::getline(ls, field, ',');
    r.failures = std::stoi(field);
    table.rows.push_back(std::move(r));
  }
  return table;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["scenario"] = s.scenario;
  j["users"] = s.num_users;
  j["antennas"] = s.num_antennas;
  j["targets_count"] = s.num_targets;
  if (s.target_angles_deg) j["targets"] = *s.target_angles_deg;
  j["snr_db"] = s.snr_grid_db;
  j["trials"] = s.trials;
  j["algos"] = s.algorithms;
  j["crb"] = s.include_crb;
  j["seed"] = s.master_seed;
  j["out"] = s.output_dir;
  j["grid_step_deg"] = s.grid_step_deg;
  j["eps"] = s.eps;
  j["max_iters"] = s.max_iters;
  j["naive_include_dl"] = s.naive_include_dl;
  j["dump_spectra"] = s.dump_spectra;
  j["dump_trace"] = s.dump_trace;
  j["threads"] = s.threads;
  return j;
}

// Monte Carlo sweep: for every (SNR, trial) cell the data is synthesized
// from counter-derived streams, every selected algorithm consumes the same
// data, and aggregation runs in fixed trial order so the output does not
// depend on the thread schedule. A trial that throws is excluded from that
// algorithm's average and counted; a trial that merely fails to converge
// contributes its angles and is counted as well.
inline MseTable run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const ArrayGeometry geometry(spec.num_antennas);
  const GridSpec grid = spec.grid();
  const int num_snr = static_cast<int>(spec.snr_grid_db.size());
  const int trials = spec.trials;
  const int num_algos = static_cast<int>(spec.algorithms.size());

  std::vector<std::pair<SceneConfig, std::vector<BandConfig>>> scenes;
  for (double snr : spec.snr_grid_db)
    scenes.push_back(detail::scene_for(spec, snr));

  std::vector<detail::TrialOutcome> outcomes(
      static_cast<std::size_t>(num_snr) * trials);
  std::atomic<std::size_t> cursor{0};
  const std::size_t total = outcomes.size();

  auto worker = [&]() {
    for (;;) {
      const std::size_t job = cursor.fetch_add(1);
      if (job >= total) return;
      const int si = static_cast<int>(job / trials);
      const int ei = static_cast<int>(job % trials);
      const auto& [scene, bands] = scenes[si];
      detail::TrialOutcome& out = outcomes[job];
      out.estimates.assign(num_algos, std::nullopt);
      out.nonconverged.assign(num_algos, false);
      std::vector<BandData> data = detail::synthesize_all(
          scene, bands, geometry, spec.master_seed, si, ei);
      std::vector<CMat> covs;
      for (const BandData& b : data) covs.push_back(b.covariance);
      for (int a = 0; a < num_algos; ++a) {
        try {
          EstimateResult r = detail::run_algorithm(
              spec.algorithms[a], spec, scene, geometry, covs, grid);
          out.estimates[a] = r.target_angles;
          out.nonconverged[a] = !r.converged && r.iterations > 1;
        } catch (const std::exception&) {
          out.estimates[a] = std::nullopt;
        }
      }
      if (spec.include_crb) {
        try {
          CrbInputs in = make_crb_inputs(scene, geometry, data);
          CrbResult c = crb_targets(in);
          out.crb_mean_diag = c.per_target_variance.mean();
        } catch (const std::exception&) {
          out.crb_mean_diag = std::nullopt;
        }
      }
    }
  };

  int nthreads = spec.threads;
  if (nthreads == 0)
    nthreads = std::max(1u, std::thread::hardware_concurrency());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MseTable table;
  for (int si = 0; si < num_snr; ++si) {
    const SceneConfig& scene = scenes[si].first;
    std::vector<double> truth = to_radians(scene.target_angles);
    std::sort(truth.begin(), truth.end());
    std::optional<double> crb_avg;
    if (spec.include_crb) {
      double acc = 0.0;
      int used = 0;
      for (int ei = 0; ei < trials; ++ei) {
        const auto& o = outcomes[static_cast<std::size_t>(si) * trials + ei];
        if (o.crb_mean_diag) {
          acc += *o.crb_mean_diag;
          ++used;
        }
      }
      if (used > 0) crb_avg = acc / used;
    }
    for (int a = 0; a < num_algos; ++a) {
      MseRow row;
      row.algorithm = spec.algorithms[a];
      row.snr_db = spec.snr_grid_db[si];
      row.crb_rad2 = crb_avg;
      std::vector<std::vector<double>> collected;
      for (int ei = 0; ei < trials; ++ei) {
        const auto& o = outcomes[static_cast<std::size_t>(si) * trials + ei];
        if (o.estimates[a]) {
          collected.push_back(*o.estimates[a]);
          if (o.nonconverged[a]) ++row.failures;
        } else {
          ++row.failures;
        }
      }
      row.trials_used = static_cast<int>(collected.size());
      row.mse_rad2 = collected.empty() ? 0.0 : mse(collected, truth);
      table.rows.push_back(std::move(row));
    }
  }

  std::filesystem::create_directories(spec.output_dir);
  detail::write_text_file(spec.output_dir + "/results.csv", to_csv(table));
  detail::write_text_file(spec.output_dir + "/spec.json",
                          spec_to_json(spec).dump(2) + "\n");
  return table;
}

namespace detail {
inline std::string spectrum_csv(const std::vector<double>& thetas,
                                const std::vector<double>& mean_db) {
  std::ostringstream out;
  out << "theta_deg,value_db\n";
  for (std::size_t j = 0; j < thetas.size(); ++j)
    out << fmt(rad2deg(thetas[j]), "%.10g") << ','
        << fmt(mean_db[j], "%.10g") << '\n';
  return out.str();
}
}  // namespace detail

// Spectrum dumps at one SNR: the fused estimator's final h^-1 and per-user
// g^-1 plus the naive MUSIC spectrum, each averaged over trials in the dB
// domain (no normalization) and written as theta_deg,value_db.
inline void dump_spectra(const ExperimentSpec& spec, double snr_db,
                         std::uint64_t seed) {
  spec.validate();
  const ArrayGeometry geometry(spec.num_antennas);
  const GridSpec grid = spec.grid();
  auto [scene, bands] = detail::scene_for(spec, snr_db);
  const int k = scene.num_users();
  const int q = scene.num_targets();
  SearchGrid sg(geometry, grid);
  const int g = sg.size();

  std::vector<double> music_db(g, 0.0), h_db(g, 0.0);
  std::vector<std::vector<double>> g_db(k, std::vector<double>(g, 0.0));
  auto add_db = [](std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t j = 0; j < acc.size(); ++j)
      acc[j] += 10.0 * std::log10(std::max(v[j], 1e-300));
  };

  for (int e = 0; e < spec.trials; ++e) {
    std::vector<BandData> data;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      RngStream rng = RngStream::derive(seed, e, b, 0xd5ec7au);
      data.push_back(synthesize_band(scene, bands[b], geometry, rng));
    }
    std::vector<CMat> covs;
    for (const BandData& b : data) covs.push_back(b.covariance);

    EstimateResult fused = fused_subspace_estimate(
        covs, q, k, scene.visibility, geometry, grid, spec.eps,
        spec.max_iters);
    add_db(h_db, fused.h_values);
    for (int u = 0; u < k; ++u) add_db(g_db[u], fused.g_values[u]);

    std::vector<CMat> pool;
    for (std::size_t i = spec.naive_include_dl ? 0 : 1; i < covs.size(); ++i)
      pool.push_back(covs[i]);
    CMat mean = CMat::Zero(geometry.num_antennas, geometry.num_antennas);
    for (const CMat& r : pool) mean += r;
    mean /= static_cast<double>(pool.size());
    const int nsig = std::min(q + k, geometry.num_antennas - 1);
    SubspacePair sub = evd_split(mean, nsig);
    Spectrum sp = music_spectrum(sub.noise_basis, geometry, grid);
    add_db(music_db, sp.values);
  }
  const double inv = 1.0 / spec.trials;
  for (double& v : music_db) v *= inv;
  for (double& v : h_db) v *= inv;
  for (auto& gu : g_db)
    for (double& v : gu) v *= inv;

  std::filesystem::create_directories(spec.output_dir);
  detail::write_text_file(spec.output_dir + "/music_spectrum.csv",
                          detail::spectrum_csv(sg.thetas, music_db));
  detail::write_text_file(spec.output_dir + "/h_spectrum.csv",
                          detail::spectrum_csv(sg.thetas, h_db));
  for (int u = 0; u < k; ++u)
    detail::write_text_file(
        spec.output_dir + "/g_spectrum_" + std::to_string(u + 1) + ".csv",
        detail::spectrum_csv(sg.thetas, g_db[u]));
}

// Iteration traces at one SNR: per-iteration angle estimates averaged over
// trials, traces padded with their final values so every iteration up to
// max_iters is defined. angle_index 0..q-1 are sorted targets, q..q+K-1
// the per-band users.
inline void dump_iteration_trace(const ExperimentSpec& spec, double snr_db,
                                 std::uint64_t seed) {
  spec.validate();
  const ArrayGeometry geometry(spec.num_antennas);
  const GridSpec grid = spec.grid();
  auto [scene, bands] = detail::scene_for(spec, snr_db);
  const int k = scene.num_users();
  const int q = scene.num_targets();

  std::vector<std::string> algos;
  for (const std::string& a : spec.algorithms)
    if (a != "naive") algos.push_back(a);

  const int iters = spec.max_iters;
  // sums[algo][iter][slot]
  std::vector<std::vector<std::vector<double>>> sums(
      algos.size(), std::vector<std::vector<double>>(
                        iters, std::vector<double>(q + k, 0.0)));

  for (int e = 0; e < spec.trials; ++e) {
    std::vector<BandData> data;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      RngStream rng = RngStream::derive(seed, e, b, 0x17ace5u);
      data.push_back(synthesize_band(scene, bands[b], geometry, rng));
    }
    std::vector<CMat> covs;
    for (const BandData& b : data) covs.push_back(b.covariance);
    for (std::size_t a = 0; a < algos.size(); ++a) {
      EstimateResult r = detail::run_algorithm(algos[a], spec, scene,
                                               geometry, covs, grid);
      for (int it = 0; it < iters; ++it) {
        const int src = std::min<int>(it, r.iterations - 1);
        for (int m = 0; m < q; ++m)
          sums[a][it][m] += r.target_trace[src][m];
        for (int u = 0; u < k; ++u)
          sums[a][it][q + u] += r.user_trace[src][u];
      }
    }
  }

  std::ostringstream out;
  out << "algorithm,iteration,angle_index,estimate_deg\n";
  for (std::size_t a = 0; a < algos.size(); ++a)
    for (int it = 0; it < iters; ++it)
      for (int s = 0; s < q + k; ++s)
        out << algos[a] << ',' << (it + 1) << ',' << s << ','
            << detail::fmt(rad2deg(sums[a][it][s] / spec.trials), "%.10g")
            << '\n';
  std::filesystem::create_directories(spec.output_dir);
  detail::write_text_file(spec.output_dir + "/iteration_trace.csv",
                          out.str());
}

}  // namespace aoafusion
