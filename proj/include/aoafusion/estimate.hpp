#pragma once

#include <vector>

#include "aoafusion/common.hpp"

namespace aoafusion {

// Output of every angle estimator. Angles are radians; target estimates are
// sorted ascending, user estimates stay in band order. The per-iteration
// traces back the harness' iteration dumps.
struct EstimateResult {
  std::vector<double> target_angles;
  std::vector<double> user_angles;
  int iterations = 0;
  std::vector<double> objective_trace;
  bool converged = false;
  bool insufficient_peaks = false;  // some target slot had no spectral peak
  bool flat_spectrum = false;       // a 1-D search saw a flat criterion

  std::vector<std::vector<double>> target_trace;  // per iteration, sorted
  std::vector<std::vector<double>> user_trace;    // per iteration, band order

  // Final sampled spectra (coarse grid), kept for the spectrum dumps.
  std::vector<double> h_values;                // fused estimator only
  std::vector<std::vector<double>> g_values;   // fused estimator, per user
};

}  // namespace aoafusion
