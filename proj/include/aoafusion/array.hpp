#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "aoafusion/angle.hpp"
#include "aoafusion/common.hpp"

namespace aoafusion {

// Uniform linear array: N antennas spaced `spacing` wavelengths apart
// (half wavelength by default).
struct ArrayGeometry {
  int num_antennas;
  double spacing = 0.5;

  ArrayGeometry(int n, double d = 0.5) : num_antennas(n), spacing(d) {
    if (n < 2) throw ConfigError("array needs at least 2 antennas");
    if (!(d > 0)) throw ConfigError("antenna spacing must be positive");
  }
};

// Array response to a unit plane wave from angle theta. Phase convention:
// entry n = exp(+j * 2*pi * spacing * n * sin(theta)), n = 0..N-1.
// Any fixed convention yields identical spectra as long as every consumer
// uses the same one; this sign is used throughout the library.
inline CVec steering_vector(const ArrayGeometry& g, double theta_rad) {
  CVec a(g.num_antennas);
  const double phase = 2.0 * kPi * g.spacing * std::sin(theta_rad);
  for (int n = 0; n < g.num_antennas; ++n)
    a(n) = std::polar(1.0, phase * n);
  return a;
}

inline CVec steering_vector(const ArrayGeometry& g, Angle theta) {
  return steering_vector(g, theta.rad());
}

// A matrix of steering vectors, one column per angle.
struct Manifold {
  CMat matrix;                // N x d
  std::vector<double> angles; // radians, column order

  int cols() const { return static_cast<int>(matrix.cols()); }
  bool empty() const { return matrix.cols() == 0; }
};

inline Manifold manifold(const ArrayGeometry& g,
                         const std::vector<double>& angles_rad) {
  const int d = static_cast<int>(angles_rad.size());
  if (d > g.num_antennas)
    throw RankOverflow("manifold with " + std::to_string(d) +
                       " columns exceeds " +
                       std::to_string(g.num_antennas) + " antennas");
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::abs(angles_rad[i] - angles_rad[j]) < 1e-12)
        throw DuplicateAngle("manifold angles coincide within 1e-12 rad");
  Manifold m;
  m.matrix.resize(g.num_antennas, d);
  m.angles = angles_rad;
  for (int j = 0; j < d; ++j)
    m.matrix.col(j) = steering_vector(g, angles_rad[j]);
  return m;
}

inline Manifold manifold(const ArrayGeometry& g,
                         const std::vector<Angle>& angles) {
  return manifold(g, to_radians(angles));
}

// Moore-Penrose pseudo-inverse; singular values below tol*sigma_max are
// treated as zero.
inline CMat pinv(const CMat& m, double tol = 1e-12) {
  if (m.rows() == 0 || m.cols() == 0) return CMat::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = tol * s(0);
  RVec inv = RVec::Zero(s.size());
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

namespace detail {
// Orthonormal basis of the column space, with a condition check on the
// implied Gram matrix. Empty manifold -> N x 0 basis.
inline CMat column_space_basis(const Manifold& m, int num_antennas) {
  if (m.empty()) return CMat::Zero(num_antennas, 0);
  Eigen::JacobiSVD<CMat> svd(m.matrix, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  // Gram condition = (sigma_max / sigma_min)^2.
  if (smin <= 0 || (s(0) / smin) * (s(0) / smin) > 1e12)
    throw IllConditioned("manifold Gram matrix condition exceeds 1e12");
  return svd.matrixU();
}
}  // namespace detail

// Orthogonal projector onto the manifold column space,
// P = A (A^H A)^-1 A^H. Convention: projector of the empty manifold is 0.
inline CMat projector(const Manifold& m, int num_antennas) {
  CMat u = detail::column_space_basis(m, num_antennas);
  return u * u.adjoint();
}

inline CMat projector(const Manifold& m) {
  if (m.empty())
    throw ConfigError("projector of an empty manifold needs the array size");
  return projector(m, static_cast<int>(m.matrix.rows()));
}

// Complement projector P_perp = I - P; annihilates the manifold columns.
// Convention: orth_projector of the empty manifold is the identity.
inline CMat orth_projector(const Manifold& m, int num_antennas) {
  return CMat::Identity(num_antennas, num_antennas) -
         projector(m, num_antennas);
}

inline CMat orth_projector(const Manifold& m) {
  if (m.empty())
    throw ConfigError(
        "orth_projector of an empty manifold needs the array size");
  return orth_projector(m, static_cast<int>(m.matrix.rows()));
}

// Signal/noise eigendecomposition of a Hermitian covariance.
struct SubspacePair {
  CMat signal_basis;   // N x d, orthonormal columns
  CMat noise_basis;    // N x (N-d), orthonormal columns
  RVec signal_eigenvalues;  // nonincreasing
  RVec noise_eigenvalues;   // nonincreasing
};

// Eigendecompose R (symmetrized first) and split the eigenvectors into the
// d dominant (signal) and N-d remaining (noise) columns.
inline SubspacePair evd_split(const CMat& r, int signal_dim) {
  const int n = static_cast<int>(r.rows());
  if (r.cols() != n) throw Error("evd_split requires a square matrix");
  if (signal_dim < 0 || signal_dim >= n)
    throw Error("evd_split requires 0 <= signal_dim < N");
  const double rnorm = r.norm();
  if ((r - r.adjoint()).norm() > 1e-8 * std::max(rnorm, 1e-300))
    throw NotHermitian("matrix is not Hermitian");
  CMat h = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
  // Eigen sorts ascending; flip to nonincreasing.
  SubspacePair out;
  out.signal_basis.resize(n, signal_dim);
  out.noise_basis.resize(n, n - signal_dim);
  out.signal_eigenvalues.resize(signal_dim);
  out.noise_eigenvalues.resize(n - signal_dim);
  for (int i = 0; i < n; ++i) {
    const int src = n - 1 - i;
    if (i < signal_dim) {
      out.signal_basis.col(i) = es.eigenvectors().col(src);
      out.signal_eigenvalues(i) = es.eigenvalues()(src);
    } else {
      out.noise_basis.col(i - signal_dim) = es.eigenvectors().col(src);
      out.noise_eigenvalues(i - signal_dim) = es.eigenvalues()(src);
    }
  }
  return out;
}

struct DominantBasis {
  CMat basis;               // N x r, orthonormal
  bool degenerate_gap = false;  // sigma_r / sigma_{r+1} < 1 + 1e-8
};

// The r strongest left singular vectors of a (generally non-Hermitian)
// matrix. The degenerate flag marks a vanishing gap at the split, in which
// case the returned subspace is not unique.
inline DominantBasis top_left_singular(const CMat& m, int r) {
  const int n = static_cast<int>(m.rows());
  if (r < 1 || r > n) throw Error("top_left_singular requires 1 <= r <= N");
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  DominantBasis out;
  out.basis = svd.matrixU().leftCols(r);
  if (r < s.size()) {
    const double lo = s(r);
    const double hi = s(r - 1);
    out.degenerate_gap = (hi <= 0) || (hi / std::max(lo, 1e-300) < 1.0 + 1e-8);
  }
  return out;
}

}  // namespace aoafusion
