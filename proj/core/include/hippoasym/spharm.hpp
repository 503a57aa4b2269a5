#pragma once

#include "hippoasym/mesher.hpp"
#include "hippoasym/sphereparam.hpp"
#include "hippoasym/types.hpp"

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

namespace hippoasym {

using Complex = std::complex<double>;
using CVec3 = Eigen::Vector3cd;

/// Flat index of (l, m) in lexicographic order: l^2 + l + m.
constexpr int lm_index(int l, int m) { return l * l + l + m; }
constexpr int lm_count(int l_max) { return (l_max + 1) * (l_max + 1); }

/// Associated Legendre function P_l^m(x) with the Condon-Shortley phase.
double legendre_plm(int l, int m, double x);

/// Orthonormal complex spherical harmonic Y_l^m(theta, phi).
Complex ylm(int l, int m, double theta, double phi);

/// Fully normalized P_l^m(cos theta) sqrt((2l+1)(l-m)!/(4 pi (l+m)!)) for all
/// 0 <= m <= l <= l_max, stored at lm_index(l, m).
std::vector<double> normalized_legendre_table(int l_max, double x);

struct SpharmCoeffs {
  int l_max = 0;
  /// C_l^m at lm_index(l, m); one complex entry per coordinate channel (mm).
  std::vector<CVec3> coeffs;

  CVec3& at(int l, int m) { return coeffs[lm_index(l, m)]; }
  const CVec3& at(int l, int m) const { return coeffs[lm_index(l, m)]; }

  static SpharmCoeffs zeros(int l_max);
};

/// Worst relative violation of C_l^{-m} = (-1)^m conj(C_l^m) over entries
/// with norm above 1e-9.
double conjugate_symmetry_residual(const SpharmCoeffs& c);

struct FitOptions {
  /// Weight each vertex row by the square root of its one-ring mesh area.
  bool area_weighted = false;
};

/// Least-squares SPHARM coefficients of the vertex coordinates sampled at
/// their parameter points. Solved with column-pivoted QR on a real basis.
SpharmCoeffs fit(const TriangleMesh& mesh, const SphericalParam& param, int l_max, const FitOptions& options = {});

/// Same fit from raw samples (points[i] observed at points on the sphere params[i]).
SpharmCoeffs fit_samples(const std::vector<Vec3>& points, const std::vector<Vec3>& params, int l_max,
                         const std::vector<double>& weights = {});

/// Real part of the truncated expansion at (theta, phi).
Vec3 reconstruct(const SpharmCoeffs& coeffs, double theta, double phi);
std::vector<Vec3> reconstruct(const SpharmCoeffs& coeffs, const std::vector<Vec3>& params);

/// Root-mean-square vertex distance between mesh and reconstruction.
double reconstruction_rms(const TriangleMesh& mesh, const SphericalParam& param, const SpharmCoeffs& coeffs);

/// Zeroes degree 0 and rotates every coefficient 3-vector so the degree-1
/// ellipsoid has its shortest axis along x and its longest along z.
SpharmCoeffs align(const SpharmCoeffs& coeffs);

/// Real 3x3 map A with degree-1 surface v(u) = A u for unit u.
Mat3 degree1_matrix(const SpharmCoeffs& coeffs);

enum class FeatureVariant { per_lm, per_degree };
std::string to_string(FeatureVariant v);
FeatureVariant feature_variant_from_string(const std::string& s);

struct SpharmFeatureVector {
  FeatureVariant variant = FeatureVariant::per_lm;
  int l_max = 0;
  std::vector<double> values;

  /// Stable names: spharm_l{l}_m{m} or spharm_l{l}.
  std::vector<std::string> names() const;
};

SpharmFeatureVector power_features(const SpharmCoeffs& coeffs, FeatureVariant variant = FeatureVariant::per_lm);

enum class AsymmetryMode { log_ratio, log_diff };
std::string to_string(AsymmetryMode m);
AsymmetryMode asymmetry_mode_from_string(const std::string& s);

/// Per-entry asymmetry of left against right. Unusable log-ratio entries
/// (degenerate denominator only) are NaN.
std::vector<double> asymmetry_features(const SpharmFeatureVector& left, const SpharmFeatureVector& right,
                                       AsymmetryMode mode = AsymmetryMode::log_ratio);

/// CSV: l,m,re_x,im_x,re_y,im_y,re_z,im_z.
void save_coeffs_csv(const SpharmCoeffs& coeffs, const std::filesystem::path& path);
SpharmCoeffs load_coeffs_csv(const std::filesystem::path& path);

/// CSV: index,l,m,value (m empty for the per-degree variant).
void save_features_csv(const SpharmFeatureVector& features, const std::filesystem::path& path);
SpharmFeatureVector load_features_csv(const std::filesystem::path& path);

}  // namespace hippoasym
