#pragma once

#include "hippoasym/mesher.hpp"
#include "hippoasym/volgrid.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hippoasym {

inline constexpr std::size_t kShapeFeatureCount = 9;

/// Stable names in reporting order.
const std::array<std::string, kShapeFeatureCount>& shape_feature_names();

struct ShapeFeatures {
  double max_diameter_mm = 0.0;
  double volume_mm3 = 0.0;
  double surface_area_mm2 = 0.0;  ///< exposed voxel faces
  double compactness = 0.0;       ///< mesh area^3 / voxel volume^2
  double mesh_size = 0.0;         ///< vertex count
  double f1_moment = 0.0;
  double f3_moment = 0.0;
  double circumsphere_ratio = 0.0;
  double curvature = 0.0;

  std::array<double, kShapeFeatureCount> values() const;
};

double max_diameter(const TriangleMesh& mesh);
double volume_voxel(const VoxelMask& mask);
double surface_area_voxel(const VoxelMask& mask);
double compactness(double area, double volume);
std::size_t mesh_size(const TriangleMesh& mesh);

/// Centroid of the occupied voxel centers.
Vec3 voxel_centroid(const VoxelMask& mask);

struct BoundaryMoments {
  double f1 = 0.0;
  double f3 = 0.0;
};

/// F1 = sqrt(M2)/m1 and F3 = M4^(1/4)/m1 of a distance sample; both 0 when m1 = 0.
BoundaryMoments boundary_moments_from_distances(std::span<const double> distances);
/// Distances from boundary voxel centers (at least one empty 6-neighbour) to
/// the voxel centroid.
BoundaryMoments boundary_moments(const VoxelMask& mask);

double circumsphere_ratio(const VoxelMask& mask, const TriangleMesh& mesh);

/// (d_C1 + d_C2) / d_12 with tip 1 the farthest point from the centroid and
/// tip 2 the farthest among points in the opposite half-space.
double curvature_from_points(const Vec3& centroid, std::span<const Vec3> points);
double curvature_feature(const VoxelMask& mask, const TriangleMesh& mesh);

ShapeFeatures compute_shape_features(const VoxelMask& mask, const TriangleMesh& mesh);

/// max(L/R, R/L); both values must be positive.
double asymmetry_ratio(double left, double right);

std::array<double, kShapeFeatureCount> asymmetry_ratios(const ShapeFeatures& left, const ShapeFeatures& right);

/// CSV: feature_name,left,right,ratio.
void save_shape_features_csv(const ShapeFeatures& left, const ShapeFeatures& right, const std::filesystem::path& path);
/// Reads back (left, right) from the CSV written above.
std::pair<ShapeFeatures, ShapeFeatures> load_shape_features_csv(const std::filesystem::path& path);

}  // namespace hippoasym
