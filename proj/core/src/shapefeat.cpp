#include "hippoasym/shapefeat.hpp"

#include "hippoasym/error.hpp"
#include "hippoasym/geometry.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace hippoasym {

namespace {

void require_nonempty(const VoxelMask& mask) {
  validate(mask);
  if (mask.occupied_count() == 0) throw PreconditionError("empty mask");
}

ShapeFeatures from_values(const std::array<double, kShapeFeatureCount>& v) {
  ShapeFeatures f;
  f.max_diameter_mm = v[0];
  f.volume_mm3 = v[1];
  f.surface_area_mm2 = v[2];
  f.compactness = v[3];
  f.mesh_size = v[4];
  f.f1_moment = v[5];
  f.f3_moment = v[6];
  f.circumsphere_ratio = v[7];
  f.curvature = v[8];
  return f;
}

}  // namespace

const std::array<std::string, kShapeFeatureCount>& shape_feature_names() {
  static const std::array<std::string, kShapeFeatureCount> names{
      "max_diameter", "volume",    "surface_area",       "compactness", "mesh_size",
      "f1_moment",    "f3_moment", "circumsphere_ratio", "curvature"};
  return names;
}

std::array<double, kShapeFeatureCount> ShapeFeatures::values() const {
  return {max_diameter_mm, volume_mm3, surface_area_mm2, compactness, mesh_size,
          f1_moment,       f3_moment,  circumsphere_ratio, curvature};
}

double max_diameter(const TriangleMesh& mesh) {
  if (mesh.vertex_count() < 2) throw PreconditionError("diameter needs at least 2 vertices");
  const auto [i, j] = farthest_pair(mesh.vertices);
  return (mesh.vertices[i] - mesh.vertices[j]).norm();
}

double volume_voxel(const VoxelMask& mask) {
  require_nonempty(mask);
  return static_cast<double>(mask.occupied_count()) * mask.voxel_volume();
}

double surface_area_voxel(const VoxelMask& mask) {
  require_nonempty(mask);
  const Vec3& s = mask.spacing_mm;
  const double face[3] = {s.y() * s.z(), s.x() * s.z(), s.x() * s.y()};
  double area = 0.0;
  for (int k = 0; k < mask.dims[2]; ++k)
    for (int j = 0; j < mask.dims[1]; ++j)
      for (int i = 0; i < mask.dims[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        area += face[0] * ((!mask.occupied(i - 1, j, k)) + (!mask.occupied(i + 1, j, k)));
        area += face[1] * ((!mask.occupied(i, j - 1, k)) + (!mask.occupied(i, j + 1, k)));
        area += face[2] * ((!mask.occupied(i, j, k - 1)) + (!mask.occupied(i, j, k + 1)));
      }
  return area;
}

double compactness(double area, double volume) {
  if (!(volume > 0.0)) throw PreconditionError("compactness needs a positive volume");
  if (!(area > 0.0)) throw PreconditionError("compactness needs a positive area");
  return area * area * area / (volume * volume);
}

std::size_t mesh_size(const TriangleMesh& mesh) { return mesh.vertex_count(); }

Vec3 voxel_centroid(const VoxelMask& mask) {
  require_nonempty(mask);
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (int k = 0; k < mask.dims[2]; ++k)
    for (int j = 0; j < mask.dims[1]; ++j)
      for (int i = 0; i < mask.dims[0]; ++i)
        if (mask.occupied(i, j, k)) {
          sum += mask.voxel_center(i, j, k);
          ++n;
        }
  return sum / static_cast<double>(n);
}

BoundaryMoments boundary_moments_from_distances(std::span<const double> distances) {
  if (distances.empty()) throw PreconditionError("boundary moments need at least one distance");
  const double n = static_cast<double>(distances.size());
  double m1 = 0.0;
  for (double z : distances) m1 += z;
  m1 /= n;
  if (!(m1 > 0.0)) return {};
  double m2 = 0.0, m4 = 0.0;
  for (double z : distances) {
    const double d = z - m1;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  return {std::sqrt(m2) / m1, std::pow(m4, 0.25) / m1};
}

BoundaryMoments boundary_moments(const VoxelMask& mask) {
  const Vec3 c = voxel_centroid(mask);
  std::vector<double> z;
  for (int k = 0; k < mask.dims[2]; ++k)
    for (int j = 0; j < mask.dims[1]; ++j)
      for (int i = 0; i < mask.dims[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        const bool boundary = !mask.occupied(i - 1, j, k) || !mask.occupied(i + 1, j, k) ||
                              !mask.occupied(i, j - 1, k) || !mask.occupied(i, j + 1, k) ||
                              !mask.occupied(i, j, k - 1) || !mask.occupied(i, j, k + 1);
        if (boundary) z.push_back((mask.voxel_center(i, j, k) - c).norm());
      }
  return boundary_moments_from_distances(z);
}

double circumsphere_ratio(const VoxelMask& mask, const TriangleMesh& mesh) {
  if (mesh.vertex_count() == 0) throw PreconditionError("circumsphere needs mesh vertices");
  const Vec3 c = voxel_centroid(mask);
  double r = 0.0;
  for (const auto& v : mesh.vertices) r = std::max(r, (v - c).norm());
  const double volume = volume_voxel(mask);
  return 4.0 / 3.0 * std::numbers::pi * r * r * r / volume;
}

double curvature_from_points(const Vec3& centroid, std::span<const Vec3> points) {
  if (points.size() < 2) throw PreconditionError("curvature needs at least 2 points");
  std::size_t t1 = 0;
  double d1 = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - centroid).norm();
    if (d > d1) {
      d1 = d;
      t1 = i;
    }
  }
  const Vec3 axis = points[t1] - centroid;
  std::size_t t2 = points.size();
  double d2 = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 r = points[i] - centroid;
    if (!(r.dot(axis) < 0.0)) continue;
    const double d = r.norm();
    if (d > d2) {
      d2 = d;
      t2 = i;
    }
  }
  if (t2 == points.size()) throw NumericalError("curvature: no point opposite to the first tip");
  const double d12 = (points[t1] - points[t2]).norm();
  return (d1 + d2) / d12;
}

double curvature_feature(const VoxelMask& mask, const TriangleMesh& mesh) {
  return curvature_from_points(voxel_centroid(mask), mesh.vertices);
}

ShapeFeatures compute_shape_features(const VoxelMask& mask, const TriangleMesh& mesh) {
  ShapeFeatures f;
  f.max_diameter_mm = max_diameter(mesh);
  f.volume_mm3 = volume_voxel(mask);
  f.surface_area_mm2 = surface_area_voxel(mask);
  f.compactness = compactness(mesh_area(mesh), f.volume_mm3);
  f.mesh_size = static_cast<double>(mesh_size(mesh));
  const BoundaryMoments bm = boundary_moments(mask);
  f.f1_moment = bm.f1;
  f.f3_moment = bm.f3;
  f.circumsphere_ratio = circumsphere_ratio(mask, mesh);
  f.curvature = curvature_feature(mask, mesh);
  return f;
}

double asymmetry_ratio(double left, double right) {
  if (!(left > 0.0) || !(right > 0.0)) throw PreconditionError("asymmetry ratio needs positive values");
  return std::max(left / right, right / left);
}

std::array<double, kShapeFeatureCount> asymmetry_ratios(const ShapeFeatures& left, const ShapeFeatures& right) {
  const auto l = left.values();
  const auto r = right.values();
  std::array<double, kShapeFeatureCount> out{};
  for (std::size_t i = 0; i < kShapeFeatureCount; ++i) {
    // Boundary moments vanish on perfectly uniform shells; equal zeros are symmetric.
    if (l[i] == 0.0 && r[i] == 0.0) {
      out[i] = 1.0;
      continue;
    }
    try {
      out[i] = asymmetry_ratio(l[i], r[i]);
    } catch (const PreconditionError&) {
      throw PreconditionError("asymmetry ratio of " + shape_feature_names()[i] + " needs positive values");
    }
  }
  return out;
}

void save_shape_features_csv(const ShapeFeatures& left, const ShapeFeatures& right, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "feature_name,left,right,ratio\n";
  const auto l = left.values();
  const auto r = right.values();
  const auto ratio = asymmetry_ratios(left, right);
  for (std::size_t i = 0; i < kShapeFeatureCount; ++i)
    out << shape_feature_names()[i] << ',' << l[i] << ',' << r[i] << ',' << ratio[i] << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::pair<ShapeFeatures, ShapeFeatures> load_shape_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "feature_name,left,right,ratio")
    throw FormatError(path.string() + ": expected header feature_name,left,right,ratio");
  std::array<double, kShapeFeatureCount> l{}, r{};
  std::size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= kShapeFeatureCount) throw FormatError(path.string() + ": too many rows");
    std::istringstream ss(line);
    std::string name, a, b, c;
    std::getline(ss, name, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c);
    if (name != shape_feature_names()[i])
      throw FormatError(path.string() + ": expected feature " + shape_feature_names()[i] + ", got " + name);
    try {
      l[i] = std::stod(a);
      r[i] = std::stod(b);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad number in row " + name);
    }
    ++i;
  }
  if (i != kShapeFeatureCount) throw FormatError(path.string() + ": expected 9 feature rows");
  return {from_values(l), from_values(r)};
}

}  // namespace hippoasym
