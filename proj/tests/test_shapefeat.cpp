#include "hippoasym/error.hpp"
#include "hippoasym/shapefeat.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hippoasym;
using hippoasym::testing::TempDir;

namespace {

constexpr double kPi = std::numbers::pi;

TriangleMesh points_only(std::vector<Vec3> pts) {
  TriangleMesh m;
  m.vertices = std::move(pts);
  return m;
}

VoxelMask voxels(std::array<int, 3> dims, Vec3 spacing, std::initializer_list<std::array<int, 3>> on) {
  VoxelMask m(dims, spacing, Vec3::Zero());
  for (const auto& v : on) m.set(v[0], v[1], v[2], true);
  return m;
}

struct Fixture {
  VoxelMask mask;
  TriangleMesh mesh;
};

Fixture make(const VoxelMask& m) { return {m, marching_cubes(m)}; }

const Fixture& ball10() {
  static const Fixture f = make(hippoasym::testing::ball_mask(10.0));
  return f;
}

double brute_diameter(const std::vector<Vec3>& v) {
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) d = std::max(d, (v[i] - v[j]).norm());
  return d;
}

}  // namespace

TEST(MaxDiameter, ThreeFourFive) {
  EXPECT_DOUBLE_EQ(max_diameter(points_only({Vec3(0, 0, 0), Vec3(3, 4, 0)})), 5.0);
  EXPECT_THROW(max_diameter(points_only({Vec3(0, 0, 0)})), PreconditionError);
}

TEST(MaxDiameter, BallAndBruteForce) {
  EXPECT_NEAR(max_diameter(ball10().mesh) / 20.0, 1.0, 0.02);
  EXPECT_DOUBLE_EQ(max_diameter(ball10().mesh), brute_diameter(ball10().mesh.vertices));
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> pts(300);
    for (auto& p : pts) p = Vec3(3 * g(rng), g(rng), 0.5 * g(rng));
    EXPECT_DOUBLE_EQ(max_diameter(points_only(pts)), brute_diameter(pts));
  }
}

TEST(MaxDiameter, RotationInvariant) {
  TriangleMesh m = marching_cubes(gen_ellipsoid(Vec3(12, 6, 4), Vec3::Zero(), Vec3::Ones()));
  const double d0 = max_diameter(m);
  const Mat3 r = euler_rotation(Vec3(0.4, 1.3, -2.0));
  for (auto& v : m.vertices) v = r * v;
  EXPECT_NEAR(max_diameter(m), d0, 1e-12 * d0);
}

TEST(VolumeVoxel, Examples) {
  EXPECT_DOUBLE_EQ(volume_voxel(voxels({1, 1, 1}, Vec3(2, 0.5, 0.5), {{0, 0, 0}})), 0.5);
  EXPECT_NEAR(volume_voxel(ball10().mask) / (4.0 / 3.0 * kPi * 1000.0), 1.0, 0.02);
  VoxelMask wide = ball10().mask;
  wide.spacing_mm.x() *= 2.0;
  EXPECT_DOUBLE_EQ(volume_voxel(wide), 2.0 * volume_voxel(ball10().mask));
}

TEST(SurfaceAreaVoxel, Examples) {
  EXPECT_DOUBLE_EQ(surface_area_voxel(voxels({1, 1, 1}, Vec3::Ones(), {{0, 0, 0}})), 6.0);
  EXPECT_DOUBLE_EQ(surface_area_voxel(voxels({2, 1, 1}, Vec3::Ones(), {{0, 0, 0}, {1, 0, 0}})), 10.0);
  EXPECT_DOUBLE_EQ(surface_area_voxel(voxels({1, 1, 1}, Vec3(1, 2, 3), {{0, 0, 0}})), 2 * (6 + 3 + 2));
  // Staircase area of a digitized ball: 1.5 x 4 pi r^2.
  EXPECT_NEAR(surface_area_voxel(ball10().mask) / (1.5 * 4 * kPi * 100.0), 1.0, 0.05);
}

TEST(Compactness, Examples) {
  const double r = 3.7;
  EXPECT_NEAR(compactness(4 * kPi * r * r, 4.0 / 3.0 * kPi * r * r * r), 36 * kPi, 1e-10);
  EXPECT_NEAR(36 * kPi, 113.097, 1e-3);
  EXPECT_DOUBLE_EQ(compactness(6.0, 1.0), 216.0);
  EXPECT_NEAR(compactness(6.0 * 4.0, 8.0), 216.0, 1e-12);
  EXPECT_THROW(compactness(6.0, 0.0), PreconditionError);
}

TEST(MeshSize, CountsVertices) {
  const TriangleMesh cube = make_cube_mesh();
  EXPECT_EQ(mesh_size(cube), 8u);
  EXPECT_EQ(mesh_size(ball10().mesh), ball10().mesh.vertices.size());
  const TriangleMesh fine = marching_cubes(hippoasym::testing::ball_mask(10.0, 0.5));
  EXPECT_GT(mesh_size(fine), mesh_size(ball10().mesh));
}

TEST(BoundaryMoments, FromDistances) {
  const BoundaryMoments shell = boundary_moments_from_distances(std::vector<double>{4, 4, 4, 4});
  EXPECT_DOUBLE_EQ(shell.f1, 0.0);
  EXPECT_DOUBLE_EQ(shell.f3, 0.0);
  const BoundaryMoments two = boundary_moments_from_distances(std::vector<double>{1, 3});
  EXPECT_DOUBLE_EQ(two.f1, 0.5);
  EXPECT_DOUBLE_EQ(two.f3, 0.5);
  const BoundaryMoments zero = boundary_moments_from_distances(std::vector<double>{0.0});
  EXPECT_EQ(zero.f1, 0.0);
  EXPECT_EQ(zero.f3, 0.0);
}

TEST(BoundaryMoments, ScaleInvariantOnMasks) {
  const VoxelMask a = gen_ellipsoid(Vec3(8, 5, 4), Vec3::Zero(), Vec3::Ones());
  VoxelMask b = a;
  b.spacing_mm *= 2.5;
  const BoundaryMoments ma = boundary_moments(a), mb = boundary_moments(b);
  EXPECT_NEAR(ma.f1, mb.f1, 1e-12);
  EXPECT_NEAR(ma.f3, mb.f3, 1e-12);
  EXPECT_GT(ma.f1, 0.0);
  EXPECT_EQ(boundary_moments(voxels({1, 1, 1}, Vec3::Ones(), {{0, 0, 0}})).f1, 0.0);
}

TEST(CircumsphereRatio, BallAndEllipsoid) {
  EXPECT_NEAR(circumsphere_ratio(ball10().mask, ball10().mesh), 1.0, 0.05);
  const Fixture e = make(gen_ellipsoid(Vec3(20, 10, 5), Vec3::Zero(), Vec3::Ones()));
  EXPECT_NEAR(circumsphere_ratio(e.mask, e.mesh) / 8.0, 1.0, 0.05);
}

TEST(CircumsphereRatio, ElongationIncreases) {
  const Fixture a = make(gen_ellipsoid(Vec3(10, 8, 8), Vec3::Zero(), Vec3::Ones()));
  const Fixture b = make(gen_ellipsoid(Vec3(14, 8, 8), Vec3::Zero(), Vec3::Ones()));
  EXPECT_GT(circumsphere_ratio(b.mask, b.mesh), circumsphere_ratio(a.mask, a.mesh));
}

TEST(Curvature, HandArithmetic) {
  const Vec3 c = Vec3::Zero();
  EXPECT_DOUBLE_EQ(curvature_from_points(c, std::vector<Vec3>{Vec3(5, 0, 0), Vec3(-3, 0, 0), Vec3(1, 1, 0)}), 1.0);
  EXPECT_NEAR(curvature_from_points(c, std::vector<Vec3>{Vec3(5, 0, 0), Vec3(-1, -3, 0), Vec3(1, 0.5, 0)}),
              (5.0 + std::sqrt(10.0)) / std::sqrt(45.0), 1e-12);
  // Perpendicular points are not in the opposite half-space.
  EXPECT_THROW(curvature_from_points(c, std::vector<Vec3>{Vec3(5, 0, 0), Vec3(0, -3, 0), Vec3(1, 1, 0)}),
               NumericalError);
  EXPECT_THROW(curvature_from_points(c, std::vector<Vec3>{Vec3(5, 0, 0)}), PreconditionError);
}

TEST(Curvature, BallAndBentShape) {
  // On a ball every vertex is a tip; the opposite one can sit near 90 deg.
  const double ball = curvature_feature(ball10().mask, ball10().mesh);
  EXPECT_GE(ball, 1.0);
  EXPECT_LE(ball, std::sqrt(2.0) + 0.05);
  const Fixture rod = make(gen_ellipsoid(Vec3(20, 6, 6), Vec3::Zero(), Vec3::Ones()));
  EXPECT_NEAR(curvature_feature(rod.mask, rod.mesh), 1.0, 0.02);
  SyntheticSubjectSpec straight;
  SyntheticSubjectSpec bent = straight;
  bent.bend_mm = 6.0;
  const VoxelMask s = gen_subject_pair(straight).first, b = gen_subject_pair(bent).first;
  EXPECT_GT(curvature_feature(b, marching_cubes(b)), curvature_feature(s, marching_cubes(s)));
}

TEST(AsymmetryRatio, Examples) {
  EXPECT_DOUBLE_EQ(asymmetry_ratio(2, 4), 2.0);
  EXPECT_DOUBLE_EQ(asymmetry_ratio(4, 2), 2.0);
  EXPECT_DOUBLE_EQ(asymmetry_ratio(3, 3), 1.0);
  EXPECT_THROW(asymmetry_ratio(0, 5), PreconditionError);
  EXPECT_THROW(asymmetry_ratio(5, -1), PreconditionError);
}

TEST(ShapeFeatures, SymmetricPairRatiosNearOne) {
  SyntheticSubjectSpec spec;
  spec.rotation = Vec3(0.1, 0.05, -0.1);
  const auto [l, r] = gen_subject_pair(spec);
  const VoxelMask rm = mirror_x(r);
  const ShapeFeatures fl = compute_shape_features(l, marching_cubes(l));
  const ShapeFeatures fr = compute_shape_features(rm, marching_cubes(rm));
  for (double v : asymmetry_ratios(fl, fr)) EXPECT_NEAR(v, 1.0, 0.01);
}

TEST(ShapeFeatures, VolumeScaleRatio) {
  SyntheticSubjectSpec spec;
  spec.asymmetry.volume_scale = 0.7;
  const auto [l, r] = gen_subject_pair(spec);
  const ShapeFeatures fl = compute_shape_features(l, marching_cubes(l));
  const ShapeFeatures fr = compute_shape_features(r, marching_cubes(r));
  // Oracle: measured voxel counts of the generated pair.
  const double measured = static_cast<double>(r.occupied_count()) / static_cast<double>(l.occupied_count());
  EXPECT_NEAR(asymmetry_ratios(fl, fr)[1], measured, 1e-12);
  EXPECT_NEAR(measured, 1.0 / 0.7, 0.04 / 0.7);
}

TEST(ShapeFeatures, NamesAndCsv) {
  EXPECT_EQ(shape_feature_names()[0], "max_diameter");
  EXPECT_EQ(shape_feature_names()[4], "mesh_size");
  EXPECT_EQ(shape_feature_names()[8], "curvature");
  TempDir dir("shape");
  const ShapeFeatures f = compute_shape_features(ball10().mask, ball10().mesh);
  ShapeFeatures g = f;
  g.volume_mm3 *= 1.1;
  save_shape_features_csv(f, g, dir / "s.csv");
  const auto [a, b] = load_shape_features_csv(dir / "s.csv");
  EXPECT_EQ(a.values(), f.values());
  EXPECT_EQ(b.values(), g.values());
}
