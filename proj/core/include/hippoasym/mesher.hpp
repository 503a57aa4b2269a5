#pragma once

#include "hippoasym/types.hpp"
#include "hippoasym/volgrid.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace hippoasym {

/// Closed triangle surface in mm. Faces are counter-clockwise seen from
/// outside. The flattened vertex list is the shape vector X = [x1,y1,z1,...].
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  /// The 3n shape vector.
  std::vector<double> shape_vector() const;
};

struct MeshDiagnostics {
  bool manifold = false;        ///< every edge shared by exactly two faces, single-fan vertices
  bool oriented = false;        ///< every edge traversed once in each direction
  long long euler = 0;          ///< V - E + F
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;
  std::size_t nonmanifold_vertices = 0;
  std::size_t isolated_vertices = 0;
  std::size_t duplicate_vertices = 0;
  std::size_t degenerate_faces = 0;  ///< zero area or repeated index
  double signed_volume = 0.0;

  /// Closed, oriented genus-0 surface with outward (positive-volume) orientation.
  bool ok() const;
  std::string summary() const;
};

enum class VertexPlacement {
  /// Linear interpolation of the binary field: every vertex at its edge midpoint.
  midpoint,
  /// 0.5 crossing of a Gaussian-filtered occupancy field along the same edge.
  filtered,
};

struct MarchingCubesOptions {
  VertexPlacement placement = VertexPlacement::filtered;
  /// Filter width in voxels along each axis (filtered placement only).
  double sigma_voxels = 0.8;
  /// Crossing parameter is clamped to [min_edge_fraction, 1 - min_edge_fraction].
  double min_edge_fraction = 0.1;
};

/// Marching cubes between occupied and empty voxel centers. The grid is padded
/// internally by one empty layer. Ambiguous faces separate the occupied
/// corners, so the surface is the boundary of the 6-connected foreground.
/// Connectivity depends only on the binary mask; the placement option only
/// moves each vertex along its crossing edge.
TriangleMesh marching_cubes(const VoxelMask& mask, const MarchingCubesOptions& options = {});

MeshDiagnostics validate_mesh(const TriangleMesh& mesh);

/// Throws PreconditionError with the diagnostics summary unless validate_mesh(mesh).ok().
void require_valid(const TriangleMesh& mesh);

double face_area(const TriangleMesh& mesh, std::size_t f);
double mesh_area(const TriangleMesh& mesh);
/// Area-weighted average of triangle centroids.
Vec3 mesh_centroid(const TriangleMesh& mesh);
/// Divergence-theorem volume. Throws PreconditionError on an open mesh.
double mesh_signed_volume(const TriangleMesh& mesh);

/// Per-vertex neighbourhood with a counter-clockwise ordered one-ring.
struct MeshTopology {
  /// ring[v][i] is the i-th neighbour of v; face ring_faces[v][i] is
  /// (v, ring[v][i], ring[v][i+1]).
  std::vector<std::vector<int>> ring;
  std::vector<std::vector<int>> ring_faces;
};

/// Requires a closed manifold, oriented mesh.
MeshTopology build_topology(const TriangleMesh& mesh);

/// The 12-triangle axis-aligned cube [lo, lo+size]^3.
TriangleMesh make_cube_mesh(const Vec3& lo = Vec3::Zero(), double size = 1.0);
/// Regular octahedron inscribed in the sphere of given radius.
TriangleMesh make_octahedron(double radius = 1.0);
/// Icosphere with `subdivisions` 4:1 refinements, vertices on the sphere.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0);

/// ASCII OBJ subset: `v x y z` then `f i j k` (1-based), 17 significant digits.
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace hippoasym
