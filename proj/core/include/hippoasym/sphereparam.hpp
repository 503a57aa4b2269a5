#pragma once

#include "hippoasym/mesher.hpp"
#include "hippoasym/types.hpp"

#include <filesystem>
#include <vector>

namespace hippoasym {

/// Inclination theta in [0, pi] from +z, azimuth phi in [0, 2 pi).
struct SphericalCoord {
  double theta = 0.0;
  double phi = 0.0;
};

SphericalCoord to_spherical(const Vec3& unit);
Vec3 from_spherical(const SphericalCoord& c);

struct DistortionSample {
  double worst = 0.0;  ///< max over faces of max(d, 1/d)
  double mean = 0.0;   ///< unweighted face mean of max(d, 1/d)
};

/// Per-vertex unit vectors on S^2 plus the distortion history of the
/// smoothing steps that were accepted.
struct SphericalParam {
  std::vector<Vec3> points;
  std::vector<DistortionSample> iteration_log;

  std::vector<SphericalCoord> angles() const;
};

struct ParamConfig {
  int max_outer_iterations = 50;
  int local_smooth_passes = 1;
  /// Stop once an outer iteration improves neither worst nor mean distortion
  /// by this relative amount.
  double distortion_tolerance = 1e-3;
  /// Bound on max(l, 1/l) for the normalized edge-length ratio l; a move may
  /// not push an edge beyond it.
  double length_distortion_cap = 10.0;
  /// Weight of the local shape term that pulls a vertex toward the affine
  /// reproduction of its mesh one-ring; 0 gives pure area equalization.
  double smoothness_weight = 30.0;
};

void validate(const ParamConfig& config);

struct AreaDistortion {
  /// (spherical area / 4 pi) / (mesh area / total mesh area), per face.
  std::vector<double> per_face;
  DistortionSample summary;
};

/// Signed area of the spherical triangle (a, b, c); positive when
/// counter-clockwise seen from outside the sphere.
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Number of faces whose spherical image is not positively oriented.
std::size_t count_flipped(const TriangleMesh& mesh, const SphericalParam& param);

/// Sum of signed spherical face areas (4 pi for a bijective map).
double total_spherical_area(const TriangleMesh& mesh, const SphericalParam& param);

AreaDistortion area_distortion(const TriangleMesh& mesh, const SphericalParam& param);

/// Farthest-pair poles, harmonic latitude (uniform weights) remapped to equal
/// mesh-area bands, harmonic longitude across a pole-to-pole date line.
SphericalParam initial_param(const TriangleMesh& mesh);

/// One Gauss-Seidel sweep of worst-first per-vertex linear least-squares
/// moves that equalize area distortion within each vertex star.
SphericalParam local_smooth(const TriangleMesh& mesh, const SphericalParam& param, const ParamConfig& config = {});

/// One global density-equalizing step: a Poisson solve over the sphere mesh
/// drives every vertex away from compressed regions at once.
SphericalParam global_smooth(const TriangleMesh& mesh, const SphericalParam& param, const ParamConfig& config = {});

/// initial_param followed by alternating local and global smoothing.
SphericalParam parametrize(const TriangleMesh& mesh, const ParamConfig& config = {});

/// CSV: vertex_index,theta,phi with 17 significant digits.
void save_param_csv(const std::vector<SphericalCoord>& coords, const std::filesystem::path& path);
std::vector<SphericalCoord> load_param_csv(const std::filesystem::path& path);

}  // namespace hippoasym
