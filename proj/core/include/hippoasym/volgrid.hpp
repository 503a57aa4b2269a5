#pragma once

#include "hippoasym/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hippoasym {

enum class Side { left, right, unsided };

std::string_view to_string(Side s);
Side side_from_string(std::string_view s);

/// Binary occupancy grid with physical spacing. Voxel (i,j,k) covers the box
/// origin + [i,i+1)*sx etc.; its center is origin + (i+0.5)*spacing. Data is
/// stored x fastest, then y, then z.
struct VoxelMask {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing_mm{1.0, 1.0, 1.0};
  Vec3 origin_mm{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> data;
  Side side = Side::unsided;

  VoxelMask() = default;
  VoxelMask(std::array<int, 3> d, Vec3 spacing, Vec3 origin, Side s = Side::unsided);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                static_cast<std::size_t>(dims[1]) * k);
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  /// Occupancy with out-of-grid voxels reading as empty.
  bool occupied(int i, int j, int k) const {
    return in_bounds(i, j, k) && data[index(i, j, k)] != 0;
  }
  void set(int i, int j, int k, bool v) { data[index(i, j, k)] = v ? 1 : 0; }

  Vec3 voxel_center(int i, int j, int k) const;
  std::size_t occupied_count() const;
  double voxel_volume() const { return spacing_mm.prod(); }

  bool operator==(const VoxelMask& o) const = default;
};

/// Throws PreconditionError unless dims/spacing/data satisfy the mask invariants.
void validate(const VoxelMask& mask);

/// Reads an MVOX header (`<name>.mvox.json`) and its raw payload.
VoxelMask load_mask(const std::filesystem::path& header_path);

/// Writes `header_path` and a sibling raw payload named after it
/// (`foo.mvox.json` -> `foo.raw`).
void save_mask(const VoxelMask& mask, const std::filesystem::path& header_path);

/// Reflects the grid across the x axis: voxel i maps to nx-1-i and the origin
/// is moved so that every voxel center x becomes -x.
VoxelMask mirror_x(const VoxelMask& mask);

/// Rotation from intrinsic Z-Y-X Euler angles (radians).
Mat3 euler_rotation(const Vec3& angles);

/// Center-inside digitization of a rotated ellipsoid centred at the origin.
VoxelMask gen_ellipsoid(const Vec3& semi_axes_mm, const Vec3& rotation, const Vec3& spacing_mm,
                        int margin_voxels = 2);

struct Asymmetry {
  double volume_scale = 1.0;
  double bump_amplitude_mm = 0.0;
  /// Body-frame direction of the bump centre (normalized internally).
  Vec3 bump_direction{0.0, 0.0, 1.0};
  /// Angular width (radians) of the Gaussian bump profile.
  double bump_width_rad = 0.5;
  /// Which side receives the deformation.
  Side deformed_side = Side::left;
};

struct SyntheticSubjectSpec {
  Vec3 base_semi_axes_mm{20.0, 8.0, 6.0};
  Vec3 rotation{0.0, 0.0, 0.0};
  /// Parabolic bend of the body-frame x axis, in mm at the long-axis tips.
  double bend_mm = 0.0;
  Asymmetry asymmetry;
  /// Independent per-side radial perturbation amplitude.
  double noise_amplitude_mm = 0.0;
  Vec3 spacing_mm{1.0, 1.0, 1.0};
  int margin_voxels = 2;
  std::uint64_t seed = 0;
};

void validate(const SyntheticSubjectSpec& spec);

/// Left and right masks. Both are digitized in the same canonical frame, then
/// the right one is reflected with mirror_x; with no asymmetry and no noise the
/// right mask is exactly mirror_x(left).
std::pair<VoxelMask, VoxelMask> gen_subject_pair(const SyntheticSubjectSpec& spec);

/// Keeps the largest 6-connected foreground component and fills every
/// background region that is not 26-connected to the grid boundary.
VoxelMask largest_component(const VoxelMask& mask);

/// Number of 6-connected foreground components.
int count_components(const VoxelMask& mask);

/// Number of background voxels not 26-connected to the grid boundary.
std::size_t count_cavity_voxels(const VoxelMask& mask);

}  // namespace hippoasym
