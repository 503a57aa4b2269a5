#pragma once

#include <array>
#include <vector>

namespace hippoasym::detail {

/// Corner c of a unit cell sits at (c&1, (c>>1)&1, (c>>2)&1).
struct CubeEdge {
  int a, b;   ///< corners, a < b
  int axis;   ///< 0,1,2
};

const std::array<CubeEdge, 12>& cube_edges();

/// For each of the 256 corner-occupancy codes (bit c set = corner c occupied),
/// the triangles as triples of cube-edge ids, oriented with normals pointing
/// from occupied toward empty corners.
const std::array<std::vector<std::array<int, 3>>, 256>& mc_triangles();

}  // namespace hippoasym::detail
