#include "mc_table.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>

namespace hippoasym::detail {

namespace {

Eigen::Vector3d corner_pos(int c) { return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; }

std::array<CubeEdge, 12> make_edges() {
  std::array<CubeEdge, 12> edges{};
  int n = 0;
  for (int a = 0; a < 8; ++a)
    for (int axis = 0; axis < 3; ++axis)
      if (!(a & (1 << axis))) edges[n++] = {a, a | (1 << axis), axis};
  return edges;
}

int edge_id(int a, int b) {
  const auto& edges = cube_edges();
  if (a > b) std::swap(a, b);
  for (int e = 0; e < 12; ++e)
    if (edges[e].a == a && edges[e].b == b) return e;
  return -1;
}

/// The six cell faces with corners in counter-clockwise order seen from outside.
std::array<std::array<int, 4>, 6> make_faces() {
  std::array<std::array<int, 4>, 6> faces{};
  int n = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int hi = 0; hi < 2; ++hi) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int base = hi ? (1 << axis) : 0;
      std::array<int, 4> f{base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)};
      Eigen::Vector3d normal = Eigen::Vector3d::Zero();
      normal[axis] = hi ? 1.0 : -1.0;
      const Eigen::Vector3d p0 = corner_pos(f[0]), p1 = corner_pos(f[1]), p2 = corner_pos(f[2]);
      if ((p1 - p0).cross(p2 - p1).dot(normal) < 0) std::swap(f[1], f[3]);
      faces[n++] = f;
    }
  }
  return faces;
}

std::array<std::vector<std::array<int, 3>>, 256> make_table() {
  const auto faces = make_faces();
  std::array<std::vector<std::array<int, 3>>, 256> table;
  for (int code = 0; code < 256; ++code) {
    auto inside = [code](int c) { return (code >> c) & 1; };
    // next[e]: the edge reached from e along the boundary of the occupied
    // region on the cell surface (occupied side on the left seen from outside).
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& f : faces) {
      std::array<int, 4> ring_edge{};
      int crossings = 0;
      for (int k = 0; k < 4; ++k) {
        ring_edge[k] = edge_id(f[k], f[(k + 1) % 4]);
        if (inside(f[k]) != inside(f[(k + 1) % 4])) ++crossings;
      }
      for (int k = 0; k < 4; ++k) {
        if (!(inside(f[k]) && !inside(f[(k + 1) % 4]))) continue;
        int target = -1;
        if (crossings == 4) {
          target = (k + 3) % 4;  // isolate the occupied corner
        } else {
          for (int j = 1; j < 4; ++j) {
            const int m = (k + j) % 4;
            if (!inside(f[m]) && inside(f[(m + 1) % 4])) {
              target = m;
              break;
            }
          }
        }
        next[ring_edge[k]] = ring_edge[target];
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.push_back(e);
      }
      // The loop's right-hand normal points into the occupied region; reverse.
      for (std::size_t i = 1; i + 1 < loop.size(); ++i) table[code].push_back({loop[0], loop[i + 1], loop[i]});
    }
  }
  return table;
}

}  // namespace

const std::array<CubeEdge, 12>& cube_edges() {
  static const std::array<CubeEdge, 12> edges = make_edges();
  return edges;
}

const std::array<std::vector<std::array<int, 3>>, 256>& mc_triangles() {
  static const auto table = make_table();
  return table;
}

}  // namespace hippoasym::detail
