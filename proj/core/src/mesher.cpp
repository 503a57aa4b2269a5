#include "hippoasym/mesher.hpp"

#include "hippoasym/error.hpp"
#include "mc_table.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace hippoasym {

std::vector<double> TriangleMesh::shape_vector() const {
  std::vector<double> x;
  x.reserve(3 * vertices.size());
  for (const auto& v : vertices) x.insert(x.end(), {v.x(), v.y(), v.z()});
  return x;
}

namespace {

/// Separable Gaussian filter of the padded occupancy grid.
std::vector<double> filtered_occupancy(const VoxelMask& mask, double sigma) {
  const int px = mask.dims[0] + 2, py = mask.dims[1] + 2, pz = mask.dims[2] + 2;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= sum;

  const std::array<int, 3> dims{px, py, pz};
  auto idx = [&](int a, int b, int c) {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(px) * (b + static_cast<std::size_t>(py) * c);
  };
  std::vector<double> f(static_cast<std::size_t>(px) * py * pz), g(f.size());
  for (int c = 0; c < pz; ++c)
    for (int b = 0; b < py; ++b)
      for (int a = 0; a < px; ++a) f[idx(a, b, c)] = mask.occupied(a - 1, b - 1, c - 1) ? 1.0 : 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int c = 0; c < pz; ++c)
      for (int b = 0; b < py; ++b)
        for (int a = 0; a < px; ++a) {
          std::array<int, 3> q{a, b, c};
          const int centre = q[axis];
          double acc = 0.0;
          for (int t = -radius; t <= radius; ++t) {
            q[axis] = centre + t;
            if (q[axis] < 0 || q[axis] >= dims[axis]) continue;  // outside reads as empty
            acc += kernel[t + radius] * f[idx(q[0], q[1], q[2])];
          }
          g[idx(a, b, c)] = acc;
        }
    std::swap(f, g);
  }
  return f;
}

}  // namespace

TriangleMesh marching_cubes(const VoxelMask& mask, const MarchingCubesOptions& options) {
  validate(mask);
  if (mask.occupied_count() == 0) throw PreconditionError("empty mask");
  if (options.placement == VertexPlacement::filtered && !(options.sigma_voxels > 0.0))
    throw PreconditionError("filter width must be positive");
  if (!(options.min_edge_fraction >= 0.0 && options.min_edge_fraction < 0.5))
    throw PreconditionError("min_edge_fraction must lie in [0, 0.5)");

  // Padded grid: padded index p corresponds to mask index p-1.
  const int px = mask.dims[0] + 2, py = mask.dims[1] + 2, pz = mask.dims[2] + 2;
  auto occ = [&](int a, int b, int c) { return mask.occupied(a - 1, b - 1, c - 1); };
  auto pidx = [&](int a, int b, int c) {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(px) * (b + static_cast<std::size_t>(py) * c);
  };
  std::vector<double> field;
  if (options.placement == VertexPlacement::filtered) field = filtered_occupancy(mask, options.sigma_voxels);

  const auto& edges = detail::cube_edges();
  const auto& table = detail::mc_triangles();
  std::vector<int> edge_vertex(static_cast<std::size_t>(px) * py * pz * 3, -1);

  TriangleMesh mesh;
  auto vertex_on = [&](int i, int j, int k, int e) {
    const auto& ce = edges[e];
    const int a = i + (ce.a & 1), b = j + ((ce.a >> 1) & 1), c = k + ((ce.a >> 2) & 1);
    int& slot = edge_vertex[pidx(a, b, c) * 3 + ce.axis];
    if (slot < 0) {
      // Fraction of the way from the lower center to the upper one.
      double frac = 0.5;
      if (!field.empty()) {
        std::array<int, 3> up{a, b, c};
        ++up[ce.axis];
        const double f_lo = field[pidx(a, b, c)], f_hi = field[pidx(up[0], up[1], up[2])];
        const bool lo_occupied = occ(a, b, c);
        const double f_in = lo_occupied ? f_lo : f_hi, f_out = lo_occupied ? f_hi : f_lo;
        double t = f_in > f_out ? (f_in - 0.5) / (f_in - f_out) : 0.5;
        t = std::clamp(t, options.min_edge_fraction, 1.0 - options.min_edge_fraction);
        frac = lo_occupied ? t : 1.0 - t;
      }
      Vec3 idx(a - 0.5, b - 0.5, c - 0.5);
      idx[ce.axis] += frac;
      slot = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(mask.origin_mm + mask.spacing_mm.cwiseProduct(idx));
    }
    return slot;
  };

  for (int k = 0; k + 1 < pz; ++k)
    for (int j = 0; j + 1 < py; ++j)
      for (int i = 0; i + 1 < px; ++i) {
        int code = 0;
        for (int c = 0; c < 8; ++c)
          if (occ(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))) code |= 1 << c;
        if (code == 0 || code == 255) continue;
        for (const auto& tri : table[code])
          mesh.faces.push_back({vertex_on(i, j, k, tri[0]), vertex_on(i, j, k, tri[1]), vertex_on(i, j, k, tri[2])});
      }
  return mesh;
}

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b)), hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

Vec3 face_normal2(const TriangleMesh& mesh, std::size_t f) {
  const auto& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  return (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
}

/// Chains the (next -> after) pairs of the faces around one vertex into a
/// single cycle. Returns false when they do not form exactly one cycle.
bool chain_ring(const std::vector<std::pair<int, int>>& pairs, const std::vector<int>& face_ids,
                std::vector<int>& ring, std::vector<int>& ring_faces) {
  ring.clear();
  ring_faces.clear();
  if (pairs.empty()) return false;
  std::unordered_map<int, std::size_t> by_first;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (!by_first.emplace(pairs[i].first, i).second) return false;
  std::size_t cur = 0;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    ring.push_back(pairs[cur].first);
    ring_faces.push_back(face_ids[cur]);
    auto it = by_first.find(pairs[cur].second);
    if (it == by_first.end()) return false;
    cur = it->second;
    if (cur == 0 && n + 1 != pairs.size()) return false;
  }
  return cur == 0;
}

}  // namespace

bool MeshDiagnostics::ok() const {
  return manifold && oriented && euler == 2 && boundary_edges == 0 && nonmanifold_edges == 0 &&
         nonmanifold_vertices == 0 && isolated_vertices == 0 && duplicate_vertices == 0 && degenerate_faces == 0 &&
         signed_volume > 0.0;
}

std::string MeshDiagnostics::summary() const {
  std::ostringstream os;
  os << "manifold=" << manifold << " oriented=" << oriented << " euler=" << euler
     << " boundary_edges=" << boundary_edges << " nonmanifold_edges=" << nonmanifold_edges
     << " nonmanifold_vertices=" << nonmanifold_vertices << " isolated_vertices=" << isolated_vertices
     << " duplicate_vertices=" << duplicate_vertices << " degenerate_faces=" << degenerate_faces
     << " signed_volume=" << signed_volume;
  return os.str();
}

MeshDiagnostics validate_mesh(const TriangleMesh& mesh) {
  MeshDiagnostics d;
  const std::size_t nv = mesh.vertices.size();

  // Per undirected edge: count of (lo->hi) and (hi->lo) traversals.
  std::unordered_map<std::uint64_t, std::pair<int, int>> edge_use;
  edge_use.reserve(mesh.faces.size() * 2);
  std::vector<int> valence(nv, 0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    bool bad_index = false;
    for (int v : t)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) bad_index = true;
    if (bad_index || t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      ++d.degenerate_faces;
      continue;
    }
    if (face_normal2(mesh, f).norm() <= 0.0) ++d.degenerate_faces;
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      auto& use = edge_use[edge_key(a, b)];
      (a < b ? use.first : use.second) += 1;
      ++valence[a];
    }
  }
  bool oriented = true;
  for (const auto& [key, use] : edge_use) {
    const int total = use.first + use.second;
    if (total == 1) ++d.boundary_edges;
    if (total > 2) ++d.nonmanifold_edges;
    if (use.first != 1 || use.second != 1) oriented = false;
  }
  for (int v : valence)
    if (v == 0) ++d.isolated_vertices;

  // Vertex fans.
  std::vector<std::vector<std::pair<int, int>>> pairs(nv);
  std::vector<std::vector<int>> fids(nv);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    bool in_range = true;
    for (int v : t)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) in_range = false;
    if (!in_range) continue;
    for (int e = 0; e < 3; ++e) {
      pairs[t[e]].emplace_back(t[(e + 1) % 3], t[(e + 2) % 3]);
      fids[t[e]].push_back(static_cast<int>(f));
    }
  }
  std::vector<int> ring, ring_faces;
  for (std::size_t v = 0; v < nv; ++v)
    if (!pairs[v].empty() && !chain_ring(pairs[v], fids[v], ring, ring_faces)) ++d.nonmanifold_vertices;

  // Duplicate positions: sweep along x.
  std::vector<int> order(nv);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return mesh.vertices[a].x() < mesh.vertices[b].x(); });
  constexpr double kWeld = 1e-9;
  std::vector<bool> dup(nv, false);
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t j = i + 1; j < nv && mesh.vertices[order[j]].x() - mesh.vertices[order[i]].x() < kWeld; ++j)
      if ((mesh.vertices[order[j]] - mesh.vertices[order[i]]).norm() < kWeld) dup[order[j]] = true;
  d.duplicate_vertices = static_cast<std::size_t>(std::count(dup.begin(), dup.end(), true));

  d.manifold = d.boundary_edges == 0 && d.nonmanifold_edges == 0 && d.nonmanifold_vertices == 0;
  d.oriented = oriented;
  d.euler = static_cast<long long>(nv) - static_cast<long long>(edge_use.size()) +
            static_cast<long long>(mesh.faces.size());
  if (d.boundary_edges == 0 && d.degenerate_faces == 0 && nv > 0) {
    Vec3 ref = Vec3::Zero();
    for (const auto& v : mesh.vertices) ref += v;
    ref /= static_cast<double>(nv);
    double six_v = 0.0;
    for (const auto& t : mesh.faces)
      six_v += (mesh.vertices[t[0]] - ref).dot((mesh.vertices[t[1]] - ref).cross(mesh.vertices[t[2]] - ref));
    d.signed_volume = six_v / 6.0;
  }
  return d;
}

void require_valid(const TriangleMesh& mesh) {
  const auto d = validate_mesh(mesh);
  if (!d.ok()) throw PreconditionError("invalid mesh: " + d.summary());
}

double face_area(const TriangleMesh& mesh, std::size_t f) { return 0.5 * face_normal2(mesh, f).norm(); }

double mesh_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) a += face_area(mesh, f);
  return a;
}

Vec3 mesh_centroid(const TriangleMesh& mesh) {
  Vec3 c = Vec3::Zero();
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const double a = face_area(mesh, f);
    c += a * (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    total += a;
  }
  if (total <= 0.0) throw PreconditionError("mesh has zero area");
  return c / total;
}

double mesh_signed_volume(const TriangleMesh& mesh) {
  const auto d = validate_mesh(mesh);
  if (d.boundary_edges > 0 || d.nonmanifold_edges > 0 || !d.oriented)
    throw PreconditionError("volume undefined for open or inconsistently oriented mesh");
  return d.signed_volume;
}

MeshTopology build_topology(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<std::vector<std::pair<int, int>>> pairs(nv);
  std::vector<std::vector<int>> fids(nv);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    for (int e = 0; e < 3; ++e) {
      pairs[t[e]].emplace_back(t[(e + 1) % 3], t[(e + 2) % 3]);
      fids[t[e]].push_back(static_cast<int>(f));
    }
  }
  MeshTopology topo;
  topo.ring.resize(nv);
  topo.ring_faces.resize(nv);
  for (std::size_t v = 0; v < nv; ++v)
    if (!chain_ring(pairs[v], fids[v], topo.ring[v], topo.ring_faces[v]))
      throw PreconditionError("vertex " + std::to_string(v) + " has no single closed one-ring");
  return topo;
}

TriangleMesh make_cube_mesh(const Vec3& lo, double size) {
  TriangleMesh m;
  for (int c = 0; c < 8; ++c) m.vertices.push_back(lo + size * Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1));
  // Two triangles per face, counter-clockwise from outside.
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriangleMesh make_octahedron(double radius) {
  TriangleMesh m;
  m.vertices = {{radius, 0, 0}, {-radius, 0, 0}, {0, radius, 0}, {0, -radius, 0}, {0, 0, radius}, {0, 0, -radius}};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return m;
}

TriangleMesh make_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int id = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  for (const auto& v : mesh.vertices) std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const auto& t : mesh.faces) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  const bool bad = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || bad) throw Error("I/O failure writing " + path.string());
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mesh " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::array<double, 3> xyz{};
      for (auto& c : xyz) {
        std::string tok;
        if (!(ls >> tok)) fail("vertex needs three coordinates");
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), c);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("bad coordinate '" + tok + "'");
      }
      mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (tag == "f") {
      std::array<int, 3> idx{};
      for (auto& i : idx) {
        std::string tok;
        if (!(ls >> tok)) fail("face needs three indices");
        const std::string head = tok.substr(0, tok.find('/'));
        const auto res = std::from_chars(head.data(), head.data() + head.size(), i);
        if (res.ec != std::errc() || i < 1) fail("bad face index '" + tok + "'");
        i -= 1;
      }
      std::string extra;
      if (ls >> extra) fail("only triangular faces are supported");
      mesh.faces.push_back(idx);
    }
  }
  for (const auto& t : mesh.faces)
    for (int i : t)
      if (static_cast<std::size_t>(i) >= mesh.vertices.size()) throw FormatError(path.string() + ": face index out of range");
  return mesh;
}

}  // namespace hippoasym
