#include "hippoasym/sphereparam.hpp"

#include "hippoasym/error.hpp"
#include "hippoasym/geometry.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hippoasym {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxHalvings = 20;

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double badness(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) return std::numeric_limits<double>::infinity();
  return std::max(d, 1.0 / d);
}

double log_sq(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) return std::numeric_limits<double>::infinity();
  const double l = std::log(d);
  return l * l;
}

Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 axis = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(axis).normalized();
}

// Translation part of the least-squares affine map taking src onto dst.
bool affine_target(const std::vector<Eigen::Vector2d>& src, const std::vector<Eigen::Vector2d>& dst,
                   Eigen::Vector2d& target) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 2> atb = Eigen::Matrix<double, 3, 2>::Zero();
  for (std::size_t j = 0; j < src.size(); ++j) {
    const Eigen::Vector3d row(src[j].x(), src[j].y(), 1.0);
    ata += row * row.transpose();
    atb += row * dst[j].transpose();
  }
  Eigen::LDLT<Eigen::Matrix3d> ldlt(ata);
  if (ldlt.info() != Eigen::Success || !(std::abs(ata.determinant()) > 1e-300)) return false;
  const Eigen::Matrix<double, 3, 2> x = ldlt.solve(atb);
  target = x.row(2).transpose();
  return target.allFinite();
}

double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

// Everything that depends on the mesh only, shared by the smoothing steps.
struct Context {
  const TriangleMesh& mesh;
  MeshTopology topo;
  std::vector<double> mesh_frac;  // face area / total area
  std::vector<std::vector<int>> vertex_faces;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::vector<int>> vertex_edges;
  std::vector<double> mesh_len;  // edge length / mean edge length
  // One-ring of each vertex projected onto its mesh tangent plane, in ring order.
  std::vector<std::vector<Eigen::Vector2d>> flat_ring;

  explicit Context(const TriangleMesh& m) : mesh(m), topo(build_topology(m)) {
    const std::size_t nf = m.face_count();
    const std::size_t nv = m.vertex_count();
    mesh_frac.resize(nf);
    double total = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      mesh_frac[f] = face_area(m, f);
      if (!(mesh_frac[f] > 0.0)) throw PreconditionError("zero-area face " + std::to_string(f));
      total += mesh_frac[f];
    }
    for (auto& a : mesh_frac) a /= total;
    vertex_faces.resize(nv);
    for (std::size_t f = 0; f < nf; ++f)
      for (int v : m.faces[f]) vertex_faces[v].push_back(static_cast<int>(f));
    vertex_edges.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      for (int w : topo.ring[v]) {
        if (static_cast<int>(v) < w) {
          vertex_edges[v].push_back(static_cast<int>(edges.size()));
          vertex_edges[w].push_back(static_cast<int>(edges.size()));
          edges.push_back({static_cast<int>(v), w});
        }
      }
    }
    mesh_len.resize(edges.size());
    double sum = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      mesh_len[e] = (m.vertices[edges[e][0]] - m.vertices[edges[e][1]]).norm();
      sum += mesh_len[e];
    }
    const double mean = sum / static_cast<double>(edges.size());
    for (auto& l : mesh_len) l /= mean;

    std::vector<Vec3> normal(nv, Vec3::Zero());
    for (const auto& t : m.faces) {
      const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
      for (int v : t) normal[v] += n;
    }
    flat_ring.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      const Vec3 n = normal[v].normalized();
      const Vec3 t1 = any_perpendicular(n);
      const Vec3 t2 = n.cross(t1);
      for (int w : topo.ring[v]) {
        const Vec3 d = m.vertices[w] - m.vertices[v];
        flat_ring[v].emplace_back(d.dot(t1), d.dot(t2));
      }
    }
  }

  double face_distortion(const std::vector<Vec3>& p, int f) const {
    const auto& t = mesh.faces[f];
    const double s = spherical_triangle_area(p[t[0]], p[t[1]], p[t[2]]);
    return (s / (4.0 * kPi)) / mesh_frac[f];
  }

  double mean_sphere_edge(const std::vector<Vec3>& p) const {
    double sum = 0.0;
    for (const auto& e : edges) sum += angle_between(p[e[0]], p[e[1]]);
    return sum / static_cast<double>(edges.size());
  }

  double length_badness(const std::vector<Vec3>& p, int e, double mean_sphere) const {
    const double l = angle_between(p[edges[e][0]], p[edges[e][1]]) / mean_sphere;
    return badness(l / mesh_len[e]);
  }

  double energy(const std::vector<Vec3>& p) const {
    double sum = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f)
      sum += mesh_frac[f] * log_sq(face_distortion(p, static_cast<int>(f)));
    return sum;
  }

  DistortionSample summary(const std::vector<Vec3>& p) const {
    DistortionSample s;
    double sum = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
      const double b = badness(face_distortion(p, static_cast<int>(f)));
      s.worst = std::max(s.worst, b);
      sum += b;
    }
    s.mean = sum / static_cast<double>(mesh.face_count());
    return s;
  }
};

void require_param(const TriangleMesh& mesh, const SphericalParam& param) {
  if (param.points.size() != mesh.vertex_count())
    throw PreconditionError("parameterization has " + std::to_string(param.points.size()) + " points for " +
                            std::to_string(mesh.vertex_count()) + " vertices");
}

// Uniform-weight Laplacian on the vertices with known[v] == false; known
// values move to the right-hand side. offset(i, j) is added to x_j in the
// equation of vertex i.
template <typename Offset>
Eigen::VectorXd solve_harmonic(const MeshTopology& topo, const std::vector<char>& known, const std::vector<double>& value,
                               const std::vector<char>& excluded, Offset offset, const char* what) {
  const int n = static_cast<int>(topo.ring.size());
  std::vector<int> unknown_index(n, -1);
  int count = 0;
  for (int v = 0; v < n; ++v)
    if (!known[v] && !excluded[v]) unknown_index[v] = count++;
  std::vector<Triplet> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
  for (int v = 0; v < n; ++v) {
    const int i = unknown_index[v];
    if (i < 0) continue;
    double diag = 0.0;
    for (int w : topo.ring[v]) {
      if (excluded[w]) continue;
      diag += 1.0;
      rhs[i] += offset(v, w);
      if (unknown_index[w] >= 0)
        trips.emplace_back(i, unknown_index[w], -1.0);
      else
        rhs[i] += value[w];
    }
    trips.emplace_back(i, i, diag);
  }
  SparseMat a(count, count);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<SparseMat> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError(std::string(what) + " Laplace system is singular");
  Eigen::VectorXd x = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !x.allFinite())
    throw NumericalError(std::string(what) + " Laplace solve failed");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) full[v] = unknown_index[v] >= 0 ? x[unknown_index[v]] : value[v];
  return full;
}

std::vector<double> vertex_areas(const TriangleMesh& mesh) {
  std::vector<double> a(mesh.vertex_count(), 0.0);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const double s = face_area(mesh, f) / 3.0;
    for (int v : mesh.faces[f]) a[v] += s;
  }
  return a;
}

// Gauss-Seidel spherical Laplacian relaxation of the vertices touching
// flipped faces. Poles stay fixed.
void repair_flips(const TriangleMesh& mesh, const MeshTopology& topo, std::vector<Vec3>& p, int north, int south) {
  for (int round = 0; round < 200; ++round) {
    std::vector<char> mark(p.size(), 0);
    bool any = false;
    for (const auto& t : mesh.faces) {
      if (spherical_triangle_area(p[t[0]], p[t[1]], p[t[2]]) > 0.0) continue;
      any = true;
      for (int v : t) mark[v] = 1;
    }
    if (!any) return;
    // Grow by one ring so the relaxation has room to untangle.
    std::vector<char> grown = mark;
    for (std::size_t v = 0; v < p.size(); ++v)
      if (mark[v])
        for (int w : topo.ring[v]) grown[w] = 1;
    for (int sweep = 0; sweep < 5; ++sweep) {
      for (std::size_t v = 0; v < p.size(); ++v) {
        if (!grown[v] || static_cast<int>(v) == north || static_cast<int>(v) == south) continue;
        Vec3 sum = Vec3::Zero();
        for (int w : topo.ring[v]) sum += p[w];
        if (sum.norm() > 1e-12) p[v] = sum.normalized();
      }
    }
  }
}

}  // namespace

SphericalCoord to_spherical(const Vec3& unit) {
  SphericalCoord c;
  c.theta = std::atan2(std::hypot(unit.x(), unit.y()), unit.z());
  double phi = std::atan2(unit.y(), unit.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi >= 2.0 * kPi) phi = 0.0;
  c.phi = phi;
  return c;
}

Vec3 from_spherical(const SphericalCoord& c) {
  const double st = std::sin(c.theta);
  return Vec3(st * std::cos(c.phi), st * std::sin(c.phi), std::cos(c.theta));
}

std::vector<SphericalCoord> SphericalParam::angles() const {
  std::vector<SphericalCoord> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(to_spherical(p));
  return out;
}

void validate(const ParamConfig& config) {
  if (config.max_outer_iterations <= 0) throw PreconditionError("max_outer_iterations must be positive");
  if (config.local_smooth_passes <= 0) throw PreconditionError("local_smooth_passes must be positive");
  if (!(config.distortion_tolerance > 0.0)) throw PreconditionError("distortion_tolerance must be positive");
  if (!(config.length_distortion_cap > 1.0))
    throw PreconditionError("length_distortion_cap must be greater than 1");
  if (!(config.smoothness_weight >= 0.0)) throw PreconditionError("smoothness_weight must be non-negative");
}

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

std::size_t count_flipped(const TriangleMesh& mesh, const SphericalParam& param) {
  require_param(mesh, param);
  std::size_t n = 0;
  for (const auto& t : mesh.faces)
    if (!(spherical_triangle_area(param.points[t[0]], param.points[t[1]], param.points[t[2]]) > 0.0)) ++n;
  return n;
}

double total_spherical_area(const TriangleMesh& mesh, const SphericalParam& param) {
  require_param(mesh, param);
  double sum = 0.0;
  for (const auto& t : mesh.faces)
    sum += spherical_triangle_area(param.points[t[0]], param.points[t[1]], param.points[t[2]]);
  return sum;
}

AreaDistortion area_distortion(const TriangleMesh& mesh, const SphericalParam& param) {
  require_param(mesh, param);
  std::vector<double> area(mesh.face_count());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    area[f] = face_area(mesh, f);
    if (!(area[f] > 0.0)) throw PreconditionError("zero-area face " + std::to_string(f));
    total += area[f];
  }
  AreaDistortion out;
  out.per_face.resize(mesh.face_count());
  double sum = 0.0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces[f];
    const double s = spherical_triangle_area(param.points[t[0]], param.points[t[1]], param.points[t[2]]);
    out.per_face[f] = (s / (4.0 * kPi)) / (area[f] / total);
    const double b = badness(out.per_face[f]);
    out.summary.worst = std::max(out.summary.worst, b);
    sum += b;
  }
  out.summary.mean = sum / static_cast<double>(mesh.face_count());
  return out;
}

SphericalParam initial_param(const TriangleMesh& mesh) {
  require_valid(mesh);
  const MeshTopology topo = build_topology(mesh);
  const int n = static_cast<int>(mesh.vertex_count());
  const auto [north, south] = farthest_pair(mesh.vertices);

  // Latitude: harmonic with poles pinned.
  std::vector<char> known(n, 0), none(n, 0);
  std::vector<double> value(n, 0.0);
  known[north] = known[south] = 1;
  value[north] = 0.0;
  value[south] = kPi;
  const Eigen::VectorXd theta =
      solve_harmonic(topo, known, value, none, [](int, int) { return 0.0; }, "latitude");

  // Equal-area bands: theta' = acos(1 - 2F) with F the cumulative area fraction.
  const std::vector<double> va = vertex_areas(mesh);
  const double total_area = std::accumulate(va.begin(), va.end(), 0.0);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return theta[a] < theta[b]; });
  std::vector<double> lat(n);
  double cum = 0.0;
  for (int v : order) {
    const double frac = std::clamp((cum + 0.5 * va[v]) / total_area, 0.0, 1.0);
    lat[v] = std::acos(1.0 - 2.0 * frac);
    cum += va[v];
  }
  lat[north] = 0.0;
  lat[south] = kPi;

  // Date line: steepest ascent of the harmonic latitude.
  std::vector<int> path{north};
  std::vector<int> path_pos(n, -1);
  path_pos[north] = 0;
  while (path.back() != south) {
    const int v = path.back();
    int best = -1;
    for (int w : topo.ring[v])
      if (theta[w] > theta[v] && (best < 0 || theta[w] > theta[best] || (theta[w] == theta[best] && w < best)))
        best = w;
    if (best < 0 || path_pos[best] >= 0) throw NumericalError("latitude field has a local maximum; degenerate mesh");
    path_pos[best] = static_cast<int>(path.size());
    path.push_back(best);
  }
  if (path.size() < 3) throw NumericalError("poles are adjacent; mesh too coarse");

  // West neighbours of each interior date-line vertex: those passed going
  // counter-clockwise from the previous to the next path vertex.
  std::vector<std::vector<int>> west(n);
  std::vector<char> is_west_of_path(n, 0);
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    const int d = path[k];
    const auto& ring = topo.ring[d];
    const int deg = static_cast<int>(ring.size());
    const int ip = static_cast<int>(std::find(ring.begin(), ring.end(), path[k - 1]) - ring.begin());
    const int in = static_cast<int>(std::find(ring.begin(), ring.end(), path[k + 1]) - ring.begin());
    for (int i = (ip + 1) % deg; i != in; i = (i + 1) % deg) west[d].push_back(ring[i]);
  }
  auto contains = [](const std::vector<int>& list, int x) { return std::find(list.begin(), list.end(), x) != list.end(); };
  auto offset = [&](int i, int j) {
    if (path_pos[i] > 0 && contains(west[i], j)) return -2.0 * kPi;
    if (path_pos[j] > 0 && contains(west[j], i)) return 2.0 * kPi;
    return 0.0;
  };
  std::vector<char> poles(n, 0);
  poles[north] = poles[south] = 1;
  std::fill(known.begin(), known.end(), 0);
  known[path[1]] = 1;
  value.assign(n, 0.0);
  const Eigen::VectorXd phi = solve_harmonic(topo, known, value, poles, offset, "longitude");

  SphericalParam param;
  param.points.resize(n);
  for (int v = 0; v < n; ++v) {
    double ph = std::fmod(phi[v], 2.0 * kPi);
    if (ph < 0.0) ph += 2.0 * kPi;
    param.points[v] = from_spherical({lat[v], ph});
  }
  param.points[north] = Vec3::UnitZ();
  param.points[south] = -Vec3::UnitZ();

  if (count_flipped(mesh, param) > 0) repair_flips(mesh, topo, param.points, north, south);
  const std::size_t flipped = count_flipped(mesh, param);
  if (flipped > 0)
    throw NumericalError("initial parameterization has " + std::to_string(flipped) + " flipped triangles");
  return param;
}

SphericalParam local_smooth(const TriangleMesh& mesh, const SphericalParam& param, const ParamConfig& config) {
  validate(config);
  require_param(mesh, param);
  const Context ctx(mesh);
  SphericalParam out = param;
  auto& p = out.points;
  const int n = static_cast<int>(p.size());
  const double mean_edge = ctx.mean_sphere_edge(p);

  // Worst-first order by the worst incident face.
  std::vector<double> vbad(n, 0.0);
  for (int v = 0; v < n; ++v)
    for (int f : ctx.vertex_faces[v]) vbad[v] = std::max(vbad[v], badness(ctx.face_distortion(p, f)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vbad[a] > vbad[b]; });

  std::size_t moved = 0;
  for (int v : order) {
    const auto& ring = ctx.topo.ring[v];
    const auto& star = ctx.topo.ring_faces[v];
    const int k = static_cast<int>(ring.size());
    const Vec3 p0 = p[v];
    const Vec3 e1 = any_perpendicular(p0);
    const Vec3 e2 = p0.cross(e1);

    // Gnomonic projection of the ring onto the tangent plane at p0.
    std::vector<Eigen::Vector2d> q(k);
    bool ok = true;
    for (int j = 0; j < k; ++j) {
      const double c = p[ring[j]].dot(p0);
      if (c < 1e-6) {
        ok = false;
        break;
      }
      const Vec3 g = p[ring[j]] / c;
      q[j] = Eigen::Vector2d(g.dot(e1), g.dot(e2));
    }
    if (!ok) continue;

    double star_frac = 0.0, poly = 0.0;
    for (int j = 0; j < k; ++j) {
      star_frac += ctx.mesh_frac[star[j]];
      poly += 0.5 * (q[j].x() * q[(j + 1) % k].y() - q[(j + 1) % k].x() * q[j].y());
    }
    if (!(poly > 0.0)) continue;

    // Shape term: where the affine map fitted from the flattened mesh ring to
    // the projected ring sends the vertex.
    Eigen::Vector2d shape_target = Eigen::Vector2d::Zero();
    double ring_scale = 0.0;
    for (const auto& qj : q) ring_scale += qj.norm();
    ring_scale /= k;
    const double mu = config.smoothness_weight;
    const bool use_shape = mu > 0.0 && affine_target(ctx.flat_ring[v], q, shape_target);
    const double shape_w = use_shape ? mu / (ring_scale * ring_scale) : 0.0;

    // Planar area of triangle (x, q_j, q_j+1) is affine in x; match each to
    // its share of the star.
    Eigen::Matrix2d ata = shape_w * Eigen::Matrix2d::Identity();
    Eigen::Vector2d atb = shape_w * shape_target;
    for (int j = 0; j < k; ++j) {
      const Eigen::Vector2d& a = q[j];
      const Eigen::Vector2d& b = q[(j + 1) % k];
      const double target = poly * ctx.mesh_frac[star[j]] / star_frac;
      const double c = 0.5 * (a.x() * b.y() - b.x() * a.y());
      const Eigen::Vector2d d = a - b;
      const Eigen::Vector2d row = Eigen::Vector2d(0.5 * d.y(), -0.5 * d.x()) / target;
      const double rhs = (target - c) / target;
      ata += row * row.transpose();
      atb += row * rhs;
    }
    if (std::abs(ata.determinant()) < 1e-300) continue;
    const Eigen::Vector2d x = ata.ldlt().solve(atb);
    if (!x.allFinite()) continue;
    const Vec3 step = x.x() * e1 + x.y() * e2;

    // Local objective: star area energy plus the shape term, both evaluated
    // on the sphere.
    auto local_energy = [&](const Vec3& pv, double& worst, bool& flip) {
      worst = 0.0;
      flip = false;
      double e = 0.0;
      for (int f : ctx.vertex_faces[v]) {
        const double d = ctx.face_distortion(p, f);
        if (!(d > 0.0)) {
          flip = true;
          return 0.0;
        }
        worst = std::max(worst, badness(d));
        e += ctx.mesh_frac[f] / star_frac * log_sq(d);
      }
      if (shape_w > 0.0) {
        const Vec3 g = pv / pv.dot(p0);
        e += shape_w * (Eigen::Vector2d(g.dot(e1), g.dot(e2)) - shape_target).squaredNorm();
      }
      return e;
    };
    double worst_old = 0.0;
    bool flip_old = false;
    const double energy_old = local_energy(p0, worst_old, flip_old);
    std::vector<double> len_old(ctx.vertex_edges[v].size());
    for (std::size_t i = 0; i < len_old.size(); ++i) len_old[i] = ctx.length_badness(p, ctx.vertex_edges[v][i], mean_edge);

    double alpha = 1.0;
    for (int h = 0; h <= kMaxHalvings; ++h, alpha *= 0.5) {
      p[v] = (p0 + alpha * step).normalized();
      double worst_new = 0.0;
      bool flip = false;
      const double energy_new = local_energy(p[v], worst_new, flip);
      bool length_ok = true;
      if (!flip) {
        for (std::size_t i = 0; i < len_old.size(); ++i) {
          const double lb = ctx.length_badness(p, ctx.vertex_edges[v][i], mean_edge);
          if (lb > config.length_distortion_cap && lb > len_old[i]) {
            length_ok = false;
            break;
          }
        }
      }
      if (!flip && length_ok && worst_new <= worst_old && energy_new < energy_old) {
        ++moved;
        break;
      }
      p[v] = p0;
    }
  }
  spdlog::debug("local_smooth moved {} of {} vertices", moved, n);
  return out;
}

SphericalParam global_smooth(const TriangleMesh& mesh, const SphericalParam& param, const ParamConfig& config) {
  validate(config);
  require_param(mesh, param);
  const Context ctx(mesh);
  const auto& p0 = param.points;
  const int n = static_cast<int>(p0.size());
  const std::size_t nf = mesh.face_count();
  const double mean_edge = ctx.mean_sphere_edge(p0);

  // Per-vertex density: mesh share over sphere share of the one-ring.
  std::vector<double> mesh_share(n, 0.0), sphere_share(n, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    const double s = spherical_triangle_area(p0[t[0]], p0[t[1]], p0[t[2]]) / (4.0 * kPi);
    for (int v : t) {
      mesh_share[v] += ctx.mesh_frac[f] / 3.0;
      sphere_share[v] += s / 3.0;
    }
  }
  std::vector<double> rho(n);
  for (int v = 0; v < n; ++v) rho[v] = mesh_share[v] / sphere_share[v];

  // Cotangent stiffness on the chordal sphere mesh, negative weights clamped.
  std::vector<Triplet> trips;
  std::vector<double> diag(n, 0.0);
  for (const auto& t : mesh.faces) {
    for (int c = 0; c < 3; ++c) {
      const int i = t[c], j = t[(c + 1) % 3], o = t[(c + 2) % 3];
      const Vec3 a = p0[i] - p0[o], b = p0[j] - p0[o];
      const double cr = a.cross(b).norm();
      if (cr < 1e-300) continue;
      const double w = std::max(0.0, 0.5 * a.dot(b) / cr);
      if (w == 0.0) continue;
      diag[i] += w;
      diag[j] += w;
      if (i > 0 && j > 0) {
        trips.emplace_back(i - 1, j - 1, -w);
        trips.emplace_back(j - 1, i - 1, -w);
      }
    }
  }
  for (int v = 1; v < n; ++v) trips.emplace_back(v - 1, v - 1, diag[v] + 1e-12);
  SparseMat k(n - 1, n - 1);
  k.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs(n - 1);
  for (int v = 1; v < n; ++v) rhs[v - 1] = 4.0 * kPi * sphere_share[v] * (1.0 - rho[v]);
  Eigen::SimplicialLDLT<SparseMat> solver(k);
  SphericalParam out = param;
  if (solver.info() != Eigen::Success) {
    spdlog::debug("global_smooth: stiffness factorization failed, skipping");
    return out;
  }
  Eigen::VectorXd sol = solver.solve(rhs);
  if (!sol.allFinite()) return out;
  std::vector<double> psi(n, 0.0);
  for (int v = 1; v < n; ++v) psi[v] = sol[v - 1];

  // Face gradients, area-averaged to vertices, divided by density.
  std::vector<Vec3> vel(n, Vec3::Zero());
  std::vector<double> wsum(n, 0.0);
  for (const auto& t : mesh.faces) {
    const Vec3 nrm = (p0[t[1]] - p0[t[0]]).cross(p0[t[2]] - p0[t[0]]);
    const double twice = nrm.norm();
    if (twice < 1e-300) continue;
    const Vec3 un = nrm / twice;
    Vec3 g = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      const Vec3 opp = p0[t[(c + 2) % 3]] - p0[t[(c + 1) % 3]];
      g += psi[t[c]] * un.cross(opp);
    }
    g /= twice;
    for (int v : t) {
      vel[v] += 0.5 * twice * g;
      wsum[v] += 0.5 * twice;
    }
  }
  std::vector<double> cap(n, std::numeric_limits<double>::infinity());
  for (const auto& e : ctx.edges) {
    const double l = (p0[e[0]] - p0[e[1]]).norm();
    cap[e[0]] = std::min(cap[e[0]], 0.5 * l);
    cap[e[1]] = std::min(cap[e[1]], 0.5 * l);
  }
  for (int v = 0; v < n; ++v) {
    if (wsum[v] > 0.0) vel[v] /= wsum[v] * rho[v];
    vel[v] -= vel[v].dot(p0[v]) * p0[v];
    const double len = vel[v].norm();
    if (len > cap[v]) vel[v] *= cap[v] / len;
  }

  const DistortionSample before = ctx.summary(p0);
  const double energy_old = ctx.energy(p0);
  std::vector<double> len_old(ctx.edges.size());
  for (std::size_t e = 0; e < ctx.edges.size(); ++e) len_old[e] = ctx.length_badness(p0, static_cast<int>(e), mean_edge);

  std::vector<Vec3> p(n);
  double alpha = 1.0;
  for (int h = 0; h <= kMaxHalvings; ++h, alpha *= 0.5) {
    std::vector<char> moving(n, 1);
    for (int v = 0; v < n; ++v) p[v] = (p0[v] + alpha * vel[v]).normalized();
    // Revert vertices of offending faces and edges until none remain.
    for (int round = 0; round < 1000; ++round) {
      bool changed = false;
      for (std::size_t f = 0; f < nf; ++f) {
        const auto& t = mesh.faces[f];
        if (!moving[t[0]] && !moving[t[1]] && !moving[t[2]]) continue;
        const double d = ctx.face_distortion(p, static_cast<int>(f));
        if (!(d > 0.0) || badness(d) > before.worst) {
          for (int v : t)
            if (moving[v]) {
              moving[v] = 0;
              p[v] = p0[v];
              changed = true;
            }
        }
      }
      for (std::size_t e = 0; e < ctx.edges.size(); ++e) {
        const auto& ed = ctx.edges[e];
        if (!moving[ed[0]] && !moving[ed[1]]) continue;
        const double lb = ctx.length_badness(p, static_cast<int>(e), mean_edge);
        if (lb > config.length_distortion_cap && lb > len_old[e]) {
          for (int v : ed)
            if (moving[v]) {
              moving[v] = 0;
              p[v] = p0[v];
              changed = true;
            }
        }
      }
      if (!changed) break;
    }
    if (ctx.energy(p) < energy_old && ctx.summary(p).worst <= before.worst) {
      out.points = p;
      return out;
    }
  }
  return out;
}

SphericalParam parametrize(const TriangleMesh& mesh, const ParamConfig& config) {
  validate(config);
  SphericalParam param = initial_param(mesh);
  const Context ctx(mesh);
  DistortionSample current = ctx.summary(param.points);
  param.iteration_log.push_back(current);
  spdlog::debug("parametrize init: worst {:.6g} mean {:.6g}", current.worst, current.mean);
  for (int it = 0; it < config.max_outer_iterations; ++it) {
    const DistortionSample start = current;
    auto record = [&](SphericalParam&& next) {
      const DistortionSample s = ctx.summary(next.points);
      next.iteration_log = std::move(param.iteration_log);
      param = std::move(next);
      if (s.worst != current.worst || s.mean != current.mean) param.iteration_log.push_back(s);
      current = s;
    };
    for (int pass = 0; pass < config.local_smooth_passes; ++pass) record(local_smooth(mesh, param, config));
    record(global_smooth(mesh, param, config));
    spdlog::debug("parametrize outer {}: worst {:.6g} mean {:.6g}", it, current.worst, current.mean);
    const double dw = (start.worst - current.worst) / start.worst;
    const double dm = (start.mean - current.mean) / start.mean;
    if (dw < config.distortion_tolerance && dm < config.distortion_tolerance) break;
  }
  return param;
}

void save_param_csv(const std::vector<SphericalCoord>& coords, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "vertex_index,theta,phi\n";
  for (std::size_t i = 0; i < coords.size(); ++i) out << i << ',' << coords[i].theta << ',' << coords[i].phi << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<SphericalCoord> load_param_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("vertex_index,theta,phi", 0) != 0)
    throw FormatError(path.string() + ": expected header vertex_index,theta,phi");
  std::vector<SphericalCoord> coords;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    try {
      if (std::stoull(a) != coords.size())
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": vertex indices must be consecutive");
      coords.push_back({std::stod(b), std::stod(c)});
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return coords;
}

}  // namespace hippoasym
