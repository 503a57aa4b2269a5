#include "hippoasym/volgrid.hpp"

#include "hippoasym/error.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

namespace hippoasym {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Side s) {
  switch (s) {
    case Side::left:
      return "left";
    case Side::right:
      return "right";
    case Side::unsided:
      return "unsided";
  }
  return "unsided";
}

Side side_from_string(std::string_view s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  if (s == "unsided") return Side::unsided;
  throw FormatError("unknown side '" + std::string(s) + "'");
}

VoxelMask::VoxelMask(std::array<int, 3> d, Vec3 spacing, Vec3 origin, Side s)
    : dims(d), spacing_mm(std::move(spacing)), origin_mm(std::move(origin)), side(s) {
  if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0) throw PreconditionError("dims must be positive");
  data.assign(voxel_count(), 0);
}

Vec3 VoxelMask::voxel_center(int i, int j, int k) const {
  return {origin_mm.x() + (i + 0.5) * spacing_mm.x(), origin_mm.y() + (j + 0.5) * spacing_mm.y(),
          origin_mm.z() + (k + 0.5) * spacing_mm.z()};
}

std::size_t VoxelMask::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

void validate(const VoxelMask& mask) {
  if (mask.dims[0] <= 0 || mask.dims[1] <= 0 || mask.dims[2] <= 0)
    throw PreconditionError("dims must be positive");
  if (!(mask.spacing_mm.array() > 0.0).all() || !mask.spacing_mm.allFinite())
    throw PreconditionError("spacing must be strictly positive");
  if (!mask.origin_mm.allFinite()) throw PreconditionError("origin must be finite");
  if (mask.data.size() != mask.voxel_count()) throw PreconditionError("payload length mismatch");
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] > 1)
      throw PreconditionError("non-binary voxel value at byte offset " + std::to_string(i));
  }
}

namespace {

fs::path payload_path_for(const fs::path& header_path) {
  std::string name = header_path.filename().string();
  constexpr std::string_view suffix = ".mvox.json";
  if (name.size() > suffix.size() && name.ends_with(suffix)) {
    name.resize(name.size() - suffix.size());
  } else {
    name = header_path.stem().string();
  }
  return name + ".raw";
}

Vec3 read_vec3(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    throw FormatError(std::string("MVOX header: '") + key + "' must be a 3-element array");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[key][i].is_number()) throw FormatError(std::string("MVOX header: '") + key + "' must be numeric");
    v[i] = j[key][i].get<double>();
  }
  return v;
}

}  // namespace

VoxelMask load_mask(const fs::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw FormatError("cannot open mask header " + header_path.string());
  json header;
  try {
    in >> header;
  } catch (const json::exception& e) {
    throw FormatError("garbled MVOX header " + header_path.string() + ": " + e.what());
  }
  if (!header.is_object()) throw FormatError("garbled MVOX header: not an object");

  VoxelMask mask;
  if (!header.contains("dims") || !header["dims"].is_array() || header["dims"].size() != 3)
    throw FormatError("MVOX header: 'dims' must be a 3-element array");
  for (int i = 0; i < 3; ++i) {
    if (!header["dims"][i].is_number_integer()) throw FormatError("MVOX header: 'dims' must be integers");
    mask.dims[i] = header["dims"][i].get<int>();
  }
  if (mask.dims[0] <= 0 || mask.dims[1] <= 0 || mask.dims[2] <= 0)
    throw FormatError("dims must be positive");
  mask.spacing_mm = read_vec3(header, "spacing_mm");
  mask.origin_mm = read_vec3(header, "origin_mm");
  if (!header.contains("side") || !header["side"].is_string()) throw FormatError("MVOX header: missing 'side'");
  mask.side = side_from_string(header["side"].get<std::string>());
  if (!header.contains("data") || !header["data"].is_string()) throw FormatError("MVOX header: missing 'data'");

  fs::path payload = header["data"].get<std::string>();
  if (payload.is_relative()) payload = header_path.parent_path() / payload;
  std::ifstream raw(payload, std::ios::binary);
  if (!raw) throw FormatError("cannot open mask payload " + payload.string());
  mask.data.assign(std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>());
  if (mask.data.size() != mask.voxel_count())
    throw FormatError("payload length mismatch: expected " + std::to_string(mask.voxel_count()) + " bytes, got " +
                      std::to_string(mask.data.size()));
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] > 1)
      throw FormatError("non-binary voxel value " + std::to_string(mask.data[i]) + " at byte offset " +
                        std::to_string(i));
  }
  if (!(mask.spacing_mm.array() > 0.0).all()) throw FormatError("spacing must be strictly positive");
  return mask;
}

void save_mask(const VoxelMask& mask, const fs::path& header_path) {
  validate(mask);
  const fs::path payload_name = payload_path_for(header_path);
  json header;
  header["dims"] = {mask.dims[0], mask.dims[1], mask.dims[2]};
  header["spacing_mm"] = {mask.spacing_mm.x(), mask.spacing_mm.y(), mask.spacing_mm.z()};
  header["origin_mm"] = {mask.origin_mm.x(), mask.origin_mm.y(), mask.origin_mm.z()};
  header["side"] = std::string(to_string(mask.side));
  header["data"] = payload_name.string();

  if (header_path.has_parent_path()) fs::create_directories(header_path.parent_path());
  {
    std::ofstream out(header_path);
    if (!out) throw Error("cannot write mask header " + header_path.string());
    out << header.dump(2) << '\n';
    if (!out) throw Error("I/O failure writing " + header_path.string());
  }
  const fs::path payload = header_path.parent_path() / payload_name;
  std::ofstream raw(payload, std::ios::binary);
  if (!raw) throw Error("cannot write mask payload " + payload.string());
  raw.write(reinterpret_cast<const char*>(mask.data.data()), static_cast<std::streamsize>(mask.data.size()));
  if (!raw) throw Error("I/O failure writing " + payload.string());
}

VoxelMask mirror_x(const VoxelMask& mask) {
  VoxelMask out = mask;
  const int nx = mask.dims[0];
  for (int k = 0; k < mask.dims[2]; ++k)
    for (int j = 0; j < mask.dims[1]; ++j)
      for (int i = 0; i < nx; ++i) out.data[out.index(nx - 1 - i, j, k)] = mask.data[mask.index(i, j, k)];
  out.origin_mm.x() = -(mask.origin_mm.x() + nx * mask.spacing_mm.x());
  return out;
}

Mat3 euler_rotation(const Vec3& angles) {
  return (Eigen::AngleAxisd(angles.x(), Vec3::UnitZ()) * Eigen::AngleAxisd(angles.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(angles.z(), Vec3::UnitX()))
      .toRotationMatrix();
}

namespace {

/// Radial description of one side's shape in its body frame.
struct RadialShape {
  Vec3 axes;
  double bend_mm = 0.0;
  double bump_mm = 0.0;
  Vec3 bump_dir{0, 0, 1};
  double bump_width = 0.5;
  double noise_mm = 0.0;
  std::array<double, 3> phases{0, 0, 0};

  bool inside(Vec3 q) const {
    if (bend_mm != 0.0) q.y() -= bend_mm * (q.x() / axes.x()) * (q.x() / axes.x());
    const double r = q.norm();
    if (r == 0.0) return true;
    const Vec3 u = q / r;
    double surface = 1.0 / std::sqrt((u.array() / axes.array()).square().sum());
    if (bump_mm != 0.0) {
      const double ang = std::acos(std::clamp(u.dot(bump_dir), -1.0, 1.0));
      surface += bump_mm * std::exp(-ang * ang / (2.0 * bump_width * bump_width));
    }
    if (noise_mm != 0.0) {
      constexpr double pi = std::numbers::pi;
      surface += noise_mm / 3.0 *
                 (std::sin(pi * u.x() + phases[0]) + std::sin(2.0 * pi * u.y() + phases[1]) +
                  std::sin(3.0 * pi * u.z() + phases[2]));
    }
    return r <= surface;
  }
};

VoxelMask digitize(const RadialShape& shape, const Mat3& rot, const Vec3& bound_axes, const Vec3& spacing,
                   int margin) {
  std::array<int, 3> dims{};
  Vec3 origin;
  for (int i = 0; i < 3; ++i) {
    double ext = 0.0;
    for (int j = 0; j < 3; ++j) ext += std::pow(rot(i, j) * bound_axes[j], 2);
    ext = std::sqrt(ext);
    dims[i] = 2 * (static_cast<int>(std::ceil(ext / spacing[i])) + margin);
    origin[i] = -(dims[i] * spacing[i]) / 2.0;
  }
  VoxelMask mask(dims, spacing, origin);
  const Mat3 inv = rot.transpose();
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        if (shape.inside(inv * mask.voxel_center(i, j, k))) mask.set(i, j, k, true);
  return mask;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

VoxelMask gen_ellipsoid(const Vec3& semi_axes_mm, const Vec3& rotation, const Vec3& spacing_mm, int margin_voxels) {
  if (!(semi_axes_mm.array() > 0.0).all()) throw PreconditionError("semi-axes must be positive");
  if (!(spacing_mm.array() > 0.0).all()) throw PreconditionError("spacing must be strictly positive");
  if (margin_voxels < 0) throw PreconditionError("margin must be non-negative");
  RadialShape shape;
  shape.axes = semi_axes_mm;
  return digitize(shape, euler_rotation(rotation), semi_axes_mm, spacing_mm, margin_voxels);
}

void validate(const SyntheticSubjectSpec& spec) {
  if (!(spec.base_semi_axes_mm.array() > 0.0).all()) throw PreconditionError("semi-axes must be positive");
  if (!(spec.asymmetry.volume_scale > 0.0)) throw PreconditionError("volume_scale must be positive");
  if (!(spec.spacing_mm.array() > 0.0).all()) throw PreconditionError("spacing must be strictly positive");
  if (spec.noise_amplitude_mm < 0.0) throw PreconditionError("noise amplitude must be non-negative");
  if (spec.margin_voxels < 0) throw PreconditionError("margin must be non-negative");
  if (spec.asymmetry.deformed_side == Side::unsided)
    throw PreconditionError("deformed side must be left or right");
  if (spec.asymmetry.bump_direction.norm() == 0.0) throw PreconditionError("bump direction must be nonzero");
}

std::pair<VoxelMask, VoxelMask> gen_subject_pair(const SyntheticSubjectSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::array<std::array<double, 3>, 2> phases{};
  for (auto& side : phases)
    for (auto& p : side) p = kTwoPi * uniform01(rng);

  const auto& asym = spec.asymmetry;
  const double scale = std::cbrt(asym.volume_scale);

  std::array<RadialShape, 2> sides;
  for (int s = 0; s < 2; ++s) {
    RadialShape& shape = sides[s];
    shape.axes = spec.base_semi_axes_mm;
    shape.bend_mm = spec.bend_mm;
    shape.noise_mm = spec.noise_amplitude_mm;
    shape.phases = phases[s];
    const bool deformed = (asym.deformed_side == Side::left) == (s == 0);
    if (deformed) {
      shape.axes *= scale;
      shape.bump_mm = asym.bump_amplitude_mm;
      shape.bump_dir = asym.bump_direction.normalized();
      shape.bump_width = asym.bump_width_rad;
    }
  }

  // Both sides share one grid so that the mirrored pair is directly comparable.
  const Vec3 max_axes = spec.base_semi_axes_mm * std::max(scale, 1.0);
  const double reach = std::abs(asym.bump_amplitude_mm) + spec.noise_amplitude_mm + std::abs(spec.bend_mm) +
                       spec.spacing_mm.maxCoeff();
  const Mat3 rot = euler_rotation(spec.rotation);
  const Vec3 bound_axes = (max_axes.array() + reach).matrix();
  VoxelMask left = digitize(sides[0], rot, bound_axes, spec.spacing_mm, spec.margin_voxels);
  left.side = Side::left;
  VoxelMask right = mirror_x(digitize(sides[1], rot, bound_axes, spec.spacing_mm, spec.margin_voxels));
  right.side = Side::right;
  return {std::move(left), std::move(right)};
}

namespace {

constexpr std::array<std::array<int, 3>, 6> kFace6{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

/// Labels 6-connected foreground components; returns labels (0 = background)
/// and per-label sizes (index 0 unused).
std::pair<std::vector<int>, std::vector<std::size_t>> label_foreground(const VoxelMask& mask) {
  std::vector<int> labels(mask.voxel_count(), 0);
  std::vector<std::size_t> sizes{0};
  std::vector<std::array<int, 3>> stack;
  const auto [nx, ny, nz] = mask.dims;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = mask.index(i, j, k);
        if (!mask.data[idx] || labels[idx]) continue;
        const int label = static_cast<int>(sizes.size());
        std::size_t count = 0;
        labels[idx] = label;
        stack.push_back({i, j, k});
        while (!stack.empty()) {
          const auto c = stack.back();
          stack.pop_back();
          ++count;
          for (const auto& d : kFace6) {
            const int a = c[0] + d[0], b = c[1] + d[1], e = c[2] + d[2];
            if (!mask.occupied(a, b, e)) continue;
            const std::size_t n = mask.index(a, b, e);
            if (labels[n]) continue;
            labels[n] = label;
            stack.push_back({a, b, e});
          }
        }
        sizes.push_back(count);
      }
  return {std::move(labels), std::move(sizes)};
}

/// Marks empty voxels 26-connected to the grid boundary.
std::vector<std::uint8_t> outside_background(const VoxelMask& mask) {
  std::vector<std::uint8_t> reached(mask.voxel_count(), 0);
  std::vector<std::array<int, 3>> stack;
  const auto [nx, ny, nz] = mask.dims;
  auto seed = [&](int i, int j, int k) {
    const std::size_t idx = mask.index(i, j, k);
    if (mask.data[idx] || reached[idx]) return;
    reached[idx] = 1;
    stack.push_back({i, j, k});
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1) seed(i, j, k);
  while (!stack.empty()) {
    const auto c = stack.back();
    stack.pop_back();
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int a = c[0] + dx, b = c[1] + dy, e = c[2] + dz;
          if (!mask.in_bounds(a, b, e)) continue;
          seed(a, b, e);
        }
  }
  return reached;
}

}  // namespace

VoxelMask largest_component(const VoxelMask& mask) {
  validate(mask);
  auto [labels, sizes] = label_foreground(mask);
  if (sizes.size() <= 1) throw PreconditionError("empty mask");
  // Ties go to the component met first in storage order.
  const auto best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  VoxelMask out = mask;
  for (std::size_t i = 0; i < labels.size(); ++i) out.data[i] = labels[i] == best ? 1 : 0;
  const auto reached = outside_background(out);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (!out.data[i] && !reached[i]) out.data[i] = 1;
  return out;
}

int count_components(const VoxelMask& mask) {
  return static_cast<int>(label_foreground(mask).second.size()) - 1;
}

std::size_t count_cavity_voxels(const VoxelMask& mask) {
  const auto reached = outside_background(mask);
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (!mask.data[i] && !reached[i]) ++n;
  return n;
}

}  // namespace hippoasym
