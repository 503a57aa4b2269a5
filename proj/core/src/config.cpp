#include "hippoasym/error.hpp"
#include "hippoasym/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace hippoasym {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

// Keys never contain '/', so use it as the path separator; section names like
// "subject.s01" then stay single keys.
pt::ptree::path_type key(const std::string& k) { return pt::ptree::path_type(k, '/'); }

class Section {
 public:
  Section(std::string name, const pt::ptree& tree, std::set<std::string> allowed)
      : name_(std::move(name)), tree_(tree) {
    for (const auto& [k, v] : tree_) {
      if (!v.empty()) throw FormatError("config: nested keys are not supported in [" + name_ + "]");
      if (!allowed.count(k)) throw FormatError("config: unknown key '" + k + "' in [" + name_ + "]");
    }
  }

  bool has(const std::string& k) const { return tree_.get_child_optional(key(k)).has_value(); }

  std::string str(const std::string& k, const std::string& fallback) const {
    return tree_.get<std::string>(key(k), fallback);
  }

  template <typename T>
  T num(const std::string& k, T fallback) const {
    if (!has(k)) return fallback;
    const std::string s = tree_.get<std::string>(key(k));
    std::istringstream ss(s);
    T v{};
    ss >> v;
    if (ss.fail() || !(ss >> std::ws).eof())
      throw FormatError("config: [" + name_ + "] " + k + " = '" + s + "' is not a valid number");
    return v;
  }

  bool flag(const std::string& k, bool fallback) const {
    if (!has(k)) return fallback;
    const std::string s = tree_.get<std::string>(key(k));
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw FormatError("config: [" + name_ + "] " + k + " = '" + s + "' is not a boolean");
  }

  std::vector<std::string> list(const std::string& k) const {
    std::vector<std::string> out;
    std::istringstream ss(str(k, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
  }

  Vec3 vec3(const std::string& k, const Vec3& fallback) const {
    if (!has(k)) return fallback;
    const auto items = list(k);
    if (items.size() != 3) throw FormatError("config: [" + name_ + "] " + k + " needs three comma-separated values");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      try {
        std::size_t pos = 0;
        v[i] = std::stod(items[i], &pos);
        if (pos != items[i].size()) throw std::invalid_argument(items[i]);
      } catch (const std::logic_error&) {
        throw FormatError("config: [" + name_ + "] " + k + " has a bad component '" + items[i] + "'");
      }
    }
    return v;
  }

 private:
  std::string name_;
  const pt::ptree& tree_;
};

const pt::ptree& child_or_empty(const pt::ptree& root, const std::string& name) {
  static const pt::ptree empty;
  auto c = root.get_child_optional(key(name));
  return c ? *c : empty;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

template <typename T>
std::string num_string(T v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

VertexPlacement placement_from_string(const std::string& s) {
  if (s == "filtered") return VertexPlacement::filtered;
  if (s == "midpoint") return VertexPlacement::midpoint;
  throw FormatError("config: unknown mesh placement '" + s + "' (expected filtered or midpoint)");
}

}  // namespace

void validate(const SyntheticCohortSpec& s) {
  if (s.normal_count < 0 || s.epileptic_count < 0 || s.normal_count + s.epileptic_count == 0)
    throw PreconditionError("synthetic cohort needs a positive subject count");
  if ((s.base_semi_axes_mm.array() <= 0.0).any()) throw PreconditionError("synthetic semi-axes must be positive");
  if (!(s.axis_jitter >= 0.0 && s.axis_jitter < 0.5)) throw PreconditionError("axis_jitter must lie in [0, 0.5)");
  if (s.rotation_jitter_rad < 0.0 || s.bend_max_mm < 0.0 || s.noise_amplitude_mm < 0.0 || s.bump_amplitude_mm < 0.0)
    throw PreconditionError("synthetic jitter, bend, noise and bump must be non-negative");
  if (!(s.volume_scale > 0.0)) throw PreconditionError("volume_scale must be positive");
  if (!(s.bump_width_rad > 0.0)) throw PreconditionError("bump_width_rad must be positive");
  if (s.deformed_side != "left" && s.deformed_side != "right" && s.deformed_side != "random")
    throw PreconditionError("deformed_side must be left, right or random");
  if ((s.spacing_mm.array() <= 0.0).any()) throw PreconditionError("synthetic spacing must be positive");
}

void validate(const CohortConfig& c) {
  std::set<std::string> ids;
  for (const auto& s : c.subjects) {
    if (s.id.empty()) throw PreconditionError("subject with empty id");
    if (!ids.insert(s.id).second) throw PreconditionError("duplicate subject id '" + s.id + "'");
  }
  if (c.l_max < 0) throw PreconditionError("l_max must be non-negative");
  validate(c.param);
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw PreconditionError("alpha must lie in [0, 1]");
  if (!(c.svm_c > 0.0)) throw PreconditionError("svm C must be positive");
  if (!(c.marching_cubes.sigma_voxels > 0.0)) throw PreconditionError("sigma_voxels must be positive");
  if (!(c.marching_cubes.min_edge_fraction >= 0.0 && c.marching_cubes.min_edge_fraction < 0.5))
    throw PreconditionError("min_edge_fraction must lie in [0, 0.5)");
  const auto& sel = c.split.selection_ids;
  const auto& ev = c.split.evaluation_ids;
  if (sel.empty() != ev.empty()) throw PreconditionError("split needs both selection_ids and evaluation_ids");
  std::set<std::string> seen;
  for (const auto* list : {&sel, &ev}) {
    for (const auto& id : *list) {
      if (!ids.empty() && !ids.count(id)) throw PreconditionError("split references unknown subject '" + id + "'");
      if (!seen.insert(id).second)
        throw PreconditionError("subject '" + id + "' appears twice in the split (selection and evaluation must be disjoint)");
    }
  }
  if (c.split.selection_size < 0) throw PreconditionError("selection_size must be non-negative");
  if (c.synthetic) validate(*c.synthetic);
}

CohortConfig load_config(const fs::path& path) {
  pt::ptree root;
  try {
    pt::read_ini(path.string(), root);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError("config: " + std::string(e.what()));
  }
  const fs::path base = path.parent_path();
  CohortConfig c;

  static const std::set<std::string> sections{"cohort", "spharm", "mesh", "param", "selection", "svm", "synthetic"};
  for (const auto& [name, tree] : root) {
    if (name.rfind("subject.", 0) == 0) continue;
    if (tree.empty() && !tree.data().empty())
      throw FormatError("config: key '" + name + "' outside a section");
    if (!sections.count(name)) throw FormatError("config: unknown section [" + name + "]");
  }

  const Section cohort("cohort", child_or_empty(root, "cohort"),
                       {"mirror_right", "selection_ids", "evaluation_ids", "split_seed", "selection_size"});
  c.mirror_right = cohort.flag("mirror_right", c.mirror_right);
  c.split.selection_ids = cohort.list("selection_ids");
  c.split.evaluation_ids = cohort.list("evaluation_ids");
  c.split.seed = cohort.num<std::uint64_t>("split_seed", c.split.seed);
  c.split.selection_size = cohort.num<int>("selection_size", c.split.selection_size);

  for (const auto& [name, tree] : root) {
    if (name.rfind("subject.", 0) != 0) continue;
    const Section s(name, tree, {"label", "left", "right"});
    SubjectEntry e;
    e.id = name.substr(8);
    try {
      e.label = label_from_string(s.str("label", ""));
    } catch (const std::invalid_argument& ex) {
      throw FormatError("config: [" + name + "] " + ex.what());
    }
    if (!s.has("left") || !s.has("right")) throw FormatError("config: [" + name + "] needs left and right");
    e.left = fs::path(s.str("left", ""));
    e.right = fs::path(s.str("right", ""));
    if (e.left.is_relative()) e.left = base / e.left;
    if (e.right.is_relative()) e.right = base / e.right;
    c.subjects.push_back(std::move(e));
  }
  std::sort(c.subjects.begin(), c.subjects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  const Section spharm("spharm", child_or_empty(root, "spharm"), {"l_max", "variant", "asymmetry_mode", "area_weighted"});
  c.l_max = spharm.num<int>("l_max", c.l_max);
  try {
    c.variant = feature_variant_from_string(spharm.str("variant", to_string(c.variant)));
    c.asymmetry_mode = asymmetry_mode_from_string(spharm.str("asymmetry_mode", to_string(c.asymmetry_mode)));
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.fit.area_weighted = spharm.flag("area_weighted", c.fit.area_weighted);

  const Section mesh("mesh", child_or_empty(root, "mesh"), {"placement", "sigma_voxels", "min_edge_fraction"});
  c.marching_cubes.placement = placement_from_string(mesh.str("placement", "filtered"));
  c.marching_cubes.sigma_voxels = mesh.num<double>("sigma_voxels", c.marching_cubes.sigma_voxels);
  c.marching_cubes.min_edge_fraction = mesh.num<double>("min_edge_fraction", c.marching_cubes.min_edge_fraction);

  const Section param("param", child_or_empty(root, "param"),
                      {"max_outer_iterations", "local_smooth_passes", "distortion_tolerance", "length_distortion_cap",
                       "smoothness_weight"});
  c.param.max_outer_iterations = param.num<int>("max_outer_iterations", c.param.max_outer_iterations);
  c.param.local_smooth_passes = param.num<int>("local_smooth_passes", c.param.local_smooth_passes);
  c.param.distortion_tolerance = param.num<double>("distortion_tolerance", c.param.distortion_tolerance);
  c.param.length_distortion_cap = param.num<double>("length_distortion_cap", c.param.length_distortion_cap);
  c.param.smoothness_weight = param.num<double>("smoothness_weight", c.param.smoothness_weight);

  const Section selection("selection", child_or_empty(root, "selection"), {"alpha"});
  c.alpha = selection.num<double>("alpha", c.alpha);

  const Section svm("svm", child_or_empty(root, "svm"), {"c", "reselect_in_loop"});
  c.svm_c = svm.num<double>("c", c.svm_c);
  c.reselect_in_loop = svm.flag("reselect_in_loop", c.reselect_in_loop);

  if (root.get_child_optional(key("synthetic"))) {
    const Section syn("synthetic", child_or_empty(root, "synthetic"),
                      {"normal", "epileptic", "seed", "base_semi_axes_mm", "axis_jitter", "rotation_jitter_rad",
                       "bend_max_mm", "noise_amplitude_mm", "volume_scale", "bump_amplitude_mm", "bump_width_rad",
                       "deformed_side", "spacing_mm"});
    SyntheticCohortSpec s;
    s.normal_count = syn.num<int>("normal", s.normal_count);
    s.epileptic_count = syn.num<int>("epileptic", s.epileptic_count);
    s.seed = syn.num<std::uint64_t>("seed", s.seed);
    s.base_semi_axes_mm = syn.vec3("base_semi_axes_mm", s.base_semi_axes_mm);
    s.axis_jitter = syn.num<double>("axis_jitter", s.axis_jitter);
    s.rotation_jitter_rad = syn.num<double>("rotation_jitter_rad", s.rotation_jitter_rad);
    s.bend_max_mm = syn.num<double>("bend_max_mm", s.bend_max_mm);
    s.noise_amplitude_mm = syn.num<double>("noise_amplitude_mm", s.noise_amplitude_mm);
    s.volume_scale = syn.num<double>("volume_scale", s.volume_scale);
    s.bump_amplitude_mm = syn.num<double>("bump_amplitude_mm", s.bump_amplitude_mm);
    s.bump_width_rad = syn.num<double>("bump_width_rad", s.bump_width_rad);
    s.deformed_side = syn.str("deformed_side", s.deformed_side);
    s.spacing_mm = syn.vec3("spacing_mm", s.spacing_mm);
    c.synthetic = s;
  }

  try {
    validate(c);
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

void save_config(const CohortConfig& c, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = fs::absolute(p).lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  pt::ptree root;
  auto put = [&](const std::string& section, const std::string& k, const std::string& v) {
    root.put(pt::ptree::path_type(section + "/" + k, '/'), v);
  };
  put("cohort", "mirror_right", c.mirror_right ? "true" : "false");
  if (!c.split.selection_ids.empty()) {
    put("cohort", "selection_ids", join(c.split.selection_ids));
    put("cohort", "evaluation_ids", join(c.split.evaluation_ids));
  }
  put("cohort", "split_seed", num_string(c.split.seed));
  put("cohort", "selection_size", num_string(c.split.selection_size));
  put("spharm", "l_max", num_string(c.l_max));
  put("spharm", "variant", to_string(c.variant));
  put("spharm", "asymmetry_mode", to_string(c.asymmetry_mode));
  put("spharm", "area_weighted", c.fit.area_weighted ? "true" : "false");
  put("mesh", "placement", c.marching_cubes.placement == VertexPlacement::filtered ? "filtered" : "midpoint");
  put("mesh", "sigma_voxels", num_string(c.marching_cubes.sigma_voxels));
  put("mesh", "min_edge_fraction", num_string(c.marching_cubes.min_edge_fraction));
  put("param", "max_outer_iterations", num_string(c.param.max_outer_iterations));
  put("param", "local_smooth_passes", num_string(c.param.local_smooth_passes));
  put("param", "distortion_tolerance", num_string(c.param.distortion_tolerance));
  put("param", "length_distortion_cap", num_string(c.param.length_distortion_cap));
  put("param", "smoothness_weight", num_string(c.param.smoothness_weight));
  put("selection", "alpha", num_string(c.alpha));
  put("svm", "c", num_string(c.svm_c));
  put("svm", "reselect_in_loop", c.reselect_in_loop ? "true" : "false");
  for (const auto& s : c.subjects) {
    const std::string sec = "subject." + s.id;
    put(sec, "label", to_string(s.label));
    put(sec, "left", rel(s.left));
    put(sec, "right", rel(s.right));
  }
  try {
    pt::write_ini(path.string(), root);
  } catch (const pt::ini_parser_error& e) {
    throw Error("cannot write config: " + std::string(e.what()));
  }
}

}  // namespace hippoasym
