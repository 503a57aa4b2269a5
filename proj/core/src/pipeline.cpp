#include "hippoasym/pipeline.hpp"

#include "hippoasym/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#ifndef HIPPOASYM_VERSION
#define HIPPOASYM_VERSION "0.0.0"
#endif

namespace hippoasym {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Implementation-independent draws from the standard engine.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform_sym(std::mt19937_64& rng, double r) { return r * (2.0 * uniform01(rng) - 1.0); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes only
// its own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const char* side_name(Side s) { return s == Side::left ? "left" : "right"; }

struct StageFailure {
  std::string stage;
  std::string error;
};

void write_failure(const ArtifactLayout& out, const std::string& id, const StageFailure& f) {
  ojson j;
  j["stage"] = f.stage;
  j["error"] = f.error;
  std::ofstream o(out.failure(id));
  o << j.dump(2) << '\n';
  spdlog::warn("subject {} failed at {}: {}", id, f.stage, f.error);
}

std::optional<StageFailure> read_failure(const ArtifactLayout& out, const std::string& id) {
  const fs::path p = out.failure(id);
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  try {
    const auto j = ojson::parse(in);
    return StageFailure{j.at("stage").get<std::string>(), j.at("error").get<std::string>()};
  } catch (const nlohmann::json::exception&) {
    throw FormatError(p.string() + ": malformed failure record");
  }
}

// Runs one stage body for a subject; an Error marks the subject failed.
template <typename Fn>
void guarded(const ArtifactLayout& out, const std::string& id, const std::string& stage, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    write_failure(out, id, {stage, e.what()});
  }
}

void require_file(const fs::path& p, const std::string& what, const std::string& id) {
  if (!fs::exists(p))
    throw Error("missing " + what + " for subject " + id + " (" + p.string() + "); run the previous stage first");
}

std::map<std::string, const SubjectEntry*> subjects_by_id(const CohortConfig& c) {
  std::map<std::string, const SubjectEntry*> m;
  for (const auto& s : c.subjects) m[s.id] = &s;
  return m;
}

ojson json_number_or_null(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson config_echo(const CohortConfig& c, const Split& split) {
  ojson j;
  j["l_max"] = c.l_max;
  j["spharm_variant"] = to_string(c.variant);
  j["asymmetry_mode"] = to_string(c.asymmetry_mode);
  j["area_weighted_fit"] = c.fit.area_weighted;
  j["mirror_right"] = c.mirror_right;
  j["mesh"] = {{"placement", c.marching_cubes.placement == VertexPlacement::filtered ? "filtered" : "midpoint"},
               {"sigma_voxels", c.marching_cubes.sigma_voxels},
               {"min_edge_fraction", c.marching_cubes.min_edge_fraction}};
  j["param"] = {{"max_outer_iterations", c.param.max_outer_iterations},
                {"local_smooth_passes", c.param.local_smooth_passes},
                {"distortion_tolerance", c.param.distortion_tolerance},
                {"length_distortion_cap", c.param.length_distortion_cap},
                {"smoothness_weight", c.param.smoothness_weight}};
  j["alpha"] = c.alpha;
  j["svm_c"] = c.svm_c;
  j["reselect_in_loop"] = c.reselect_in_loop;
  j["split"] = {{"selection_ids", split.selection}, {"evaluation_ids", split.evaluation}, {"seed", c.split.seed}};
  j["feature_order"] = "shape ratios, then SPHARM features by (l, m)";
  return j;
}

std::vector<int> signs(const std::vector<Label>& labels) {
  std::vector<int> y;
  for (auto l : labels) y.push_back(to_sign(l));
  return y;
}

}  // namespace

const char* version() { return HIPPOASYM_VERSION; }

fs::path ArtifactLayout::subject_dir(const std::string& id) const { return root / "subjects" / id; }
fs::path ArtifactLayout::mesh(const std::string& id, Side s) const {
  return subject_dir(id) / (std::string(side_name(s)) + ".obj");
}
fs::path ArtifactLayout::param(const std::string& id, Side s) const {
  return subject_dir(id) / (std::string(side_name(s)) + ".param.csv");
}
fs::path ArtifactLayout::coeffs(const std::string& id, Side s) const {
  return subject_dir(id) / (std::string(side_name(s)) + ".coeffs.csv");
}
fs::path ArtifactLayout::spharm(const std::string& id, Side s) const {
  return subject_dir(id) / (std::string(side_name(s)) + ".spharm.csv");
}
fs::path ArtifactLayout::shape(const std::string& id) const { return subject_dir(id) / "shape.csv"; }
fs::path ArtifactLayout::failure(const std::string& id) const { return subject_dir(id) / "failure.json"; }
fs::path ArtifactLayout::features() const { return root / "features.csv"; }
fs::path ArtifactLayout::selection() const { return root / "selection.csv"; }
fs::path ArtifactLayout::model() const { return root / "model.csv"; }
fs::path ArtifactLayout::report() const { return root / "report.json"; }

std::vector<SubjectEntry> generate_synthetic_cohort(const SyntheticCohortSpec& spec, const fs::path& dir) {
  validate(spec);
  fs::create_directories(dir);
  const int n = spec.normal_count + spec.epileptic_count;
  std::mt19937_64 rng(spec.seed);
  std::vector<Label> labels(spec.normal_count, Label::normal);
  labels.insert(labels.end(), spec.epileptic_count, Label::epileptic);
  shuffle(labels, rng);

  std::vector<SubjectEntry> out;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 sub(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
    SyntheticSubjectSpec s;
    for (int a = 0; a < 3; ++a) s.base_semi_axes_mm[a] = spec.base_semi_axes_mm[a] * (1.0 + uniform_sym(sub, spec.axis_jitter));
    for (int a = 0; a < 3; ++a) s.rotation[a] = uniform_sym(sub, spec.rotation_jitter_rad);
    s.bend_mm = spec.bend_max_mm * uniform01(sub);
    s.noise_amplitude_mm = spec.noise_amplitude_mm;
    s.spacing_mm = spec.spacing_mm;
    const bool left_side = spec.deformed_side == "left" || (spec.deformed_side == "random" && uniform01(sub) < 0.5);
    if (labels[i] == Label::epileptic) {
      s.asymmetry.volume_scale = spec.volume_scale;
      s.asymmetry.bump_amplitude_mm = spec.bump_amplitude_mm;
      s.asymmetry.bump_width_rad = spec.bump_width_rad;
      s.asymmetry.deformed_side = left_side ? Side::left : Side::right;
    }
    s.seed = sub();

    char id[32];
    std::snprintf(id, sizeof id, "sub%03d", i + 1);
    const auto [left, right] = gen_subject_pair(s);
    SubjectEntry e;
    e.id = id;
    e.label = labels[i];
    e.left = dir / (e.id + "_left.mvox.json");
    e.right = dir / (e.id + "_right.mvox.json");
    save_mask(left, e.left);
    save_mask(right, e.right);
    out.push_back(std::move(e));
  }
  return out;
}

Split resolve_split(const CohortConfig& config) {
  validate(config);
  Split s;
  if (!config.split.selection_ids.empty()) {
    s.selection = config.split.selection_ids;
    s.evaluation = config.split.evaluation_ids;
    std::sort(s.selection.begin(), s.selection.end());
    std::sort(s.evaluation.begin(), s.evaluation.end());
    return s;
  }
  std::vector<std::string> normal, epileptic;
  for (const auto& e : config.subjects) (e.label == Label::normal ? normal : epileptic).push_back(e.id);
  const int n = static_cast<int>(config.subjects.size());
  if (normal.size() < 4 || epileptic.size() < 4)
    throw PreconditionError("a random split needs at least 4 subjects of each class");
  const int k = config.split.selection_size > 0 ? config.split.selection_size : std::min(12, n / 2);
  int kn = static_cast<int>(std::floor(static_cast<double>(k) * normal.size() / n));
  kn = std::clamp(kn, 2, static_cast<int>(normal.size()) - 2);
  const int ke = k - kn;
  if (ke < 2 || ke > static_cast<int>(epileptic.size()) - 2)
    throw PreconditionError("selection size " + std::to_string(k) + " leaves too few subjects of a class");
  std::mt19937_64 rng(config.split.seed);
  shuffle(normal, rng);
  shuffle(epileptic, rng);
  s.selection.assign(normal.begin(), normal.begin() + kn);
  s.selection.insert(s.selection.end(), epileptic.begin(), epileptic.begin() + ke);
  s.evaluation.assign(normal.begin() + kn, normal.end());
  s.evaluation.insert(s.evaluation.end(), epileptic.begin() + ke, epileptic.end());
  std::sort(s.selection.begin(), s.selection.end());
  std::sort(s.evaluation.begin(), s.evaluation.end());
  return s;
}

std::vector<std::string> feature_columns(const CohortConfig& config) {
  std::vector<std::string> cols(shape_feature_names().begin(), shape_feature_names().end());
  SpharmFeatureVector f;
  f.variant = config.variant;
  f.l_max = config.l_max;
  for (auto& n : f.names()) cols.push_back(std::move(n));
  return cols;
}

SphericalParam param_from_angles(const std::vector<SphericalCoord>& angles) {
  SphericalParam p;
  p.points.reserve(angles.size());
  for (const auto& a : angles) p.points.push_back(from_spherical(a));
  return p;
}

VoxelMask load_subject_mask(const SubjectEntry& subject, Side side, const CohortConfig& config) {
  VoxelMask m = load_mask(side == Side::left ? subject.left : subject.right);
  if (m.occupied_count() == 0) throw PreconditionError("empty " + std::string(side_name(side)) + " mask");
  m = largest_component(m);
  if (side == Side::right && config.mirror_right) m = mirror_x(m);
  return m;
}

void stage_mesh(const CohortConfig& config, const ArtifactLayout& out, int threads) {
  validate(config);
  parallel_for(config.subjects.size(), threads, [&](std::size_t i) {
    const SubjectEntry& s = config.subjects[i];
    fs::create_directories(out.subject_dir(s.id));
    fs::remove(out.failure(s.id));
    std::array<VoxelMask, 2> masks;
    bool ok = true;
    guarded(out, s.id, "load", [&] {
      masks[0] = load_subject_mask(s, Side::left, config);
      masks[1] = load_subject_mask(s, Side::right, config);
    });
    ok = !fs::exists(out.failure(s.id));
    if (!ok) return;
    guarded(out, s.id, "mesh", [&] {
      for (int k = 0; k < 2; ++k) {
        const TriangleMesh mesh = marching_cubes(masks[k], config.marching_cubes);
        require_valid(mesh);
        save_obj(mesh, out.mesh(s.id, k == 0 ? Side::left : Side::right));
      }
    });
    spdlog::info("mesh {}: done", s.id);
  });
}

void stage_param(const CohortConfig& config, const ArtifactLayout& out, int threads) {
  validate(config);
  for (const auto& s : config.subjects)
    if (!read_failure(out, s.id))
      for (Side side : {Side::left, Side::right}) require_file(out.mesh(s.id, side), "mesh", s.id);
  parallel_for(config.subjects.size(), threads, [&](std::size_t i) {
    const SubjectEntry& s = config.subjects[i];
    if (read_failure(out, s.id)) return;
    guarded(out, s.id, "param", [&] {
      for (Side side : {Side::left, Side::right}) {
        const TriangleMesh mesh = load_obj(out.mesh(s.id, side));
        const SphericalParam p = parametrize(mesh, config.param);
        const auto summary = area_distortion(mesh, p).summary;
        spdlog::info("param {} {}: {} outer steps, worst {:.4f}, mean {:.4f}", s.id, side_name(side),
                     p.iteration_log.size(), summary.worst, summary.mean);
        save_param_csv(p.angles(), out.param(s.id, side));
      }
    });
  });
}

void stage_fit(const CohortConfig& config, const ArtifactLayout& out, int threads) {
  validate(config);
  for (const auto& s : config.subjects)
    if (!read_failure(out, s.id))
      for (Side side : {Side::left, Side::right}) {
        require_file(out.param(s.id, side), "parameterization", s.id);
        require_file(out.mesh(s.id, side), "mesh", s.id);
      }
  parallel_for(config.subjects.size(), threads, [&](std::size_t i) {
    const SubjectEntry& s = config.subjects[i];
    if (read_failure(out, s.id)) return;
    for (Side side : {Side::left, Side::right}) {
      TriangleMesh mesh;
      SphericalParam p;
      SpharmCoeffs coeffs;
      bool ok = true;
      guarded(out, s.id, "fit", [&] {
        mesh = load_obj(out.mesh(s.id, side));
        p = param_from_angles(load_param_csv(out.param(s.id, side)));
        coeffs = fit(mesh, p, config.l_max, config.fit);
      });
      ok = !fs::exists(out.failure(s.id));
      if (!ok) return;
      guarded(out, s.id, "align", [&] {
        const SpharmCoeffs aligned = align(coeffs);
        save_coeffs_csv(aligned, out.coeffs(s.id, side));
        save_features_csv(power_features(aligned, config.variant), out.spharm(s.id, side));
      });
      if (fs::exists(out.failure(s.id))) return;
    }
  });
}

std::vector<SubjectRecord> stage_features(const CohortConfig& config, const ArtifactLayout& out, int threads) {
  validate(config);
  for (const auto& s : config.subjects)
    if (!read_failure(out, s.id))
      for (Side side : {Side::left, Side::right}) {
        require_file(out.mesh(s.id, side), "mesh", s.id);
        require_file(out.spharm(s.id, side), "SPHARM features", s.id);
      }
  std::vector<SubjectRecord> records(config.subjects.size());
  parallel_for(config.subjects.size(), threads, [&](std::size_t i) {
    const SubjectEntry& s = config.subjects[i];
    SubjectRecord& r = records[i];
    r.id = s.id;
    r.label = s.label;
    if (read_failure(out, s.id)) return;
    guarded(out, s.id, "features", [&] {
      std::array<ShapeFeatures, 2> shape;
      std::array<SpharmFeatureVector, 2> spharm;
      for (int k = 0; k < 2; ++k) {
        const Side side = k == 0 ? Side::left : Side::right;
        const VoxelMask mask = load_subject_mask(s, side, config);
        const TriangleMesh mesh = load_obj(out.mesh(s.id, side));
        shape[k] = compute_shape_features(mask, mesh);
        spharm[k] = load_features_csv(out.spharm(s.id, side));
        if (spharm[k].variant != config.variant || spharm[k].l_max != config.l_max)
          throw PreconditionError("SPHARM feature file does not match the configured degree or variant");
      }
      save_shape_features_csv(shape[0], shape[1], out.shape(s.id));
      const auto ratios = asymmetry_ratios(shape[0], shape[1]);
      const auto asym = asymmetry_features(spharm[0], spharm[1], config.asymmetry_mode);
      r.features.assign(ratios.begin(), ratios.end());
      r.features.insert(r.features.end(), asym.begin(), asym.end());
      r.left_shape = shape[0];
      r.right_shape = shape[1];
      r.ok = true;
    });
  });
  FeatureMatrix m;
  m.columns = feature_columns(config);
  for (auto& r : records) {
    if (auto f = read_failure(out, r.id)) {
      r.ok = false;
      r.failed_stage = f->stage;
      r.error = f->error;
      continue;
    }
    m.ids.push_back(r.id);
    m.labels.push_back(r.label);
    m.rows.push_back(r.features);
  }
  save_feature_matrix_csv(m, out.features());
  return records;
}

SelectionResult stage_select(const CohortConfig& config, const ArtifactLayout& out) {
  require_file(out.features(), "feature matrix", "(all)");
  const FeatureMatrix m = load_feature_matrix_csv(out.features());
  const Split split = resolve_split(config);
  std::vector<std::size_t> rows;
  const std::set<std::string> sel(split.selection.begin(), split.selection.end());
  for (std::size_t i = 0; i < m.row_count(); ++i)
    if (sel.count(m.ids[i])) rows.push_back(i);
  if (rows.size() < sel.size())
    spdlog::warn("{} selection subjects failed and are excluded from feature selection", sel.size() - rows.size());
  const SelectionResult result = select_features(m.select_rows(rows), config.alpha);
  save_selection_csv(result, out.selection());
  spdlog::info("selection: {} of {} tested features have p < {}", result.selected.size(), result.tested_count(),
               config.alpha);
  return result;
}

StudyResult stage_classify(const CohortConfig& config, const ArtifactLayout& out) {
  require_file(out.features(), "feature matrix", "(all)");
  require_file(out.selection(), "feature selection", "(all)");
  const FeatureMatrix all = load_feature_matrix_csv(out.features());
  const SelectionResult selection = load_selection_csv(out.selection());
  const Split split = resolve_split(config);

  StudyResult res;
  res.selection = selection;
  std::vector<std::string> warnings;
  warnings.push_back("feature selection runs once on the selection subset, outside the leave-one-out loop; "
                     "reselect_in_loop = true is the leak-free alternative");
  warnings.push_back(std::to_string(selection.tested_count()) +
                     " features were tested without multiple-comparison correction");

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < all.row_count(); ++i) row_of[all.ids[i]] = i;
  std::vector<std::size_t> eval_rows;
  for (const auto& id : split.evaluation)
    if (row_of.count(id)) eval_rows.push_back(row_of[id]);
  const FeatureMatrix eval = all.select_rows(eval_rows);

  // Columns usable on the selection subset may still be NaN on evaluation rows.
  std::vector<std::string> columns;
  const std::map<std::string, std::size_t> col_of = [&] {
    std::map<std::string, std::size_t> m;
    for (std::size_t c = 0; c < all.column_count(); ++c) m[all.columns[c]] = c;
    return m;
  }();
  for (const auto& name : selection.selected) {
    auto it = col_of.find(name);
    if (it == col_of.end()) throw FormatError("selection names unknown feature '" + name + "'");
    const bool finite = std::all_of(eval.rows.begin(), eval.rows.end(),
                                    [&](const auto& r) { return std::isfinite(r[it->second]); });
    if (finite) columns.push_back(name);
    else warnings.push_back("selected feature " + name + " is unusable on evaluation subjects and was dropped");
  }

  std::map<std::string, Prediction> predictions;
  if (columns.empty() && !config.reselect_in_loop) {
    res.status = "no discriminative features";
  } else {
    const FeatureMatrix x = eval.select_columns(config.reselect_in_loop ? eval.columns : columns);
    const std::vector<int> y = signs(x.labels);
    SvmOptions opt;
    opt.c_param = config.svm_c;
    ConfusionCounts cc;
    if (!config.reselect_in_loop) {
      const LoocvResult lo = loocv(x.rows, y, opt);
      cc = lo.confusion;
      for (std::size_t i = 0; i < x.row_count(); ++i) predictions[x.ids[i]] = lo.predictions[i];
      save_model_csv(train(x.rows, y, opt, columns), out.model());
    } else {
      if (x.row_count() < 3) throw PreconditionError("leave-one-out needs at least 3 evaluation subjects");
      for (std::size_t held = 0; held < x.row_count(); ++held) {
        std::vector<std::size_t> train_rows;
        for (std::size_t r = 0; r < x.row_count(); ++r)
          if (r != held) train_rows.push_back(r);
        const FeatureMatrix tr = x.select_rows(train_rows);
        const SelectionResult fold_sel = select_features(tr, config.alpha);
        Prediction p;
        if (fold_sel.selected.empty()) {
          p.score = 0.0;
          p.label = 1;
          warnings.push_back("fold " + x.ids[held] + ": no discriminative features; tie rule applied");
        } else {
          const FeatureMatrix trs = tr.select_columns(fold_sel.selected);
          const LinearModel model = train(trs.rows, signs(trs.labels), opt, fold_sel.selected);
          const FeatureMatrix one = x.select_rows({held}).select_columns(fold_sel.selected);
          p = predict(model, one.rows.front());
        }
        cc.add(to_sign(x.labels[held]), p.label);
        predictions[x.ids[held]] = p;
      }
    }
    res.confusion = cc;
    res.metrics = metrics(cc);
    res.status = "ok";
  }

  // Subject records in id order, failures from the stage files.
  const auto by_id = subjects_by_id(config);
  const std::set<std::string> sel_ids(split.selection.begin(), split.selection.end());
  const std::set<std::string> eval_ids(split.evaluation.begin(), split.evaluation.end());
  std::map<std::string, std::size_t> eval_row_of;
  for (std::size_t i = 0; i < eval.row_count(); ++i) eval_row_of[eval.ids[i]] = i;

  ojson report;
  report["tool"] = {{"name", "hippoasym"}, {"version", version()}};
  report["status"] = res.status;
  report["config"] = config_echo(config, split);
  report["tests_performed"] = selection.tested_count();
  ojson sel_json = ojson::array();
  for (const auto& t : selection.tests)
    if (t.selected) sel_json.push_back({{"name", t.name}, {"p", t.p}});
  report["selected_features"] = sel_json;
  report["classification_features"] = columns;
  if (res.confusion)
    report["confusion"] = {{"tp", res.confusion->tp}, {"tn", res.confusion->tn}, {"fp", res.confusion->fp},
                           {"fn", res.confusion->fn}};
  else
    report["confusion"] = nullptr;
  report["metrics"] = {{"accuracy", json_number_or_null(res.metrics.accuracy)},
                       {"sensitivity", json_number_or_null(res.metrics.sensitivity)},
                       {"specificity", json_number_or_null(res.metrics.specificity)}};
  ojson subjects = ojson::array();
  for (const auto& [id, entry] : by_id) {
    SubjectRecord rec;
    rec.id = id;
    rec.label = entry->label;
    ojson s;
    s["id"] = id;
    s["label"] = to_string(entry->label);
    s["set"] = sel_ids.count(id) ? "selection" : eval_ids.count(id) ? "evaluation" : "unused";
    auto pit = predictions.find(id);
    if (pit != predictions.end()) {
      s["prediction"] = pit->second.label > 0 ? "epileptic" : "normal";
      s["score"] = pit->second.score;
    } else {
      s["prediction"] = nullptr;
      s["score"] = nullptr;
    }
    if (auto f = read_failure(out, id)) {
      s["failed_stage"] = f->stage;
      s["error"] = f->error;
      rec.failed_stage = f->stage;
      rec.error = f->error;
    } else {
      rec.ok = true;
      auto r = row_of.find(id);
      if (r != row_of.end()) rec.features = all.rows[r->second];
    }
    subjects.push_back(std::move(s));
    res.subjects.push_back(std::move(rec));
  }
  report["subjects"] = subjects;
  report["warnings"] = warnings;
  res.report_json = report.dump(2) + "\n";
  std::ofstream o(out.report());
  if (!o) throw Error("cannot write " + out.report().string());
  o << res.report_json;
  if (!o) throw Error("write failed: " + out.report().string());
  if (res.metrics.accuracy)
    spdlog::info("LOOCV accuracy {:.1f}% on {} evaluation subjects", *res.metrics.accuracy, eval.row_count());
  return res;
}

StudyResult run_study(const CohortConfig& config, const fs::path& out_dir, int threads) {
  validate(config);
  if (config.subjects.empty()) throw PreconditionError("cohort has no subjects");
  fs::create_directories(out_dir);
  const ArtifactLayout out{out_dir};
  stage_mesh(config, out, threads);
  stage_param(config, out, threads);
  stage_fit(config, out, threads);
  const auto records = stage_features(config, out, threads);
  stage_select(config, out);
  StudyResult res = stage_classify(config, out);
  res.subjects = records;
  return res;
}

namespace {

ojson parse_report(const std::string& text) {
  try {
    return ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

}  // namespace

std::string report_to_csv(const std::string& report_json) {
  const auto j = parse_report(report_json);
  std::ostringstream o;
  o.precision(17);
  o << "id,label,set,prediction,score,failed_stage\n";
  for (const auto& s : j.at("subjects")) {
    o << s.at("id").get<std::string>() << ',' << s.at("label").get<std::string>() << ','
      << s.at("set").get<std::string>() << ',';
    if (!s.at("prediction").is_null()) o << s.at("prediction").get<std::string>();
    o << ',';
    if (!s.at("score").is_null()) o << s.at("score").get<double>();
    o << ',';
    if (s.contains("failed_stage")) o << s.at("failed_stage").get<std::string>();
    o << '\n';
  }
  return o.str();
}

std::string report_to_text(const std::string& report_json) {
  const auto j = parse_report(report_json);
  std::ostringstream o;
  auto metric = [&](const char* k) {
    const auto& v = j.at("metrics").at(k);
    if (v.is_null()) return std::string("undefined");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", v.get<double>());
    return std::string(buf);
  };
  o << "status: " << j.at("status").get<std::string>() << '\n';
  o << "selected features (" << j.at("selected_features").size() << " of " << j.at("tests_performed").get<int>()
    << " tested):\n";
  for (const auto& f : j.at("selected_features")) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", f.at("p").get<double>());
    o << "  " << f.at("name").get<std::string>() << "  p=" << buf << '\n';
  }
  if (!j.at("confusion").is_null()) {
    const auto& c = j.at("confusion");
    o << "confusion: tp=" << c.at("tp").get<int>() << " tn=" << c.at("tn").get<int>() << " fp=" << c.at("fp").get<int>()
      << " fn=" << c.at("fn").get<int>() << '\n';
  }
  o << "accuracy: " << metric("accuracy") << "  sensitivity: " << metric("sensitivity")
    << "  specificity: " << metric("specificity") << '\n';
  o << "subjects:\n";
  for (const auto& s : j.at("subjects")) {
    o << "  " << s.at("id").get<std::string>() << "  " << s.at("label").get<std::string>() << "  "
      << s.at("set").get<std::string>();
    if (!s.at("prediction").is_null()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%+.4f", s.at("score").get<double>());
      o << "  -> " << s.at("prediction").get<std::string>() << " (" << buf << ")";
    }
    if (s.contains("failed_stage")) o << "  FAILED at " << s.at("failed_stage").get<std::string>();
    o << '\n';
  }
  return o.str();
}

}  // namespace hippoasym
