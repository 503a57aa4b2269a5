#pragma once

#include "hippoasym/classifier.hpp"
#include "hippoasym/mesher.hpp"
#include "hippoasym/shapefeat.hpp"
#include "hippoasym/spharm.hpp"
#include "hippoasym/sphereparam.hpp"
#include "hippoasym/stats.hpp"
#include "hippoasym/volgrid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hippoasym {

const char* version();

struct SubjectEntry {
  std::string id;
  Label label = Label::normal;
  std::filesystem::path left;   ///< MVOX header of the left hippocampus
  std::filesystem::path right;  ///< MVOX header of the right hippocampus
};

/// Recipe for a synthetic cohort: normal subjects carry only independent
/// per-side noise, epileptic subjects additionally get the planted deformation.
struct SyntheticCohortSpec {
  int normal_count = 5;
  int epileptic_count = 18;
  std::uint64_t seed = 1;
  Vec3 base_semi_axes_mm{20.0, 8.0, 6.0};
  /// Per-subject relative axis variation, uniform in [-j, j].
  double axis_jitter = 0.1;
  /// Per-subject Euler angle variation (radians), uniform in [-r, r].
  double rotation_jitter_rad = 0.2;
  /// Per-subject bend drawn uniformly in [0, bend_max_mm].
  double bend_max_mm = 2.0;
  double noise_amplitude_mm = 0.3;
  double volume_scale = 0.8;
  double bump_amplitude_mm = 1.5;
  double bump_width_rad = 0.5;
  /// "left", "right" or "random" (per subject).
  std::string deformed_side = "random";
  Vec3 spacing_mm{1.0, 1.0, 1.0};
};

void validate(const SyntheticCohortSpec& spec);

struct SplitConfig {
  /// Explicit split; both empty means a seeded stratified random split.
  std::vector<std::string> selection_ids;
  std::vector<std::string> evaluation_ids;
  std::uint64_t seed = 0;
  /// 0 selects min(12, n/2).
  int selection_size = 0;
};

struct CohortConfig {
  std::vector<SubjectEntry> subjects;
  int l_max = 15;
  FeatureVariant variant = FeatureVariant::per_lm;
  AsymmetryMode asymmetry_mode = AsymmetryMode::log_ratio;
  FitOptions fit;
  ParamConfig param;
  MarchingCubesOptions marching_cubes;
  /// Reflect the right mask across x before processing so both sides share
  /// one orientation.
  bool mirror_right = true;
  double alpha = 0.05;
  double svm_c = 1.0;
  /// Re-run feature selection inside every leave-one-out fold.
  bool reselect_in_loop = false;
  SplitConfig split;
  std::optional<SyntheticCohortSpec> synthetic;
};

/// Throws PreconditionError on duplicate ids, overlapping or unknown split ids
/// and out-of-range parameters.
void validate(const CohortConfig& config);

/// INI file; relative subject paths resolve against the file's directory.
CohortConfig load_config(const std::filesystem::path& path);
void save_config(const CohortConfig& config, const std::filesystem::path& path);

/// Writes `<dir>/<id>_{left,right}.mvox.json` (+ .raw) and returns the entries.
std::vector<SubjectEntry> generate_synthetic_cohort(const SyntheticCohortSpec& spec, const std::filesystem::path& dir);

struct Split {
  std::vector<std::string> selection;
  std::vector<std::string> evaluation;
};

/// Explicit ids when configured, else a seeded split stratified by label.
Split resolve_split(const CohortConfig& config);

/// Shape ratios in shape_feature_names() order, then SPHARM asymmetry features.
std::vector<std::string> feature_columns(const CohortConfig& config);

struct SubjectRecord {
  std::string id;
  Label label = Label::normal;
  bool ok = false;
  std::string failed_stage;
  std::string error;
  std::vector<double> features;  ///< ordered as feature_columns()
  ShapeFeatures left_shape, right_shape;
};

/// On-disk layout below the output directory.
struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path subject_dir(const std::string& id) const;
  std::filesystem::path mesh(const std::string& id, Side side) const;
  std::filesystem::path param(const std::string& id, Side side) const;
  std::filesystem::path coeffs(const std::string& id, Side side) const;
  std::filesystem::path spharm(const std::string& id, Side side) const;
  std::filesystem::path shape(const std::string& id) const;
  std::filesystem::path failure(const std::string& id) const;
  std::filesystem::path features() const;
  std::filesystem::path selection() const;
  std::filesystem::path model() const;
  std::filesystem::path report() const;
};

/// Parameter points exactly as stored in the param CSV.
SphericalParam param_from_angles(const std::vector<SphericalCoord>& angles);

/// Loads, keeps the largest component and canonicalizes the side.
VoxelMask load_subject_mask(const SubjectEntry& subject, Side side, const CohortConfig& config);

// Stages. Each reads the previous stage's artifacts and writes its own;
// subjects that fail are recorded in their failure file and skipped later.
void stage_mesh(const CohortConfig& config, const ArtifactLayout& out, int threads = 1);
void stage_param(const CohortConfig& config, const ArtifactLayout& out, int threads = 1);
void stage_fit(const CohortConfig& config, const ArtifactLayout& out, int threads = 1);
/// Shape features and the full feature matrix; returns every subject's record.
std::vector<SubjectRecord> stage_features(const CohortConfig& config, const ArtifactLayout& out, int threads = 1);
SelectionResult stage_select(const CohortConfig& config, const ArtifactLayout& out);

struct StudyResult {
  std::vector<SubjectRecord> subjects;
  SelectionResult selection;
  std::optional<ConfusionCounts> confusion;
  Metrics metrics;
  std::string status;  ///< "ok" or "no discriminative features"
  std::string report_json;
};

/// LOOCV on the evaluation subset with the selected columns; writes model and report.
StudyResult stage_classify(const CohortConfig& config, const ArtifactLayout& out);

/// Every stage in order.
StudyResult run_study(const CohortConfig& config, const std::filesystem::path& out_dir, int threads = 1);

/// Report rendered as a CSV subject table.
std::string report_to_csv(const std::string& report_json);
/// Human-readable summary table.
std::string report_to_text(const std::string& report_json);

}  // namespace hippoasym
