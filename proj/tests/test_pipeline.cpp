#include "hippoasym/error.hpp"
#include "hippoasym/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace hippoasym;
using hippoasym::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Small, quick cohort settings; the shapes stay genus 0 at this size.
SyntheticCohortSpec small_spec(int normal, int epileptic, std::uint64_t seed) {
  SyntheticCohortSpec s;
  s.normal_count = normal;
  s.epileptic_count = epileptic;
  s.seed = seed;
  s.base_semi_axes_mm = Vec3(12, 6, 5);
  s.bend_max_mm = 1.0;
  return s;
}

CohortConfig small_config(const std::vector<SubjectEntry>& subjects) {
  CohortConfig c;
  c.subjects = subjects;
  c.l_max = 6;
  c.param.max_outer_iterations = 10;
  c.split.seed = 5;
  c.split.selection_size = 4;
  return c;
}

std::size_t column(const CohortConfig& c, const std::string& name) {
  const auto cols = feature_columns(c);
  return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
}

// One generated 10-subject cohort shared by the study tests; the evaluation
// set keeps two per class even with one subject failed.
struct SharedCohort {
  TempDir dir{"cohort"};
  std::vector<SubjectEntry> subjects = generate_synthetic_cohort(small_spec(5, 5, 11), dir.path());
};

const SharedCohort& shared() {
  static const SharedCohort c;
  return c;
}

std::vector<SubjectEntry> fake_subjects(int normal, int epileptic) {
  std::vector<SubjectEntry> v;
  for (int i = 0; i < normal + epileptic; ++i) {
    SubjectEntry e;
    e.id = "s" + std::to_string(100 + i);
    e.label = i < normal ? Label::normal : Label::epileptic;
    e.left = e.id + "_l";
    e.right = e.id + "_r";
    v.push_back(e);
  }
  return v;
}

#ifdef HIPPOASYM_CLI
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + HIPPOASYM_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
#endif

}  // namespace

TEST(Config, LoadSaveRoundTrip) {
  TempDir dir("cfg");
  write(dir / "a.ini",
        "[cohort]\nselection_ids = b,c\nevaluation_ids = a\n"
        "[spharm]\nl_max = 9\nvariant = per_degree\nasymmetry_mode = log_diff\n"
        "[param]\nmax_outer_iterations = 7\n[selection]\nalpha = 0.01\n[svm]\nc = 2.5\n"
        "[subject.a]\nlabel = normal\nleft = masks/a_l.mvox.json\nright = masks/a_r.mvox.json\n"
        "[subject.b]\nlabel = epileptic\nleft = b_l\nright = b_r\n"
        "[subject.c]\nlabel = normal\nleft = c_l\nright = c_r\n");
  const CohortConfig c = load_config(dir / "a.ini");
  ASSERT_EQ(c.subjects.size(), 3u);
  EXPECT_EQ(c.subjects[0].id, "a");
  EXPECT_EQ(c.subjects[0].left, dir / "masks/a_l.mvox.json");
  EXPECT_EQ(c.subjects[1].label, Label::epileptic);
  EXPECT_EQ(c.l_max, 9);
  EXPECT_EQ(c.variant, FeatureVariant::per_degree);
  EXPECT_EQ(c.asymmetry_mode, AsymmetryMode::log_diff);
  EXPECT_EQ(c.param.max_outer_iterations, 7);
  EXPECT_EQ(c.alpha, 0.01);
  EXPECT_EQ(c.svm_c, 2.5);
  EXPECT_FALSE(c.synthetic.has_value());

  save_config(c, dir / "b.ini");
  const CohortConfig d = load_config(dir / "b.ini");
  ASSERT_EQ(d.subjects.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(d.subjects[i].id, c.subjects[i].id);
    EXPECT_EQ(fs::weakly_canonical(d.subjects[i].right), fs::weakly_canonical(c.subjects[i].right));
  }
  EXPECT_EQ(d.split.selection_ids, c.split.selection_ids);
  EXPECT_EQ(d.l_max, c.l_max);
  EXPECT_EQ(d.svm_c, c.svm_c);
}

TEST(Config, Defaults) {
  TempDir dir("cfg");
  write(dir / "a.ini", "[synthetic]\nnormal = 4\nepileptic = 4\n");
  const CohortConfig c = load_config(dir / "a.ini");
  EXPECT_EQ(c.l_max, 15);
  EXPECT_EQ(c.alpha, 0.05);
  EXPECT_EQ(c.variant, FeatureVariant::per_lm);
  ASSERT_TRUE(c.synthetic.has_value());
  EXPECT_EQ(c.synthetic->normal_count, 4);
}

TEST(Config, RejectsBadFiles) {
  TempDir dir("cfg");
  write(dir / "key.ini", "[spharm]\nlmax = 4\n");
  EXPECT_THROW(load_config(dir / "key.ini"), FormatError);
  write(dir / "sec.ini", "[spharmm]\nl_max = 4\n");
  EXPECT_THROW(load_config(dir / "sec.ini"), FormatError);
  write(dir / "num.ini", "[spharm]\nl_max = many\n");
  EXPECT_THROW(load_config(dir / "num.ini"), FormatError);
  write(dir / "lab.ini", "[subject.a]\nlabel = tle\nleft = x\nright = y\n");
  EXPECT_THROW(load_config(dir / "lab.ini"), FormatError);
  write(dir / "side.ini", "[subject.a]\nlabel = normal\nleft = x\n");
  EXPECT_THROW(load_config(dir / "side.ini"), FormatError);
  EXPECT_THROW(load_config(dir / "absent.ini"), FormatError);
}

TEST(Config, OverlappingSplitRejected) {
  TempDir dir("cfg");
  write(dir / "a.ini",
        "[cohort]\nselection_ids = a,b\nevaluation_ids = b\n"
        "[subject.a]\nlabel = normal\nleft = x\nright = y\n"
        "[subject.b]\nlabel = epileptic\nleft = x\nright = y\n");
  try {
    load_config(dir / "a.ini");
    FAIL() << "expected overlap error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("disjoint"), std::string::npos) << e.what();
  }
  CohortConfig c;
  c.subjects = fake_subjects(2, 2);
  c.split.selection_ids = {"s100", "zzz"};
  c.split.evaluation_ids = {"s101"};
  EXPECT_THROW(validate(c), PreconditionError);
  c.subjects.push_back(c.subjects[0]);
  c.split = {};
  EXPECT_THROW(validate(c), PreconditionError);
}

TEST(Split, StratifiedDefaultSizes) {
  CohortConfig c;
  c.subjects = fake_subjects(5, 18);
  c.split.seed = 3;
  const Split s = resolve_split(c);
  // min(12, n / 2) selection subjects.
  ASSERT_EQ(s.selection.size(), 11u);
  EXPECT_EQ(s.evaluation.size(), 12u);
  int sel_normal = 0;
  for (const auto& id : s.selection) sel_normal += std::stoi(id.substr(1)) < 105;
  EXPECT_EQ(sel_normal, 2);
  std::set<std::string> all(s.selection.begin(), s.selection.end());
  for (const auto& id : s.evaluation) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all.size(), 23u);

  const Split again = resolve_split(c);
  EXPECT_EQ(again.selection, s.selection);
  c.split.seed = 4;
  EXPECT_NE(resolve_split(c).selection, s.selection);
}

TEST(Split, ExplicitAndErrors) {
  CohortConfig c;
  c.subjects = fake_subjects(2, 2);
  c.split.selection_ids = {"s102", "s100"};
  c.split.evaluation_ids = {"s103", "s101"};
  const Split s = resolve_split(c);
  EXPECT_EQ(s.selection, (std::vector<std::string>{"s100", "s102"}));
  c.split = {};
  EXPECT_THROW(resolve_split(c), PreconditionError);
  c.subjects = fake_subjects(4, 8);
  c.split.selection_size = 11;
  EXPECT_THROW(resolve_split(c), PreconditionError);
}

TEST(Synthetic, Deterministic) {
  TempDir a("syn"), b("syn");
  const auto ea = generate_synthetic_cohort(small_spec(3, 2, 9), a.path());
  const auto eb = generate_synthetic_cohort(small_spec(3, 2, 9), b.path());
  ASSERT_EQ(ea.size(), 5u);
  int normal = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].id, eb[i].id);
    EXPECT_EQ(ea[i].label, eb[i].label);
    EXPECT_EQ(load_mask(ea[i].left), load_mask(eb[i].left));
    normal += ea[i].label == Label::normal;
  }
  EXPECT_EQ(normal, 3);
  SyntheticCohortSpec bad = small_spec(3, 2, 9);
  bad.deformed_side = "both";
  EXPECT_THROW(generate_synthetic_cohort(bad, a.path()), PreconditionError);
}

TEST(FeatureColumns, ShapeThenSpharm) {
  CohortConfig c;
  c.l_max = 3;
  const auto cols = feature_columns(c);
  ASSERT_EQ(cols.size(), 9u + 16u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(cols[i], shape_feature_names()[i]);
  c.variant = FeatureVariant::per_degree;
  EXPECT_EQ(feature_columns(c).size(), 9u + 4u);
}

TEST(Study, SymmetricZeroNoiseSubject) {
  TempDir dir("sym");
  SyntheticCohortSpec spec = small_spec(4, 4, 2);
  spec.noise_amplitude_mm = 0.0;
  spec.volume_scale = 1.0;
  spec.bump_amplitude_mm = 0.0;
  CohortConfig c = small_config(generate_synthetic_cohort(spec, dir / "masks"));
  const StudyResult r = run_study(c, dir / "out");
  for (const auto& s : r.subjects) {
    ASSERT_TRUE(s.ok) << s.id << ": " << s.error;
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(s.features[i], 1.0, 0.01) << s.id << " " << shape_feature_names()[i];
    for (std::size_t i = 9; i < s.features.size(); ++i)
      if (std::isfinite(s.features[i])) EXPECT_NEAR(s.features[i], 1.0, 0.02) << s.id << " column " << i;
  }
  EXPECT_EQ(r.status, "no discriminative features");
}

TEST(Study, VolumeScaleRatio) {
  TempDir dir("vol");
  SyntheticCohortSpec spec = small_spec(4, 4, 6);
  spec.noise_amplitude_mm = 0.0;
  spec.volume_scale = 0.7;
  spec.bump_amplitude_mm = 0.0;
  CohortConfig c = small_config(generate_synthetic_cohort(spec, dir / "masks"));
  const auto records = [&] {
    const ArtifactLayout out{dir / "out"};
    stage_mesh(c, out);
    stage_param(c, out);
    stage_fit(c, out);
    return stage_features(c, out);
  }();
  const std::size_t v = column(c, "volume");
  for (const auto& s : records) {
    ASSERT_TRUE(s.ok) << s.id << ": " << s.error;
    if (s.label == Label::epileptic) EXPECT_NEAR(s.features[v], 1.0 / 0.7, 0.04 / 0.7) << s.id;
    else EXPECT_NEAR(s.features[v], 1.0, 0.01) << s.id;
  }
}

TEST(Study, MissingRightMaskFailsAtLoad) {
  TempDir dir("miss");
  auto subjects = shared().subjects;
  const std::string victim = resolve_split(small_config(subjects)).evaluation.front();
  std::size_t vi = 0;
  while (subjects[vi].id != victim) ++vi;
  subjects[vi].right = dir / "nowhere.mvox.json";
  const CohortConfig c = small_config(subjects);
  const StudyResult r = run_study(c, dir / "out");
  ASSERT_EQ(r.subjects.size(), subjects.size());
  for (std::size_t i = 0; i < r.subjects.size(); ++i) {
    if (i == vi) {
      EXPECT_FALSE(r.subjects[i].ok);
      EXPECT_EQ(r.subjects[i].failed_stage, "load");
    } else {
      EXPECT_TRUE(r.subjects[i].ok) << r.subjects[i].error;
    }
  }
  const ArtifactLayout out{dir / "out"};
  EXPECT_NE(slurp(out.failure(victim)).find("load"), std::string::npos);
  EXPECT_NE(r.report_json.find("\"failed_stage\""), std::string::npos);
  ASSERT_TRUE(r.confusion.has_value() || r.status != "ok");
  if (r.confusion) EXPECT_EQ(r.confusion->total(), static_cast<int>(resolve_split(c).evaluation.size()) - 1);
}

TEST(Study, AlphaZeroReportsNoDiscriminativeFeatures) {
  TempDir dir("alpha");
  CohortConfig c = small_config(shared().subjects);
  c.alpha = 0.0;
  const StudyResult r = run_study(c, dir.path());
  EXPECT_EQ(r.status, "no discriminative features");
  EXPECT_TRUE(r.selection.selected.empty());
  EXPECT_FALSE(r.confusion.has_value());
  EXPECT_NE(r.report_json.find("no discriminative features"), std::string::npos);
  EXPECT_EQ(slurp(ArtifactLayout{dir.path()}.report()), r.report_json);
}

TEST(Study, ReportContents) {
  TempDir dir("rep");
  CohortConfig c = small_config(shared().subjects);
  c.alpha = 1.0;
  const StudyResult r = run_study(c, dir.path());
  ASSERT_EQ(r.status, "ok");
  ASSERT_TRUE(r.confusion.has_value());
  const Split split = resolve_split(c);
  EXPECT_EQ(r.confusion->total(), static_cast<int>(split.evaluation.size()));
  for (const char* key : {"\"tool\"", "\"config\"", "\"selected_features\"", "\"confusion\"", "\"metrics\"",
                          "\"subjects\"", "\"accuracy\"", "\"sensitivity\"", "\"specificity\""})
    EXPECT_NE(r.report_json.find(key), std::string::npos) << key;
  const std::string csv = report_to_csv(r.report_json);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + c.subjects.size());
  EXPECT_NE(report_to_text(r.report_json).find("accuracy"), std::string::npos);
  EXPECT_THROW(report_to_csv("{not json"), FormatError);
}

TEST(Study, StagedRunAndThreadsMatch) {
  TempDir dir("det");
  const CohortConfig c = small_config(shared().subjects);
  const StudyResult whole = run_study(c, dir / "whole", 1);
  const StudyResult threaded = run_study(c, dir / "threaded", 4);
  EXPECT_EQ(whole.report_json, threaded.report_json);

  const ArtifactLayout staged{dir / "staged"};
  stage_mesh(c, staged);
  stage_param(c, staged);
  stage_fit(c, staged);
  stage_features(c, staged);
  stage_select(c, staged);
  const StudyResult s = stage_classify(c, staged);
  EXPECT_EQ(s.report_json, whole.report_json);
  const ArtifactLayout a{dir / "whole"}, b{dir / "threaded"};
  EXPECT_EQ(slurp(a.features()), slurp(b.features()));
  EXPECT_EQ(slurp(a.features()), slurp(staged.features()));
  for (const auto& e : c.subjects)
    EXPECT_EQ(slurp(a.coeffs(e.id, Side::left)), slurp(b.coeffs(e.id, Side::left))) << e.id;

  // Re-running one stage from persisted inputs reproduces its output.
  const std::string before = slurp(staged.coeffs(c.subjects[0].id, Side::right));
  stage_fit(c, staged);
  EXPECT_EQ(slurp(staged.coeffs(c.subjects[0].id, Side::right)), before);
}

TEST(Study, FitWithoutParamReportsMissingParameterization) {
  TempDir dir("nofit");
  const CohortConfig c = small_config(shared().subjects);
  const ArtifactLayout out{dir.path()};
  stage_mesh(c, out);
  try {
    stage_fit(c, out);
    FAIL() << "expected a missing-input error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing parameterization"), std::string::npos) << e.what();
  }
}

#ifdef HIPPOASYM_CLI
TEST(Cli, RunExampleConfig) {
  TempDir dir("cli");
  const fs::path cfg = fs::path(HIPPOASYM_SOURCE_DIR) / "configs" / "example.ini";
  EXPECT_EQ(run_cli("--config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\" run", dir / "log"), 0)
      << slurp(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_EQ(run_cli("--out \"" + (dir / "out").string() + "\" report --format csv", dir / "csv"), 0);
  EXPECT_NE(slurp(dir / "csv").find("sub001"), std::string::npos);
}

TEST(Cli, FitWithoutParamFails) {
  TempDir dir("cli");
  const fs::path cfg = dir / "c.ini";
  write(cfg,
        "[cohort]\nsplit_seed = 1\nselection_size = 4\n[spharm]\nl_max = 4\n"
        "[synthetic]\nnormal = 4\nepileptic = 4\nbase_semi_axes_mm = 10,5,4\n");
  const std::string base = "--config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\" ";
  ASSERT_EQ(run_cli(base + "synth", dir / "log"), 0) << slurp(dir / "log");
  ASSERT_EQ(run_cli(base + "mesh", dir / "log"), 0) << slurp(dir / "log");
  EXPECT_NE(run_cli(base + "fit", dir / "log"), 0);
  EXPECT_NE(slurp(dir / "log").find("missing parameterization"), std::string::npos) << slurp(dir / "log");
}

TEST(Cli, UsageErrors) {
  TempDir dir("cli");
  EXPECT_NE(run_cli("--no-such-flag run", dir / "log"), 0);
  EXPECT_NE(run_cli("frobnicate", dir / "log"), 0);
  EXPECT_NE(run_cli("--config \"" + (dir / "absent.ini").string() + "\" run", dir / "log"), 0);
  EXPECT_NE(run_cli("--threads 0 run", dir / "log"), 0);
}
#endif
