#include "hippoasym/error.hpp"
#include "hippoasym/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hippoasym;

namespace {

struct Globals {
  std::string config;
  std::string out = "hippoasym_out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string log_level = "info";
};

// Exit codes: 0 ok, 1 error, 2 usage, 3 some subjects failed.
constexpr int kExitError = 1;
constexpr int kExitSubjectFailures = 3;

CohortConfig read_config(const Globals& g) {
  if (g.config.empty()) throw PreconditionError("--config is required for this subcommand");
  if (!fs::exists(g.config)) throw PreconditionError("config not found: " + g.config);
  CohortConfig c = load_config(g.config);
  if (g.seed) {
    c.split.seed = *g.seed;
    if (c.synthetic) c.synthetic->seed = *g.seed;
  }
  return c;
}

fs::path cohort_dir(const Globals& g) { return fs::path(g.out) / "cohort"; }

CohortConfig synthesize(CohortConfig c, const Globals& g) {
  if (!c.synthetic) throw PreconditionError("config has no [synthetic] section");
  spdlog::info("generating {} synthetic subjects in {}", c.synthetic->normal_count + c.synthetic->epileptic_count,
               cohort_dir(g).string());
  c.subjects = generate_synthetic_cohort(*c.synthetic, cohort_dir(g));
  validate(c);
  save_config(c, cohort_dir(g) / "cohort.ini");
  return c;
}

// A config with only a [synthetic] section refers to the cohort under
// <out>/cohort, generated on first use.
CohortConfig cohort(const Globals& g) {
  CohortConfig c = read_config(g);
  if (!c.subjects.empty()) return c;
  if (!c.synthetic) throw PreconditionError("config lists no subjects and has no [synthetic] section");
  const fs::path ini = cohort_dir(g) / "cohort.ini";
  if (!fs::exists(ini)) return synthesize(std::move(c), g);
  c.subjects = load_config(ini).subjects;
  validate(c);
  return c;
}

int report_failures(const CohortConfig& c, const ArtifactLayout& out) {
  int failed = 0;
  for (const auto& s : c.subjects) {
    const fs::path f = out.failure(s.id);
    if (!fs::exists(f)) continue;
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    std::cerr << "subject " << s.id << " failed: " << ss.str();
    ++failed;
  }
  return failed == 0 ? 0 : kExitSubjectFailures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Left/right hippocampus asymmetry analysis from binary masks"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Cohort config (INI)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Overrides the synthetic and split seeds");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic cohort described by [synthetic]");
  auto* mesh = app.add_subcommand("mesh", "Masks to surface meshes");
  auto* param = app.add_subcommand("param", "Spherical parameterization of each mesh");
  auto* fitc = app.add_subcommand("fit", "SPHARM coefficients and power features");
  auto* feats = app.add_subcommand("features", "Shape features and the asymmetry feature matrix");
  auto* sel = app.add_subcommand("select", "t-test feature selection on the selection subset");
  auto* cls = app.add_subcommand("classify", "Leave-one-out SVM on the evaluation subset");
  auto* run = app.add_subcommand("run", "Every stage in order");
  auto* rep = app.add_subcommand("report", "Render report.json as a table or CSV");
  std::string format = "text";
  std::string report_path;
  rep->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
  rep->add_option("--input", report_path, "Report file (default <out>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("hippoasym"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  const ArtifactLayout out{g.out};
  try {
    if (synth->parsed()) {
      const CohortConfig c = synthesize(read_config(g), g);
      std::cout << "wrote " << c.subjects.size() << " subjects to " << (cohort_dir(g) / "cohort.ini").string() << '\n';
      return 0;
    }
    if (rep->parsed()) {
      const std::string json = slurp(report_path.empty() ? out.report() : fs::path(report_path));
      std::cout << (format == "csv" ? report_to_csv(json) : report_to_text(json));
      return 0;
    }
    const CohortConfig c = cohort(g);
    fs::create_directories(out.root);
    if (run->parsed()) {
      const StudyResult r = run_study(c, out.root, g.threads);
      std::cout << report_to_text(r.report_json);
      return report_failures(c, out);
    }
    if (mesh->parsed()) stage_mesh(c, out, g.threads);
    if (param->parsed()) stage_param(c, out, g.threads);
    if (fitc->parsed()) stage_fit(c, out, g.threads);
    if (feats->parsed()) stage_features(c, out, g.threads);
    if (sel->parsed()) {
      const SelectionResult s = stage_select(c, out);
      for (const auto& name : s.selected) std::cout << name << '\n';
    }
    if (cls->parsed()) std::cout << report_to_text(stage_classify(c, out).report_json);
    return report_failures(c, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
