#include "hippoasym/error.hpp"
#include "hippoasym/stats.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

using namespace hippoasym;
using namespace hippoasym::testing;

namespace {

// Simpson integration of the beta density after t = u^2, which keeps the
// integrand bounded at the origin for a >= 1/2.
double beta_cdf_simpson(double a, double b, double x) {
  const int n = 200000;
  const double lb = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto f = [&](double u) {
    if (u <= 0.0) return a == 0.5 ? 2.0 * std::exp(-lb) : 0.0;
    return 2.0 * std::exp((2 * a - 1) * std::log(u) + (b - 1) * std::log1p(-u * u) - lb);
  };
  const double h = std::sqrt(x) / n;
  double s = f(0.0) + f(std::sqrt(x));
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

const std::vector<std::string> kShapeNames{"max_diameter", "volume", "surface_area", "compactness", "mesh_size",
                                            "f1_moment", "f3_moment", "circumsphere_ratio", "curvature"};
const std::vector<double> kShapePvalues{0.7187, 2.54e-4, 0.7690, 0.7054, 0.0015, 2.38e-4, 0.5088, 0.6028, 0.075};

FeatureMatrix two_class(const std::vector<std::vector<double>>& norm, const std::vector<std::vector<double>>& epi,
                        std::vector<std::string> cols) {
  FeatureMatrix m;
  m.columns = std::move(cols);
  int id = 0;
  for (const auto& r : norm) {
    m.ids.push_back("n" + std::to_string(id++));
    m.labels.push_back(Label::normal);
    m.rows.push_back(r);
  }
  for (const auto& r : epi) {
    m.ids.push_back("e" + std::to_string(id++));
    m.labels.push_back(Label::epileptic);
    m.rows.push_back(r);
  }
  return m;
}

}  // namespace

TEST(IncompleteBeta, MatchesSimpson) {
  for (auto [a, b, x] : std::vector<std::array<double, 3>>{{2, 3, 0.4}, {0.5, 4, 0.2}, {4, 0.5, 0.9}, {7.5, 2.5, 0.6}})
    EXPECT_NEAR(regularized_incomplete_beta(a, b, x), beta_cdf_simpson(a, b, x), 1e-7) << a << " " << b << " " << x;
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
  EXPECT_THROW(regularized_incomplete_beta(-1, 3, 0.5), PreconditionError);
}

TEST(StudentT, MatchesSimpsonDensity) {
  for (double df : {1.0, 3.0, 8.0, 17.3})
    for (double t : {0.1, 1.0, 2.5, 4.0}) EXPECT_NEAR(student_t_two_sided_p(t, df), t_pvalue_simpson(t, df), 1e-8);
  EXPECT_EQ(student_t_two_sided_p(0.0, 5.0), 1.0);
}

TEST(Welch, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3};
  const TTestResult r = welch_ttest(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(Welch, ShiftedExample) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const TTestResult r = welch_ttest(a, b);
  EXPECT_NEAR(r.t, -1.0, 1e-12);
  EXPECT_NEAR(r.df, 8.0, 1e-12);
  EXPECT_NEAR(r.p, 0.3466, 1e-4);
  EXPECT_NEAR(r.p, t_pvalue_simpson(-1.0, 8.0), 1e-8);
  // Exhaustive relabeling (252 splits) instead of random resampling.
  // Ties at the observed |t| are heavy here; the strict tail alone is 0.444.
  EXPECT_NEAR(r.p, permutation_pvalue(a, b), 0.02);
}

TEST(Welch, SwapNegatesT) {
  const std::vector<double> a{1.5, 2.2, 3.9, 0.4}, b{2.0, 5.5, 4.1, 3.3, 6.0};
  const TTestResult ab = welch_ttest(a, b), ba = welch_ttest(b, a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
  EXPECT_DOUBLE_EQ(ab.t, welch_t_by_hand(a, b));
}

TEST(Welch, DegenerateVariances) {
  const std::vector<double> c{2, 2, 2}, d{5, 5, 5, 5};
  EXPECT_EQ(welch_ttest(c, c).p, 1.0);
  EXPECT_EQ(welch_ttest(c, d).p, 0.0);
  EXPECT_THROW(welch_ttest(std::vector<double>{1.0}, d), PreconditionError);
  EXPECT_THROW(welch_ttest(std::vector<double>{1.0, std::nan("")}, d), PreconditionError);
}

TEST(Welch, AgreesWithPermutationOnRandomFixtures) {
  std::mt19937 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + 0.4 * trial;
    EXPECT_NEAR(welch_ttest(a, b).p, permutation_pvalue(a, b), 0.05) << "trial " << trial;
  }
}

TEST(SelectByPvalues, ThresholdExample) {
  const SelectionResult r = select_by_pvalues(kShapeNames, kShapePvalues, 0.05);
  EXPECT_EQ(r.selected, (std::vector<std::string>{"volume", "mesh_size", "f1_moment"}));
  EXPECT_EQ(r.tested_count(), 9u);
}

TEST(SelectFeatures, PlantedColumnAndAlpha) {
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> norm, epi;
  for (int i = 0; i < 6; ++i) norm.push_back({g(rng), 10.0 + g(rng), g(rng)});
  for (int i = 0; i < 6; ++i) epi.push_back({g(rng), 20.0 + g(rng), g(rng)});
  const FeatureMatrix m = two_class(norm, epi, {"noise_a", "planted", "noise_b"});
  const SelectionResult r = select_features(m, 0.05);
  ASSERT_EQ(r.tests.size(), 3u);
  EXPECT_LT(r.tests[1].p, 1e-4);
  EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), "planted"), r.selected.end());
  const SelectionResult all = select_features(m, 1.0);
  EXPECT_EQ(all.selected, m.columns);
  EXPECT_TRUE(select_features(m, 0.0).selected.empty());
}

TEST(SelectFeatures, DegenerateColumnsReportedNotSelected) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const FeatureMatrix m =
      two_class({{1.0, 3.0, nan}, {1.0, 3.5, 1.0}}, {{1.0, 9.0, 2.0}, {1.0, 9.5, 2.5}}, {"const", "good", "has_nan"});
  const SelectionResult r = select_features(m, 1.0);
  EXPECT_TRUE(r.tests[0].usable);
  EXPECT_EQ(r.tests[0].p, 1.0);
  EXPECT_FALSE(r.tests[2].usable);
  EXPECT_TRUE(std::isnan(r.tests[2].p));
  // A constant column is degenerate: reported with p = 1, never selected.
  EXPECT_EQ(r.selected, (std::vector<std::string>{"good"}));
  EXPECT_EQ(r.tested_count(), 2u);
}

TEST(SelectFeatures, NeedsTwoPerClass) {
  const FeatureMatrix m = two_class({{1.0}}, {{2.0}, {3.0}}, {"x"});
  EXPECT_THROW(select_features(m), PreconditionError);
}

TEST(FeatureMatrix, SelectAndCsvRoundTrip) {
  TempDir dir("stats");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const FeatureMatrix m = two_class({{1.0, 0.1 + 0.2, nan}, {2.0, 1e-300, 4.0}}, {{3.0, -5.5, 6.0}}, {"a", "b", "c"});
  const FeatureMatrix cols = m.select_columns({"c", "a"});
  EXPECT_EQ(cols.columns, (std::vector<std::string>{"c", "a"}));
  EXPECT_EQ(cols.rows[2], (std::vector<double>{6.0, 3.0}));
  const FeatureMatrix rows = m.select_rows({2, 0});
  EXPECT_EQ(rows.ids, (std::vector<std::string>{m.ids[2], m.ids[0]}));
  EXPECT_THROW(m.select_columns({"zzz"}), PreconditionError);

  save_feature_matrix_csv(m, dir / "f.csv");
  const FeatureMatrix back = load_feature_matrix_csv(dir / "f.csv");
  EXPECT_EQ(back.columns, m.columns);
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.labels, m.labels);
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      if (std::isnan(m.rows[i][j])) EXPECT_TRUE(std::isnan(back.rows[i][j]));
      else EXPECT_EQ(back.rows[i][j], m.rows[i][j]);
    }
}

TEST(Selection, CsvRoundTrip) {
  TempDir dir("stats");
  const SelectionResult r = select_by_pvalues(kShapeNames, kShapePvalues, 0.05);
  save_selection_csv(r, dir / "s.csv");
  const SelectionResult back = load_selection_csv(dir / "s.csv");
  EXPECT_EQ(back.selected, r.selected);
  ASSERT_EQ(back.tests.size(), r.tests.size());
  for (std::size_t i = 0; i < r.tests.size(); ++i) EXPECT_EQ(back.tests[i].p, r.tests[i].p);
}

TEST(Labels, Parse) {
  EXPECT_EQ(label_from_string("epileptic"), Label::epileptic);
  EXPECT_EQ(label_from_string("normal"), Label::normal);
  EXPECT_THROW(label_from_string("tle"), std::invalid_argument);
  EXPECT_EQ(to_sign(Label::epileptic), 1);
  EXPECT_EQ(to_sign(Label::normal), -1);
}
