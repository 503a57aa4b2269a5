#include "hippoasym/classifier.hpp"
#include "hippoasym/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace hippoasym;
using namespace hippoasym::testing;

namespace {

std::vector<std::vector<double>> rows_of(const SvmFixture& f) {
  std::vector<std::vector<double>> r;
  for (const auto& p : f.x) r.push_back({p[0], p[1]});
  return r;
}

SvmOptions with_c(double c) {
  SvmOptions o;
  o.c_param = c;
  return o;
}

}  // namespace

TEST(Train, SymmetricPairBoundaryAtZero) {
  const LinearModel m = train({{-1.0}, {1.0}}, {-1, 1}, with_c(1e3));
  EXPECT_NEAR(m.score({0.0}), 0.0, 1e-9);
  EXPECT_EQ(predict(m, {0.5}).label, 1);
  EXPECT_EQ(predict(m, {-0.5}).label, -1);
  EXPECT_GT(predict(m, {1e-3}).score, 0.0);
  EXPECT_LT(predict(m, {-1e-3}).score, 0.0);
}

TEST(Train, DualObjectiveMatchesBruteForcePrimal) {
  for (const SvmFixture& f : svm_fixtures()) {
    const LinearModel m = train(rows_of(f), f.y, with_c(f.c));
    const double oracle = svm_primal_bruteforce(f.x, f.y, f.c);
    EXPECT_NEAR(m.dual_objective, oracle, 1e-4 * std::max(1.0, std::abs(oracle))) << f.name;
    EXPECT_LE(m.kkt_gap, 1e-6) << f.name;
  }
}

// Duplicating every row doubles the effective C, so the decision function
// is unchanged exactly when no multiplier sits at its bound.
TEST(Train, DuplicationInvariance) {
  int checked = 0;
  for (const SvmFixture& f : svm_fixtures()) {
    auto rows = rows_of(f);
    auto y = f.y;
    const LinearModel a = train(rows, y, with_c(f.c));
    if (*std::max_element(a.alpha.begin(), a.alpha.end()) >= f.c * (1.0 - 1e-9)) continue;
    ++checked;
    const std::size_t n = rows.size();
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(rows[i]);
      y.push_back(y[i]);
    }
    const LinearModel b = train(rows, y, with_c(f.c));
    for (double u : {-1.0, 0.3, 2.0, 5.0})
      for (double v : {-2.0, 0.0, 1.7}) EXPECT_NEAR(a.score({u, v}), b.score({u, v}), 1e-9) << f.name;
  }
  EXPECT_GE(checked, 2);
}

TEST(Train, MarginMatchesHyperplaneSearch) {
  // Separable 4-point fixture with a hard margin: the primal optimum is
  // 0.5 |w|^2 = 0.5 / margin^2 in standardized units.
  const SvmFixture f = svm_fixtures()[0];
  const LinearModel m = train(rows_of(f), f.y, with_c(f.c));
  double w2 = 0.0;
  for (double w : m.weights) w2 += w * w;
  EXPECT_NEAR(0.5 * w2, svm_primal_bruteforce(f.x, f.y, f.c), 1e-4);
  for (std::size_t i = 0; i < f.x.size(); ++i)
    EXPECT_GE(f.y[i] * m.score({f.x[i][0], f.x[i][1]}), 1.0 - 1e-6);
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train({{1.0}, {2.0}}, {1, 1}), PreconditionError);
  EXPECT_THROW(train({{1.0}, {2.0}}, {1, 0}), PreconditionError);
  EXPECT_THROW(train({{1.0}, {std::nan("")}}, {1, -1}), PreconditionError);
  EXPECT_THROW(train({{1.0}, {2.0, 3.0}}, {1, -1}), PreconditionError);
  EXPECT_THROW(train({{1.0}, {2.0}}, {1, -1}, with_c(0.0)), PreconditionError);
}

TEST(Train, IterationCapReportsGap) {
  const SvmFixture f = svm_fixtures()[2];
  SvmOptions o = with_c(f.c);
  o.max_iterations = 1;
  try {
    train(rows_of(f), f.y, o);
    FAIL() << "expected non-convergence";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("gap"), std::string::npos) << e.what();
  }
}

TEST(Predict, MeanVectorScoresBias) {
  const SvmFixture f = svm_fixtures()[5];
  const LinearModel m = train(rows_of(f), f.y, with_c(f.c));
  EXPECT_NEAR(m.score(m.mean), m.bias, 1e-12);
}

TEST(Predict, TieGoesPositive) {
  LinearModel m;
  m.weights = {0.0};
  m.mean = {0.0};
  m.stddev = {1.0};
  m.active = {1};
  m.bias = 0.0;
  const Prediction p = predict(m, {3.0});
  EXPECT_EQ(p.score, 0.0);
  EXPECT_EQ(p.label, 1);
  EXPECT_THROW(predict(m, {1.0, 2.0}), PreconditionError);
}

TEST(Predict, ConstantColumnIsInactive) {
  const LinearModel m = train({{5.0, -1.0}, {5.0, 1.0}, {5.0, 2.0}}, {-1, 1, 1}, with_c(10.0));
  EXPECT_FALSE(m.active[0]);
  EXPECT_EQ(m.weights[0], 0.0);
  EXPECT_EQ(predict(m, {100.0, 1.0}).label, predict(m, {5.0, 1.0}).label);
}

TEST(Loocv, SeparablePlantedFeature) {
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 13; ++i) {
    const int label = i < 10 ? 1 : -1;
    x.push_back({label * 5.0 + 0.3 * g(rng), g(rng)});
    y.push_back(label);
  }
  const LoocvResult r = loocv(x, y);
  EXPECT_EQ(r.confusion.tp + r.confusion.tn, 13);
  EXPECT_EQ(r.confusion.fp + r.confusion.fn, 0);
  EXPECT_EQ(r.predictions.size(), 13u);
  EXPECT_EQ(r.confusion.total(), 13);
}

TEST(Loocv, FoldTrainsOnTheRest) {
  // Held-out prediction equals a model trained without that row.
  const SvmFixture f = svm_fixtures()[5];
  const auto rows = rows_of(f);
  const LoocvResult r = loocv(rows, f.y, with_c(f.c));
  for (std::size_t held = 0; held < rows.size(); ++held) {
    std::vector<std::vector<double>> tr;
    std::vector<int> ty;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (i != held) {
        tr.push_back(rows[i]);
        ty.push_back(f.y[i]);
      }
    const Prediction p = predict(train(tr, ty, with_c(f.c)), rows[held]);
    EXPECT_EQ(r.predictions[held].score, p.score);
  }
}

TEST(Loocv, Errors) {
  EXPECT_THROW(loocv({{1.0}, {2.0}, {3.0}}, {1, 1, 1}), PreconditionError);
  EXPECT_THROW(loocv({{1.0}, {2.0}}, {1, -1}), PreconditionError);
  // The single negative row leaves its fold with one class.
  EXPECT_THROW(loocv({{1.0}, {2.0}, {3.0}}, {1, 1, -1}), PreconditionError);
}

TEST(Metrics, Examples) {
  ConfusionCounts c{8, 3, 0, 2};
  Metrics m = metrics(c);
  EXPECT_NEAR(*m.accuracy, 84.615384615, 1e-6);
  EXPECT_NEAR(*m.sensitivity, 80.0, 1e-12);
  EXPECT_NEAR(*m.specificity, 100.0, 1e-12);
  m = metrics(ConfusionCounts{0, 0, 0, 5});
  EXPECT_EQ(*m.accuracy, 0.0);
  EXPECT_EQ(*m.sensitivity, 0.0);
  EXPECT_FALSE(m.specificity.has_value());
  m = metrics(ConfusionCounts{4, 7, 0, 0});
  EXPECT_EQ(*m.accuracy, 100.0);
  EXPECT_EQ(*m.sensitivity, 100.0);
  EXPECT_EQ(*m.specificity, 100.0);
  m = metrics(ConfusionCounts{});
  EXPECT_FALSE(m.accuracy.has_value());
}

TEST(Confusion, Add) {
  ConfusionCounts c;
  c.add(1, 1);
  c.add(1, -1);
  c.add(-1, -1);
  c.add(-1, 1);
  EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 1}));
}

TEST(Model, CsvRoundTrip) {
  TempDir dir("svm");
  const SvmFixture f = svm_fixtures()[2];
  const LinearModel m = train(rows_of(f), f.y, with_c(f.c), {"a", "b"});
  save_model_csv(m, dir / "m.csv");
  const LinearModel back = load_model_csv(dir / "m.csv");
  EXPECT_EQ(back.feature_names, m.feature_names);
  EXPECT_EQ(back.c_param, m.c_param);
  for (double u : {-1.0, 0.5, 3.0}) EXPECT_EQ(back.score({u, 2 * u}), m.score({u, 2 * u}));
}
