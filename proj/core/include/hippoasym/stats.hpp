#pragma once

#include "hippoasym/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hippoasym {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Welch's unequal-variance two-sample t-test, two-sided.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

/// Subjects by named feature columns. Unusable entries are NaN.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::vector<std::vector<double>> rows;

  std::size_t row_count() const { return rows.size(); }
  std::size_t column_count() const { return columns.size(); }
  std::vector<double> column(std::size_t c) const;
  /// Rows restricted to the named columns, in that order.
  FeatureMatrix select_columns(const std::vector<std::string>& names) const;
  FeatureMatrix select_rows(const std::vector<std::size_t>& indices) const;
};

void validate(const FeatureMatrix& m);

struct ColumnTest {
  std::string name;
  double p = 1.0;  ///< NaN for unusable columns
  double t = 0.0;
  bool usable = true;
  bool selected = false;
};

struct SelectionResult {
  double alpha = 0.05;
  std::vector<ColumnTest> tests;     ///< every input column, input order
  std::vector<std::string> selected; ///< p < alpha, input order

  std::size_t tested_count() const;
};

/// Welch test of every usable column between normal and epileptic rows.
SelectionResult select_features(const FeatureMatrix& matrix, double alpha = 0.05);

/// Threshold rule alone on precomputed p-values.
SelectionResult select_by_pvalues(const std::vector<std::string>& names, const std::vector<double>& p_values,
                                  double alpha = 0.05);

/// CSV: feature_name,p_value,selected (p_value empty for unusable columns).
void save_selection_csv(const SelectionResult& selection, const std::filesystem::path& path);
SelectionResult load_selection_csv(const std::filesystem::path& path);

/// CSV: id,label,<columns...>.
void save_feature_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix_csv(const std::filesystem::path& path);

}  // namespace hippoasym
