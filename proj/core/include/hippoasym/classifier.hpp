#pragma once

#include "hippoasym/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hippoasym {

struct SvmOptions {
  double c_param = 1.0;
  /// Stop when the maximal KKT violation m(alpha) - M(alpha) falls below this.
  double kkt_tolerance = 1e-9;
  long max_iterations = 1000000;
};

/// Linear soft-margin SVM on z-scored features. Constant training columns get
/// weight 0 and unit scale.
struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;  ///< in standardized units
  double bias = 0.0;
  double c_param = 1.0;
  std::vector<double> mean;
  std::vector<double> stddev;  ///< population std; 1 for dropped columns
  std::vector<char> active;

  // Solver diagnostics.
  std::vector<double> alpha;
  double dual_objective = 0.0;
  double kkt_gap = 0.0;
  long iterations = 0;

  /// w . standardize(x) + b.
  double score(const std::vector<double>& row) const;
};

/// labels are +1 (epileptic) / -1 (normal).
LinearModel train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  const SvmOptions& options = {}, const std::vector<std::string>& names = {});

struct Prediction {
  int label = 1;
  double score = 0.0;
};

/// Ties (score == 0) go to the positive class.
Prediction predict(const LinearModel& model, const std::vector<double>& row);

struct ConfusionCounts {
  int tp = 0, tn = 0, fp = 0, fn = 0;
  int total() const { return tp + tn + fp + fn; }
  void add(int truth, int predicted);
  bool operator==(const ConfusionCounts&) const = default;
};

struct LoocvResult {
  ConfusionCounts confusion;
  std::vector<Prediction> predictions;  ///< per held-out row, input order
};

LoocvResult loocv(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  const SvmOptions& options = {});

/// Percentages; a metric whose denominator is zero is std::nullopt.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

Metrics metrics(const ConfusionCounts& c);

/// CSV: feature_name,weight,mean,std then a (bias) row and a (c_param) row.
void save_model_csv(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model_csv(const std::filesystem::path& path);

}  // namespace hippoasym
