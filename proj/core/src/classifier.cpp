#include "hippoasym/classifier.hpp"

#include "hippoasym/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace hippoasym {

namespace {

struct DualSolution {
  std::vector<double> alpha;
  double b = 0.0;
  double objective = 0.0;
  double gap = 0.0;
  long iterations = 0;
};

// SMO on min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, with maximal violating
// pair selection (lowest index on ties).
DualSolution smo(const Eigen::MatrixXd& k, const std::vector<int>& y, const SvmOptions& opt) {
  const int n = static_cast<int>(y.size());
  const double c = opt.c_param;
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q(i, j) = y[i] * y[j] * k(i, j);
  std::vector<double> a(n, 0.0), g(n, -1.0);
  auto in_up = [&](int t) { return (y[t] > 0 && a[t] < c) || (y[t] < 0 && a[t] > 0.0); };
  auto in_low = [&](int t) { return (y[t] < 0 && a[t] < c) || (y[t] > 0 && a[t] > 0.0); };

  DualSolution s;
  double gmax = 0.0, gmin = 0.0;
  for (long it = 0;; ++it) {
    int i = -1, j = -1;
    gmax = -std::numeric_limits<double>::infinity();
    gmin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      const double v = -y[t] * g[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    s.iterations = it;
    if (i < 0 || j < 0 || gmax - gmin < opt.kkt_tolerance) break;
    if (it >= opt.max_iterations)
      throw NumericalError("SMO did not converge in " + std::to_string(opt.max_iterations) +
                           " iterations; KKT gap " + std::to_string(gmax - gmin));
    const double ai = a[i], aj = a[j];
    if (y[i] != y[j]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = 1e-12;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }
    const double di = a[i] - ai, dj = a[j] - aj;
    for (int t = 0; t < n; ++t) g[t] += q(t, i) * di + q(t, j) * dj;
  }
  s.gap = std::max(0.0, gmax - gmin);

  // Bias from free vectors, else the middle of the feasible interval.
  double sum = 0.0;
  int free = 0;
  for (int t = 0; t < n; ++t)
    if (a[t] > 0.0 && a[t] < c) {
      sum += -y[t] * g[t];
      ++free;
    }
  s.b = free > 0 ? sum / free : 0.5 * (gmax + gmin);
  double obj = 0.0;
  for (int t = 0; t < n; ++t) obj += a[t] - 0.5 * a[t] * (g[t] + 1.0);
  s.objective = obj;
  s.alpha = std::move(a);
  return s;
}

std::vector<double> standardize(const LinearModel& m, const std::vector<double>& row) {
  std::vector<double> z(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) z[i] = m.active[i] ? (row[i] - m.mean[i]) / m.stddev[i] : 0.0;
  return z;
}

}  // namespace

double LinearModel::score(const std::vector<double>& row) const {
  if (row.size() != weights.size())
    throw PreconditionError("feature row has " + std::to_string(row.size()) + " values, model expects " +
                            std::to_string(weights.size()));
  const auto z = standardize(*this, row);
  double s = bias;
  for (std::size_t i = 0; i < z.size(); ++i) s += weights[i] * z[i];
  return s;
}

LinearModel train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  const SvmOptions& options, const std::vector<std::string>& names) {
  if (!(options.c_param > 0.0)) throw PreconditionError("SVM C must be positive");
  if (features.size() != labels.size()) throw PreconditionError("features and labels differ in length");
  if (features.empty()) throw PreconditionError("no training rows");
  const std::size_t n = features.size(), d = features.front().size();
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw PreconditionError("labels must be +1 or -1");
  }
  if (!pos || !neg) throw PreconditionError("training set has a single class");
  for (const auto& r : features) {
    if (r.size() != d) throw PreconditionError("ragged feature matrix");
    for (double v : r)
      if (!std::isfinite(v)) throw PreconditionError("non-finite training feature");
  }
  if (!names.empty() && names.size() != d) throw PreconditionError("feature name count mismatch");

  LinearModel m;
  m.c_param = options.c_param;
  m.feature_names = names;
  if (m.feature_names.empty())
    for (std::size_t i = 0; i < d; ++i) m.feature_names.push_back("f" + std::to_string(i));
  m.mean.assign(d, 0.0);
  m.stddev.assign(d, 1.0);
  m.active.assign(d, 1);
  for (std::size_t c = 0; c < d; ++c) {
    const double first = features[0][c];
    const bool constant = std::all_of(features.begin(), features.end(), [&](const auto& r) { return r[c] == first; });
    if (constant) {
      m.active[c] = 0;
      m.mean[c] = first;
      spdlog::warn("feature '{}' is constant on the training rows; dropped", m.feature_names[c]);
      continue;
    }
    double mu = 0.0;
    for (const auto& r : features) mu += r[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : features) var += (r[c] - mu) * (r[c] - mu);
    m.mean[c] = mu;
    m.stddev[c] = std::sqrt(var / static_cast<double>(n));
  }

  Eigen::MatrixXd z(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = standardize(m, features[r]);
    for (std::size_t c = 0; c < d; ++c) z(r, c) = row[c];
  }
  const Eigen::MatrixXd k = z * z.transpose();
  const DualSolution s = smo(k, labels, options);

  m.weights.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m.weights[c] += s.alpha[r] * labels[r] * z(r, c);
  m.bias = s.b;
  m.alpha = s.alpha;
  m.dual_objective = s.objective;
  m.kkt_gap = s.gap;
  m.iterations = s.iterations;
  return m;
}

Prediction predict(const LinearModel& model, const std::vector<double>& row) {
  Prediction p;
  p.score = model.score(row);
  p.label = p.score >= 0.0 ? 1 : -1;
  return p;
}

void ConfusionCounts::add(int truth, int predicted) {
  if (truth > 0) (predicted > 0 ? tp : fn)++;
  else (predicted > 0 ? fp : tn)++;
}

LoocvResult loocv(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  const SvmOptions& options) {
  const std::size_t n = features.size();
  if (n < 3) throw PreconditionError("leave-one-out needs at least 3 subjects");
  if (labels.size() != n) throw PreconditionError("features and labels differ in length");
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); }))
    throw PreconditionError("leave-one-out needs both classes");
  LoocvResult out;
  for (std::size_t held = 0; held < n; ++held) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t r = 0; r < n; ++r)
      if (r != held) {
        x.push_back(features[r]);
        y.push_back(labels[r]);
      }
    LinearModel model;
    try {
      model = train(x, y, options);
    } catch (const PreconditionError& e) {
      throw PreconditionError("leave-one-out fold " + std::to_string(held) + ": " + e.what());
    }
    const Prediction p = predict(model, features[held]);
    out.confusion.add(labels[held], p.label);
    out.predictions.push_back(p);
  }
  return out;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  if (c.total() > 0) m.accuracy = 100.0 * (c.tp + c.tn) / c.total();
  if (c.tp + c.fn > 0) m.sensitivity = 100.0 * c.tp / (c.tp + c.fn);
  if (c.fp + c.tn > 0) m.specificity = 100.0 * c.tn / (c.fp + c.tn);
  return m;
}

void save_model_csv(const LinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "feature_name,weight,mean,std\n";
  for (std::size_t i = 0; i < model.weights.size(); ++i)
    out << model.feature_names[i] << ',' << model.weights[i] << ',' << model.mean[i] << ','
        << (model.active[i] ? model.stddev[i] : 0.0) << '\n';
  out << "(bias)," << model.bias << ",,\n";
  out << "(c_param)," << model.c_param << ",,\n";
  if (!out) throw Error("write failed: " + path.string());
}

LinearModel load_model_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "feature_name,weight,mean,std")
    throw FormatError(path.string() + ": expected header feature_name,weight,mean,std");
  LinearModel m;
  bool have_bias = false;
  auto num = [&](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, w, mu, sd;
    std::getline(ss, name, ',');
    std::getline(ss, w, ',');
    std::getline(ss, mu, ',');
    std::getline(ss, sd);
    if (name == "(bias)") {
      m.bias = num(w);
      have_bias = true;
    } else if (name == "(c_param)") {
      m.c_param = num(w);
    } else {
      m.feature_names.push_back(name);
      m.weights.push_back(num(w));
      m.mean.push_back(num(mu));
      const double s = num(sd);
      m.active.push_back(s > 0.0 ? 1 : 0);
      m.stddev.push_back(s > 0.0 ? s : 1.0);
    }
  }
  if (!have_bias) throw FormatError(path.string() + ": missing (bias) row");
  return m;
}

}  // namespace hippoasym
