#include "hippoasym/stats.hpp"

#include "hippoasym/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace hippoasym {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance
};

// Constant samples report exactly their value and zero variance, so equal
// constant columns compare as equal regardless of summation rounding.
Moments moments(std::span<const double> x) {
  Moments m;
  const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  if (constant) {
    m.mean = x.front();
    return m;
  }
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  return m;
}

}  // namespace

Label label_from_string(std::string_view s) {
  if (s == "normal") return Label::normal;
  if (s == "epileptic") return Label::epileptic;
  throw std::invalid_argument("unknown label '" + std::string(s) + "' (expected normal or epileptic)");
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw PreconditionError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw PreconditionError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw PreconditionError("t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) throw PreconditionError("t statistic is NaN");
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("welch_ttest needs at least 2 samples per group");
  for (double v : a)
    if (!std::isfinite(v)) throw PreconditionError("welch_ttest: non-finite sample");
  for (double v : b)
    if (!std::isfinite(v)) throw PreconditionError("welch_ttest: non-finite sample");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const Moments ma = moments(a), mb = moments(b);
  const double va = ma.var / n1, vb = mb.var / n2;
  const double se2 = va + vb;
  TTestResult r;
  if (se2 == 0.0) {
    r.df = n1 + n2 - 2.0;
    if (ma.mean == mb.mean) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma.mean > mb.mean ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma.mean - mb.mean) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (n1 - 1.0) + vb * vb / (n2 - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& names) const {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) index.emplace(columns[i], i);
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto it = index.find(n);
    if (it == index.end()) throw PreconditionError("unknown feature column '" + n + "'");
    cols.push_back(it->second);
  }
  FeatureMatrix out;
  out.columns = names;
  out.ids = ids;
  out.labels = labels;
  for (const auto& r : rows) {
    std::vector<double> row;
    row.reserve(cols.size());
    for (auto c : cols) row.push_back(r[c]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.columns = columns;
  for (auto i : indices) {
    out.ids.push_back(ids.at(i));
    out.labels.push_back(labels.at(i));
    out.rows.push_back(rows.at(i));
  }
  return out;
}

void validate(const FeatureMatrix& m) {
  if (m.ids.size() != m.rows.size() || m.labels.size() != m.rows.size())
    throw PreconditionError("feature matrix: ids, labels and rows differ in length");
  for (const auto& r : m.rows)
    if (r.size() != m.columns.size()) throw PreconditionError("feature matrix: ragged row");
}

std::size_t SelectionResult::tested_count() const {
  return static_cast<std::size_t>(std::count_if(tests.begin(), tests.end(), [](const ColumnTest& t) { return t.usable; }));
}

SelectionResult select_features(const FeatureMatrix& matrix, double alpha) {
  validate(matrix);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must lie in [0, 1]");
  SelectionResult out;
  out.alpha = alpha;
  for (std::size_t c = 0; c < matrix.column_count(); ++c) {
    std::vector<double> normal, epileptic;
    bool usable = true;
    for (std::size_t r = 0; r < matrix.row_count(); ++r) {
      const double v = matrix.rows[r][c];
      if (!std::isfinite(v)) usable = false;
      (matrix.labels[r] == Label::normal ? normal : epileptic).push_back(v);
    }
    if (normal.size() < 2 || epileptic.size() < 2)
      throw PreconditionError("feature selection needs at least 2 subjects per class");
    ColumnTest t;
    t.name = matrix.columns[c];
    if (!usable) {
      t.usable = false;
      t.p = kNaN;
    } else {
      const TTestResult w = welch_ttest(epileptic, normal);
      t.p = w.p;
      t.t = w.t;
      t.selected = w.p < alpha;
    }
    if (t.selected) out.selected.push_back(t.name);
    out.tests.push_back(std::move(t));
  }
  return out;
}

SelectionResult select_by_pvalues(const std::vector<std::string>& names, const std::vector<double>& p_values,
                                  double alpha) {
  if (names.size() != p_values.size()) throw PreconditionError("names and p-values differ in length");
  SelectionResult out;
  out.alpha = alpha;
  for (std::size_t i = 0; i < names.size(); ++i) {
    ColumnTest t;
    t.name = names[i];
    t.p = p_values[i];
    t.usable = std::isfinite(p_values[i]);
    t.selected = t.usable && p_values[i] < alpha;
    if (t.selected) out.selected.push_back(t.name);
    out.tests.push_back(std::move(t));
  }
  return out;
}

void save_selection_csv(const SelectionResult& selection, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "feature_name,p_value,selected\n";
  for (const auto& t : selection.tests) {
    out << t.name << ',';
    if (t.usable) out << t.p;
    out << ',' << (t.selected ? 1 : 0) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

SelectionResult load_selection_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "feature_name,p_value,selected")
    throw FormatError(path.string() + ": expected header feature_name,p_value,selected");
  SelectionResult out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, p, sel;
    std::getline(ss, name, ',');
    std::getline(ss, p, ',');
    std::getline(ss, sel);
    ColumnTest t;
    t.name = name;
    try {
      t.usable = !p.empty();
      t.p = t.usable ? std::stod(p) : kNaN;
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad p-value for " + name);
    }
    if (sel != "0" && sel != "1") throw FormatError(path.string() + ": selected must be 0 or 1 for " + name);
    t.selected = sel == "1";
    if (t.selected) out.selected.push_back(t.name);
    out.tests.push_back(std::move(t));
  }
  return out;
}

void save_feature_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  validate(m);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "id,label";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.row_count(); ++r) {
    out << m.ids[r] << ',' << to_string(m.labels[r]);
    for (double v : m.rows[r]) {
      out << ',';
      if (std::isfinite(v)) out << v;
      else out << "nan";
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

FeatureMatrix load_feature_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::string x;
    std::istringstream ss(line);
    while (std::getline(ss, x, ',')) f.push_back(x);
    return f;
  };
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  auto header = split(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label")
    throw FormatError(path.string() + ": expected header id,label,...");
  FeatureMatrix m;
  m.columns.assign(header.begin() + 2, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != header.size()) throw FormatError(path.string() + ": row for " + f[0] + " has wrong field count");
    m.ids.push_back(f[0]);
    if (f[1] == "normal") m.labels.push_back(Label::normal);
    else if (f[1] == "epileptic") m.labels.push_back(Label::epileptic);
    else throw FormatError(path.string() + ": unknown label '" + f[1] + "'");
    std::vector<double> row;
    for (std::size_t i = 2; i < f.size(); ++i) {
      if (f[i] == "nan") {
        row.push_back(kNaN);
        continue;
      }
      try {
        row.push_back(std::stod(f[i]));
      } catch (const std::logic_error&) {
        throw FormatError(path.string() + ": bad number '" + f[i] + "'");
      }
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace hippoasym
