#include "hippoasym/spharm.hpp"

#include "hippoasym/error.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace hippoasym {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogEps = 1e-12;

void require_degree(int l_max) {
  if (l_max < 0) throw PreconditionError("l_max must be non-negative");
}

// cos(theta) and e^{i phi} of a unit vector; phi = 0 at the poles.
void sphere_angles(const Vec3& u, double& x, Complex& e) {
  x = std::clamp(u.z(), -1.0, 1.0);
  const double rho = std::hypot(u.x(), u.y());
  e = rho > 0.0 ? Complex(u.x() / rho, u.y() / rho) : Complex(1.0, 0.0);
}

// Real orthonormal basis row: P00; then per degree P_l0, sqrt2 P_lm cos, sqrt2 P_lm sin.
void real_basis_row(int l_max, const Vec3& u, std::vector<double>& table, double* row) {
  double x;
  Complex e;
  sphere_angles(u, x, e);
  table = normalized_legendre_table(l_max, x);
  std::vector<Complex> em(l_max + 1);
  em[0] = 1.0;
  for (int m = 1; m <= l_max; ++m) em[m] = em[m - 1] * e;
  for (int l = 0; l <= l_max; ++l) {
    const int base = l * l;
    row[base] = table[lm_index(l, 0)];
    for (int m = 1; m <= l; ++m) {
      const double p = std::numbers::sqrt2 * table[lm_index(l, m)];
      row[base + 2 * m - 1] = p * em[m].real();
      row[base + 2 * m] = p * em[m].imag();
    }
  }
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw FormatError(where + ": bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(where + ": bad number '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw FormatError(where + ": bad integer '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(where + ": bad integer '" + s + "'");
  }
}

}  // namespace

double legendre_plm(int l, int m, double x) {
  if (m < 0 || m > l) throw PreconditionError("legendre_plm requires 0 <= m <= l");
  if (!(std::abs(x) <= 1.0)) throw PreconditionError("legendre_plm requires |x| <= 1");
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0) * s;
  if (l == m) return pmm;
  double pm1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pm1;
  double pll = 0.0;
  for (int k = m + 2; k <= l; ++k) {
    pll = (x * (2.0 * k - 1.0) * pm1 - (k + m - 1.0) * pmm) / (k - m);
    pmm = pm1;
    pm1 = pll;
  }
  return pll;
}

std::vector<double> normalized_legendre_table(int l_max, double x) {
  require_degree(l_max);
  std::vector<double> p(lm_count(l_max), 0.0);
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  p[0] = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 1; m <= l_max; ++m)
    p[lm_index(m, m)] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[lm_index(m - 1, m - 1)];
  for (int m = 0; m < l_max; ++m) p[lm_index(m + 1, m)] = x * std::sqrt(2.0 * m + 3.0) * p[lm_index(m, m)];
  for (int m = 0; m <= l_max; ++m) {
    for (int l = m + 2; l <= l_max; ++l) {
      const double ll = static_cast<double>(l) * l, mm = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - mm) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      p[lm_index(l, m)] = a * (x * p[lm_index(l - 1, m)] - b * p[lm_index(l - 2, m)]);
    }
  }
  return p;
}

Complex ylm(int l, int m, double theta, double phi) {
  if (l < 0 || m < -l || m > l) throw PreconditionError("ylm requires -l <= m <= l");
  const int am = std::abs(m);
  const double p = normalized_legendre_table(l, std::cos(theta))[lm_index(l, am)];
  const Complex y = p * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

SpharmCoeffs SpharmCoeffs::zeros(int l_max) {
  require_degree(l_max);
  SpharmCoeffs c;
  c.l_max = l_max;
  c.coeffs.assign(lm_count(l_max), CVec3::Zero());
  return c;
}

double conjugate_symmetry_residual(const SpharmCoeffs& c) {
  double worst = 0.0;
  for (int l = 0; l <= c.l_max; ++l) {
    for (int m = 1; m <= l; ++m) {
      const CVec3& pos = c.at(l, m);
      const double norm = pos.norm();
      if (norm <= 1e-9) continue;
      const CVec3 expected = (m % 2 == 0 ? 1.0 : -1.0) * pos.conjugate();
      worst = std::max(worst, (c.at(l, -m) - expected).norm() / norm);
    }
  }
  return worst;
}

SpharmCoeffs fit_samples(const std::vector<Vec3>& points, const std::vector<Vec3>& params, int l_max,
                         const std::vector<double>& weights) {
  require_degree(l_max);
  if (points.size() != params.size()) throw PreconditionError("fit: point and parameter counts differ");
  if (!weights.empty() && weights.size() != points.size()) throw PreconditionError("fit: weight count mismatch");
  const int n = static_cast<int>(points.size());
  const int k = lm_count(l_max);
  if (n < k)
    throw PreconditionError("underdetermined SPHARM fit: " + std::to_string(n) + " samples for " + std::to_string(k) +
                            " coefficients per channel");

  Eigen::MatrixXd y(n, k);
  Eigen::MatrixXd x(n, 3);
  std::vector<double> table;
  std::vector<double> row(k);
  for (int i = 0; i < n; ++i) {
    real_basis_row(l_max, params[i], table, row.data());
    const double w = weights.empty() ? 1.0 : weights[i];
    for (int j = 0; j < k; ++j) y(i, j) = w * row[j];
    x.row(i) = w * points[i].transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(y);
  qr.setThreshold(1e-10);
  const auto& r = qr.matrixR();
  const double rmax = std::abs(r(0, 0));
  const double rmin = std::abs(r(k - 1, k - 1));
  if (qr.rank() < k) {
    const double cond = rmin > 0.0 ? rmax / rmin : std::numeric_limits<double>::infinity();
    throw NumericalError("rank-deficient SPHARM design matrix: rank " + std::to_string(qr.rank()) + " of " +
                         std::to_string(k) + ", condition estimate " + format_double(cond));
  }
  const Eigen::MatrixXd b = qr.solve(x);

  SpharmCoeffs c = SpharmCoeffs::zeros(l_max);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (int l = 0; l <= l_max; ++l) {
    const int base = l * l;
    for (int ch = 0; ch < 3; ++ch) c.at(l, 0)[ch] = Complex(b(base, ch), 0.0);
    for (int m = 1; m <= l; ++m) {
      for (int ch = 0; ch < 3; ++ch) {
        const Complex v = Complex(b(base + 2 * m - 1, ch), -b(base + 2 * m, ch)) * inv_sqrt2;
        c.at(l, m)[ch] = v;
        c.at(l, -m)[ch] = (m % 2 == 0 ? 1.0 : -1.0) * std::conj(v);
      }
    }
  }
  return c;
}

SpharmCoeffs fit(const TriangleMesh& mesh, const SphericalParam& param, int l_max, const FitOptions& options) {
  if (param.points.size() != mesh.vertex_count())
    throw PreconditionError("fit: parameterization does not match mesh vertex count");
  std::vector<double> weights;
  if (options.area_weighted) {
    weights.assign(mesh.vertex_count(), 0.0);
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
      const double a = face_area(mesh, f) / 3.0;
      for (int v : mesh.faces[f]) weights[v] += a;
    }
    for (auto& w : weights) w = std::sqrt(w);
  }
  return fit_samples(mesh.vertices, param.points, l_max, weights);
}

Vec3 reconstruct(const SpharmCoeffs& coeffs, double theta, double phi) {
  return reconstruct(coeffs, std::vector<Vec3>{from_spherical({theta, phi})}).front();
}

std::vector<Vec3> reconstruct(const SpharmCoeffs& coeffs, const std::vector<Vec3>& params) {
  const int l_max = coeffs.l_max;
  std::vector<Vec3> out;
  out.reserve(params.size());
  std::vector<Complex> em(l_max + 1);
  for (const auto& u : params) {
    double x;
    Complex e;
    sphere_angles(u, x, e);
    const std::vector<double> table = normalized_legendre_table(l_max, x);
    em[0] = 1.0;
    for (int m = 1; m <= l_max; ++m) em[m] = em[m - 1] * e;
    CVec3 sum = CVec3::Zero();
    for (int l = 0; l <= l_max; ++l) {
      for (int m = 0; m <= l; ++m) {
        const Complex y = table[lm_index(l, m)] * em[m];
        sum += coeffs.at(l, m) * y;
        if (m > 0) sum += coeffs.at(l, -m) * ((m % 2 == 0 ? 1.0 : -1.0) * std::conj(y));
      }
    }
    out.push_back(sum.real());
  }
  return out;
}

double reconstruction_rms(const TriangleMesh& mesh, const SphericalParam& param, const SpharmCoeffs& coeffs) {
  if (param.points.size() != mesh.vertex_count())
    throw PreconditionError("parameterization does not match mesh vertex count");
  const auto rec = reconstruct(coeffs, param.points);
  double sum = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) sum += (rec[i] - mesh.vertices[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(rec.size()));
}

Mat3 degree1_matrix(const SpharmCoeffs& coeffs) {
  if (coeffs.l_max < 1) throw PreconditionError("degree-1 coefficients required");
  const double k0 = std::sqrt(3.0 / (4.0 * kPi));
  const double k1 = std::sqrt(3.0 / (8.0 * kPi));
  const CVec3& cp = coeffs.at(1, 1);
  const CVec3& cm = coeffs.at(1, -1);
  const CVec3& c0 = coeffs.at(1, 0);
  // Y_1^0 = k0 z, Y_1^{+1} = -k1 (x + i y), Y_1^{-1} = k1 (x - i y).
  Mat3 a;
  a.col(0) = (k1 * (cm - cp)).real();
  a.col(1) = (k1 * (cp + cm)).imag();
  a.col(2) = (k0 * c0).real();
  return a;
}

SpharmCoeffs align(const SpharmCoeffs& coeffs) {
  const Mat3 a = degree1_matrix(coeffs);
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();  // descending
  if (!(s[0] > 0.0) || (s[0] - s[1]) <= 1e-6 * s[0] || (s[1] - s[2]) <= 1e-6 * s[0])
    throw NumericalError("alignment ambiguous: degree-1 semi-axes " + format_double(s[2]) + ", " +
                         format_double(s[1]) + ", " + format_double(s[0]));
  const Mat3& u = svd.matrixU();
  Mat3 r;
  r.row(0) = u.col(2).transpose();
  r.row(1) = u.col(1).transpose();
  r.row(2) = u.col(0).transpose();
  auto first_sign = [&](int i) {
    const Eigen::RowVector3d row = r.row(i) * a;
    for (int j = 0; j < 3; ++j)
      if (std::abs(row[j]) > 1e-8 * s[0]) return row[j] < 0.0 ? -1.0 : 1.0;
    return 1.0;
  };
  r.row(0) *= first_sign(0);
  r.row(2) *= first_sign(2);
  if (r.determinant() < 0.0) r.row(1) *= -1.0;

  SpharmCoeffs out = coeffs;
  const Eigen::Matrix3cd rc = r.cast<Complex>();
  for (auto& c : out.coeffs) c = rc * c;
  out.at(0, 0) = CVec3::Zero();
  return out;
}

std::string to_string(FeatureVariant v) { return v == FeatureVariant::per_lm ? "per_lm" : "per_degree"; }

FeatureVariant feature_variant_from_string(const std::string& s) {
  if (s == "per_lm") return FeatureVariant::per_lm;
  if (s == "per_degree") return FeatureVariant::per_degree;
  throw PreconditionError("unknown SPHARM feature variant '" + s + "' (expected per_lm or per_degree)");
}

std::vector<std::string> SpharmFeatureVector::names() const {
  std::vector<std::string> out;
  if (variant == FeatureVariant::per_lm) {
    for (int l = 0; l <= l_max; ++l)
      for (int m = -l; m <= l; ++m) out.push_back("spharm_l" + std::to_string(l) + "_m" + std::to_string(m));
  } else {
    for (int l = 0; l <= l_max; ++l) out.push_back("spharm_l" + std::to_string(l));
  }
  return out;
}

SpharmFeatureVector power_features(const SpharmCoeffs& coeffs, FeatureVariant variant) {
  SpharmFeatureVector f;
  f.variant = variant;
  f.l_max = coeffs.l_max;
  if (variant == FeatureVariant::per_lm) {
    f.values.reserve(coeffs.coeffs.size());
    for (const auto& c : coeffs.coeffs) f.values.push_back(c.norm());
  } else {
    for (int l = 0; l <= coeffs.l_max; ++l) {
      double sum = 0.0;
      for (int m = -l; m <= l; ++m) sum += coeffs.at(l, m).squaredNorm();
      f.values.push_back(std::sqrt(sum));
    }
  }
  return f;
}

std::string to_string(AsymmetryMode m) { return m == AsymmetryMode::log_ratio ? "log_ratio" : "log_diff"; }

AsymmetryMode asymmetry_mode_from_string(const std::string& s) {
  if (s == "log_ratio") return AsymmetryMode::log_ratio;
  if (s == "log_diff") return AsymmetryMode::log_diff;
  throw PreconditionError("unknown asymmetry mode '" + s + "' (expected log_ratio or log_diff)");
}

std::vector<double> asymmetry_features(const SpharmFeatureVector& left, const SpharmFeatureVector& right,
                                       AsymmetryMode mode) {
  if (left.values.size() != right.values.size() || left.variant != right.variant)
    throw PreconditionError("asymmetry_features: left and right feature vectors differ in length or variant");
  std::vector<double> out(left.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double nl = std::log(std::max(left.values[i], kLogEps));
    const double nr = std::log(std::max(right.values[i], kLogEps));
    if (mode == AsymmetryMode::log_diff) {
      out[i] = nl - nr;
    } else if (std::abs(nr) < 1e-9) {
      out[i] = std::abs(nl) < 1e-9 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    } else {
      out[i] = nl / nr;
    }
  }
  return out;
}

void save_coeffs_csv(const SpharmCoeffs& coeffs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "l,m,re_x,im_x,re_y,im_y,re_z,im_z\n";
  for (int l = 0; l <= coeffs.l_max; ++l) {
    for (int m = -l; m <= l; ++m) {
      const CVec3& c = coeffs.at(l, m);
      out << l << ',' << m;
      for (int ch = 0; ch < 3; ++ch) out << ',' << c[ch].real() << ',' << c[ch].imag();
      out << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

SpharmCoeffs load_coeffs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "l,m,re_x,im_x,re_y,im_y,re_z,im_z")
    throw FormatError(path.string() + ": expected header l,m,re_x,im_x,re_y,im_y,re_z,im_z");
  std::vector<CVec3> values;
  int expect_l = 0, expect_m = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_csv(line);
    if (f.size() != 8) throw FormatError(where + ": expected 8 fields");
    if (parse_int(f[0], where) != expect_l || parse_int(f[1], where) != expect_m)
      throw FormatError(where + ": coefficients must be listed in (l, m) order");
    CVec3 c;
    for (int ch = 0; ch < 3; ++ch) c[ch] = Complex(parse_double(f[2 + 2 * ch], where), parse_double(f[3 + 2 * ch], where));
    values.push_back(c);
    if (++expect_m > expect_l) {
      ++expect_l;
      expect_m = -expect_l;
    }
  }
  if (values.empty() || expect_m != -expect_l) throw FormatError(path.string() + ": incomplete coefficient table");
  SpharmCoeffs c;
  c.l_max = expect_l - 1;
  c.coeffs = std::move(values);
  return c;
}

void save_features_csv(const SpharmFeatureVector& features, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "index,l,m,value\n";
  if (features.variant == FeatureVariant::per_lm) {
    int i = 0;
    for (int l = 0; l <= features.l_max; ++l)
      for (int m = -l; m <= l; ++m, ++i) out << i << ',' << l << ',' << m << ',' << features.values[i] << '\n';
  } else {
    for (int l = 0; l <= features.l_max; ++l) out << l << ',' << l << ",," << features.values[l] << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

SpharmFeatureVector load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "index,l,m,value")
    throw FormatError(path.string() + ": expected header index,l,m,value");
  SpharmFeatureVector f;
  bool first = true;
  int max_l = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto fields = split_csv(line);
    if (fields.size() != 4) throw FormatError(where + ": expected 4 fields");
    const bool per_degree = fields[2].empty();
    if (first) f.variant = per_degree ? FeatureVariant::per_degree : FeatureVariant::per_lm;
    else if (per_degree != (f.variant == FeatureVariant::per_degree))
      throw FormatError(where + ": mixed feature variants");
    first = false;
    if (parse_int(fields[0], where) != static_cast<int>(f.values.size()))
      throw FormatError(where + ": indices must be consecutive");
    max_l = std::max(max_l, parse_int(fields[1], where));
    f.values.push_back(parse_double(fields[3], where));
  }
  f.l_max = max_l;
  const std::size_t expected =
      f.variant == FeatureVariant::per_lm ? static_cast<std::size_t>(lm_count(max_l)) : static_cast<std::size_t>(max_l + 1);
  if (max_l < 0 || f.values.size() != expected) throw FormatError(path.string() + ": incomplete feature table");
  return f;
}

}  // namespace hippoasym
