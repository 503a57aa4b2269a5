#pragma once

#include "hippoasym/mesher.hpp"
#include "hippoasym/volgrid.hpp"

#include <cmath>
#include <array>
#include <filesystem>
#include <random>
#include <string>

namespace hippoasym::testing {

inline VoxelMask ball_mask(double r, double spacing = 1.0) {
  return gen_ellipsoid(Vec3(r, r, r), Vec3::Zero(), Vec3::Constant(spacing));
}

inline TriangleMesh ball_mesh(double r) { return marching_cubes(ball_mask(r)); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hippoasym_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct QuadNode {
  double theta, phi, weight;
};

// Product rule on S^2: Gauss-Legendre in cos(theta) (Newton on the
// three-term recurrence), uniform in phi. Exact for band limits below n.
inline std::vector<QuadNode> sphere_quadrature(int n) {
  const double pi = 3.14159265358979323846;
  std::vector<QuadNode> out;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    for (int j = 0; j < 2 * n; ++j)
      out.push_back({std::acos(x), 2.0 * pi * j / (2 * n), w * pi / n});
  }
  return out;
}

// Two-sided Student t p-value by composite Simpson integration of the density
// on [0, |t|].
inline double t_pvalue_simpson(double t, double df, int intervals = 200000) {
  const double pi = 3.14159265358979323846;
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * pi);
  auto f = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const double a = 0.0, b = std::abs(t);
  if (b == 0.0) return 1.0;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return 1.0 - 2.0 * s * h / 3.0;
}

inline double welch_t_by_hand(const std::vector<double>& a, const std::vector<double>& b) {
  auto mv = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= x.size();
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair{m, s / (x.size() - 1)};
  };
  const auto [ma, va] = mv(a);
  const auto [mb, vb] = mv(b);
  return (ma - mb) / std::sqrt(va / a.size() + vb / b.size());
}

// Exhaustive permutation p-value of |Welch t| over all relabelings that keep
// the group sizes.
// Exhaustive relabeling test on |t|. Relabelings tied with the observed
// statistic count half (mid-p), so integer-valued fixtures with many ties
// are comparable to the continuous t reference.
inline double permutation_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const int n = static_cast<int>(all.size()), k = static_cast<int>(a.size());
  const double observed = std::abs(welch_t_by_hand(a, b));
  const double slack = 1e-12 * std::max(1.0, observed);
  double count = 0.0;
  long long total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? x : y).push_back(all[i]);
    ++total;
    const double t = std::abs(welch_t_by_hand(x, y));
    if (t > observed + slack) count += 1.0;
    else if (t >= observed - slack) count += 0.5;
  }
  return count / static_cast<double>(total);
}

// Soft-margin primal 0.5|w|^2 + C sum hinge on z-scored (population std)
// 2-D points, minimized by a shrinking grid over (w1, w2, b).
inline double svm_primal_bruteforce(std::vector<std::array<double, 2>> x, const std::vector<int>& y, double c) {
  const std::size_t n = x.size();
  for (int d = 0; d < 2; ++d) {
    double m = 0.0, s = 0.0;
    for (const auto& p : x) m += p[d];
    m /= n;
    for (const auto& p : x) s += (p[d] - m) * (p[d] - m);
    s = std::sqrt(s / n);
    for (auto& p : x) p[d] = s > 0.0 ? (p[d] - m) / s : 0.0;
  }
  auto primal = [&](double w1, double w2, double b) {
    double v = 0.5 * (w1 * w1 + w2 * w2);
    for (std::size_t i = 0; i < n; ++i) v += c * std::max(0.0, 1.0 - y[i] * (w1 * x[i][0] + w2 * x[i][1] + b));
    return v;
  };
  double cw1 = 0.0, cw2 = 0.0, cb = 0.0, span = 20.0, best = primal(0, 0, 0);
  const int g = 24;
  for (int round = 0; round < 60; ++round) {
    double bw1 = cw1, bw2 = cw2, bb = cb;
    for (int i = -g; i <= g; ++i)
      for (int j = -g; j <= g; ++j)
        for (int k = -g; k <= g; ++k) {
          const double w1 = cw1 + span * i / g, w2 = cw2 + span * j / g, b = cb + span * k / g;
          const double v = primal(w1, w2, b);
          if (v < best) {
            best = v;
            bw1 = w1;
            bw2 = w2;
            bb = b;
          }
        }
    cw1 = bw1;
    cw2 = bw2;
    cb = bb;
    span *= 0.6;
  }
  return best;
}

struct SvmFixture {
  std::string name;
  std::vector<std::array<double, 2>> x;
  std::vector<int> y;
  double c;
};

// Small 2-D problems: separable, overlapping and degenerate-margin cases.
inline std::vector<SvmFixture> svm_fixtures() {
  return {
      {"separable4", {{0, 0}, {1, 0}, {3, 2}, {4, 3}}, {-1, -1, 1, 1}, 10.0},
      {"separable4_softC", {{0, 0}, {1, 0}, {3, 2}, {4, 3}}, {-1, -1, 1, 1}, 0.1},
      {"overlap5", {{0, 0}, {2, 1}, {1, 1}, {1.5, 0.5}, {3, 2}}, {-1, -1, 1, 1, 1}, 1.0},
      {"xor4", {{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {-1, -1, 1, 1}, 1.0},
      {"diagonal6", {{0, 1}, {1, 2}, {2, 3}, {1, 0}, {2, 1}, {3, 2}}, {1, 1, 1, -1, -1, -1}, 5.0},
      {"unbalanced6", {{0, 0}, {0.5, 0.2}, {4, 4}, {3.5, 4.2}, {4.1, 3.1}, {0.2, 0.9}}, {-1, -1, 1, 1, 1, 1}, 2.0},
      {"outlier5", {{0, 0}, {1, 0.2}, {3, 3}, {3.2, 2.5}, {0.5, 0.1}}, {-1, -1, 1, 1, 1}, 0.5},
  };
}

}  // namespace hippoasym::testing
