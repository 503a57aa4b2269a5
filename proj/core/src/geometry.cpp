#include "hippoasym/geometry.hpp"

#include "hippoasym/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hippoasym {

std::pair<int, int> farthest_pair(std::span<const Vec3> points) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw PreconditionError("farthest pair needs at least 2 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= n;
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = (points[i] - mean).norm();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r[a] > r[b]; });

  double best = -1.0;
  std::pair<int, int> pair{0, 1};
  auto consider = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const double d = (points[a] - points[b]).squaredNorm();
    if (d > best || (d == best && pair > std::make_pair(a, b))) {
      best = d;
      pair = {a, b};
    }
  };
  for (int ii = 0; ii < n; ++ii) {
    const int i = order[ii];
    // |pi - pj| <= r_i + r_j; the rest of the list cannot beat best.
    if (best >= 0.0 && 2.0 * r[i] < std::sqrt(best) * (1.0 - 1e-12)) break;
    for (int jj = ii + 1; jj < n; ++jj) {
      const int j = order[jj];
      const double bound = r[i] + r[j];
      if (best >= 0.0 && bound * bound * (1.0 + 1e-12) < best) break;
      consider(i, j);
    }
  }
  return pair;
}

}  // namespace hippoasym
