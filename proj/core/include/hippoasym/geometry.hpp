#pragma once

#include "hippoasym/types.hpp"

#include <span>
#include <utility>

namespace hippoasym {

/// Indices (i < j) of the exact farthest pair of points. Pairs are pruned with
/// the triangle inequality through the point mean, so the search is exact but
/// typically far below n^2/2 distance evaluations. Ties keep the
/// lexicographically smallest pair.
std::pair<int, int> farthest_pair(std::span<const Vec3> points);

}  // namespace hippoasym
