#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hippoasym {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Label of a subject. Positive class for the metrics is `epileptic`.
enum class Label { normal, epileptic };

/// +1 for epileptic, -1 for normal.
inline int to_sign(Label l) { return l == Label::epileptic ? 1 : -1; }

inline std::string to_string(Label l) { return l == Label::epileptic ? "epileptic" : "normal"; }

/// Throws std::invalid_argument for anything but "normal" / "epileptic".
Label label_from_string(std::string_view s);

}  // namespace hippoasym
