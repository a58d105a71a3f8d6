#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace pairsift {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using SampleId = std::string;
using OperatorId = std::string;

/// Missing score cells travel as quiet NaN end to end; a cell is either
/// finite or missing, never infinite.
inline constexpr Scalar kMissing = std::numeric_limits<Scalar>::quiet_NaN();

inline bool is_missing(Scalar v) { return std::isnan(v); }

/// Shortest decimal form that parses back to the identical double. Used by
/// every text writer so CSV and JSON artifacts carry the same values.
std::string format_double(double v);

}  // namespace pairsift
