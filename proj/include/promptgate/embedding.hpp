#pragma once

#include <span>
#include <vector>

namespace promptgate {

/// A point in the shared image/text feature space.
using Embedding = std::vector<double>;

inline constexpr double kZeroNormThreshold = 1e-12;

/// Unit-norm copy of `v`. Throws Error(ZeroNorm) when ||v|| < 1e-12 and
/// Error(InvalidSpec) on non-finite input.
Embedding l2_normalize(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace promptgate
