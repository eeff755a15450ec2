#include "promptgate/embedding.hpp"

#include <cmath>

#include "promptgate/error.hpp"
#include "promptgate/linalg.hpp"

namespace promptgate {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Embedding l2_normalize(std::span<const double> v) {
    if (!all_finite(v)) throw Error(ErrorCode::InvalidSpec, "non-finite embedding entry");
    const double n = norm(v);
    if (n < kZeroNormThreshold) throw Error(ErrorCode::ZeroNorm, "cannot normalize a zero vector");
    Embedding out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

}  // namespace promptgate
