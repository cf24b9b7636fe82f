#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace stylemetric {

/// Bin of v among `bins` uniform bins on [lo, hi]; out-of-range values clamp.
template <typename Scalar>
int uniform_bin(Scalar v, Scalar lo, Scalar hi, int bins) {
  if (!(hi > lo)) return 0;
  const auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * bins));
  return static_cast<int>(std::clamp<long>(b, 0, bins - 1));
}

/// Scales to unit L1 mass; all-zero input stays zero.
template <typename Derived>
void l1_normalize(Eigen::MatrixBase<Derived>& h) {
  const auto s = h.sum();
  if (s > 0) h /= s;
}

template <typename Derived>
typename Derived::PlainObject l1_normalized(const Eigen::MatrixBase<Derived>& h) {
  typename Derived::PlainObject out = h;
  l1_normalize(out);
  return out;
}

}  // namespace stylemetric
