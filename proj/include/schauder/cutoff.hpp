#pragma once

#include <array>

namespace schauder {

/// Radial cutoff profile psi with psi = 1 on [0, 1/2], psi = 0 on [1, inf) and a
/// septic smoothstep in between (C^3 across both junctions). Returns psi and its
/// first three derivatives at s.
inline std::array<double, 4> cutoff_profile(double s) {
  if (s <= 0.5) return {1.0, 0.0, 0.0, 0.0};
  if (s >= 1.0) return {0.0, 0.0, 0.0, 0.0};
  const double u = 2.0 * s - 1.0;
  const double v = 1.0 - u;
  const double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  const double smooth = u4 * (35.0 - 84.0 * u + 70.0 * u2 - 20.0 * u3);
  const double d1 = 140.0 * u3 * v * v * v;
  const double d2 = 420.0 * u2 * v * v * (1.0 - 2.0 * u);
  const double d3 = 840.0 * u * v * (1.0 - 5.0 * u + 5.0 * u2);
  return {1.0 - smooth, -2.0 * d1, -4.0 * d2, -8.0 * d3};
}

}  // namespace schauder
