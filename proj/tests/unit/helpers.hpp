#pragma once

#include "curvlab/space.hpp"

#include <cmath>
#include <random>

namespace testing {

inline curvlab::Field random_field(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  curvlab::Field f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

/// Smooth positive profile on a circle grid: 1 + a·sin(2πk x/L + phase).
inline curvlab::Field circle_profile(const curvlab::FiniteSpace& s, double a, int k = 1,
                                     double phase = 0.0) {
  curvlab::Field f(s.n());
  for (int i = 0; i < s.n(); ++i)
    f[i] = 1.0 + a * std::sin(2 * M_PI * k * i * s.spacing() / s.length() + phase);
  return f;
}

}  // namespace testing
