#pragma once

#include "hoopt/simplex_basis.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

namespace hoopt::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240611);
  return gen;
}

inline double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

// Relative error with an absolute floor.
inline double rel_error(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double rel_error(const Mat& a, const Mat& b, double floor = 1.0) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    J.col(i) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

inline Vec random_master_point(int d, double margin = 0.05) {
  while (true) {
    Vec xi(d);
    for (int k = 0; k < d; ++k) xi(k) = uniform(margin, 1.0);
    if (xi.sum() <= 1.0 - margin) return xi;
  }
}

}  // namespace hoopt::testing
