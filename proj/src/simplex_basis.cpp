#include "hoopt/simplex_basis.hpp"

#include "hoopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace hoopt {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::precondition: return "precondition error";
  }
  return "error";
}

namespace {

std::vector<LatticeIndex> multi_indices(int dimension, int degree) {
  std::vector<LatticeIndex> out;
  LatticeIndex a{0, 0, 0};
  const int hi0 = degree;
  for (a[0] = 0; a[0] <= hi0; ++a[0]) {
    const int hi1 = dimension > 1 ? degree - a[0] : 0;
    for (a[1] = 0; a[1] <= hi1; ++a[1]) {
      const int hi2 = dimension > 2 ? degree - a[0] - a[1] : 0;
      for (a[2] = 0; a[2] <= hi2; ++a[2]) out.push_back(a);
    }
  }
  return out;
}

void check_dimension_degree(int dimension, int degree) {
  if (dimension < 1 || dimension > 3)
    throw UsageError("simplex dimension must be 1, 2 or 3, got " + std::to_string(dimension));
  if (degree < 1 || degree > 8)
    throw UnsupportedError("basis degree must be in [1, 8], got " + std::to_string(degree));
}

}  // namespace

SimplexBasis::SimplexBasis(int dimension, int degree) : dimension_(dimension), degree_(degree) {
  check_dimension_degree(dimension, degree);
  monomials_ = multi_indices(dimension, degree);
  std::vector<LatticeIndex> rest;
  lattice_.push_back({0, 0, 0});
  for (int k = 0; k < dimension; ++k) {
    LatticeIndex v{0, 0, 0};
    v[k] = degree;
    lattice_.push_back(v);
  }
  for (const auto& a : monomials_) {
    if (std::find(lattice_.begin(), lattice_.end(), a) == lattice_.end()) rest.push_back(a);
  }
  lattice_.insert(lattice_.end(), rest.begin(), rest.end());

  const int n = size();
  Mat vandermonde(n, n);
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < n; ++b) {
      double m = 1.0;
      for (int k = 0; k < dimension; ++k)
        m *= std::pow(static_cast<double>(lattice_[i][k]) / degree, monomials_[b][k]);
      vandermonde(i, b) = m;
    }
  }
  coefficients_ = vandermonde.fullPivLu().inverse();
}

Mat SimplexBasis::lattice_points() const {
  Mat pts(size(), dimension_);
  for (int i = 0; i < size(); ++i)
    for (int k = 0; k < dimension_; ++k)
      pts(i, k) = static_cast<double>(lattice_[i][k]) / degree_;
  return pts;
}

int SimplexBasis::node_of(const LatticeIndex& index) const {
  auto it = std::find(lattice_.begin(), lattice_.end(), index);
  if (it == lattice_.end()) return -1;
  return static_cast<int>(it - lattice_.begin());
}

BasisSample SimplexBasis::evaluate(std::span<const double> xi, int order) const {
  if (order < 0 || order > 2) throw UsageError("basis derivative order must be 0, 1 or 2");
  if (static_cast<int>(xi.size()) != dimension_)
    throw UsageError("point dimension does not match the basis");
  const int d = dimension_;
  const int p = degree_;
  const int nm = size();

  // pw[k][j] = xi_k^j
  std::array<std::array<double, 10>, 3> pw{};
  for (int k = 0; k < d; ++k) {
    pw[k][0] = 1.0;
    for (int j = 1; j <= p; ++j) pw[k][j] = pw[k][j - 1] * xi[k];
  }
  auto power = [&](int k, int e) { return e < 0 ? 0.0 : pw[k][e]; };

  Vec mono(nm);
  Mat dmono = order >= 1 ? Mat(nm, d) : Mat();
  Mat d2mono = order >= 2 ? Mat(nm, d * d) : Mat();
  for (int b = 0; b < nm; ++b) {
    const auto& e = monomials_[b];
    double v = 1.0;
    for (int k = 0; k < d; ++k) v *= power(k, e[k]);
    mono(b) = v;
    if (order >= 1) {
      for (int a = 0; a < d; ++a) {
        double g = e[a] * power(a, e[a] - 1);
        for (int k = 0; k < d; ++k)
          if (k != a) g *= power(k, e[k]);
        dmono(b, a) = g;
      }
    }
    if (order >= 2) {
      for (int a = 0; a < d; ++a) {
        for (int c = 0; c < d; ++c) {
          double h;
          if (a == c) {
            h = e[a] * (e[a] - 1) * power(a, e[a] - 2);
            for (int k = 0; k < d; ++k)
              if (k != a) h *= power(k, e[k]);
          } else {
            h = e[a] * power(a, e[a] - 1) * e[c] * power(c, e[c] - 1);
            for (int k = 0; k < d; ++k)
              if (k != a && k != c) h *= power(k, e[k]);
          }
          d2mono(b, a * d + c) = h;
        }
      }
    }
  }

  BasisSample s;
  s.values = coefficients_.transpose() * mono;
  if (order >= 1) s.gradients = coefficients_.transpose() * dmono;
  if (order >= 2) s.hessians = coefficients_.transpose() * d2mono;
  return s;
}

const SimplexBasis& basis_for(int dimension, int degree) {
  check_dimension_degree(dimension, degree);
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<SimplexBasis>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{dimension, degree}];
  if (!slot) slot = std::make_unique<SimplexBasis>(dimension, degree);
  return *slot;
}

bool inside_master(std::span<const double> xi, double tolerance) {
  double sum = 0.0;
  for (double v : xi) {
    if (v < -tolerance) return false;
    sum += v;
  }
  return sum <= 1.0 + tolerance;
}

namespace {

void require_inside(std::span<const double> xi) {
  if (!inside_master(xi))
    throw DomainError("point lies outside the master simplex");
}

}  // namespace

Vec evaluate_basis(int dimension, int degree, std::span<const double> xi) {
  const auto& basis = basis_for(dimension, degree);
  if (static_cast<int>(xi.size()) != dimension)
    throw UsageError("point dimension does not match the basis");
  require_inside(xi);
  return basis.evaluate(xi, 0).values;
}

BasisSample evaluate_basis_derivatives(int dimension, int degree, std::span<const double> xi,
                                       int order) {
  if (order != 1 && order != 2) throw UsageError("derivative order must be 1 or 2");
  const auto& basis = basis_for(dimension, degree);
  if (static_cast<int>(xi.size()) != dimension)
    throw UsageError("point dimension does not match the basis");
  require_inside(xi);
  return basis.evaluate(xi, order);
}

MapSample physical_map(const Mat& nodes, const SimplexBasis& basis, std::span<const double> xi,
                       int order) {
  if (nodes.rows() != basis.size())
    throw UsageError("node count does not match the basis size");
  const int d = basis.dimension();
  const int D = static_cast<int>(nodes.cols());
  BasisSample s = basis.evaluate(xi, order);
  MapSample m;
  m.x = nodes.transpose() * s.values;
  if (order >= 1) m.jacobian = nodes.transpose() * s.gradients;
  if (order >= 2) m.hessian = nodes.transpose() * s.hessians;
  (void)d;
  (void)D;
  return m;
}

Mat equilateral_jacobian(int dimension) {
  Mat w = Mat::Zero(dimension, dimension);
  const double s3 = std::numbers::sqrt3;
  switch (dimension) {
    case 1:
      w(0, 0) = 1.0;
      break;
    case 2:
      w << 1.0, 0.5, 0.0, s3 / 2.0;
      break;
    case 3:
      w << 1.0, 0.5, 0.5, 0.0, s3 / 2.0, s3 / 6.0, 0.0, 0.0, std::sqrt(2.0 / 3.0);
      break;
    default:
      throw UsageError("equilateral simplex dimension must be 1, 2 or 3");
  }
  return w;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return nodes[a] < nodes[b]; });
  std::vector<double> xs(n), ws(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = nodes[order[i]];
    ws[i] = weights[order[i]];
  }
  nodes = std::move(xs);
  weights = std::move(ws);
}

namespace {

// Collapsed-coordinate product rule on the master simplex.
QuadratureRule make_rule(int dimension, int exactness) {
  QuadratureRule rule;
  rule.dimension = dimension;
  rule.exactness = exactness;
  std::vector<double> x0, w0, x1, w1, x2, w2;
  if (dimension == 1) {
    gauss_legendre(std::max(1, (exactness + 2) / 2), x0, w0);
    rule.points.resize(static_cast<Eigen::Index>(x0.size()), 1);
    rule.weights.resize(static_cast<Eigen::Index>(x0.size()));
    for (std::size_t i = 0; i < x0.size(); ++i) {
      rule.points(i, 0) = x0[i];
      rule.weights(i) = w0[i];
    }
    return rule;
  }
  if (dimension == 2) {
    gauss_legendre(std::max(1, (exactness + 3) / 2), x0, w0);
    gauss_legendre(std::max(1, (exactness + 2) / 2), x1, w1);
    const int m = static_cast<int>(x0.size() * x1.size());
    rule.points.resize(m, 2);
    rule.weights.resize(m);
    int q = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      for (std::size_t j = 0; j < x1.size(); ++j, ++q) {
        const double u = x0[i], v = x1[j];
        rule.points(q, 0) = u;
        rule.points(q, 1) = v * (1.0 - u);
        rule.weights(q) = w0[i] * w1[j] * (1.0 - u);
      }
    }
    return rule;
  }
  gauss_legendre(std::max(1, (exactness + 4) / 2), x0, w0);
  gauss_legendre(std::max(1, (exactness + 3) / 2), x1, w1);
  gauss_legendre(std::max(1, (exactness + 2) / 2), x2, w2);
  const int m = static_cast<int>(x0.size() * x1.size() * x2.size());
  rule.points.resize(m, 3);
  rule.weights.resize(m);
  int q = 0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    for (std::size_t j = 0; j < x1.size(); ++j) {
      for (std::size_t k = 0; k < x2.size(); ++k, ++q) {
        const double u = x0[i], v = x1[j], w = x2[k];
        rule.points(q, 0) = u;
        rule.points(q, 1) = v * (1.0 - u);
        rule.points(q, 2) = w * (1.0 - u) * (1.0 - v);
        rule.weights(q) = w0[i] * w1[j] * w2[k] * (1.0 - u) * (1.0 - u) * (1.0 - v);
      }
    }
  }
  return rule;
}

}  // namespace

const QuadratureRule& quadrature_for(int dimension, int exactness) {
  if (dimension < 1 || dimension > 3)
    throw UsageError("quadrature dimension must be 1, 2 or 3");
  if (exactness < 0) throw UsageError("quadrature exactness must be non-negative");
  if (exactness > max_quadrature_exactness)
    throw UnsupportedError("quadrature exactness " + std::to_string(exactness) +
                           " exceeds the supported maximum " +
                           std::to_string(max_quadrature_exactness));
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{dimension, exactness}];
  if (!slot) slot = std::make_unique<QuadratureRule>(make_rule(dimension, exactness));
  return *slot;
}

}  // namespace hoopt
