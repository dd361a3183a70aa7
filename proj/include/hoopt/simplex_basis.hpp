#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace hoopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Multi-index of a lattice node; only the first `dimension` entries are used.
using LatticeIndex = std::array<int, 3>;

// Basis values and master-space derivatives at one point.
// gradients is n x d, hessians is n x (d*d) with entry (i, a*d+b).
struct BasisSample {
  Vec values;
  Mat gradients;
  Mat hessians;
};

struct QuadratureRule {
  int dimension = 0;
  int exactness = 0;
  Mat points;  // m x d, master coordinates
  Vec weights;
  int size() const { return static_cast<int>(weights.size()); }
};

// Physical map sample: x in R^D, jacobian D x d, hessian D x (d*d).
struct MapSample {
  Vec x;
  Mat jacobian;
  Mat hessian;
};

// Lagrange basis on the uniform lattice of the master right simplex.
// Node order: the d+1 vertices (origin, e1, ..., ed), then the remaining
// lattice nodes in lexicographic order of their multi-index.
class SimplexBasis {
 public:
  SimplexBasis(int dimension, int degree);

  int dimension() const { return dimension_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(lattice_.size()); }

  const std::vector<LatticeIndex>& lattice() const { return lattice_; }
  Mat lattice_points() const;
  int node_of(const LatticeIndex& index) const;

  // order 0, 1 or 2. No domain check.
  BasisSample evaluate(std::span<const double> xi, int order) const;

  // Monomial coefficients, column i holds node i.
  const Mat& coefficients() const { return coefficients_; }

 private:
  int dimension_;
  int degree_;
  std::vector<LatticeIndex> lattice_;
  std::vector<LatticeIndex> monomials_;
  Mat coefficients_;
};

// Cached per (d, p). Thread safe.
const SimplexBasis& basis_for(int dimension, int degree);

Vec evaluate_basis(int dimension, int degree, std::span<const double> xi);
BasisSample evaluate_basis_derivatives(int dimension, int degree, std::span<const double> xi,
                                       int order);

// nodes is n x D, one row per element node.
MapSample physical_map(const Mat& nodes, const SimplexBasis& basis, std::span<const double> xi,
                       int order);

// Jacobian of the map from the master simplex to the unit-edge equilateral one.
Mat equilateral_jacobian(int dimension);

const QuadratureRule& quadrature_for(int dimension, int exactness);

constexpr int max_quadrature_exactness = 40;
constexpr double master_tolerance = 1e-12;

bool inside_master(std::span<const double> xi, double tolerance = master_tolerance);

// Gauss-Legendre on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace hoopt
