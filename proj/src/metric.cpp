#include "hoopt/metric.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hoopt {

using nlohmann::json;

namespace {

Eigen::SelfAdjointEigenSolver<Mat> eigen_solve(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigen-solver failed");
  return es;
}

double spectral_scale(const Mat& L) { return std::max(1.0, L.norm()); }

double min_gap(const Vec& values) {
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < values.size(); ++i)
    for (int j = i + 1; j < values.size(); ++j) gap = std::min(gap, std::abs(values(i) - values(j)));
  return gap;
}

// exp[a, b]
double exp_dd1(double a, double b) {
  const double m = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s;
  if (std::abs(h) < 1e-4) {
    const double h2 = h * h;
    s = 1.0 + h2 / 6.0 + h2 * h2 / 120.0;
  } else {
    s = std::sinh(h) / h;
  }
  return std::exp(m) * s;
}

// exp[a, b, c]
double exp_dd2(double a, double b, double c) {
  double v[3] = {a, b, c};
  std::sort(v, v + 3);
  const double spread = v[2] - v[0];
  if (spread >= 1.0) return (exp_dd1(v[1], v[2]) - exp_dd1(v[0], v[1])) / (v[2] - v[0]);
  // Taylor series about the mean: sum_n h_{n-2}(x) / n!
  const double m = (v[0] + v[1] + v[2]) / 3.0;
  const double x1 = v[0] - m, x2 = v[1] - m, x3 = v[2] - m;
  double sum = 0.0;
  double factorial = 2.0;
  for (int n = 2; n <= 30; ++n) {
    if (n > 2) factorial *= n;
    const int k = n - 2;
    double hk = 0.0;
    double p1 = 1.0;
    for (int i = 0; i <= k; ++i) {
      double inner = 0.0;
      double p2 = 1.0;
      for (int t = 0; t <= k - i; ++t) {
        inner += p2 * std::pow(x3, k - i - t);
        p2 *= x2;
      }
      hk += p1 * inner;
      p1 *= x1;
    }
    sum += hk / factorial;
  }
  return std::exp(m) * sum;
}

}  // namespace

Mat symmetric_log(const Mat& M) {
  auto es = eigen_solve(M);
  const Vec& l = es.eigenvalues();
  for (int i = 0; i < l.size(); ++i)
    if (!(l(i) > 0.0) || !std::isfinite(l(i)))
      throw DomainError("matrix is not symmetric positive-definite");
  return es.eigenvectors() * l.array().log().matrix().asDiagonal() * es.eigenvectors().transpose();
}

Mat symmetric_exp(const Mat& L) {
  auto es = eigen_solve(L);
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

EigenDerivatives eig_derivatives(const Mat& L, std::span<const Mat> dL, std::span<const Mat> d2L,
                                 int order, double gap_tolerance) {
  const int d = static_cast<int>(L.rows());
  const int nd = static_cast<int>(dL.size());
  auto es = eigen_solve(L);
  EigenDerivatives out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  if (order == 0) return out;
  if (min_gap(out.values) < gap_tolerance * spectral_scale(L))
    throw NumericalError("degenerate spectrum: eigenvalue gap below tolerance");

  const Mat& U = out.vectors;
  std::vector<Mat> pinv(d, Mat::Zero(d, d));
  for (int l = 0; l < d; ++l) {
    const double cutoff = 1e-10 * (L - out.values(l) * Mat::Identity(d, d)).norm();
    for (int m = 0; m < d; ++m) {
      if (m == l) continue;
      const double gap = out.values(m) - out.values(l);
      if (std::abs(gap) > cutoff) pinv[l] += U.col(m) * U.col(m).transpose() / gap;
    }
  }

  out.dvalues.assign(nd, Vec(d));
  out.dvectors.assign(nd, Mat(d, d));
  for (int j = 0; j < nd; ++j) {
    for (int l = 0; l < d; ++l) {
      const Vec u = U.col(l);
      out.dvalues[j](l) = u.dot(dL[j] * u);
      out.dvectors[j].col(l) = -pinv[l] * (dL[j] * u);
    }
  }
  if (order < 2) return out;
  if (static_cast<int>(d2L.size()) != nd * nd)
    throw UsageError("second derivative field count must be the square of the direction count");
  out.d2values.assign(nd * nd, Vec(d));
  out.d2vectors.assign(nd * nd, Mat(d, d));
  const Mat I = Mat::Identity(d, d);
  for (int j = 0; j < nd; ++j) {
    for (int k = 0; k < nd; ++k) {
      const Mat& Ljk = d2L[j * nd + k];
      for (int l = 0; l < d; ++l) {
        const Vec u = U.col(l);
        const Vec duj = out.dvectors[j].col(l);
        const Vec duk = out.dvectors[k].col(l);
        const Mat Lj = dL[j] - out.dvalues[j](l) * I;
        const Mat Lk = dL[k] - out.dvalues[k](l) * I;
        const Vec t = Lk * duj + Lj * duk;
        const double d2l = u.dot(t + Ljk * u);
        out.d2values[j * nd + k](l) = d2l;
        const Vec rhs = t + (Ljk - d2l * I) * u;
        out.d2vectors[j * nd + k].col(l) = -pinv[l] * rhs - duj.dot(duk) * u;
      }
    }
  }
  return out;
}

MetricEvaluation exp_with_derivatives(const Mat& L, std::span<const Mat> dL,
                                      std::span<const Mat> d2L, int order) {
  EigenDerivatives ed = eig_derivatives(L, dL, d2L, order);
  const int nd = static_cast<int>(dL.size());
  const Mat& U = ed.vectors;
  const Vec e = ed.values.array().exp().matrix();
  const Mat E = e.asDiagonal();
  MetricEvaluation out;
  out.metric = U * E * U.transpose();
  if (order < 1) return out;
  std::vector<Mat> dD(nd);
  for (int j = 0; j < nd; ++j) {
    dD[j] = ed.dvalues[j].asDiagonal();
    const Mat& dU = ed.dvectors[j];
    out.gradient.push_back(dU * E * U.transpose() + U * E * dD[j] * U.transpose() +
                           U * E * dU.transpose());
  }
  if (order < 2) return out;
  for (int j = 0; j < nd; ++j) {
    for (int k = 0; k < nd; ++k) {
      const Mat& dUj = ed.dvectors[j];
      const Mat& dUk = ed.dvectors[k];
      const Mat& d2U = ed.d2vectors[j * nd + k];
      const Mat d2D = ed.d2values[j * nd + k].asDiagonal();
      Mat h = d2U * E * U.transpose() + dUj * E * dD[k] * U.transpose() +
              dUj * E * dUk.transpose() + dUk * E * dD[j] * U.transpose() +
              U * E * (dD[k] * dD[j] + d2D) * U.transpose() + U * E * dD[j] * dUk.transpose() +
              dUk * E * dUj.transpose() + U * E * dD[k] * dUj.transpose() +
              U * E * d2U.transpose();
      out.hessian.push_back(h);
    }
  }
  return out;
}

MetricEvaluation exp_divided_differences(const Mat& L, std::span<const Mat> dL,
                                         std::span<const Mat> d2L, int order) {
  const int d = static_cast<int>(L.rows());
  const int nd = static_cast<int>(dL.size());
  auto es = eigen_solve(L);
  const Vec& lam = es.eigenvalues();
  const Mat& U = es.eigenvectors();
  MetricEvaluation out;
  out.metric = U * lam.array().exp().matrix().asDiagonal() * U.transpose();
  out.clustered = true;
  if (order < 1) return out;
  Mat F1(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) F1(i, j) = exp_dd1(lam(i), lam(j));
  std::vector<Mat> Eh(nd);
  for (int k = 0; k < nd; ++k) {
    Eh[k] = U.transpose() * dL[k] * U;
    out.gradient.push_back(U * F1.cwiseProduct(Eh[k]) * U.transpose());
  }
  if (order < 2) return out;
  std::vector<double> F2(d * d * d);
  for (int i = 0; i < d; ++i)
    for (int m = 0; m < d; ++m)
      for (int j = 0; j < d; ++j) F2[(i * d + m) * d + j] = exp_dd2(lam(i), lam(m), lam(j));
  for (int k = 0; k < nd; ++k) {
    for (int l = 0; l < nd; ++l) {
      Mat S = F1.cwiseProduct(U.transpose() * d2L[k * nd + l] * U);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int m = 0; m < d; ++m)
            s += F2[(i * d + m) * d + j] * (Eh[k](i, m) * Eh[l](m, j) + Eh[l](i, m) * Eh[k](m, j));
          S(i, j) += s;
        }
      out.hessian.push_back(U * S * U.transpose());
    }
  }
  return out;
}

namespace {

MetricEvaluation exp_field(const Mat& L, std::span<const Mat> dL, std::span<const Mat> d2L,
                           int order) {
  if (order >= 1) {
    auto es = eigen_solve(L);
    if (min_gap(es.eigenvalues()) < 1e-6 * spectral_scale(L))
      return exp_divided_differences(L, dL, d2L, order);
  }
  return exp_with_derivatives(L, dL, d2L, order);
}

}  // namespace

MetricField::MetricField(Mesh background, std::vector<Mat> node_metrics)
    : background_(std::move(background)) {
  validate_mesh(background_);
  if (static_cast<int>(node_metrics.size()) != background_.node_count())
    throw InputError("metric field: expected one metric per background node (" +
                     std::to_string(background_.node_count()) + "), got " +
                     std::to_string(node_metrics.size()));
  const int d = background_.dimension;
  logs_.reserve(node_metrics.size());
  for (std::size_t i = 0; i < node_metrics.size(); ++i) {
    const Mat& M = node_metrics[i];
    if (M.rows() != d || M.cols() != d)
      throw InputError("metric field: node metric " + std::to_string(i) + " has wrong size");
    if ((M - M.transpose()).norm() > 1e-12 * std::max(1.0, M.norm()))
      throw InputError("metric field: node metric " + std::to_string(i) + " is not symmetric");
    try {
      Mat L = symmetric_log(0.5 * (M + M.transpose()));
      logs_.push_back(0.5 * (L + L.transpose()));
    } catch (const DomainError&) {
      throw InputError("metric field: node metric " + std::to_string(i) +
                       " is not positive-definite");
    }
  }
  affine_ = background_.degree == 1;
  build_index();
}

void MetricField::build_index() {
  const int d = background_.dimension;
  const int ne = background_.element_count();
  if (ne == 0) throw InputError("metric field: background mesh has no elements");
  lower_ = background_.nodes.colwise().minCoeff().transpose();
  upper_ = background_.nodes.colwise().maxCoeff().transpose();
  diagonal_ = std::max((upper_ - lower_).norm(), std::numeric_limits<double>::min());
  const int per_axis = std::max(1, static_cast<int>(std::ceil(std::pow(double(ne), 1.0 / d))));
  cell_size_.resize(d);
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) {
    cells_[k] = per_axis;
    cell_size_(k) = std::max((upper_(k) - lower_(k)) / per_axis, 1e-300);
    total *= static_cast<std::size_t>(per_axis);
  }
  grid_.assign(total, {});
  for (int e = 0; e < ne; ++e) {
    Mat x = background_.element_nodes(e);
    Vec lo = x.colwise().minCoeff().transpose();
    Vec hi = x.colwise().maxCoeff().transpose();
    const double pad = (affine_ ? 1e-9 : 0.1) * (hi - lo).norm() + 1e-12 * diagonal_;
    std::array<int, 3> a{0, 0, 0}, b{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      a[k] = std::clamp(static_cast<int>(std::floor((lo(k) - pad - lower_(k)) / cell_size_(k))), 0,
                        cells_[k] - 1);
      b[k] = std::clamp(static_cast<int>(std::floor((hi(k) + pad - lower_(k)) / cell_size_(k))), 0,
                        cells_[k] - 1);
    }
    for (int k2 = a[2]; k2 <= b[2]; ++k2)
      for (int k1 = a[1]; k1 <= b[1]; ++k1)
        for (int k0 = a[0]; k0 <= b[0]; ++k0)
          grid_[k0 + cells_[0] * (k1 + cells_[1] * k2)].push_back(e);
  }
}

bool MetricField::newton_inverse(int element, std::span<const double> x, Vec& xi,
                                 double& residual) const {
  const int d = background_.dimension;
  const auto& basis = basis_for(d, background_.degree);
  const Mat nodes = background_.element_nodes(element);
  Eigen::Map<const Vec> target(x.data(), d);
  xi = Vec::Constant(d, 1.0 / (d + 1));
  const double tol = 1e-13 * diagonal_;
  for (int it = 0; it < 40; ++it) {
    MapSample m = physical_map(nodes, basis, std::span<const double>(xi.data(), d), 1);
    Vec r = m.x - target;
    residual = r.norm();
    if (residual <= tol) return true;
    Vec step = m.jacobian.partialPivLu().solve(r);
    if (!step.allFinite()) return false;
    xi -= step;
    if (xi.cwiseAbs().maxCoeff() > 10.0) return false;
    if (affine_ && it >= 1) break;
  }
  MapSample m = physical_map(nodes, basis, std::span<const double>(xi.data(), d), 0);
  residual = (m.x - target).norm();
  return residual <= 1e-10 * diagonal_;
}

namespace {

double min_barycentric(const Vec& xi) {
  double m = 1.0 - xi.sum();
  for (int k = 0; k < xi.size(); ++k) m = std::min(m, xi(k));
  return m;
}

Vec clamp_to_simplex(const Vec& xi) {
  const int d = static_cast<int>(xi.size());
  Vec lam(d + 1);
  lam(0) = 1.0 - xi.sum();
  lam.tail(d) = xi;
  lam = lam.cwiseMax(0.0);
  lam /= lam.sum();
  return lam.tail(d);
}

}  // namespace

Localization MetricField::localize(std::span<const double> x) const {
  const int d = background_.dimension;
  if (static_cast<int>(x.size()) != d) throw UsageError("point dimension does not match the metric");
  std::array<int, 3> c{0, 0, 0};
  for (int k = 0; k < d; ++k) {
    if (!std::isfinite(x[k])) throw DomainError("localization: non-finite point");
    c[k] = std::clamp(static_cast<int>(std::floor((x[k] - lower_(k)) / cell_size_(k))), 0,
                      cells_[k] - 1);
  }
  const auto& candidates = grid_[c[0] + cells_[0] * (c[1] + cells_[1] * c[2])];
  Localization best;
  double best_bary = -std::numeric_limits<double>::infinity();
  double nearest = std::numeric_limits<double>::infinity();
  for (int e : candidates) {
    Vec xi;
    double residual = 0.0;
    const bool ok = newton_inverse(e, x, xi, residual);
    nearest = std::min(nearest, residual);
    if (!ok) continue;
    const double bary = min_barycentric(xi);
    if (bary >= -1e-8) return {e, xi, residual, false};
    if (bary >= -1e-6 && bary > best_bary) {
      best_bary = bary;
      best = {e, xi, residual, true};
    }
  }
  if (best.element >= 0) {
    best.xi = clamp_to_simplex(best.xi);
    return best;
  }
  std::string where = "(";
  for (int k = 0; k < d; ++k) where += (k ? ", " : "") + format_double(x[k]);
  where += ")";
  throw DomainError("localization failed at " + where + ": point outside the background mesh" +
                    (std::isfinite(nearest) ? ", nearest residual " + format_double(nearest)
                                            : std::string()));
}

MetricEvaluation MetricField::interpolate_at(int element, std::span<const double> xi_in,
                                             int order) const {
  const int d = background_.dimension;
  const auto& basis = basis_for(d, background_.degree);
  const Mat X = background_.element_nodes(element);
  const BasisSample s = basis.evaluate(xi_in, order);
  const int n = basis.size();
  const auto& conn = background_.elements[element];

  Mat L = Mat::Zero(d, d);
  for (int j = 0; j < n; ++j) L += s.values(j) * logs_[conn[j]];

  std::vector<Mat> dL, d2L;
  if (order >= 1) {
    const Mat J = X.transpose() * s.gradients;
    const Mat G = J.inverse();  // d xi_a / d x_k = G(a, k)
    const Mat gradN = s.gradients * G;
    dL.assign(d, Mat::Zero(d, d));
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < d; ++k) dL[k] += gradN(j, k) * logs_[conn[j]];
    if (order >= 2) {
      const Mat H = X.transpose() * s.hessians;  // d x (d*d)
      // second derivatives of the inverse map
      std::vector<double> d2psi(d * d * d, 0.0);
      for (int a = 0; a < d; ++a)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            double v = 0.0;
            for (int m = 0; m < d; ++m)
              for (int b = 0; b < d; ++b)
                for (int c = 0; c < d; ++c) v -= G(a, m) * H(m, b * d + c) * G(b, k) * G(c, l);
            d2psi[(a * d + k) * d + l] = v;
          }
      d2L.assign(d * d, Mat::Zero(d, d));
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            double v = 0.0;
            for (int a = 0; a < d; ++a) {
              for (int b = 0; b < d; ++b) v += s.hessians(j, a * d + b) * G(a, k) * G(b, l);
              v += s.gradients(j, a) * d2psi[(a * d + k) * d + l];
            }
            d2L[k * d + l] += v * logs_[conn[j]];
          }
      }
    }
  }
  MetricEvaluation out = exp_field(L, dL, d2L, order);
  out.element = element;
  out.xi = Eigen::Map<const Vec>(xi_in.data(), d);
  return out;
}

MetricEvaluation MetricField::interpolate(std::span<const double> x, int order) const {
  if (order < 0 || order > 2) throw UsageError("derivative order must be 0, 1 or 2");
  Localization loc = localize(x);
  return interpolate_at(loc.element, std::span<const double>(loc.xi.data(), loc.xi.size()), order);
}

MetricEvaluation MetricField::evaluate(std::span<const double> x, int order) const {
  return interpolate(x, order);
}

AnalyticMetric::AnalyticMetric(AnalyticMetricSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == AnalyticKind::constant) {
    if (spec_.constant.size() == 0) throw UsageError("constant metric requires a matrix");
    symmetric_log(spec_.constant);
  } else if (!(spec_.h_min > 0.0) || spec_.alpha < 0.0) {
    throw UsageError("boundary-layer metric requires h_min > 0 and alpha >= 0");
  }
}

int AnalyticMetric::dimension() const {
  switch (spec_.kind) {
    case AnalyticKind::boundary_layer_2d: return 2;
    case AnalyticKind::boundary_layer_3d: return 3;
    case AnalyticKind::constant: return static_cast<int>(spec_.constant.rows());
  }
  return 2;
}

MetricEvaluation AnalyticMetric::evaluate(std::span<const double> x, int order) const {
  return analytic_metric(spec_, x, order);
}

MetricEvaluation analytic_metric(const AnalyticMetricSpec& spec, std::span<const double> x,
                                 int order) {
  MetricEvaluation out;
  if (spec.kind == AnalyticKind::constant) {
    const int d = static_cast<int>(spec.constant.rows());
    out.metric = spec.constant;
    if (order >= 1) out.gradient.assign(d, Mat::Zero(d, d));
    if (order >= 2) out.hessian.assign(d * d, Mat::Zero(d, d));
    return out;
  }
  const int d = spec.kind == AnalyticKind::boundary_layer_2d ? 2 : 3;
  if (static_cast<int>(x.size()) != d) throw UsageError("point dimension does not match the metric");
  const double pi = std::numbers::pi;
  const double tp = 2.0 * pi;
  const double c = d == 2 ? std::sqrt(100.0 + 4.0 * pi * pi) : std::sqrt(100.0 + 8.0 * pi * pi);

  // derivatives of t -> cos(2 pi t)
  auto cosd = [&](double t, int k) {
    const double s = std::sin(tp * t), co = std::cos(tp * t);
    switch (k) {
      case 0: return co;
      case 1: return -tp * s;
      case 2: return -tp * tp * co;
      default: return tp * tp * tp * s;
    }
  };
  // derivative of g with multi-index counts on the tangential coordinates
  auto g = [&](int kx, int ky) {
    if (d == 2) return ky == 0 ? cosd(x[0], kx) : 0.0;
    return cosd(x[0], kx) * cosd(x[1], ky);
  };

  // phi_last = (10 x_last - g) / c; derivatives by index lists
  const int last = d - 1;
  auto count = [&](std::initializer_list<int> idx, int axis) {
    int n = 0;
    for (int i : idx) n += (i == axis);
    return n;
  };
  auto dphi_last = [&](std::initializer_list<int> idx) {
    const int nl = count(idx, last);
    if (nl > 0) return (idx.size() == 1) ? 10.0 / c : 0.0;
    const int kx = count(idx, 0);
    const int ky = d == 3 ? count(idx, 1) : 0;
    return -g(kx, ky) / c;
  };

  const double phi = (10.0 * x[last] - g(0, 0)) / c;
  const double h = spec.h_min + spec.alpha * std::abs(phi);
  const double sgn = phi >= 0.0 ? 1.0 : -1.0;
  const double delta = 1.0 / (h * h);
  const double delta1 = -2.0 * spec.alpha * sgn / (h * h * h);
  const double delta2 = 6.0 * spec.alpha * spec.alpha / (h * h * h * h);

  Vec p1(d);
  for (int a = 0; a < d; ++a) p1(a) = dphi_last({a});
  Mat p2(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) p2(a, b) = dphi_last({a, b});
  std::vector<double> p3(d * d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int e = 0; e < d; ++e) p3[(a * d + b) * d + e] = dphi_last({a, b, e});

  // identity components contribute the constant part diag(1, .., 1, 0)
  Mat M = Mat::Identity(d, d);
  M(last, last) = 0.0;
  M += delta * p1 * p1.transpose();
  out.metric = M;
  if (order < 1) return out;
  for (int k = 0; k < d; ++k) {
    Mat dM(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        dM(a, b) = delta1 * p1(k) * p1(a) * p1(b) + delta * (p2(a, k) * p1(b) + p1(a) * p2(b, k));
    out.gradient.push_back(dM);
  }
  if (order < 2) return out;
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      Mat hM(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          const double t2 = delta2 * p1(k) * p1(l) * p1(a) * p1(b);
          const double t1 =
              delta1 * (p2(k, l) * p1(a) * p1(b) + p1(k) * (p2(a, l) * p1(b) + p1(a) * p2(b, l)) +
                        p1(l) * (p2(a, k) * p1(b) + p1(a) * p2(b, k)));
          const double t0 = delta * (p3[(a * d + k) * d + l] * p1(b) + p2(a, k) * p2(b, l) +
                                     p2(a, l) * p2(b, k) + p1(a) * p3[(b * d + k) * d + l]);
          hM(a, b) = t2 + t1 + t0;
        }
      out.hessian.push_back(hM);
    }
  }
  return out;
}

double anisotropic_quotient(const Mat& M) {
  if (M.rows() != M.cols() || M.rows() == 0) throw DomainError("metric must be square");
  if ((M - M.transpose()).norm() > 1e-12 * std::max(1.0, M.norm()))
    throw DomainError("metric must be symmetric");
  auto es = eigen_solve(M);
  const Vec& l = es.eigenvalues();
  const int d = static_cast<int>(M.rows());
  double det = 1.0;
  for (int i = 0; i < d; ++i) {
    if (!(l(i) > 0.0)) throw DomainError("metric must be positive-definite");
    det *= l(i);
  }
  double q = 0.0;
  for (int i = 0; i < d; ++i) q = std::max(q, std::sqrt(det / std::pow(l(i), d)));
  return q;
}

Mat metric_from_entries(std::span<const double> entries, int dimension) {
  const int expected = dimension * (dimension + 1) / 2;
  if (static_cast<int>(entries.size()) != expected)
    throw InputError("metric entries: expected " + std::to_string(expected) + " values");
  Mat M(dimension, dimension);
  int i = 0;
  for (int a = 0; a < dimension; ++a)
    for (int b = a; b < dimension; ++b) {
      M(a, b) = entries[i];
      M(b, a) = entries[i];
      ++i;
    }
  return M;
}

std::vector<double> metric_entries(const Mat& M) {
  std::vector<double> out;
  for (int a = 0; a < M.rows(); ++a)
    for (int b = a; b < M.cols(); ++b) out.push_back(M(a, b));
  return out;
}

json metric_field_to_json(const Mesh& background, const std::vector<Mat>& node_metrics) {
  json j;
  j["background_mesh"] = mesh_to_json(background);
  json m = json::array();
  for (const auto& M : node_metrics) m.push_back(metric_entries(M));
  j["node_metrics"] = std::move(m);
  return j;
}

namespace {

std::unique_ptr<MetricField> field_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.contains("background_mesh")) throw InputError("metric: missing field 'background_mesh'");
  if (!j.contains("node_metrics")) throw InputError("metric: missing field 'node_metrics'");
  Mesh background;
  const json& b = j.at("background_mesh");
  if (b.is_string()) {
    background = load_mesh(base / b.get<std::string>());
  } else {
    background = mesh_from_json(b);
  }
  const json& nm = j.at("node_metrics");
  if (!nm.is_array()) throw InputError("metric.node_metrics: expected an array");
  std::vector<Mat> metrics;
  metrics.reserve(nm.size());
  for (std::size_t i = 0; i < nm.size(); ++i) {
    const std::string where = "metric.node_metrics[" + std::to_string(i) + "]";
    std::vector<double> entries;
    try {
      entries = nm[i].get<std::vector<double>>();
    } catch (const json::exception&) {
      throw InputError(where + ": expected an array of numbers");
    }
    try {
      metrics.push_back(metric_from_entries(entries, background.dimension));
    } catch (const InputError& ex) {
      throw InputError(where + ": " + ex.what());
    }
  }
  return std::make_unique<MetricField>(std::move(background), std::move(metrics));
}

}  // namespace

std::unique_ptr<MetricField> load_metric_field(const std::filesystem::path& path) {
  json j = parse_json_file(path);
  try {
    return field_from_json(j, path.parent_path());
  } catch (const InputError& ex) {
    throw InputError(path.string() + ": " + ex.what());
  }
}

AnalyticMetricSpec analytic_spec_from_json(const json& j) {
  AnalyticMetricSpec spec;
  if (!j.is_object() || !j.contains("kind")) throw InputError("analytic metric: missing field 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "boundary-layer-2d") {
    spec.kind = AnalyticKind::boundary_layer_2d;
  } else if (kind == "boundary-layer-3d") {
    spec.kind = AnalyticKind::boundary_layer_3d;
    spec.h_min = 0.02;
  } else if (kind == "constant") {
    spec.kind = AnalyticKind::constant;
    if (!j.contains("matrix")) throw InputError("analytic metric: constant kind needs 'matrix'");
    auto entries = j.at("matrix").get<std::vector<double>>();
    const int d = entries.size() == 3 ? 2 : 3;
    spec.constant = metric_from_entries(entries, d);
  } else {
    throw InputError("analytic metric: unknown kind '" + kind + "'");
  }
  if (j.contains("h_min")) spec.h_min = j.at("h_min").get<double>();
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  return spec;
}

json analytic_spec_to_json(const AnalyticMetricSpec& spec) {
  json j;
  switch (spec.kind) {
    case AnalyticKind::boundary_layer_2d: j["kind"] = "boundary-layer-2d"; break;
    case AnalyticKind::boundary_layer_3d: j["kind"] = "boundary-layer-3d"; break;
    case AnalyticKind::constant:
      j["kind"] = "constant";
      j["matrix"] = metric_entries(spec.constant);
      return j;
  }
  j["h_min"] = spec.h_min;
  j["alpha"] = spec.alpha;
  return j;
}

std::unique_ptr<MetricSource> metric_source_from_json(const json& j, const std::filesystem::path& base) {
  if (j.is_object() && j.contains("analytic"))
    return std::make_unique<AnalyticMetric>(analytic_spec_from_json(j.at("analytic")));
  return field_from_json(j, base);
}

std::unique_ptr<MetricSource> load_metric_source(const std::filesystem::path& path) {
  json j = parse_json_file(path);
  try {
    return metric_source_from_json(j, path.parent_path());
  } catch (const InputError& ex) {
    throw InputError(path.string() + ": " + ex.what());
  } catch (const UsageError& ex) {
    throw InputError(path.string() + ": " + ex.what());
  }
}

}  // namespace hoopt
