#include "hoopt/distortion.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hoopt {

DofMap::DofMap(const Mesh& mesh) : dimension_(mesh.dimension) {
  map_.assign(static_cast<std::size_t>(mesh.node_count()) * dimension_, 0);
  for (int node : mesh.fixed)
    for (int k = 0; k < dimension_; ++k) map_[node * dimension_ + k] = -1;
  for (auto& m : map_)
    if (m == 0) m = count_++;
}

Vec DofMap::gather(const Mesh& mesh) const {
  Vec x(count_);
  for (int i = 0; i < mesh.node_count(); ++i)
    for (int k = 0; k < dimension_; ++k)
      if (int g = index(i, k); g >= 0) x(g) = mesh.nodes(i, k);
  return x;
}

void DofMap::scatter(const Vec& x, Mesh& mesh) const {
  for (int i = 0; i < mesh.node_count(); ++i)
    for (int k = 0; k < dimension_; ++k)
      if (int g = index(i, k); g >= 0) mesh.nodes(i, k) = x(g);
}

DistortionSample pointwise_distortion(const Mat& jacobian, const Mat& metric) {
  const int d = static_cast<int>(jacobian.rows());
  DistortionSample s;
  const double detM = metric.determinant();
  if (!(detM > 0.0)) throw DomainError("metric must be positive-definite");
  s.sigma = jacobian.determinant() * std::sqrt(detM);
  s.sigma0 = 0.5 * (s.sigma + std::abs(s.sigma));
  if (!(s.sigma0 > 0.0)) {
    s.regularized = true;
    s.distortion = std::numeric_limits<double>::infinity();
    s.quality = 0.0;
    return s;
  }
  const double trace = (jacobian.transpose() * metric * jacobian).trace();
  s.distortion = trace / (d * std::pow(s.sigma0, 2.0 / d));
  s.quality = 1.0 / s.distortion;
  return s;
}

int default_exactness(const Mesh& mesh) { return 2 * mesh.degree * mesh.dimension; }

namespace {

std::vector<BasisSample> basis_at(const SimplexBasis& basis, const QuadratureRule& rule, int order) {
  std::vector<BasisSample> out;
  out.reserve(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    Vec xi = rule.points.row(q).transpose();
    out.push_back(basis.evaluate(std::span<const double>(xi.data(), xi.size()), order));
  }
  return out;
}

}  // namespace

ElementQuality element_distortion(const Mesh& mesh, int element, const MetricSource& metric,
                                  const QuadratureRule& rule) {
  const int d = mesh.dimension;
  const auto& basis = basis_for(d, mesh.degree);
  const Mat W = equilateral_jacobian(d);
  const Mat Winv = W.inverse();
  const Mat X = mesh.element_nodes(element);
  ElementQuality eq;
  double sum = 0.0, wsum = 0.0;
  double min_q = std::numeric_limits<double>::infinity();
  bool valid = true;
  for (int q = 0; q < rule.size(); ++q) {
    Vec xi = rule.points.row(q).transpose();
    MapSample m = physical_map(X, basis, std::span<const double>(xi.data(), d), 1);
    MetricEvaluation me = metric.evaluate(std::span<const double>(m.x.data(), d), 0);
    DistortionSample s = pointwise_distortion(m.jacobian * Winv, me.metric);
    if (s.regularized) valid = false;
    sum += rule.weights(q) * s.distortion;
    wsum += rule.weights(q);
    min_q = std::min(min_q, s.quality);
    eq.samples.push_back(s);
  }
  eq.min_pointwise_quality = valid ? min_q : 0.0;
  if (!valid) {
    eq.eta = std::numeric_limits<double>::infinity();
    eq.quality = 0.0;
  } else {
    eq.eta = sum / wsum;
    eq.quality = 1.0 / eq.eta;
  }
  return eq;
}

LocalDistortion squared_distortion_local(const Mat& J, const MetricEvaluation& me, int order,
                                         MetricDerivatives mode) {
  const int d = static_cast<int>(J.rows());
  const int nj = d * d;
  const int nz = nj + d;
  const Mat& M = me.metric;
  const bool with_metric = mode == MetricDerivatives::full && order >= 1;

  const double detJ = J.determinant();
  const double detM = M.determinant();
  const double T = (J.transpose() * M * J).trace();
  const double sigma = detJ * std::sqrt(detM);
  LocalDistortion out;
  if (!(sigma > 0.0)) throw DomainError("distortion derivatives requested at an invalid point");
  const double N0 = T / (d * std::pow(sigma, 2.0 / d));
  out.value = N0 * N0;
  if (order < 1) return out;

  const Mat Jinv = J.inverse();
  const Mat Minv = M.inverse();
  const Mat MJ = M * J;

  // gradient of T, ln det J, ln det M
  Vec gT = Vec::Zero(nz), gJ = Vec::Zero(nz), gM = Vec::Zero(nz);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      gT(a * d + b) = 2.0 * MJ(a, b);
      gJ(a * d + b) = Jinv(b, a);
    }
  std::vector<Mat> MinvdM;
  if (with_metric) {
    for (int k = 0; k < d; ++k) {
      gT(nj + k) = (J.transpose() * me.gradient[k] * J).trace();
      MinvdM.push_back(Minv * me.gradient[k]);
      gM(nj + k) = MinvdM[k].trace();
    }
  }
  const Vec gl = gT / T - (2.0 / d) * gJ - (1.0 / d) * gM;
  out.gradient = 2.0 * out.value * gl;
  if (order < 2) return out;

  Mat hT = Mat::Zero(nz, nz), hJ = Mat::Zero(nz, nz), hM = Mat::Zero(nz, nz);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          if (b == e) hT(a * d + b, c * d + e) = 2.0 * M(a, c);
          hJ(a * d + b, c * d + e) = -Jinv(b, c) * Jinv(e, a);
        }
  if (with_metric) {
    for (int k = 0; k < d; ++k) {
      const Mat dMJ = 2.0 * me.gradient[k] * J;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          hT(a * d + b, nj + k) = dMJ(a, b);
          hT(nj + k, a * d + b) = dMJ(a, b);
        }
      for (int l = 0; l < d; ++l) {
        const Mat& d2M = me.hessian[k * d + l];
        hT(nj + k, nj + l) = (J.transpose() * d2M * J).trace();
        hM(nj + k, nj + l) = (Minv * d2M).trace() - (MinvdM[k] * MinvdM[l]).trace();
      }
    }
  }
  const Mat hl = hT / T - gT * gT.transpose() / (T * T) - (2.0 / d) * hJ - (1.0 / d) * hM;
  out.hessian = 2.0 * out.value * (hl + 2.0 * gl * gl.transpose());
  return out;
}

FunctionalResult functional(const Mesh& mesh, const MetricSource& metric, const DofMap& dofs,
                            int order, const FunctionalOptions& options) {
  if (order < 0 || order > 2) throw UsageError("functional order must be 0, 1 or 2");
  const int d = mesh.dimension;
  const auto& basis = basis_for(d, mesh.degree);
  const int exactness = options.exactness < 0 ? default_exactness(mesh) : options.exactness;
  const QuadratureRule& rule = quadrature_for(d, exactness);
  const Mat W = equilateral_jacobian(d);
  const Mat Winv = W.inverse();
  const double measure = W.determinant();
  const std::vector<BasisSample> samples = basis_at(basis, rule, 1);
  const int n = basis.size();
  const int nl = n * d;
  const int nz = d * d + d;
  const int metric_order = options.metric_derivatives == MetricDerivatives::full ? order : 0;

  FunctionalEvaluation out;
  if (order >= 1) out.gradient = Vec::Zero(dofs.size());
  std::vector<Eigen::Triplet<double>> triplets;

  for (int e = 0; e < mesh.element_count(); ++e) {
    const Mat X = mesh.element_nodes(e);
    const auto& conn = mesh.elements[e];
    Vec ge = Vec::Zero(order >= 1 ? nl : 0);
    Mat he = Mat::Zero(order >= 2 ? nl : 0, order >= 2 ? nl : 0);
    for (int q = 0; q < rule.size(); ++q) {
      const BasisSample& s = samples[q];
      const Mat JP = X.transpose() * s.gradients;
      if (!(JP.determinant() > 0.0)) return Infinite{e};
      const Mat J = JP * Winv;
      const Vec x = X.transpose() * s.values;
      MetricEvaluation me = metric.evaluate(std::span<const double>(x.data(), d), metric_order);
      LocalDistortion loc = squared_distortion_local(J, me, order, options.metric_derivatives);
      const double w = rule.weights(q) * measure;
      out.value += w * loc.value;
      if (order < 1) continue;
      // z = B x_local
      const Mat b = s.gradients * Winv;  // n x d
      Mat B = Mat::Zero(nz, nl);
      for (int a = 0; a < n; ++a)
        for (int al = 0; al < d; ++al) {
          for (int be = 0; be < d; ++be) B(al * d + be, a * d + al) = b(a, be);
          B(d * d + al, a * d + al) = s.values(a);
        }
      ge.noalias() += w * B.transpose() * loc.gradient;
      if (order >= 2) he.noalias() += w * B.transpose() * loc.hessian * B;
    }
    if (order < 1) continue;
    std::vector<int> g(nl);
    for (int a = 0; a < n; ++a)
      for (int al = 0; al < d; ++al) g[a * d + al] = dofs.index(conn[a], al);
    for (int i = 0; i < nl; ++i)
      if (g[i] >= 0) out.gradient(g[i]) += ge(i);
    if (order >= 2) {
      for (int i = 0; i < nl; ++i) {
        if (g[i] < 0) continue;
        for (int j = 0; j < nl; ++j) {
          if (g[j] < 0) continue;
          triplets.emplace_back(g[i], g[j], 0.5 * (he(i, j) + he(j, i)));
        }
      }
    }
  }
  if (order >= 2) {
    out.hessian.resize(dofs.size(), dofs.size());
    out.hessian.setFromTriplets(triplets.begin(), triplets.end());
  }
  return out;
}

QualityStatistics statistics(std::span<const double> values) {
  QualityStatistics s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / values.size());
  return s;
}

QualityReport quality_report(const Mesh& mesh, const MetricSource& metric, int exactness) {
  const int q = exactness < 0 ? default_exactness(mesh) : exactness;
  const QuadratureRule& rule = quadrature_for(mesh.dimension, q);
  QualityReport report;
  std::vector<double> values;
  for (int e = 0; e < mesh.element_count(); ++e) {
    report.elements.push_back(element_distortion(mesh, e, metric, rule));
    values.push_back(report.elements.back().quality);
  }
  report.quality = statistics(values);
  return report;
}

std::string quality_csv(const QualityReport& report) {
  std::ostringstream out;
  out << "element_id,quality,min_pointwise_quality\n";
  for (std::size_t e = 0; e < report.elements.size(); ++e)
    out << e << ',' << format_double(report.elements[e].quality) << ','
        << format_double(report.elements[e].min_pointwise_quality) << '\n';
  const auto& s = report.quality;
  out << "min," << format_double(s.min) << ",\n";
  out << "max," << format_double(s.max) << ",\n";
  out << "mean," << format_double(s.mean) << ",\n";
  out << "stddev," << format_double(s.stddev) << ",\n";
  return out.str();
}

void write_quality_csv(const QualityReport& report, const std::filesystem::path& path) {
  write_text(path, quality_csv(report));
}

}  // namespace hoopt
