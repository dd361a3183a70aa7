#pragma once

#include "hoopt/mesh.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace hoopt {

// Metric and its spatial derivatives at one point.
// gradient[k] = dM/dx_k, hessian[k*d+l] = d2M/dx_k dx_l.
struct MetricEvaluation {
  Mat metric;
  std::vector<Mat> gradient;
  std::vector<Mat> hessian;
  int element = -1;
  Vec xi;
  bool clustered = false;  // derivatives taken through the divided-difference route
};

class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual int dimension() const = 0;
  virtual MetricEvaluation evaluate(std::span<const double> x, int order) const = 0;
};

struct Localization {
  int element = -1;
  Vec xi;
  double residual = 0.0;
  bool clamped = false;
};

// Eigenpairs of a symmetric matrix field and their first and second
// derivatives. Index j or j*d+k as in MetricEvaluation.
struct EigenDerivatives {
  Vec values;
  Mat vectors;  // column l is u_l
  std::vector<Vec> dvalues;
  std::vector<Mat> dvectors;
  std::vector<Vec> d2values;
  std::vector<Mat> d2vectors;
};

// Throws NumericalError when an eigenvalue gap is below gap_tolerance * max(1, |L|_F).
EigenDerivatives eig_derivatives(const Mat& L, std::span<const Mat> dL, std::span<const Mat> d2L,
                                 int order, double gap_tolerance = 1e-8);

// exp of a symmetric matrix field with derivatives, through the eigen-derivatives.
MetricEvaluation exp_with_derivatives(const Mat& L, std::span<const Mat> dL,
                                      std::span<const Mat> d2L, int order);

// Same quantity through divided differences of exp; exact for repeated eigenvalues.
MetricEvaluation exp_divided_differences(const Mat& L, std::span<const Mat> dL,
                                         std::span<const Mat> d2L, int order);

Mat symmetric_log(const Mat& M);
Mat symmetric_exp(const Mat& L);

class MetricField final : public MetricSource {
 public:
  MetricField(Mesh background, std::vector<Mat> node_metrics);

  int dimension() const override { return background_.dimension; }
  MetricEvaluation evaluate(std::span<const double> x, int order) const override;

  const Mesh& background() const { return background_; }
  const std::vector<Mat>& node_logs() const { return logs_; }

  Localization localize(std::span<const double> x) const;
  MetricEvaluation interpolate(std::span<const double> x, int order) const;
  MetricEvaluation interpolate_at(int element, std::span<const double> xi, int order) const;

 private:
  void build_index();
  bool newton_inverse(int element, std::span<const double> x, Vec& xi, double& residual) const;

  Mesh background_;
  std::vector<Mat> logs_;
  bool affine_ = true;
  double diagonal_ = 1.0;
  Vec lower_, upper_;
  std::array<int, 3> cells_{1, 1, 1};
  Vec cell_size_;
  std::vector<std::vector<int>> grid_;
};

enum class AnalyticKind { boundary_layer_2d, boundary_layer_3d, constant };

struct AnalyticMetricSpec {
  AnalyticKind kind = AnalyticKind::boundary_layer_2d;
  double h_min = 0.01;
  double alpha = 2.0;
  Mat constant;  // used by AnalyticKind::constant
};

class AnalyticMetric final : public MetricSource {
 public:
  explicit AnalyticMetric(AnalyticMetricSpec spec);
  int dimension() const override;
  MetricEvaluation evaluate(std::span<const double> x, int order) const override;
  const AnalyticMetricSpec& spec() const { return spec_; }

 private:
  AnalyticMetricSpec spec_;
};

MetricEvaluation analytic_metric(const AnalyticMetricSpec& spec, std::span<const double> x,
                                 int order);

double anisotropic_quotient(const Mat& M);

// Upper triangle, row-major.
Mat metric_from_entries(std::span<const double> entries, int dimension);
std::vector<double> metric_entries(const Mat& M);

std::unique_ptr<MetricField> load_metric_field(const std::filesystem::path& path);
nlohmann::json metric_field_to_json(const Mesh& background, const std::vector<Mat>& node_metrics);

AnalyticMetricSpec analytic_spec_from_json(const nlohmann::json& j);
nlohmann::json analytic_spec_to_json(const AnalyticMetricSpec& spec);

// Either a discrete field or {"analytic": {...}}; a string background_mesh is
// resolved against `base`.
std::unique_ptr<MetricSource> metric_source_from_json(const nlohmann::json& j, const std::filesystem::path& base);

// Loads either a discrete field file or {"analytic": {...}}.
std::unique_ptr<MetricSource> load_metric_source(const std::filesystem::path& path);

}  // namespace hoopt
