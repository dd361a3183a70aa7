#pragma once

#include "hoopt/distortion.hpp"
#include "hoopt/implicit.hpp"

#include <filesystem>

namespace hoopt {

// Run configuration file: lambda, tolerance, step_tolerance, max_iterations,
// quadrature_exactness (-1 selects 2 p d).
struct RunConfig {
  double lambda = 1e4;
  double tolerance = 1e-4;
  double step_tolerance = 1e-4;
  int max_iterations = 200;
  int quadrature_exactness = -1;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

struct ObjectiveOptions {
  double lambda = 1e4;
  int exactness = -1;           // element quadrature, -1: 2 p d
  int boundary_exactness = -1;  // facet quadrature, -1: default_boundary_exactness
  MetricDerivatives metric_derivatives = MetricDerivatives::full;
};

// Facet quadrature exactness used when none is configured.
constexpr int default_boundary_exactness(int degree) { return 2 * degree + 10; }

// G = sum over facets and targeted entities of the integral of gamma^2, plus
// gamma^2 at slide nodes targeting several entities. Gradient and Hessian are
// over the free coordinates of `dofs`.
FunctionalEvaluation boundary_deviation(const Mesh& mesh, const ImplicitModel& model, const DofMap& dofs,
                                        int order, int exactness = -1);

// Largest |gamma| of a targeted entity over the facet quadrature points.
double max_boundary_deviation(const Mesh& mesh, const ImplicitModel& model, int exactness = -1);

struct ObjectiveValue {
  bool finite = true;
  int invalid_element = -1;
  double H = 0.0;
  double F = 0.0;
  double G = 0.0;
  Vec gradient;
  SparseMat hessian;
};

// H = F + lambda G. Without a model G is zero.
ObjectiveValue combined_objective(const Mesh& mesh, const MetricSource& metric, const ImplicitModel* model,
                                  const DofMap& dofs, const ObjectiveOptions& options, int order);

}  // namespace hoopt
