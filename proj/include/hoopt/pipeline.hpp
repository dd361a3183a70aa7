#pragma once

#include "hoopt/solver.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>

namespace hoopt {

struct AdaptOptions {
  ObjectiveOptions objective;
  SolverConfig solver;
};

AdaptOptions adapt_options(const RunConfig& config);

struct AdaptResult {
  Mesh mesh;
  QualityReport initial;
  QualityReport final;
  SolverReport solver;
};

using MeshObserver = std::function<void(const Mesh& mesh, const IterationRecord& record)>;

// Minimizes H over the free nodes of `mesh`. Trial points the metric cannot
// localize count as infinite. Throws PreconditionError for an invalid input mesh.
AdaptResult adapt(const Mesh& mesh, const MetricSource& metric, const ImplicitModel* model,
                  const AdaptOptions& options, const MeshObserver& observe = {});

// One row in the layout: degree, min/max/mean/stddev each as initial,final.
std::string quality_table_csv(int degree, const QualityStatistics& initial, const QualityStatistics& final);
std::string quality_table_text(int degree, const QualityStatistics& initial, const QualityStatistics& final);

// Analytic or discrete metric file; `background` replaces the field's own
// background mesh when given.
std::unique_ptr<MetricSource> load_metric(const std::filesystem::path& metric,
                                          const std::optional<std::filesystem::path>& background = {});

struct AnalyticComparison {
  AdaptResult analytic;
  AdaptResult discrete;
  double max_node_distance = 0.0;
  QualityStatistics difference;  // absolute differences of the final statistics
};

// Adapts one mesh twice, with an analytic metric and with its sampled field.
// Manifest keys: mesh, analytic, discrete, and optionally model, config,
// background; relative paths resolve against the manifest's directory.
AnalyticComparison compare_analytic(const std::filesystem::path& manifest);
nlohmann::json comparison_json(const AnalyticComparison& comparison);

}  // namespace hoopt
