#include "hoopt/pipeline.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <cstdio>
#include <sstream>

namespace hoopt {

AdaptOptions adapt_options(const RunConfig& config) {
  AdaptOptions o;
  o.objective.lambda = config.lambda;
  o.objective.exactness = config.quadrature_exactness;
  o.solver.tolerance = config.tolerance;
  o.solver.step_tolerance = config.step_tolerance;
  o.solver.max_iterations = config.max_iterations;
  return o;
}

AdaptResult adapt(const Mesh& mesh, const MetricSource& metric, const ImplicitModel* model,
                  const AdaptOptions& options, const MeshObserver& observe) {
  if (metric.dimension() != mesh.dimension) throw InputError("metric dimension does not match the mesh");
  const int exactness = options.objective.exactness < 0 ? default_exactness(mesh) : options.objective.exactness;
  const ValidityReport validity = check_validity(mesh, exactness);
  if (!validity.valid)
    throw PreconditionError("initial mesh is invalid (element " + std::to_string(validity.invalid.front().element) +
                            ")");
  AdaptResult out;
  out.mesh = mesh;
  out.initial = quality_report(mesh, metric, exactness);
  const DofMap dofs(mesh);
  Mesh work = mesh;
  const Evaluator evaluate = [&](const Vec& x, int order) {
    dofs.scatter(x, work);
    if (order > 0) return combined_objective(work, metric, model, dofs, options.objective, order);
    try {
      return combined_objective(work, metric, model, dofs, options.objective, order);
    } catch (const DomainError&) {
      ObjectiveValue v;
      v.finite = false;
      v.H = std::numeric_limits<double>::infinity();
      return v;
    }
  };
  IterateObserver watch;
  if (observe) {
    watch = [&](const Vec& x, const IterationRecord& r) {
      Mesh m = mesh;
      dofs.scatter(x, m);
      observe(m, r);
    };
  }
  const MinimizeResult r = minimize(evaluate, dofs.gather(mesh), options.solver, watch);
  dofs.scatter(r.x, out.mesh);
  if (!check_validity(out.mesh, exactness).valid) throw NumericalError("optimized mesh is invalid");
  out.final = quality_report(out.mesh, metric, exactness);
  out.solver = r.report;
  return out;
}

std::string quality_table_csv(int degree, const QualityStatistics& a, const QualityStatistics& b) {
  std::ostringstream os;
  os << "degree,min_initial,min_final,max_initial,max_final,mean_initial,mean_final,stddev_initial,stddev_final\n";
  os << degree;
  for (auto [x, y] : {std::pair{a.min, b.min}, {a.max, b.max}, {a.mean, b.mean}, {a.stddev, b.stddev}})
    os << ',' << format_double(x) << ',' << format_double(y);
  os << '\n';
  return os.str();
}

std::string quality_table_text(int degree, const QualityStatistics& a, const QualityStatistics& b) {
  char line[256];
  std::string out = "Mesh  Minimum          Maximum          Mean             Std dev.\n"
                    "deg.  Initial  Final   Initial  Final   Initial  Final   Initial  Final\n";
  std::snprintf(line, sizeof line, "%-4d  %.4f   %.4f  %.4f   %.4f  %.4f   %.4f  %.4f   %.4f\n", degree, a.min, b.min,
                a.max, b.max, a.mean, b.mean, a.stddev, b.stddev);
  return out + line;
}

std::unique_ptr<MetricSource> load_metric(const std::filesystem::path& metric,
                                          const std::optional<std::filesystem::path>& background) {
  nlohmann::json j = parse_json_file(metric);
  try {
    if (background && !(j.is_object() && j.contains("analytic"))) j["background_mesh"] = mesh_to_json(load_mesh(*background));
    return metric_source_from_json(j, metric.parent_path());
  } catch (const InputError& ex) {
    throw InputError(metric.string() + ": " + ex.what());
  } catch (const UsageError& ex) {
    throw InputError(metric.string() + ": " + ex.what());
  }
}

AnalyticComparison compare_analytic(const std::filesystem::path& manifest) {
  namespace fs = std::filesystem;
  if (!fs::is_regular_file(manifest)) throw InputError("missing file: " + manifest.string());
  const nlohmann::json m = parse_json_file(manifest);
  auto path = [&](const char* key, bool required) -> fs::path {
    if (!m.contains(key)) {
      if (required) throw InputError(manifest.string() + ": missing \"" + key + "\"");
      return {};
    }
    if (!m[key].is_string()) throw InputError(manifest.string() + ": \"" + key + "\" must be a path");
    const fs::path p = m[key].get<std::string>();
    const fs::path resolved = p.is_absolute() ? p : manifest.parent_path() / p;
    if (!fs::is_regular_file(resolved)) throw InputError("missing file: " + resolved.string());
    return resolved;
  };
  const fs::path mesh_file = path("mesh", true), analytic_file = path("analytic", true),
                 discrete_file = path("discrete", true), model_file = path("model", false),
                 config_file = path("config", false), background = path("background", false);

  const RunConfig config = config_file.empty() ? RunConfig{} : load_run_config(config_file);
  const Mesh mesh = load_mesh(mesh_file);
  std::optional<ImplicitModel> model;
  if (!model_file.empty()) model = load_model(model_file);
  const auto analytic = load_metric(analytic_file);
  const auto discrete = load_metric(discrete_file, background.empty() ? std::nullopt : std::optional(background));
  const AdaptOptions options = adapt_options(config);
  AnalyticComparison c;
  c.analytic = adapt(mesh, *analytic, model ? &*model : nullptr, options);
  c.discrete = adapt(mesh, *discrete, model ? &*model : nullptr, options);
  c.max_node_distance = (c.analytic.mesh.nodes - c.discrete.mesh.nodes).rowwise().norm().maxCoeff();
  const QualityStatistics &a = c.analytic.final.quality, &b = c.discrete.final.quality;
  c.difference = {std::abs(a.min - b.min), std::abs(a.max - b.max), std::abs(a.mean - b.mean),
                  std::abs(a.stddev - b.stddev)};
  return c;
}

nlohmann::json comparison_json(const AnalyticComparison& c) {
  auto stats = [](const QualityStatistics& s) {
    return nlohmann::json{{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"stddev", s.stddev}};
  };
  auto run = [&](const AdaptResult& r) {
    return nlohmann::json{{"termination", to_string(r.solver.reason)},
                          {"iterations", r.solver.iterations.size() - 1},
                          {"initial", stats(r.initial.quality)},
                          {"final", stats(r.final.quality)}};
  };
  return {{"analytic", run(c.analytic)},
          {"discrete", run(c.discrete)},
          {"max_node_distance", c.max_node_distance},
          {"difference", stats(c.difference)}};
}

}  // namespace hoopt
