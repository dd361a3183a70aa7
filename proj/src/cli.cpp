#include "hoopt/cli.hpp"

#include "hoopt/checks.hpp"
#include "hoopt/errors.hpp"
#include "hoopt/fixtures.hpp"
#include "hoopt/io.hpp"
#include "hoopt/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

namespace hoopt {

namespace fs = std::filesystem;

namespace {

void require_files(std::initializer_list<const fs::path*> paths) {
  for (const fs::path* p : paths)
    if (p && !p->empty() && !fs::is_regular_file(*p)) throw InputError("missing file: " + p->string());
}

struct AdaptArgs {
  fs::path mesh, background, metric, model, config, out, report, trace;
  std::optional<double> lambda, tolerance;
  std::optional<int> max_iterations;
};

int cmd_adapt(const AdaptArgs& a, std::ostream& out) {
  require_files({&a.mesh, &a.background, &a.metric, &a.model, &a.config});
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.lambda) config.lambda = *a.lambda;
  if (a.tolerance) config.tolerance = *a.tolerance;
  if (a.max_iterations) config.max_iterations = *a.max_iterations;
  run_config_from_json(run_config_to_json(config));  // validates the overrides

  const Mesh mesh = load_mesh(a.mesh);
  const auto metric = load_metric(a.metric, a.background.empty() ? std::nullopt : std::optional(a.background));
  std::optional<ImplicitModel> model;
  if (!a.model.empty()) model = load_model(a.model);

  const AdaptResult r = adapt(mesh, *metric, model ? &*model : nullptr, adapt_options(config));
  save_mesh(r.mesh, a.out);
  write_text(a.report, quality_table_csv(mesh.degree, r.initial.quality, r.final.quality));
  const fs::path trace =
      a.trace.empty() ? a.report.parent_path() / (a.report.stem().string() + "_trace.csv") : a.trace;
  write_trace_csv(r.solver, trace);
  out << quality_table_text(mesh.degree, r.initial.quality, r.final.quality);
  out << "termination: " << to_string(r.solver.reason) << " after " << r.solver.iterations.size() - 1
      << " iterations\n";
  return r.solver.converged() ? exit_ok : exit_not_converged;
}

int cmd_quality(const fs::path& mesh_file, const fs::path& metric_file, const fs::path& background,
                const fs::path& report, int exactness, std::ostream& out) {
  require_files({&mesh_file, &metric_file, &background});
  const Mesh mesh = load_mesh(mesh_file);
  const auto metric = load_metric(metric_file, background.empty() ? std::nullopt : std::optional(background));
  const QualityReport q = quality_report(mesh, *metric, exactness);
  write_quality_csv(q, report);
  out << "min " << format_double(q.quality.min) << " max " << format_double(q.quality.max) << " mean "
      << format_double(q.quality.mean) << " stddev " << format_double(q.quality.stddev) << '\n';
  return exit_ok;
}

int cmd_implicitize(const fs::path& model_file, int grid, const fs::path& report, std::ostream& out) {
  require_files({&model_file});
  if (grid < 2) throw UsageError("--grid must be at least 2");
  const ModelSpec spec = load_model_spec(model_file);
  if (spec.entities.empty()) throw InputError(model_file.string() + ": model has no entities");
  const ImplicitModel model(spec);
  const int d = model.dimension();
  Vec lo = Vec::Constant(d, 1e300), hi = Vec::Constant(d, -1e300);
  for (const auto& e : spec.entities)
    for (const auto& p : e.patches) {
      lo = lo.cwiseMin(p.points.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(p.points.colwise().maxCoeff().transpose());
    }
  const Vec pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  std::ostringstream csv;
  csv << (d == 2 ? "x,y" : "x,y,z") << ",gamma,log10_gamma\n";
  const int count = d == 2 ? grid * grid : grid * grid * grid;
  double smallest = 1e300;
  for (int n = 0; n < count; ++n) {
    Vec x(d);
    int rest = n;
    for (int k = 0; k < d; ++k) {
      x(k) = lo(k) + (hi(k) - lo(k)) * (rest % grid) / (grid - 1);
      rest /= grid;
    }
    const double g = model.evaluate(std::span<const double>(x.data(), d), 0).value;
    smallest = std::min(smallest, g);
    for (int k = 0; k < d; ++k) csv << format_double(x(k)) << ',';
    csv << format_double(g) << ',' << format_double(std::log10(g)) << '\n';
  }
  write_text(report, csv.str());
  out << count << " points, min gamma " << format_double(smallest) << '\n';
  return exit_ok;
}

int cmd_check_derivatives(const fs::path& fixtures, std::uint64_t seed, bool corrupt, const fs::path& report,
                          std::ostream& out) {
  if (!fs::is_directory(fixtures)) throw InputError("missing fixture directory: " + fixtures.string());
  CheckOptions options;
  options.seed = seed;
  options.corrupt_gradient = corrupt;
  const std::vector<CheckResult> results = run_derivative_checks(fixtures, options);
  const std::string text = check_report(results);
  if (!report.empty()) write_text(report, text);
  out << text;
  const bool ok = std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed(); });
  return ok ? exit_ok : exit_input_error;
}

int cmd_compare_analytic(const fs::path& manifest, const fs::path& report, std::ostream& out) {
  const std::string text = comparison_json(compare_analytic(manifest)).dump(1) + "\n";
  if (!report.empty()) write_text(report, text);
  out << text;
  return exit_ok;
}

int cmd_generate_fixtures(const fs::path& dir, std::ostream& out) {
  for (const auto& f : generate_fixtures(dir)) out << f.name << '\n';
  return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric and geometry driven r-adaption of curved high-order meshes", "hoopt"};
  app.require_subcommand(1);

  AdaptArgs adapt_args;
  CLI::App* adapt_cmd = app.add_subcommand("adapt", "optimize node positions of a mesh");
  adapt_cmd->add_option("--mesh", adapt_args.mesh, "input mesh")->required();
  adapt_cmd->add_option("--background", adapt_args.background, "background mesh replacing the metric's own");
  adapt_cmd->add_option("--metric", adapt_args.metric, "discrete or analytic metric file")->required();
  adapt_cmd->add_option("--model", adapt_args.model, "implicit boundary model");
  adapt_cmd->add_option("--config", adapt_args.config, "run configuration");
  adapt_cmd->add_option("--out", adapt_args.out, "optimized mesh")->required();
  adapt_cmd->add_option("--report", adapt_args.report, "quality table CSV")->required();
  adapt_cmd->add_option("--trace", adapt_args.trace, "solver trace CSV (default: <report>_trace.csv)");
  adapt_cmd->add_option("--lambda", adapt_args.lambda, "penalty parameter override");
  adapt_cmd->add_option("--tol", adapt_args.tolerance, "residual tolerance override");
  adapt_cmd->add_option("--max-iter", adapt_args.max_iterations, "iteration limit override");

  fs::path q_mesh, q_metric, q_background, q_out;
  int q_exactness = -1;
  CLI::App* quality_cmd = app.add_subcommand("quality", "element qualities of a mesh");
  quality_cmd->add_option("--mesh", q_mesh, "mesh")->required();
  quality_cmd->add_option("--metric", q_metric, "metric file")->required();
  quality_cmd->add_option("--background", q_background, "background mesh replacing the metric's own");
  quality_cmd->add_option("--exactness", q_exactness, "quadrature exactness (default 2 p d)");
  quality_cmd->add_option("--out", q_out, "per-element CSV")->required();

  fs::path i_model, i_out;
  int grid = 0;
  CLI::App* implicit_cmd = app.add_subcommand("implicitize", "sample the model level set on a grid");
  implicit_cmd->add_option("--model", i_model, "model file")->required();
  implicit_cmd->add_option("--grid", grid, "points per axis")->required();
  implicit_cmd->add_option("--out", i_out, "CSV raster")->required();

  fs::path c_fixtures, c_out;
  std::uint64_t seed = 1;
  bool corrupt = false;
  CLI::App* check_cmd = app.add_subcommand("check-derivatives", "finite-difference self-checks");
  check_cmd->add_option("--fixtures", c_fixtures, "fixture directory")->required();
  check_cmd->add_option("--seed", seed, "random seed");
  check_cmd->add_option("--out", c_out, "report file");
  check_cmd->add_flag("--corrupt-gradient", corrupt)->group("");

  fs::path m_manifest, m_out;
  CLI::App* compare_cmd = app.add_subcommand("compare-analytic", "adapt with an analytic and a sampled metric");
  compare_cmd->add_option("--manifest", m_manifest, "comparison manifest")->required();
  compare_cmd->add_option("--out", m_out, "JSON report");

  fs::path g_out;
  CLI::App* fixtures_cmd = app.add_subcommand("generate-fixtures", "write the bundled fixture set");
  fixtures_cmd->add_option("--out", g_out, "directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_input_error;
  }

  try {
    if (*adapt_cmd) return cmd_adapt(adapt_args, out);
    if (*quality_cmd) return cmd_quality(q_mesh, q_metric, q_background, q_out, q_exactness, out);
    if (*implicit_cmd) return cmd_implicitize(i_model, grid, i_out, out);
    if (*check_cmd) return cmd_check_derivatives(c_fixtures, seed, corrupt, c_out, out);
    if (*compare_cmd) return cmd_compare_analytic(m_manifest, m_out, out);
    if (*fixtures_cmd) return cmd_generate_fixtures(g_out, out);
  } catch (const Error& e) {
    err << to_string(e.kind()) << ": " << e.what() << '\n';
    const bool numeric = e.kind() == ErrorKind::numerical || e.kind() == ErrorKind::domain;
    return numeric ? exit_not_converged : exit_input_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_input_error;
  }
  return exit_input_error;
}

}  // namespace hoopt
