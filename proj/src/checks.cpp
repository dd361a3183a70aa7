#include "hoopt/checks.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/objective.hpp"

#include <cstdio>
#include <functional>
#include <random>

namespace hoopt {

namespace {

constexpr double metric_step = 1e-5;
constexpr double point_step = 1e-6;
constexpr double dof_step = 1e-6;
constexpr double corruption = 1.0 + 1e-3;

double rel_error(const Mat& a, const Mat& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

std::span<const double> sp(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(gen_); }

  // Barycentric coordinates all at least `margin`.
  Vec master_point(int d, double margin) {
    while (true) {
      Vec xi(d);
      for (int k = 0; k < d; ++k) xi(k) = uniform(margin, 1.0);
      if (xi.sum() <= 1.0 - margin) return xi;
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Master coordinates of x in one element, by Newton from `start`.
Vec inverse_map(const Mat& nodes, const SimplexBasis& basis, const Vec& x, Vec xi) {
  for (int it = 0; it < 30; ++it) {
    const MapSample m = physical_map(nodes, basis, sp(xi), 1);
    const Vec dx = m.x - x;
    xi -= m.jacobian.lu().solve(dx);
    if (dx.norm() <= 1e-15) break;
  }
  return xi;
}

// Deterministic perturbation of the free coordinates.
Mesh perturbed(Mesh mesh, double amplitude, Sampler& sampler) {
  const DofMap dofs(mesh);
  Vec x = dofs.gather(mesh);
  for (int i = 0; i < x.size(); ++i) x(i) += sampler.uniform(-amplitude, amplitude);
  dofs.scatter(x, mesh);
  return mesh;
}

double typical_spacing(const Mesh& mesh) {
  const Mat X = mesh.element_nodes(0);
  return (X.row(1) - X.row(0)).norm() / mesh.degree;
}

// FD over `probes` random coordinates of a mesh functional given as value(x)
// and gradient(x); the Hessian columns come from the gradient.
template <class Value, class Gradient>
CheckResult probe_functional(std::string suite, const Vec& x0, const Vec& gradient, const SparseMat& hessian,
                             Value value, Gradient grad, const CheckOptions& options, Sampler& sampler) {
  CheckResult r;
  r.suite = std::move(suite);
  const double gscale = gradient.cwiseAbs().maxCoeff();
  const Vec g = options.corrupt_gradient ? Vec(corruption * gradient) : gradient;
  for (int t = 0; t < options.probes; ++t) {
    const int i = sampler.index(static_cast<int>(x0.size()));
    Vec a = x0, b = x0;
    a(i) += dof_step;
    b(i) -= dof_step;
    const double fd = (value(a) - value(b)) / (2 * dof_step);
    r.gradient_error = std::max(r.gradient_error, std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), gscale}));
    const Vec column = hessian.col(i);
    const Vec fd_column = (grad(a) - grad(b)) / (2 * dof_step);
    r.hessian_error = std::max(r.hessian_error, rel_error(fd_column, column, column.norm()));
    ++r.points;
  }
  return r;
}

}  // namespace

CheckResult check_metric_field(const std::filesystem::path& field_file, const CheckOptions& options) {
  const auto field = load_metric_field(field_file);
  const Mesh& bg = field->background();
  const int d = bg.dimension;
  const SimplexBasis& basis = basis_for(d, bg.degree);
  Sampler sampler(options.seed);
  CheckResult r;
  r.suite = "metric-" + std::to_string(d) + "d";
  for (int t = 0; t < options.points; ++t) {
    // inside one background element: the interpolant is only continuous across faces
    const int e = sampler.index(bg.element_count());
    const Vec xi = sampler.master_point(d, 0.05);
    const Mat X = bg.element_nodes(e);
    const Vec p = physical_map(X, basis, sp(xi), 0).x;
    const MetricEvaluation ev = field->interpolate_at(e, sp(xi), 2);
    auto at = [&](const Vec& x) { return field->interpolate_at(e, sp(inverse_map(X, basis, x, xi)), 1); };
    const double scale = ev.metric.norm();
    for (int k = 0; k < d; ++k) {
      Vec a = p, b = p;
      a(k) += metric_step;
      b(k) -= metric_step;
      const MetricEvaluation ea = at(a), eb = at(b);
      const Mat g = options.corrupt_gradient ? Mat(corruption * ev.gradient[k]) : ev.gradient[k];
      r.gradient_error = std::max(r.gradient_error, rel_error((ea.metric - eb.metric) / (2 * metric_step), g, scale));
      for (int l = 0; l < d; ++l)
        r.hessian_error =
            std::max(r.hessian_error, rel_error((ea.gradient[l] - eb.gradient[l]) / (2 * metric_step),
                                                ev.hessian[k * d + l], scale));
    }
    ++r.points;
  }
  return r;
}

CheckResult check_implicit_model(const std::filesystem::path& model_file, const CheckOptions& options) {
  const ModelSpec spec = load_model_spec(model_file);
  const ImplicitModel model(spec);
  const int d = model.dimension();
  Vec lo = Vec::Constant(d, 1e300), hi = Vec::Constant(d, -1e300);
  for (const auto& e : spec.entities)
    for (const auto& p : e.patches) {
      lo = lo.cwiseMin(p.points.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(p.points.colwise().maxCoeff().transpose());
    }
  const Vec pad = 0.05 * (hi - lo).cwiseMax(1e-3);
  lo -= pad;
  hi += pad;
  Sampler sampler(options.seed);
  CheckResult r;
  r.suite = "implicit-" + model_file.stem().string();
  const int max_tries = 200 * options.points;
  for (int t = 0; t < max_tries && r.points < options.points; ++t) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x(k) = sampler.uniform(lo(k), hi(k));
    // skip the zero set and the kinks of the hull and trimming layers
    if (model.evaluate(sp(x), 0).value < 1e-3) continue;
    bool near_kink = false;
    for (const auto& e : model.entities())
      for (const auto& p : e.patches) {
        if (near_kink) break;
        const HullValue f = hull_function(p.hull, sp(x));
        near_kink = f.interior_flat || std::abs(f.jet.value) < 1e-3 ||
                    std::abs(normalized_patch_function(p, sp(x), 0).value) < 1e-3;
      }
    if (near_kink) continue;
    const ScaledJet j = model.evaluate(sp(x));
    Vec g(d);
    Mat H(d, d);
    for (int k = 0; k < d; ++k) {
      Vec a = x, b = x;
      a(k) += point_step;
      b(k) -= point_step;
      const ScaledJet ja = model.evaluate(sp(a)), jb = model.evaluate(sp(b));
      g(k) = (ja.value - jb.value) / (2 * point_step);
      H.col(k) = (ja.gradient - jb.gradient) / (2 * point_step);
    }
    const Vec analytic = options.corrupt_gradient ? Vec(corruption * j.gradient) : j.gradient;
    r.gradient_error = std::max(r.gradient_error, rel_error(g, analytic, 1e-8));
    r.hessian_error = std::max(r.hessian_error, rel_error(j.value * H, j.scaled_hessian, 1e-8));
    ++r.points;
  }
  return r;
}

CheckResult check_distortion(const std::filesystem::path& mesh_file, const std::filesystem::path& metric_file,
                             const CheckOptions& options) {
  Sampler sampler(options.seed);
  Mesh mesh = load_mesh(mesh_file);
  mesh = perturbed(mesh, 0.05 * typical_spacing(mesh), sampler);
  const auto metric = load_metric_source(metric_file);
  const DofMap dofs(mesh);
  auto eval = [&](const Vec& x, int order) {
    Mesh m = mesh;
    dofs.scatter(x, m);
    FunctionalResult f = functional(m, *metric, dofs, order);
    if (!is_finite(f)) throw NumericalError("distortion check: perturbed mesh is invalid");
    return std::get<FunctionalEvaluation>(std::move(f));
  };
  const Vec x0 = dofs.gather(mesh);
  const FunctionalEvaluation ev = eval(x0, 2);
  return probe_functional(
      "distortion", x0, ev.gradient, ev.hessian, [&](const Vec& x) { return eval(x, 0).value; },
      [&](const Vec& x) { return eval(x, 1).gradient; }, options, sampler);
}

CheckResult check_objective(const std::filesystem::path& mesh_file, const std::filesystem::path& metric_file,
                            const std::filesystem::path& model_file, const CheckOptions& options) {
  Sampler sampler(options.seed);
  Mesh mesh = load_mesh(mesh_file);
  mesh = perturbed(mesh, 0.02 * typical_spacing(mesh), sampler);
  const auto metric = load_metric_source(metric_file);
  const ImplicitModel model = load_model(model_file);
  const DofMap dofs(mesh);
  const ObjectiveOptions objective;
  auto eval = [&](const Vec& x, int order) {
    Mesh m = mesh;
    dofs.scatter(x, m);
    ObjectiveValue v = combined_objective(m, *metric, &model, dofs, objective, order);
    if (!v.finite) throw NumericalError("objective check: perturbed mesh is invalid");
    return v;
  };
  const Vec x0 = dofs.gather(mesh);
  const ObjectiveValue ev = eval(x0, 2);
  return probe_functional(
      "objective", x0, ev.gradient, ev.hessian, [&](const Vec& x) { return eval(x, 0).H; },
      [&](const Vec& x) { return eval(x, 1).gradient; }, options, sampler);
}

std::vector<CheckResult> run_derivative_checks(const std::filesystem::path& fixtures, const CheckOptions& options) {
  std::vector<CheckResult> out;
  out.push_back(check_metric_field(fixtures / "background_2d.json", options));
  out.push_back(check_metric_field(fixtures / "background_3d.json", options));
  out.push_back(check_implicit_model(fixtures / "hole_model.json", options));
  out.push_back(check_implicit_model(fixtures / "cube_cylinder_model.json", options));
  out.push_back(check_distortion(fixtures / "square_p2.json", fixtures / "analytic_2d.json", options));
  out.push_back(check_objective(fixtures / "hole_p2.json", fixtures / "analytic_2d.json",
                                fixtures / "hole_model.json", options));
  return out;
}

std::string check_report(const std::vector<CheckResult>& results) {
  std::string out = "suite,points,gradient_error,gradient_tolerance,hessian_error,hessian_tolerance,status\n";
  char line[256];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%s,%d,%.3e,%.0e,%.3e,%.0e,%s\n", r.suite.c_str(), r.points, r.gradient_error,
                  r.gradient_tolerance, r.hessian_error, r.hessian_tolerance, r.passed() ? "pass" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace hoopt
