// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance [--work DIR] [--only N] [--strict]
// Without --strict the exit status only reports whether every criterion ran.

#include "hoopt/checks.hpp"
#include "hoopt/errors.hpp"
#include "hoopt/fixtures.hpp"
#include "hoopt/io.hpp"
#include "hoopt/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace hoopt;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int derivative_points = 100;
constexpr double derivative_gradient_tol = 1e-5;
constexpr double derivative_hessian_tol = 1e-3;
constexpr double derivative_seconds = 60;
// Criterion 2
constexpr double quasi_newton_ratio = 1e-3;
constexpr double quasi_newton_seconds = 10;
// Criterion 3
constexpr double identity_tol = 1e-12;
// Criterion 4
constexpr double adaption_seconds = 600;
// Criterion 5
constexpr double mean_quality_tol = 1e-2;
// Criterion 6
constexpr int soundness_samples = 200;
constexpr double on_boundary_tol = 1e-7;
constexpr double off_boundary_min = 1e-3;
constexpr double soundness_seconds = 60;
// Criterion 7
constexpr double curving_lambda = 1e4;
constexpr double curving_relative_deviation = 1e-3;
constexpr double curving_seconds = 900;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::span<const double> sp(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

class Acceptance {
 public:
  explicit Acceptance(fs::path fixtures) : fx_(std::move(fixtures)) {}

  Outcome derivatives() const {
    const auto t0 = std::chrono::steady_clock::now();
    CheckOptions o;
    o.seed = 20240611;
    o.points = derivative_points;
    std::vector<CheckResult> r = {check_metric_field(fx_ / "background_2d.json", o),
                                  check_metric_field(fx_ / "background_3d.json", o),
                                  check_implicit_model(fx_ / "hole_model.json", o),
                                  check_implicit_model(fx_ / "cube_cylinder_model.json", o)};
    const double t = seconds_since(t0);
    bool ok = t <= derivative_seconds;
    std::string detail;
    for (auto& c : r) {
      c.gradient_tolerance = derivative_gradient_tol;
      c.hessian_tolerance = derivative_hessian_tol;
      ok = ok && c.passed() && c.points >= derivative_points;
      detail += fmt("%s n=%d grad %.1e hess %.1e; ", c.suite.c_str(), c.points, c.gradient_error, c.hessian_error);
    }
    return {ok, detail + fmt("%.1f s", t)};
  }

  Outcome quasi_newton() const {
    const auto t0 = std::chrono::steady_clock::now();
    const Mesh mesh = load_mesh(fx_ / "square_p1.json");
    const auto field = load_metric_field(fx_ / "background_2d.json");
    const DofMap dofs(mesh);
    FunctionalOptions full, frozen;
    frozen.metric_derivatives = MetricDerivatives::frozen;
    const Vec g1 = std::get<FunctionalEvaluation>(functional(mesh, *field, dofs, 1, full)).gradient;
    const Vec g0 = std::get<FunctionalEvaluation>(functional(mesh, *field, dofs, 1, frozen)).gradient;
    const double ratio = (g1 - g0).cwiseAbs().maxCoeff() / g1.norm();
    const double t = seconds_since(t0);
    return {ratio >= quasi_newton_ratio && t <= quasi_newton_seconds,
            fmt("max |dF_full - dF_frozen| / |dF_full| = %.3e (need >= %.0e), %.2f s", ratio, quasi_newton_ratio, t)};
  }

  Outcome identities() const {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double eq = 0.0, scale = 0.0;
    bool inverted_zero = true;
    for (int d = 2; d <= 3; ++d) {
      for (int t = 0; t < 50; ++t) {
        // rotations and dilations of the ideal element under the identity metric
        Mat A(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) A(i, j) = u(gen);
        Eigen::HouseholderQR<Mat> qr(A);
        Mat Q = qr.householderQ();
        if (Q.determinant() < 0) Q.col(0) *= -1;
        const double c = std::exp(2 * u(gen));
        eq = std::max(eq, std::abs(pointwise_distortion(c * Q, Mat::Identity(d, d)).distortion - 1.0));
        // scale invariance in the Jacobian and in the metric
        Mat J = Mat::Identity(d, d) + 0.4 * A;
        if (J.determinant() <= 0) J.col(0) *= -1;
        Mat B(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) B(i, j) = u(gen);
        const Mat M = B * B.transpose() + 0.5 * Mat::Identity(d, d);
        const double eta = pointwise_distortion(J, M).distortion;
        scale = std::max({scale, std::abs(pointwise_distortion(c * J, M).distortion - eta) / eta,
                          std::abs(pointwise_distortion(J, c * M).distortion - eta) / eta});
        // reflected configurations
        Mat R = J;
        R.col(0) *= -1;
        const DistortionSample s = pointwise_distortion(R, M);
        inverted_zero = inverted_zero && s.quality == 0.0 && s.sigma0 == 0.0;
      }
    }
    return {eq <= identity_tol && scale <= identity_tol && inverted_zero,
            fmt("equilateral |eta-1| %.1e, scale invariance %.1e (tol %.0e), inverted quality exactly 0: %s", eq,
                scale, identity_tol, inverted_zero ? "yes" : "no")};
  }

  Outcome adaption_2d(AdaptResult* keep_p1 = nullptr) const {
    const auto field = load_metric(fx_ / "background_2d.json");
    const ImplicitModel model = load_model(fx_ / "square_model.json");
    const AdaptOptions options = adapt_options(load_run_config(fx_ / "config_square.json"));
    bool ok = true;
    std::string detail;
    for (int p : {1, 2, 4}) {
      const auto t0 = std::chrono::steady_clock::now();
      const Mesh mesh = load_mesh(fx_ / ("square_p" + std::to_string(p) + ".json"));
      bool all_valid = true;
      const AdaptResult r = adapt(mesh, *field, &model, options, [&](const Mesh& m, const IterationRecord&) {
        all_valid = all_valid && check_validity(m, default_exactness(m)).valid;
      });
      const double t = seconds_since(t0);
      const auto &a = r.initial.quality, &b = r.final.quality;
      const bool pass = r.solver.converged() && all_valid && b.min > a.min && b.stddev < a.stddev && t <= adaption_seconds;
      ok = ok && pass;
      detail += fmt("p%d %s/%zu it, min %.4f->%.4f, std %.4f->%.4f, %.0f s; ", p, to_string(r.solver.reason),
                    r.solver.iterations.size() - 1, a.min, b.min, a.stddev, b.stddev, t);
      if (p == 1 && keep_p1) *keep_p1 = r;
    }
    return {ok, detail};
  }

  Outcome analytic_vs_discrete() const {
    const auto t0 = std::chrono::steady_clock::now();
    const AnalyticComparison c = compare_analytic(fx_ / "compare_2d.json");
    return {c.difference.mean < mean_quality_tol,
            fmt("mean quality analytic %.4f, interpolated %.4f, difference %.2e (need < %.0e); max node distance "
                "%.2e; %s/%s; %.0f s",
                c.analytic.final.quality.mean, c.discrete.final.quality.mean, c.difference.mean, mean_quality_tol,
                c.max_node_distance, to_string(c.analytic.solver.reason), to_string(c.discrete.solver.reason),
                seconds_since(t0))};
  }

  Outcome soundness() const {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
      const char* file;
      Mat boundary;
      std::vector<Vec> off;
    };
    std::vector<Case> cases;
    cases.push_back({"hole_model.json", square_with_hole_boundary_samples(soundness_samples),
                     {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.3, 0.3), Eigen::Vector2d(-0.3, -0.1),
                      Eigen::Vector2d(0.1, -0.35), Eigen::Vector2d(-0.42, 0.4)}});
    cases.push_back({"cube_cylinder_model.json", cube_cylinder_boundary_samples(soundness_samples),
                     {Eigen::Vector3d(-0.4, -0.4, 0.0), Eigen::Vector3d(-0.35, -0.2, 0.1),
                      Eigen::Vector3d(-0.2, -0.35, -0.1), Eigen::Vector3d(-0.4, -0.1, -0.15)}});
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
      const ImplicitModel model = load_model(fx_ / c.file);
      double on = 0.0, off = 1e300;
      for (int i = 0; i < c.boundary.rows(); ++i) {
        const Vec x = c.boundary.row(i).transpose();
        on = std::max(on, model.evaluate(sp(x), 0).value);
      }
      for (const Vec& x : c.off) off = std::min(off, model.evaluate(sp(x), 0).value);
      ok = ok && c.boundary.rows() >= soundness_samples && on <= on_boundary_tol && off >= off_boundary_min;
      detail += fmt("%s: max on-boundary %.1e over %d points, min off-boundary %.2e; ", c.file, on,
                    static_cast<int>(c.boundary.rows()), off);
    }
    const double t = seconds_since(t0);
    return {ok && t <= soundness_seconds, detail + fmt("%.1f s", t)};
  }

  Outcome curved_boundary(std::string* note) const {
    const auto field = load_metric(fx_ / "background_2d.json");
    const ModelSpec spec = load_model_spec(fx_ / "hole_model.json");
    const ImplicitModel model(spec);
    Vec lo = Vec::Constant(2, 1e300), hi = Vec::Constant(2, -1e300);
    for (const auto& e : spec.entities)
      for (const auto& p : e.patches) {
        lo = lo.cwiseMin(p.points.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(p.points.colwise().maxCoeff().transpose());
      }
    const double bound = curving_relative_deviation * (hi - lo).norm();
    const Mesh mesh = load_mesh(fx_ / "hole_p2.json");
    auto run = [&](double lambda, double& deviation, bool& monotone, double& seconds) {
      RunConfig config = load_run_config(fx_ / "config.json");
      config.lambda = lambda;
      const auto t0 = std::chrono::steady_clock::now();
      const AdaptResult r = adapt(mesh, *field, &model, adapt_options(config));
      seconds = seconds_since(t0);
      deviation = max_boundary_deviation(r.mesh, model);
      monotone = true;
      for (std::size_t i = 1; i < r.solver.iterations.size(); ++i)
        monotone = monotone && r.solver.iterations[i].G <= r.solver.iterations[i - 1].G;
      return r;
    };
    double deviation, t;
    bool monotone;
    const AdaptResult r = run(curving_lambda, deviation, monotone, t);
    const double initial = max_boundary_deviation(mesh, model);
    const auto &a = r.initial.quality, &b = r.final.quality;
    const bool ok = deviation <= bound && b.min > a.min && monotone && t <= curving_seconds;
    // informational: the same run with a stiffer penalty
    double dev6, t6;
    bool mono6;
    const AdaptResult r6 = run(1e6, dev6, mono6, t6);
    *note = fmt("lambda 1e6 for reference: max gamma %.2e, min quality %.4f->%.4f, G monotone %s, %s",
                dev6, r6.initial.quality.min, r6.final.quality.min, mono6 ? "yes" : "no",
                to_string(r6.solver.reason));
    return {ok, fmt("lambda %.0e: max gamma %.2e -> %.2e (bound %.2e), min quality %.4f->%.4f, G monotone %s, %s/%zu "
                    "it, %.0f s",
                    curving_lambda, initial, deviation, bound, a.min, b.min, monotone ? "yes" : "no",
                    to_string(r.solver.reason), r.solver.iterations.size() - 1, t)};
  }

  Outcome solver_contract(const AdaptResult& first) const {
    const auto field = load_metric(fx_ / "background_2d.json");
    const ImplicitModel model = load_model(fx_ / "square_model.json");
    const AdaptOptions options = adapt_options(load_run_config(fx_ / "config_square.json"));
    const Mesh mesh = load_mesh(fx_ / "square_p1.json");
    bool all_valid = true;
    const AdaptResult again = adapt(mesh, *field, &model, options, [&](const Mesh& m, const IterationRecord&) {
      all_valid = all_valid && check_validity(m, default_exactness(m)).valid;
    });
    bool descent = true;
    for (std::size_t i = 1; i < again.solver.iterations.size(); ++i)
      descent = descent && again.solver.iterations[i].H < again.solver.iterations[i - 1].H;
    const bool same = trace_csv(first.solver) == trace_csv(again.solver) && first.mesh.nodes == again.mesh.nodes;
    return {descent && all_valid && same,
            fmt("strict descent of H over %zu iterates: %s; all iterates valid: %s; identical trace and mesh on "
                "rerun: %s",
                again.solver.iterations.size(), descent ? "yes" : "no", all_valid ? "yes" : "no",
                same ? "yes" : "no")};
  }

 private:
  fs::path fx_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  fs::path work = "acceptance_work";
  int only = 0;
  bool strict = false;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "run a single criterion");
  app.add_flag("--strict", strict, "exit 1 when a criterion fails");
  CLI11_PARSE(app, argc, argv);

  const fs::path fixtures = work / "fixtures";
  generate_fixtures(fixtures);
  const Acceptance acc(fixtures);
  AdaptResult square_p1;
  std::string note;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"derivative correctness", [&] { return acc.derivatives(); }},
      {"Newton vs quasi-Newton gradient", [&] { return acc.quasi_newton(); }},
      {"distortion identities", [&] { return acc.identities(); }},
      {"end-to-end 2D adaption", [&] { return acc.adaption_2d(&square_p1); }},
      {"analytic vs interpolated metric", [&] { return acc.analytic_vs_discrete(); }},
      {"implicit model soundness", [&] { return acc.soundness(); }},
      {"curved-boundary adaption", [&] { return acc.curved_boundary(&note); }},
      {"solver contract", [&] {
         if (square_p1.solver.iterations.empty()) acc.adaption_2d(&square_p1);
         return acc.solver_contract(square_p1);
       }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && only != static_cast<int>(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    if (i == 6 && !note.empty()) std::printf("    note: %s\n", note.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria failed\n", failed, only ? 1 : static_cast<int>(criteria.size()));
  return strict && failed > 0 ? 1 : 0;
}
