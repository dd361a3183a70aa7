#include "hoopt/solver.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <sstream>

namespace hoopt {

void validate(const SolverConfig& c) {
  if (!(c.tolerance > 0.0) || !(c.step_tolerance > 0.0) || !(c.cg_tolerance > 0.0))
    throw UsageError("solver tolerances must be positive");
  if (c.max_iterations < 0 || c.max_halvings < 0 || c.cg_max_iterations < 0)
    throw UsageError("solver iteration limits must be non-negative");
  if (c.armijo < 0.0 || c.armijo >= 1.0) throw UsageError("sufficient-decrease constant must lie in [0, 1)");
}

const char* to_string(Termination reason) {
  switch (reason) {
    case Termination::residual: return "residual";
    case Termination::step_length: return "step-length";
    case Termination::max_iterations: return "max-iter";
    case Termination::stalled: return "stalled";
  }
  return "unknown";
}

double rms(const Vec& gradient) {
  return gradient.size() == 0 ? 0.0 : gradient.norm() / std::sqrt(static_cast<double>(gradient.size()));
}

namespace {

class Preconditioning {
 public:
  Preconditioning(const SparseMat& H, Preconditioner kind) {
    if (kind == Preconditioner::incomplete_cholesky) {
      ichol_.compute(H);
      use_ichol_ = ichol_.info() == Eigen::Success;
    }
    if (!use_ichol_) diagonal_ = H.diagonal().cwiseAbs().cwiseMax(1e-12).cwiseInverse();
  }

  Vec apply(const Vec& r) const {
    if (use_ichol_) return ichol_.solve(r);
    return diagonal_.cwiseProduct(r);
  }

 private:
  bool use_ichol_ = false;
  Vec diagonal_;
  Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ichol_;
};

}  // namespace

NewtonStep newton_step(const Vec& gradient, const SparseMat& hessian, const SolverConfig& config) {
  const Eigen::Index n = gradient.size();
  NewtonStep out;
  out.step = Vec::Zero(n);
  const double gnorm = gradient.norm();
  if (gnorm == 0.0) return out;
  const Preconditioning P(hessian, config.preconditioner);
  const int max_it = config.cg_max_iterations > 0 ? config.cg_max_iterations : static_cast<int>(n);
  Vec r = -gradient;
  Vec z = P.apply(r);
  Vec p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_it; ++it) {
    const Vec Hp = hessian * p;
    const double curvature = p.dot(Hp);
    if (!(curvature > 0.0)) {
      out.negative_curvature = true;
      if (it == 0) out.step = -gradient;
      break;
    }
    const double alpha = rz / curvature;
    out.step += alpha * p;
    r -= alpha * Hp;
    out.iterations = it + 1;
    if (r.norm() <= config.cg_tolerance * gnorm) break;
    z = P.apply(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  if (!(out.step.dot(gradient) < 0.0)) out.step = -gradient;
  return out;
}

LineSearchResult line_search(const Evaluator& evaluate, const Vec& x, const Vec& step, const ObjectiveValue& current,
                             const SolverConfig& config) {
  const double slope = step.dot(current.gradient);
  if (!(slope < 0.0)) throw PreconditionError("line search: step is not a descent direction");
  LineSearchResult out;
  double alpha = 1.0;
  for (int h = 0; h <= config.max_halvings; ++h) {
    ObjectiveValue v = evaluate(x + alpha * step, 0);
    if (v.finite && v.H <= current.H + config.armijo * alpha * slope) {
      out.accepted = true;
      out.alpha = alpha;
      out.halvings = h;
      out.value = std::move(v);
      return out;
    }
    alpha *= 0.5;
  }
  out.halvings = config.max_halvings;
  return out;
}

MinimizeResult minimize(const Evaluator& evaluate, Vec x0, const SolverConfig& config,
                        const IterateObserver& observe) {
  validate(config);
  MinimizeResult out;
  out.x = std::move(x0);
  ObjectiveValue v = evaluate(out.x, 2);
  if (!v.finite) throw PreconditionError("initial objective is infinite (invalid element " +
                                         std::to_string(v.invalid_element) + ")");
  auto record = [&](int it, double step, int cg, int halvings) {
    out.report.iterations.push_back({it, v.H, v.F, v.G, rms(v.gradient), step, cg, halvings});
    if (observe) observe(out.x, out.report.iterations.back());
  };
  record(0, 0.0, 0, 0);
  for (int it = 1;; ++it) {
    if (rms(v.gradient) <= config.tolerance) {
      out.report.reason = Termination::residual;
      return out;
    }
    if (it > config.max_iterations) {
      out.report.reason = Termination::max_iterations;
      return out;
    }
    const NewtonStep s = newton_step(v.gradient, v.hessian, config);
    const LineSearchResult ls = line_search(evaluate, out.x, s.step, v, config);
    if (!ls.accepted) {
      out.report.reason = Termination::stalled;
      return out;
    }
    out.x += ls.alpha * s.step;
    v = evaluate(out.x, 2);
    const double length = ls.alpha * s.step.norm();
    record(it, length, s.iterations, ls.halvings);
    if (length <= config.step_tolerance) {
      out.report.reason = rms(v.gradient) <= config.tolerance ? Termination::residual : Termination::step_length;
      return out;
    }
  }
}

std::string trace_csv(const SolverReport& report) {
  std::ostringstream os;
  os << "iter,H,F,G,rms_residual,step,cg_iters,halvings\n";
  for (const auto& r : report.iterations)
    os << r.iteration << ',' << format_double(r.H) << ',' << format_double(r.F) << ',' << format_double(r.G) << ','
       << format_double(r.rms_residual) << ',' << format_double(r.step) << ',' << r.cg_iterations << ','
       << r.halvings << '\n';
  return os.str();
}

void write_trace_csv(const SolverReport& report, const std::filesystem::path& path) {
  write_text(path, trace_csv(report));
}

}  // namespace hoopt
