#pragma once

#include "hoopt/objective.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hoopt {

enum class Preconditioner { diagonal, incomplete_cholesky };

struct SolverConfig {
  double tolerance = 1e-4;       // on RMS(grad H) = |grad H| / sqrt(n)
  double step_tolerance = 1e-4;  // on |alpha s|
  int max_iterations = 200;
  int max_halvings = 50;
  double armijo = 1e-4;  // 0: accept any finite step that does not increase H
  double cg_tolerance = 1e-8;  // relative to |grad H|
  int cg_max_iterations = 0;   // 0: number of unknowns
  Preconditioner preconditioner = Preconditioner::diagonal;
};

void validate(const SolverConfig& config);

enum class Termination { residual, step_length, max_iterations, stalled };

const char* to_string(Termination reason);

struct IterationRecord {
  int iteration = 0;
  double H = 0.0;
  double F = 0.0;
  double G = 0.0;
  double rms_residual = 0.0;
  double step = 0.0;
  int cg_iterations = 0;
  int halvings = 0;
};

struct SolverReport {
  std::vector<IterationRecord> iterations;
  Termination reason = Termination::max_iterations;
  bool converged() const { return reason == Termination::residual || reason == Termination::step_length; }
};

// Objective at a DOF vector; order 0 needs only the values, 2 everything.
using Evaluator = std::function<ObjectiveValue(const Vec& x, int order)>;

struct NewtonStep {
  Vec step;
  int iterations = 0;
  bool negative_curvature = false;
};

// Truncated preconditioned CG on hessian * s = -gradient.
NewtonStep newton_step(const Vec& gradient, const SparseMat& hessian, const SolverConfig& config);

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  int halvings = 0;
  ObjectiveValue value;
};

// Backtracking from alpha = 1; `current` holds H and grad H at x.
LineSearchResult line_search(const Evaluator& evaluate, const Vec& x, const Vec& step, const ObjectiveValue& current,
                             const SolverConfig& config);

struct MinimizeResult {
  Vec x;
  SolverReport report;
};

// Called with the initial point and every accepted iterate.
using IterateObserver = std::function<void(const Vec& x, const IterationRecord& record)>;

MinimizeResult minimize(const Evaluator& evaluate, Vec x0, const SolverConfig& config,
                        const IterateObserver& observe = {});

double rms(const Vec& gradient);

std::string trace_csv(const SolverReport& report);
void write_trace_csv(const SolverReport& report, const std::filesystem::path& path);

}  // namespace hoopt
