#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hoopt {

// Largest relative errors of analytic first and second derivatives against
// central finite differences over one suite of random points.
struct CheckResult {
  std::string suite;
  int points = 0;
  double gradient_error = 0.0;
  double hessian_error = 0.0;
  double gradient_tolerance = 1e-5;
  double hessian_tolerance = 1e-3;

  bool passed() const {
    return points > 0 && gradient_error <= gradient_tolerance && hessian_error <= hessian_tolerance;
  }
};

struct CheckOptions {
  std::uint64_t seed = 1;
  int points = 100;               // metric and implicit suites
  int probes = 40;                // coordinates probed in the mesh functional suites
  bool corrupt_gradient = false;  // negative control: scales analytic gradients by 1 + 1e-3
};

// Suites over a fixture directory written by generate_fixtures.
CheckResult check_metric_field(const std::filesystem::path& field_file, const CheckOptions& options);
CheckResult check_implicit_model(const std::filesystem::path& model_file, const CheckOptions& options);
CheckResult check_distortion(const std::filesystem::path& mesh_file, const std::filesystem::path& metric_file,
                             const CheckOptions& options);
CheckResult check_objective(const std::filesystem::path& mesh_file, const std::filesystem::path& metric_file,
                            const std::filesystem::path& model_file, const CheckOptions& options);

std::vector<CheckResult> run_derivative_checks(const std::filesystem::path& fixtures, const CheckOptions& options);

// One line per suite; identical inputs give identical bytes.
std::string check_report(const std::vector<CheckResult>& results);

}  // namespace hoopt
