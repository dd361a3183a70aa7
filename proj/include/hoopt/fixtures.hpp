#pragma once

#include "hoopt/implicit.hpp"
#include "hoopt/mesh.hpp"
#include "hoopt/metric.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hoopt {

inline constexpr double hole_radius = 0.18;
inline constexpr double cylinder_radius = 0.25;
// Penalty for the unit square runs, where side nodes slide by penalty alone.
inline constexpr double square_lambda = 1e6;

// Unit square [-0.5,0.5]^2 with side entities "bottom", "right", "top", "left"
// and the circular hole "hole" made of four quarter arcs.
ModelSpec square_with_hole_model();

// Box [-0.5,0]^2 x [-0.25,0.25] minus the cylinder x^2 + y^2 < 0.25^2:
// seven surface entities and the edge curves of the solid.
ModelSpec cube_cylinder_model();

// Points on the true boundary of each model, for soundness checks.
Mat square_with_hole_boundary_samples(int count);
Mat cube_cylinder_boundary_samples(int count);

// Structured square [-0.5,0.5]^2 mesh with side entities; corner vertices fixed,
// other side nodes slide on their side.
Mesh square_fixture_mesh(int degree, int divisions);

// Divisions giving comparable node counts per degree: 12, 6, 3 for degrees 1, 2, 4.
int square_fixture_divisions(int degree);

// Straight-sided O-grid of the square with hole; all nodes free, boundary
// facets target their model entity.
Mesh hole_fixture_mesh(int degree, int angular, int radial);

// Unit cube [-0.5,0.5]^3; boundary nodes fixed.
Mesh cube_fixture_mesh(int degree, int divisions);

// Adds boundary facets and slide entries from a vertex classifier returning the
// entities a point lies on. Nodes listed as fixed keep no slide entry.
void attach_boundary(Mesh& mesh, const std::function<std::vector<EntityId>(const Vec&)>& classify);

// Background mesh over `box` carrying the analytic metric sampled at its nodes,
// multiplied by `normalization`.
MetricField sampled_metric_field(const AnalyticMetricSpec& spec, std::array<int, 3> divisions, int degree,
                                 const Box& box, double normalization = 1.0);

// Background used with the 2D fixtures: the square enlarged by 5% on each side,
// with (0, 0.1) among its nodes.
MetricField square_background_field(const AnalyticMetricSpec& spec);
// Same box with cells halved in both directions (19345 nodes).
MetricField fine_square_background_field(const AnalyticMetricSpec& spec);
MetricField cube_background_field(const AnalyticMetricSpec& spec);

struct FixtureFile {
  std::string name;
  std::string description;
  int nodes = 0;  // mesh files only
  int elements = 0;
};

// Writes the fixture set to `dir`; returns the manifest.
std::vector<FixtureFile> generate_fixtures(const std::filesystem::path& dir);

}  // namespace hoopt
