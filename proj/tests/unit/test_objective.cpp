#include "hoopt/errors.hpp"
#include "hoopt/fixtures.hpp"
#include "hoopt/io.hpp"
#include "hoopt/objective.hpp"
#include "support.hpp"

#include <filesystem>
#include <numbers>

using namespace hoopt;
using namespace hoopt::testing;

namespace {

void perturb(Mesh& mesh, double amplitude) {
  for (int i = 0; i < mesh.node_count(); ++i)
    for (int k = 0; k < mesh.dimension; ++k) mesh.nodes(i, k) += uniform(-amplitude, amplitude);
}

double G_at(const Mesh& base, const ImplicitModel& model, const DofMap& dofs, const Vec& x) {
  Mesh m = base;
  dofs.scatter(x, m);
  return boundary_deviation(m, model, dofs, 0).value;
}

Vec grad_at(const Mesh& base, const ImplicitModel& model, const DofMap& dofs, const Vec& x) {
  Mesh m = base;
  dofs.scatter(x, m);
  return boundary_deviation(m, model, dofs, 1).gradient;
}

// FD check of gradient (all components) and Hessian (selected columns).
void check_G_derivatives(const Mesh& mesh, const ImplicitModel& model, int columns) {
  const DofMap dofs(mesh);
  const Vec x = dofs.gather(mesh);
  const FunctionalEvaluation g = boundary_deviation(mesh, model, dofs, 2);
  REQUIRE(g.value > 0.0);
  const double h = 1e-6;
  const Vec fd = fd_gradient([&](const Vec& y) { return G_at(mesh, model, dofs, y); }, x, h);
  CHECK(rel_error(Mat(fd), Mat(g.gradient), 1e-12) <= 1e-5);
  const Mat H = Mat(g.hessian);
  CHECK((H - H.transpose()).norm() <= 1e-9 * std::max(1.0, H.norm()));
  Mat fd_cols(dofs.size(), columns), cols(dofs.size(), columns);
  for (int c = 0; c < columns; ++c) {
    const int j = static_cast<int>(uniform(0, dofs.size() - 1e-9));
    Vec a = x, b = x;
    a(j) += 1e-5;
    b(j) -= 1e-5;
    fd_cols.col(c) = (grad_at(mesh, model, dofs, a) - grad_at(mesh, model, dofs, b)) / 2e-5;
    cols.col(c) = H.col(j);
  }
  CHECK(rel_error(fd_cols, cols, 1e-12) <= 1e-3);
}

// Boundary nodes of the box model [-0.5,0]^2 x [-0.25,0.25] on its x_min and y_min faces.
Mesh box_corner_mesh(int degree) {
  Mesh m = structured_mesh(3, {1, 1, 1}, degree, Box{{-0.5, -0.5, -0.25}, {0.0, 0.0, 0.25}});
  attach_boundary(m, [](const Vec& x) {
    std::vector<EntityId> out;
    if (std::abs(x(0) + 0.5) < 1e-12) out.push_back("x_min");
    if (std::abs(x(1) + 0.5) < 1e-12) out.push_back("y_min");
    return out;
  });
  return m;
}

}  // namespace

TEST_CASE("objective: facet map is the restriction of the element map") {
  Mesh mesh = hole_fixture_mesh(2, 16, 2);
  perturb(mesh, 0.004);
  const auto geometry = facet_geometry(mesh);
  const SimplexBasis& fb = basis_for(1, 2);
  const SimplexBasis& eb = basis_for(2, 2);
  for (std::size_t b = 0; b < geometry.size(); ++b) {
    const auto& g = geometry[b];
    const auto local = face_local_nodes(2, 2, g.local_face);
    const Mat master = eb.lattice_points();
    for (double t : {0.13, 0.5, 0.71}) {
      const double eta[1] = {t};
      Vec xf = Vec::Zero(2);
      const Vec N = fb.evaluate(eta, 0).values;
      for (int a = 0; a < fb.size(); ++a) xf += N(a) * mesh.nodes.row(g.nodes[a]).transpose();
      const Vec xi = (1 - t) * master.row(local[0]).transpose() + t * master.row(local[1]).transpose();
      const MapSample ms = physical_map(mesh.element_nodes(g.element), eb, std::span<const double>(xi.data(), 2), 0);
      CHECK((ms.x - xf).norm() <= 1e-14);
    }
  }
}

TEST_CASE("objective: zero penalty on the model") {
  const ImplicitModel model(square_with_hole_model());
  const Mesh mesh = square_fixture_mesh(2, 3);
  const DofMap dofs(mesh);
  const FunctionalEvaluation g = boundary_deviation(mesh, model, dofs, 2);
  CHECK(g.value <= 1e-24);
  CHECK(g.gradient.size() == dofs.size());
  const AnalyticMetric metric(AnalyticMetricSpec{});
  ObjectiveOptions o;
  const ObjectiveValue v = combined_objective(mesh, metric, &model, dofs, o, 1);
  CHECK(v.finite);
  CHECK(v.H == v.F + o.lambda * v.G);
  CHECK(std::abs(v.H - v.F) <= 1e-18 * std::max(1.0, v.F) + o.lambda * 1e-24);
}

TEST_CASE("objective: chord of the hole circle against a dense quadrature") {
  const ImplicitModel model(square_with_hole_model());
  const double r = hole_radius, a = std::numbers::pi / 8;
  Mesh mesh;
  mesh.dimension = 2;
  mesh.degree = 1;
  mesh.nodes.resize(3, 2);
  mesh.nodes << r, 0.0, r * std::cos(a), r * std::sin(a), 0.3, 0.1;
  mesh.elements = {{0, 2, 1}};
  if (!check_validity(mesh, 2).valid) mesh.elements = {{0, 1, 2}};
  mesh.boundary = {{{0, 1}, {"hole"}}};
  const DofMap dofs(mesh);
  const double G = boundary_deviation(mesh, model, dofs, 0).value;
  CHECK(G > 0.0);
  const Vec p0 = mesh.nodes.row(0).transpose(), p1 = mesh.nodes.row(1).transpose();
  const int n = 10000;
  double dense = 0.0;
  const std::vector<int> ids = {model.index_of("hole")};
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n;
    const Vec x = (1 - t) * p0 + t * p1;
    const double g = model.evaluate(std::span<const int>(ids), std::span<const double>(x.data(), 2), 0).value;
    dense += g * g;
  }
  dense *= (p1 - p0).norm() / n;
  CHECK(rel_error(G, dense, 0.0) <= 1e-6);
}

TEST_CASE("objective: boundary deviation derivatives against finite differences") {
  const ImplicitModel hole_model(square_with_hole_model());
  Mesh mesh = hole_fixture_mesh(2, 16, 2);
  perturb(mesh, 0.003);
  check_G_derivatives(mesh, hole_model, 20);

  Mesh linear = hole_fixture_mesh(1, 16, 2);
  perturb(linear, 0.003);
  check_G_derivatives(linear, hole_model, 20);

  const ImplicitModel box(cube_cylinder_model());
  for (int p : {1, 2}) {
    Mesh m = box_corner_mesh(p);
    perturb(m, 0.01);
    check_G_derivatives(m, box, 20);
  }
}

TEST_CASE("objective: point terms at nodes targeting several entities") {
  const ImplicitModel model(square_with_hole_model());
  Mesh mesh = square_fixture_mesh(1, 2);
  mesh.boundary.clear();
  mesh.fixed.clear();
  int corner = -1;
  for (int i = 0; i < mesh.node_count(); ++i)
    if (mesh.nodes(i, 0) == 0.5 && mesh.nodes(i, 1) == -0.5) corner = i;
  REQUIRE(corner >= 0);
  mesh.slide = {{corner, {"bottom", "right"}}};
  DofMap dofs(mesh);
  CHECK(boundary_deviation(mesh, model, dofs, 0).value <= 1e-24);
  mesh.nodes(corner, 0) = 0.47;
  mesh.nodes(corner, 1) = -0.52;
  dofs = DofMap(mesh);
  check_G_derivatives(mesh, model, 2);
  // only the displaced direction away from each side is penalized
  const double G = boundary_deviation(mesh, model, dofs, 0).value;
  const double gb = model.entity_function(model.index_of("bottom"), std::array<double, 2>{0.47, -0.52}, 0).value;
  const double gr = model.entity_function(model.index_of("right"), std::array<double, 2>{0.47, -0.52}, 0).value;
  CHECK(rel_error(G, gb * gb + gr * gr, 0.0) <= 1e-14);
}

TEST_CASE("objective: combined value, weights and masking") {
  const ImplicitModel model(square_with_hole_model());
  Mesh mesh = hole_fixture_mesh(2, 16, 2);
  perturb(mesh, 0.003);
  mesh.fixed = {0, 1};
  const DofMap dofs(mesh);
  CHECK(dofs.size() == 2 * (mesh.node_count() - 2));
  const AnalyticMetric metric(AnalyticMetricSpec{});
  ObjectiveOptions o;
  o.lambda = 0.0;
  const ObjectiveValue zero = combined_objective(mesh, metric, &model, dofs, o, 2);
  CHECK(zero.finite);
  CHECK(zero.H == zero.F);
  o.lambda = 1e4;
  const ObjectiveValue v1 = combined_objective(mesh, metric, &model, dofs, o, 2);
  o.lambda = 3e4;
  const ObjectiveValue v3 = combined_objective(mesh, metric, &model, dofs, o, 0);
  CHECK(v1.finite);
  CHECK(v1.G > 0.0);
  CHECK(rel_error((v3.H - v1.H) / 2e4, v1.G, 0.0) <= 1e-9);
  CHECK(v1.gradient.size() == dofs.size());
  const Mat H = Mat(v1.hessian);
  CHECK((H - H.transpose()).norm() <= 1e-9 * H.norm());
  o.lambda = 1e4;
  const Vec x = dofs.gather(mesh);
  auto value = [&](const Vec& y) {
    Mesh m = mesh;
    dofs.scatter(y, m);
    return combined_objective(m, metric, &model, dofs, o, 0).H;
  };
  const Vec fd = fd_gradient(value, x, 1e-7);
  CHECK(rel_error(Mat(fd), Mat(v1.gradient), 1e-9) <= 1e-5);
  // no model: H = F
  const ObjectiveValue none = combined_objective(mesh, metric, nullptr, dofs, o, 1);
  CHECK(none.H == none.F);
  CHECK(none.G == 0.0);
  // inverted element: infinite H
  Mesh bad = mesh;
  bad.nodes.row(mesh.elements[0][0]) = bad.nodes.row(mesh.elements[0][1]);
  const ObjectiveValue inf = combined_objective(bad, metric, &model, dofs, o, 2);
  CHECK_FALSE(inf.finite);
  CHECK(std::isinf(inf.H));
}

TEST_CASE("objective: unknown entity and config files") {
  const ImplicitModel model(square_with_hole_model());
  Mesh mesh = square_fixture_mesh(1, 2);
  mesh.boundary[0].entities = {"nowhere"};
  CHECK_THROWS_AS(boundary_deviation(mesh, model, DofMap(mesh), 0), InputError);

  auto dir = std::filesystem::temp_directory_path() / "hoopt_unit";
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", R"({"lambda": 100, "tolerance": 1e-6, "max_iterations": 7})");
  const RunConfig c = load_run_config(dir / "config.json");
  CHECK(c.lambda == 100.0);
  CHECK(c.tolerance == 1e-6);
  CHECK(c.step_tolerance == 1e-4);
  CHECK(c.max_iterations == 7);
  CHECK(c.quadrature_exactness == -1);
  CHECK(run_config_from_json(run_config_to_json(c)).lambda == 100.0);
  write_text(dir / "bad.json", R"({"lambda": -1})");
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), InputError);
  write_text(dir / "bad.json", R"({"tolerance": "small"})");
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), InputError);
}
