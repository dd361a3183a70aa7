#include "hoopt/fixtures.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace hoopt {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

BezierPatch curve(const EntityId& id, std::vector<std::vector<double>> pts, std::vector<double> w = {}) {
  BezierPatch p;
  p.entity = id;
  p.parametric = 1;
  p.embedding = static_cast<int>(pts.front().size());
  p.degree = {static_cast<int>(pts.size()) - 1, 0};
  p.points.resize(static_cast<Eigen::Index>(pts.size()), p.embedding);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < p.embedding; ++k) p.points(i, k) = pts[i][k];
  p.weights = w.empty() ? Vec::Ones(p.points.rows()) : Vec(Eigen::Map<const Vec>(w.data(), w.size()));
  return p;
}

// Rational quadratic arc of circle (center, radius) from angle a to b, |b - a| < pi.
// The optional z lifts it into 3D.
BezierPatch arc(const EntityId& id, double cx, double cy, double r, double a, double b, const double* z = nullptr) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double w = std::cos(half);
  std::vector<std::vector<double>> pts = {{cx + r * std::cos(a), cy + r * std::sin(a)},
                                          {cx + r / w * std::cos(mid), cy + r / w * std::sin(mid)},
                                          {cx + r * std::cos(b), cy + r * std::sin(b)}};
  if (z)
    for (auto& q : pts) q.push_back(*z);
  return curve(id, pts, {1.0, w, 1.0});
}

// Ruled (2,1) surface between two rational quadratic curves with shared weights.
BezierPatch ruled(const EntityId& id, const BezierPatch& c0, const BezierPatch& c1) {
  BezierPatch p;
  p.entity = id;
  p.embedding = 3;
  p.parametric = 2;
  p.degree = {c0.degree[0], 1};
  const int n = c0.degree[0] + 1;
  p.points.resize(2 * n, 3);
  p.weights.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    p.points.row(2 * i) = c0.points.row(i);
    p.points.row(2 * i + 1) = c1.points.row(i);
    p.weights(2 * i) = c0.weights(i);
    p.weights(2 * i + 1) = c1.weights(i);
  }
  return p;
}

BezierPatch lift(const BezierPatch& c, double z) {
  BezierPatch out = c;
  out.embedding = 3;
  out.points.conservativeResize(Eigen::NoChange, 3);
  out.points.col(2).setConstant(z);
  return out;
}

ModelEntitySpec entity(const EntityId& id, const std::string& type, std::vector<BezierPatch> patches) {
  for (auto& p : patches) p.entity = id;
  return {id, type, std::move(patches)};
}

std::vector<std::pair<EntityId, std::array<double, 4>>> square_sides() {
  // id, start, end
  return {{"bottom", {-0.5, -0.5, 0.5, -0.5}},
          {"right", {0.5, -0.5, 0.5, 0.5}},
          {"top", {0.5, 0.5, -0.5, 0.5}},
          {"left", {-0.5, 0.5, -0.5, -0.5}}};
}

std::vector<EntityId> square_side_classifier(const Vec& x) {
  std::vector<EntityId> out;
  constexpr double tol = 1e-12;
  if (std::abs(x(1) + 0.5) < tol) out.push_back("bottom");
  if (std::abs(x(0) - 0.5) < tol) out.push_back("right");
  if (std::abs(x(1) - 0.5) < tol) out.push_back("top");
  if (std::abs(x(0) + 0.5) < tol) out.push_back("left");
  return out;
}

// Elevates a linear simplicial mesh to degree p with shared lattice nodes.
Mesh elevate(int d, const Mat& vertices, const std::vector<std::vector<int>>& simplices, int degree) {
  const auto& basis = basis_for(d, degree);
  std::map<std::vector<std::pair<int, int>>, int> ids;
  std::vector<Vec> coords;
  Mesh mesh;
  mesh.dimension = d;
  mesh.degree = degree;
  for (auto simplex : simplices) {
    Mat V(d, d);
    for (int m = 1; m <= d; ++m) V.col(m - 1) = (vertices.row(simplex[m]) - vertices.row(simplex[0])).transpose();
    if (V.determinant() < 0) std::swap(simplex[1], simplex[2]);
    std::vector<int> conn;
    for (const auto& alpha : basis.lattice()) {
      std::array<int, 4> mult{degree, 0, 0, 0};
      for (int k = 0; k < d; ++k) {
        mult[k + 1] = alpha[k];
        mult[0] -= alpha[k];
      }
      std::vector<std::pair<int, int>> key;
      Vec x = Vec::Zero(d);
      for (int m = 0; m <= d; ++m) {
        if (mult[m] == 0) continue;
        key.emplace_back(simplex[m], mult[m]);
        x += static_cast<double>(mult[m]) / degree * vertices.row(simplex[m]).transpose();
      }
      std::sort(key.begin(), key.end());
      // lattice points on a shared face must coincide bit-exactly
      if (key.size() == 1) x = vertices.row(key[0].first).transpose();
      auto [it, inserted] = ids.emplace(key, static_cast<int>(coords.size()));
      if (inserted) coords.push_back(x);
      conn.push_back(it->second);
    }
    mesh.elements.push_back(std::move(conn));
  }
  mesh.nodes.resize(static_cast<Eigen::Index>(coords.size()), d);
  for (std::size_t i = 0; i < coords.size(); ++i) mesh.nodes.row(i) = coords[i].transpose();
  return mesh;
}

// Deterministic low-discrepancy pair in [0,1)^2.
std::array<double, 2> halton(int i) {
  auto radical = [](int n, int base) {
    double f = 1.0, r = 0.0;
    while (n > 0) {
      f /= base;
      r += f * (n % base);
      n /= base;
    }
    return r;
  };
  return {radical(i + 1, 2), radical(i + 1, 3)};
}

std::vector<Mat> nodal_metrics(const AnalyticMetricSpec& spec, const Mesh& bg) {
  std::vector<Mat> metrics;
  metrics.reserve(bg.node_count());
  for (int i = 0; i < bg.node_count(); ++i) {
    const Vec x = bg.nodes.row(i).transpose();
    metrics.push_back(analytic_metric(spec, std::span<const double>(x.data(), bg.dimension), 0).metric);
  }
  return metrics;
}

}  // namespace

ModelSpec square_with_hole_model() {
  ModelSpec spec;
  spec.dimension = 2;
  for (const auto& [id, s] : square_sides())
    spec.entities.push_back(entity(id, "curve", {curve(id, {{s[0], s[1]}, {s[2], s[3]}})}));
  std::vector<BezierPatch> arcs;
  for (int q = 0; q < 4; ++q) arcs.push_back(arc("hole", 0.0, 0.0, hole_radius, q * kPi / 2, (q + 1) * kPi / 2));
  spec.entities.push_back(entity("hole", "curve", arcs));
  json corners = json::array();
  const auto sides = square_sides();
  for (int i = 0; i < 4; ++i) {
    const auto& a = sides[i];
    const auto& b = sides[(i + 1) % 4];
    corners.push_back({{"point", {a.second[2], a.second[3]}}, {"entities", {a.first, b.first}}});
  }
  spec.associations = {{"corners", corners}};
  return spec;
}

ModelSpec cube_cylinder_model() {
  ModelSpec spec;
  spec.dimension = 3;
  const double z0 = -0.25, z1 = 0.25, r = cylinder_radius;
  auto plane = [](std::array<double, 3> a, std::array<double, 3> b, std::array<double, 3> c,
                  std::array<double, 3> d) {
    BezierPatch p;
    p.embedding = 3;
    p.parametric = 2;
    p.degree = {1, 1};
    p.points.resize(4, 3);
    p.points << a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2], d[0], d[1], d[2];
    p.weights = Vec::Ones(4);
    return p;
  };
  spec.entities.push_back(entity("x_min", "surface",
                                 {plane({-0.5, -0.5, z0}, {-0.5, -0.5, z1}, {-0.5, 0, z0}, {-0.5, 0, z1})}));
  spec.entities.push_back(entity("y_min", "surface",
                                 {plane({-0.5, -0.5, z0}, {-0.5, -0.5, z1}, {0, -0.5, z0}, {0, -0.5, z1})}));
  spec.entities.push_back(entity("x_zero", "surface",
                                 {plane({0, -0.5, z0}, {0, -0.5, z1}, {0, -r, z0}, {0, -r, z1})}));
  spec.entities.push_back(entity("y_zero", "surface",
                                 {plane({-0.5, 0, z0}, {-0.5, 0, z1}, {-r, 0, z0}, {-r, 0, z1})}));
  const BezierPatch quarter = arc("", 0.0, 0.0, r, kPi, 1.5 * kPi);
  spec.entities.push_back(entity("cylinder", "surface", {ruled("", lift(quarter, z0), lift(quarter, z1))}));
  const double w = std::cos(kPi / 8);
  for (double z : {z0, z1}) {
    const BezierPatch a1 = lift(arc("", 0.0, 0.0, r, kPi, 1.25 * kPi), z);
    const BezierPatch a2 = lift(arc("", 0.0, 0.0, r, 1.25 * kPi, 1.5 * kPi), z);
    const BezierPatch s1 = curve("", {{-0.5, 0, z}, {-0.5, -0.25, z}, {-0.5, -0.5, z}}, {1, w, 1});
    const BezierPatch s2 = curve("", {{-0.5, -0.5, z}, {-0.25, -0.5, z}, {0, -0.5, z}}, {1, w, 1});
    spec.entities.push_back(entity(z < 0 ? "z_min" : "z_max", "surface", {ruled("", a1, s1), ruled("", a2, s2)}));
  }
  // edges of the solid
  int edge = 0;
  auto name = [&]() { return "edge_" + std::to_string(edge++); };
  const std::vector<std::array<double, 2>> corners = {{-0.5, 0}, {-0.5, -0.5}, {0, -0.5}, {0, -r}, {-r, 0}};
  for (double z : {z0, z1}) {
    for (int i = 0; i < 4; ++i) {
      const auto& a = corners[i];
      const auto& b = corners[(i + 1) % 5];
      spec.entities.push_back(entity(name(), "curve", {curve("", {{a[0], a[1], z}, {b[0], b[1], z}})}));
    }
    spec.entities.push_back(entity(name(), "curve", {arc("", 0.0, 0.0, r, kPi, 1.5 * kPi, &z)}));
  }
  for (const auto& c : corners)
    spec.entities.push_back(entity(name(), "curve", {curve("", {{c[0], c[1], z0}, {c[0], c[1], z1}})}));
  return spec;
}

Mat square_with_hole_boundary_samples(int count) {
  Mat out(count, 2);
  const int on_circle = count / 2;
  for (int i = 0; i < on_circle; ++i) {
    const double t = 2 * kPi * (i + 0.37) / on_circle;
    out.row(i) << hole_radius * std::cos(t), hole_radius * std::sin(t);
  }
  const int rest = count - on_circle;
  for (int i = 0; i < rest; ++i) {
    const double s = 4.0 * (i + 0.41) / rest;
    const int side = std::min(3, static_cast<int>(s));
    const double t = s - side;
    const auto& e = square_sides()[side].second;
    out.row(on_circle + i) << e[0] + t * (e[2] - e[0]), e[1] + t * (e[3] - e[1]);
  }
  return out;
}

Mat cube_cylinder_boundary_samples(int count) {
  Mat out(count, 3);
  const double r = cylinder_radius;
  int i = 0, k = 0;
  while (i < count) {
    const auto h = halton(k);
    const int face = k % 7;
    ++k;
    const double z = -0.25 + 0.5 * h[1];
    Eigen::Vector3d x;
    switch (face) {
      case 0: x << -0.5, -0.5 * h[0], z; break;
      case 1: x << -0.5 * h[0], -0.5, z; break;
      case 2: x << 0.0, -0.5 + (0.5 - r) * h[0], z; break;
      case 3: x << -0.5 + (0.5 - r) * h[0], 0.0, z; break;
      case 4: {
        const double t = kPi * (1.0 + 0.5 * h[0]);
        x << r * std::cos(t), r * std::sin(t), z;
        break;
      }
      default: {
        x << -0.5 * h[0], -0.5 * h[1], face == 5 ? -0.25 : 0.25;
        if (x.head<2>().norm() <= r) continue;
      }
    }
    out.row(i++) = x.transpose();
  }
  return out;
}

void attach_boundary(Mesh& mesh, const std::function<std::vector<EntityId>(const Vec&)>& classify) {
  const int d = mesh.dimension;
  std::vector<std::vector<EntityId>> on(mesh.node_count());
  std::vector<bool> known(mesh.node_count(), false);
  auto entities_of = [&](int node) -> const std::vector<EntityId>& {
    if (!known[node]) {
      on[node] = classify(mesh.nodes.row(node).transpose());
      std::sort(on[node].begin(), on[node].end());
      known[node] = true;
    }
    return on[node];
  };
  std::vector<std::vector<int>> faces(d + 1);
  for (int f = 0; f <= d; ++f) faces[f] = face_local_nodes(d, mesh.degree, f);
  std::map<int, std::set<EntityId>> node_targets;
  for (const auto& conn : mesh.elements) {
    for (int f = 0; f <= d; ++f) {
      std::vector<EntityId> common;
      bool first = true;
      for (int v = 0; v <= d; ++v) {
        if (v == f) continue;
        const auto& ents = entities_of(conn[v]);
        if (first) {
          common = ents;
          first = false;
        } else {
          std::vector<EntityId> tmp;
          std::set_intersection(common.begin(), common.end(), ents.begin(), ents.end(), std::back_inserter(tmp));
          common = std::move(tmp);
        }
      }
      if (common.empty()) continue;
      BoundaryFacet facet;
      for (int i : faces[f]) facet.nodes.push_back(conn[i]);
      facet.entities = common;
      for (int n : facet.nodes) node_targets[n].insert(common.begin(), common.end());
      mesh.boundary.push_back(std::move(facet));
    }
  }
  const std::set<int> fixed(mesh.fixed.begin(), mesh.fixed.end());
  for (const auto& [node, ents] : node_targets)
    if (!fixed.count(node)) mesh.slide.push_back({node, std::vector<EntityId>(ents.begin(), ents.end())});
}

int square_fixture_divisions(int degree) {
  switch (degree) {
    case 1: return 12;
    case 2: return 6;
    case 4: return 3;
    default: return std::max(1, 12 / degree);
  }
}

Mesh square_fixture_mesh(int degree, int divisions) {
  Mesh m = structured_mesh(2, {divisions, divisions, 1}, degree, Box{{-0.5, -0.5, 0}, {0.5, 0.5, 0}});
  for (int i = 0; i < m.node_count(); ++i)
    if (std::abs(m.nodes(i, 0)) == 0.5 && std::abs(m.nodes(i, 1)) == 0.5) m.fixed.push_back(i);
  attach_boundary(m, square_side_classifier);
  validate_mesh(m);
  return m;
}

Mesh hole_fixture_mesh(int degree, int angular, int radial) {
  if (angular % 8 != 0) throw UsageError("hole mesh: angular divisions must be a multiple of 8");
  const int nv = angular * (radial + 1);
  Mat vertices(nv, 2);
  for (int j = 0; j <= radial; ++j)
    for (int k = 0; k < angular; ++k) {
      const double t = 2 * kPi * k / angular;
      const double c = std::cos(t), s = std::sin(t);
      const Eigen::Vector2d inner(hole_radius * c, hole_radius * s);
      Eigen::Vector2d outer = 0.5 / std::max(std::abs(c), std::abs(s)) * Eigen::Vector2d(c, s);
      for (int q = 0; q < 2; ++q)
        if (std::abs(std::abs(outer(q)) - 0.5) < 1e-12) outer(q) = std::copysign(0.5, outer(q));
      const double a = static_cast<double>(j) / radial;
      const Eigen::Vector2d x = j == 0 ? inner : j == radial ? outer : Eigen::Vector2d((1 - a) * inner + a * outer);
      vertices.row(j * angular + k) = x.transpose();
    }
  std::vector<std::vector<int>> tris;
  for (int j = 0; j < radial; ++j)
    for (int k = 0; k < angular; ++k) {
      const int k1 = (k + 1) % angular;
      const int a = j * angular + k, b = j * angular + k1, c = (j + 1) * angular + k1, d = (j + 1) * angular + k;
      // alternate the diagonal per octant so the corner rays stay symmetric
      if ((k / (angular / 8)) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  Mesh m = elevate(2, vertices, tris, degree);
  const double r2 = hole_radius * hole_radius;
  attach_boundary(m, [&](const Vec& x) {
    std::vector<EntityId> out = square_side_classifier(x);
    if (std::abs(x.squaredNorm() - r2) < 1e-12) out.push_back("hole");
    return out;
  });
  validate_mesh(m);
  return m;
}

Mesh cube_fixture_mesh(int degree, int divisions) {
  Mesh m = structured_mesh(3, {divisions, divisions, divisions}, degree,
                           Box{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}});
  for (int i = 0; i < m.node_count(); ++i)
    if (m.nodes.row(i).cwiseAbs().maxCoeff() == 0.5) m.fixed.push_back(i);
  validate_mesh(m);
  return m;
}

MetricField sampled_metric_field(const AnalyticMetricSpec& spec, std::array<int, 3> divisions, int degree,
                                 const Box& box, double normalization) {
  const int d = spec.kind == AnalyticKind::boundary_layer_3d ? 3 : 2;
  Mesh bg = structured_mesh(d, divisions, degree, box);
  std::vector<Mat> metrics = nodal_metrics(spec, bg);
  for (auto& M : metrics) M *= normalization;
  return MetricField(std::move(bg), std::move(metrics));
}

MetricField square_background_field(const AnalyticMetricSpec& spec) {
  return sampled_metric_field(spec, {36, 132, 1}, 1, Box{{-0.55, -0.55, 0}, {0.55, 0.55, 0}});
}

MetricField fine_square_background_field(const AnalyticMetricSpec& spec) {
  return sampled_metric_field(spec, {72, 264, 1}, 1, Box{{-0.55, -0.55, 0}, {0.55, 0.55, 0}});
}

MetricField cube_background_field(const AnalyticMetricSpec& spec) {
  return sampled_metric_field(spec, {10, 10, 40}, 1, Box{{-0.55, -0.55, -0.55}, {0.55, 0.55, 0.55}});
}

std::vector<FixtureFile> generate_fixtures(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<FixtureFile> files;
  auto add = [&](const std::string& name, const json& content, const std::string& description,
                 const Mesh* mesh = nullptr) {
    write_text(dir / name, content.dump(1) + "\n");
    FixtureFile f{name, description};
    if (mesh) {
      f.nodes = mesh->node_count();
      f.elements = mesh->element_count();
    }
    files.push_back(std::move(f));
  };

  for (int p : {1, 2, 4}) {
    const Mesh m = square_fixture_mesh(p, square_fixture_divisions(p));
    add("square_p" + std::to_string(p) + ".json", mesh_to_json(m), "unit square, degree " + std::to_string(p), &m);
  }
  ModelSpec square;
  square.dimension = 2;
  for (auto& e : square_with_hole_model().entities)
    if (e.id != "hole") square.entities.push_back(e);
  square.associations = square_with_hole_model().associations;
  add("square_model.json", model_to_json(square), "unit square sides");

  AnalyticMetricSpec bl2;
  add("analytic_2d.json", json{{"analytic", analytic_spec_to_json(bl2)}}, "boundary-layer metric, h_min 0.01, alpha 2");
  {
    const MetricField f = square_background_field(bl2);
    add("background_2d.json", metric_field_to_json(f.background(), nodal_metrics(bl2, f.background())),
        "sampled boundary-layer metric", &f.background());
  }
  {
    const MetricField f = fine_square_background_field(bl2);
    add("background_2d_fine.json", metric_field_to_json(f.background(), nodal_metrics(bl2, f.background())),
        "sampled boundary-layer metric, twice the resolution", &f.background());
  }

  const Mesh hole = hole_fixture_mesh(2, 16, 4);
  add("hole_p2.json", mesh_to_json(hole), "square with hole O-grid, degree 2", &hole);
  add("hole_model.json", model_to_json(square_with_hole_model()), "square with circular hole, radius 0.18");

  for (int p : {1, 2}) {
    const Mesh m = cube_fixture_mesh(p, p == 1 ? 4 : 2);
    add("cube_p" + std::to_string(p) + ".json", mesh_to_json(m), "unit cube, degree " + std::to_string(p), &m);
  }
  AnalyticMetricSpec bl3;
  bl3.kind = AnalyticKind::boundary_layer_3d;
  bl3.h_min = 0.02;
  add("analytic_3d.json", json{{"analytic", analytic_spec_to_json(bl3)}}, "boundary-layer metric, h_min 0.02, alpha 2");
  {
    const MetricField f = cube_background_field(bl3);
    add("background_3d.json", metric_field_to_json(f.background(), nodal_metrics(bl3, f.background())),
        "sampled boundary-layer metric", &f.background());
  }
  add("cube_cylinder_model.json", model_to_json(cube_cylinder_model()), "box minus cylinder of radius 0.25");
  add("config.json",
      json{{"lambda", 1e4}, {"tolerance", 1e-4}, {"step_tolerance", 1e-4}, {"max_iterations", 200},
           {"quadrature_exactness", -1}},
      "default solver configuration");
  add("config_square.json",
      json{{"lambda", square_lambda}, {"tolerance", 1e-4}, {"step_tolerance", 1e-4}, {"max_iterations", 1000},
           {"quadrature_exactness", -1}},
      "solver configuration for the unit square runs");
  add("compare_2d.json",
      json{{"mesh", "square_p1.json"}, {"model", "square_model.json"}, {"config", "config_square.json"},
           {"analytic", "analytic_2d.json"}, {"discrete", "background_2d_fine.json"}},
      "analytic against interpolated boundary-layer metric, degree 1");

  json manifest = json::array();
  for (const auto& f : files) {
    json entry = {{"file", f.name}, {"description", f.description}};
    if (f.nodes > 0) {
      entry["nodes"] = f.nodes;
      entry["elements"] = f.elements;
    }
    manifest.push_back(entry);
  }
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  files.push_back({"manifest.json", "fixture manifest"});
  return files;
}

}  // namespace hoopt
