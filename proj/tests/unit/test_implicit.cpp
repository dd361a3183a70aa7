#include "hoopt/errors.hpp"
#include "hoopt/fixtures.hpp"
#include "hoopt/implicit.hpp"
#include "support.hpp"

#include <filesystem>
#include <numbers>

using namespace hoopt;
using namespace hoopt::testing;

namespace {

BezierPatch curve_patch(std::vector<std::array<double, 2>> pts, std::vector<double> w = {}) {
  BezierPatch p;
  p.embedding = 2;
  p.parametric = 1;
  p.degree = {static_cast<int>(pts.size()) - 1, 0};
  p.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) p.points.row(i) << pts[i][0], pts[i][1];
  p.weights = w.empty() ? Vec::Ones(p.points.rows()) : Vec(Eigen::Map<Vec>(w.data(), w.size()));
  p.entity = "c";
  return p;
}

BezierPatch quarter_circle() {
  return curve_patch({{1, 0}, {1, 1}, {0, 1}}, {1, std::numbers::sqrt2 / 2, 1});
}

std::span<const double> sp(const Vec& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

// Relative FD errors of (gradient, value * Hessian) of a scalar function.
template <class F>
std::pair<double, double> fd_scaled(F f, const Vec& x, double h = 1e-6) {
  const ScaledJet j = f(x);
  Vec g(x.size());
  Mat H(x.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    const ScaledJet ja = f(a), jb = f(b);
    g(i) = (ja.value - jb.value) / (2 * h);
    H.col(i) = (ja.gradient - jb.gradient) / (2 * h);
  }
  return {rel_error(Mat(g), Mat(j.gradient), 1e-8),
          rel_error(Mat(j.value * H), j.scaled_hessian, 1e-8)};
}

double min_distance_to_polyline(const BezierPatch& p, const Vec& x, int samples) {
  double best = 1e300;
  for (int i = 0; i <= samples; ++i) {
    const double u[1] = {static_cast<double>(i) / samples};
    best = std::min(best, (patch_point(p, u) - x).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("segment implicit function is a squared line") {
  const BezierPatch seg = curve_patch({{0, 0}, {1, 0}});
  const MRep rep = implicitize_patch(seg);
  const double on[2] = {0.5, 0.0};
  CHECK(determinant_layer(rep, on, 0).value <= 1e-30);
  const double a[2] = {0.3, 0.2}, b[2] = {7.0, -0.4};
  const double ga = determinant_layer(rep, a, 0).value, gb = determinant_layer(rep, b, 0).value;
  CHECK(ga > 0);
  CHECK(std::abs(gb / ga - 4.0) < 1e-12);
  // scalar case: adj N = 1, gamma = (row . x~)^2, grad = 2 (row . x~) row_spatial
  const ImplicitDerivatives d = determinant_layer(rep, a, 1);
  Vec row(2);
  row << rep.coefficients[0](0, 0), rep.coefficients[1](0, 0);
  const double lin = row(0) * a[0] + row(1) * a[1] + rep.coefficients[2](0, 0);
  CHECK(std::abs(d.value - lin * lin) < 1e-15);
  CHECK((d.gradient - 2 * lin * row).norm() < 1e-14);
}

TEST_CASE("quarter circle implicitization") {
  const BezierPatch arc = quarter_circle();
  // de Casteljau oracle for the midpoint
  const auto halves = split_curve(arc, 0.5);
  const Vec mid = halves.first.points.row(2).transpose();
  const double u[1] = {0.5};
  CHECK((patch_point(arc, u) - mid).norm() < 1e-15);
  CHECK(std::abs(mid(0) - std::numbers::sqrt2 / 2) < 1e-15);
  const MRep rep = implicitize_patch(arc);
  CHECK(rep.rows() == 2);
  CHECK(rep.cols() == 2);
  CHECK(rank_drops_on_patch(rep, arc));
  CHECK(determinant_layer(rep, sp(mid), 0).value <= 1e-10);
  const double center[2] = {0, 0};
  CHECK(determinant_layer(rep, center, 0).value > 0.0);
  // the full circle is the zero set of the unbounded representation
  for (double t : {2.0, 3.5, 5.0}) {
    const Vec x = (Vec(2) << std::cos(t), std::sin(t)).finished();
    CHECK(determinant_layer(rep, sp(x), 0).value <= 1e-10);
  }
}

TEST_CASE("determinant layer derivatives against finite differences") {
  const MRep rep = implicitize_patch(quarter_circle());
  const double x2[2] = {2.0, 0.0};
  const ImplicitDerivatives d = determinant_layer(rep, x2, 3);
  auto value = [&](const Vec& x) { return determinant_layer(rep, sp(x), 0).value; };
  Vec x = (Vec(2) << 2.0, 0.0).finished();
  CHECK(rel_error(Mat(fd_gradient(value, x, 1e-6)), Mat(d.gradient)) <= 1e-6);
  std::vector<BezierPatch> patches = {quarter_circle(), curve_patch({{0, 0}, {1, 2}, {2, -1}, {3, 1}}),
                                      curve_patch({{0, 0}, {1, 1}, {2, 0}, {3, 1}, {4, -1}}, {1, 2, 1, 0.5, 1})};
  for (const auto& p : patches) {
    const MRep r = implicitize_patch(p);
    for (int t = 0; t < 10; ++t) {
      Vec y(2);
      y << uniform(-1, 3), uniform(-1, 2);
      const ImplicitDerivatives e = determinant_layer(r, sp(y), 3);
      if (e.value < 1e-6 * std::pow(e.gradient.norm(), 2)) continue;
      auto grad = [&](const Vec& z) { return Vec(determinant_layer(r, sp(z), 1).gradient); };
      auto scaled_hess = [&](const Vec& z) {
        const auto q = determinant_layer(r, sp(z), 2);
        return Vec(Eigen::Map<const Vec>(q.scaled_hessian.data(), 4) / q.value);
      };
      const double h = 1e-5 * std::max(1.0, y.norm());
      const Mat H = fd_jacobian(grad, y, h);
      CHECK(rel_error(Mat(e.value * H), e.scaled_hessian, 1e-12) <= 1e-4);
      const Mat T = fd_jacobian(scaled_hess, y, h);  // rows (k,l) column-major, columns j
      Mat scaled(4, 2);
      for (int j = 0; j < 2; ++j) scaled.col(j) = Eigen::Map<const Vec>(e.scaled_third[j].data(), 4);
      CHECK(rel_error(Mat(e.value * e.value * T), scaled, 1e-12) <= 1e-4);
      CHECK((e.scaled_hessian - e.scaled_hessian.transpose()).norm() <= 1e-9 * e.scaled_hessian.norm());
    }
  }
}

TEST_CASE("determinant is nonnegative") {
  std::vector<BezierPatch> patches = {quarter_circle(), curve_patch({{0, 0}, {1, 2}, {2, -1}, {3, 1}})};
  for (const auto& e : cube_cylinder_model().entities)
    for (const auto& p : e.patches) patches.push_back(p);
  for (const auto& p : patches) {
    const MRep rep = implicitize_patch(p);
    for (int t = 0; t < 10000; ++t) {
      Vec x(p.embedding);
      for (int k = 0; k < p.embedding; ++k) x(k) = uniform(-2, 2);
      CHECK_FALSE(determinant_layer(rep, sp(x), 0).value < 0.0);
    }
  }
}

TEST_CASE("self-intersections are split") {
  const BezierPatch loop = curve_patch({{0, 0}, {2, 3}, {-1, 3}, {1, 0}});
  auto pieces = split_autointersections(loop);
  REQUIRE(pieces.size() >= 2);
  for (const auto& p : pieces) CHECK(rank_drops_on_patch(implicitize_patch(p), p));
  // dense sampling oracle for the double point
  double best = 1e300;
  Vec dp;
  const int n = 4000;
  std::vector<Vec> pts;
  for (int i = 0; i <= n; ++i) {
    const double u[1] = {static_cast<double>(i) / n};
    pts.push_back(patch_point(loop, u));
  }
  for (int i = 0; i <= n; ++i)
    for (int j = i + 400; j <= n; j += 1)
      if ((pts[i] - pts[j]).norm() < best) {
        best = (pts[i] - pts[j]).norm();
        dp = 0.5 * (pts[i] + pts[j]);
      }
  REQUIRE(best < 1e-2);
  double closest = 1e300;
  for (std::size_t k = 0; k + 1 < pieces.size(); ++k)
    closest = std::min(closest, (pieces[k].points.row(pieces[k].degree[0]).transpose() - dp).norm());
  CHECK(closest < 1e-3);
  // no loop and low degree stay whole
  CHECK(split_autointersections(curve_patch({{0, 0}, {1, 1}, {2, 1}, {3, 0}})).size() == 1);
  CHECK(split_autointersections(quarter_circle()).size() == 1);
}

TEST_CASE("convex hull representation") {
  const ConvexHull seg = convex_hull_rep(curve_patch({{0, 0}, {1, 0}}));
  CHECK(seg.planes.size() == 4);
  const double in[2] = {0.5, 0.001}, out[2] = {0.5, 1.0};
  CHECK(hull_function(seg, in).jet.value > 0.0);
  CHECK(hull_function(seg, out).jet.value < 0.0);
  const ConvexHull tri = convex_hull_rep(curve_patch({{0, 0}, {1, 0}, {0, 1}}));
  CHECK(tri.planes.size() == 3);
  const double c[2] = {1.0 / 3, 1.0 / 3};
  CHECK(hull_function(tri, c).jet.value > 0.0);
  // zero set on the hull boundary
  for (int t = 0; t < 50; ++t) {
    const double s = uniform(0.05, 0.95);
    std::array<Vec, 3> b = {(Vec(2) << s, 0.0).finished(), (Vec(2) << 0.0, s).finished(),
                            (Vec(2) << s, 1.0 - s).finished()};
    for (const auto& x : b) CHECK(std::abs(hull_function(tri, sp(x)).jet.value) <= 1e-8);
  }
  // 3D: planar patch is extruded into a slab
  const auto model = cube_cylinder_model();
  const ConvexHull slab = convex_hull_rep(model.entities[0].patches[0]);
  CHECK(slab.planes.size() == 6);
  const double inside[3] = {-0.5, -0.25, 0.0};
  CHECK(hull_function(slab, inside).jet.value > 0.0);
}

TEST_CASE("normalize") {
  // gamma = 2y
  ImplicitDerivatives lin;
  lin.value = 2 * 0.7;
  lin.gradient = (Vec(2) << 0.0, 2.0).finished();
  lin.scaled_hessian = Mat::Zero(2, 2);
  lin.scaled_third.assign(2, Mat::Zero(2, 2));
  ScaledJet n = normalize(lin);
  CHECK(n.value == doctest::Approx(0.7));
  CHECK((n.gradient - (Vec(2) << 0.0, 1.0).finished()).norm() < 1e-15);
  CHECK(n.scaled_hessian.norm() < 1e-15);
  // gamma = x^2 + y^2 - 1 in scaled form
  auto circle = [](const Vec& x) {
    const double v = x.squaredNorm() - 1.0;
    ImplicitDerivatives d;
    d.value = v;
    d.gradient = 2 * x;
    d.scaled_hessian = v * 2 * Mat::Identity(2, 2);
    d.scaled_third.assign(2, Mat::Zero(2, 2));
    return d;
  };
  const Vec x0 = (Vec(2) << 2.0, 0.0).finished();
  CHECK(normalize(circle(x0)).value == doctest::Approx(0.75).epsilon(1e-15));
  for (int t = 0; t < 30; ++t) {
    Vec x(2);
    x << uniform(-2, 2), uniform(-2, 2);
    if (std::abs(x.squaredNorm() - 1.0) < 0.05 || x.norm() < 0.1) continue;
    auto [eg, eh] = fd_scaled([&](const Vec& y) { return normalize(circle(y)); }, x);
    CHECK(eg <= 1e-6);
    CHECK(eh <= 1e-4);
  }
  ImplicitDerivatives flat;
  flat.value = 1.0;
  flat.gradient = Vec::Zero(2);
  CHECK_THROWS_AS(normalize(flat), NumericalError);
  // plain form agrees with the scaled form
  const Vec y = (Vec(2) << 0.3, 1.4).finished();
  const auto d = circle(y);
  const Jet p = normalize_plain(d.value, d.gradient, 2 * Mat::Identity(2, 2), d.scaled_third);
  const ScaledJet s = normalize(d);
  CHECK(std::abs(p.value - s.value) < 1e-15);
  CHECK((p.gradient - s.gradient).norm() < 1e-14);
  CHECK((p.value * p.hessian - s.scaled_hessian).norm() < 1e-14);
}

TEST_CASE("trim") {
  auto fj = [](double v) { return Jet{v, Vec::Zero(2), Mat::Zero(2, 2)}; };
  auto hj = [](double v) { return ScaledJet{v, Vec::Zero(2), Mat::Zero(2, 2)}; };
  CHECK(trim(fj(1.0), hj(0.0)).value == 0.0);
  CHECK(trim(fj(-1.0), hj(0.0)).value == doctest::Approx(1.0));
  // smooth synthetic operands
  auto f_of = [](const Vec& x) {
    Jet f;
    f.value = 0.3 - x(0) * x(0) + 0.5 * x(1);
    f.gradient = (Vec(2) << -2 * x(0), 0.5).finished();
    f.hessian = (Mat(2, 2) << -2, 0, 0, 0).finished();
    return f;
  };
  auto h_of = [](const Vec& x) {
    ScaledJet h;
    h.value = std::sin(x(0)) + x(1) * x(1) - 0.2;
    h.gradient = (Vec(2) << std::cos(x(0)), 2 * x(1)).finished();
    h.scaled_hessian = h.value * (Mat(2, 2) << -std::sin(x(0)), 0, 0, 2).finished();
    return h;
  };
  int tested = 0;
  for (int t = 0; t < 200 && tested < 40; ++t) {
    Vec x(2);
    x << uniform(-1, 1), uniform(-1, 1);
    if (std::abs(h_of(x).value) < 1e-3) continue;
    ++tested;
    auto [eg, eh] = fd_scaled([&](const Vec& y) { return trim(f_of(y), h_of(y)); }, x);
    CHECK(eg <= 1e-5);
    CHECK(eh <= 1e-4);
  }
  CHECK(tested >= 20);
}

TEST_CASE("r-conjunction") {
  const Jet one{1.0, Vec::Zero(2), Mat::Zero(2, 2)};
  CHECK(r_conjunction(one, one).value == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-15));
  const ScaledJet z{0.0, Vec::Zero(2), Mat::Zero(2, 2)}, g{0.4, Vec::Ones(2), Mat::Zero(2, 2)};
  CHECK(r_conjunction(z, g).value == 0.0);
  CHECK(r_conjunction(g, z).value == 0.0);
  CHECK(r_conjunction(z, z).value == 0.0);
  auto f_of = [](const Vec& x) {
    Jet f;
    f.value = 1.2 + x(0) * x(1);
    f.gradient = (Vec(2) << x(1), x(0)).finished();
    f.hessian = (Mat(2, 2) << 0, 1, 1, 0).finished();
    return f;
  };
  auto g_of = [](const Vec& x) {
    Jet g;
    g.value = std::exp(x(0)) - 1.5 + x(1);
    g.gradient = (Vec(2) << std::exp(x(0)), 1.0).finished();
    g.hessian = (Mat(2, 2) << std::exp(x(0)), 0, 0, 0).finished();
    return g;
  };
  auto scaled = [](const Jet& j) { return ScaledJet{j.value, j.gradient, j.value * j.hessian}; };
  for (int t = 0; t < 30; ++t) {
    Vec x(2);
    x << uniform(-1, 1), uniform(-1, 1);
    auto plain = [&](const Vec& y) {
      const Jet w = r_conjunction(f_of(y), g_of(y));
      return ScaledJet{w.value, w.gradient, w.value * w.hessian};
    };
    auto [eg, eh] = fd_scaled(plain, x);
    CHECK(eg <= 1e-5);
    CHECK(eh <= 1e-4);
    if (g_of(x).value > 1e-3) {
      auto [sg, sh] = fd_scaled([&](const Vec& y) { return r_conjunction(scaled(f_of(y)), scaled(g_of(y))); }, x);
      CHECK(sg <= 1e-5);
      CHECK(sh <= 1e-4);
    }
  }
}

TEST_CASE("trimmed patch functions: soundness, completeness, derivatives") {
  std::vector<BezierPatch> patches = {quarter_circle(), curve_patch({{0, 0}, {1, 0}}),
                                      curve_patch({{0, 0}, {1, 1}, {2, 1}, {3, 0}}),
                                      curve_patch({{0, 0}, {0.5, 1}, {1, -1}, {1.5, 0.5}, {2, 0}})};
  for (const auto& p : patches) {
    const ImplicitPatch ip = prepare_patch(p);
    for (int i = 0; i < 100; ++i) {
      const double u[1] = {(i + 0.5) / 100};
      const Vec x = patch_point(p, u);
      CHECK(patch_function(ip, sp(x), 0).value <= 1e-7);
    }
    // completeness on a grid over the enlarged bounding box
    const Vec lo = p.points.colwise().minCoeff().transpose().array() - 0.1;
    const Vec hi = p.points.colwise().maxCoeff().transpose().array() + 0.1;
    const int n = 128;
    const Vec cell = (hi - lo) / (n - 1);
    const double tol = 0.25 * cell.minCoeff();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vec x = lo + (Vec(2) << i * cell(0), j * cell(1)).finished();
        if (patch_function(ip, sp(x), 0).value <= tol) CHECK(min_distance_to_polyline(p, x, 2000) <= 2 * cell.norm());
      }
    // derivatives off the zero set
    int tested = 0;
    for (int t = 0; t < 100 && tested < 15; ++t) {
      Vec x = lo + (Vec(2) << uniform(0, 1) * (hi - lo)(0), uniform(0, 1) * (hi - lo)(1)).finished();
      const ScaledJet h = normalized_patch_function(ip, sp(x));
      if (std::abs(h.value) < 1e-3) continue;
      const HullValue f = hull_function(ip.hull, sp(x));
      if (f.interior_flat || std::abs(f.jet.value) < 1e-3) continue;
      ++tested;
      auto [eg, eh] = fd_scaled([&](const Vec& y) { return patch_function(ip, sp(y)); }, x);
      CHECK(eg <= 1e-5);
      CHECK(eh <= 1e-3);
    }
    CHECK(tested >= 10);
  }
}

TEST_CASE("normalized patch limit on the zero set") {
  const ImplicitPatch ip = prepare_patch(quarter_circle());
  const double t = 0.7;
  const Vec on = (Vec(2) << std::cos(t), std::sin(t)).finished();
  const ScaledJet z = normalized_patch_function(ip, sp(on));
  CHECK(z.value == 0.0);
  CHECK(z.gradient.norm() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::abs(std::abs(z.gradient.normalized().dot(on)) - 1.0) < 1e-9);
  // matches the one-sided limit from outside
  const Vec off = 1.0001 * on;
  const ScaledJet o = normalized_patch_function(ip, sp(off));
  CHECK((o.gradient.cwiseAbs() - z.gradient.cwiseAbs()).norm() < 1e-3);
}

TEST_CASE("square with hole model") {
  const ImplicitModel model(square_with_hole_model());
  CHECK(model.entities().size() == 5);
  const Mat b = square_with_hole_boundary_samples(200);
  for (int i = 0; i < b.rows(); ++i) {
    const Vec x = b.row(i).transpose();
    CHECK(model.evaluate(sp(x), 0).value <= 1e-7);
  }
  for (int i = 0; i < 64; ++i) {
    const double t = 2 * std::numbers::pi * (i + 0.5) / 64;
    const Vec a = (Vec(2) << (hole_radius + 0.05) * std::cos(t), (hole_radius + 0.05) * std::sin(t)).finished();
    CHECK(model.evaluate(sp(a), 0).value > 1e-3);
    const double s = -0.45 + 0.9 * (i + 0.5) / 64;
    for (const Vec& c : {Vec((Vec(2) << s, -0.45).finished()), Vec((Vec(2) << 0.45, s).finished())})
      CHECK(model.evaluate(sp(c), 0).value > 1e-3);
  }
  // union semantics and permutation
  const double corner[2] = {0.5, -0.5};
  const std::vector<EntityId> both = {"bottom", "right"}, swapped = {"right", "bottom"};
  CHECK(model.evaluate(std::span<const EntityId>(both), corner, 0).value <= 1e-12);
  const double on_bottom[2] = {0.1, -0.5};
  CHECK(model.evaluate(std::span<const EntityId>(both), on_bottom, 0).value <= 1e-12);
  for (int t = 0; t < 500; ++t) {
    const Vec x = (Vec(2) << uniform(-0.6, 0.6), uniform(-0.6, 0.6)).finished();
    const double a = model.evaluate(std::span<const EntityId>(both), sp(x), 0).value;
    const double c = model.evaluate(std::span<const EntityId>(swapped), sp(x), 0).value;
    CHECK((a <= 1e-9) == (c <= 1e-9));
  }
  const std::vector<EntityId> single = {"hole"};
  const Vec y = (Vec(2) << 0.2, 0.13).finished();
  CHECK(model.evaluate(std::span<const EntityId>(single), sp(y), 0).value ==
        model.entity_function(model.index_of("hole"), sp(y), 0).value);
  const std::vector<EntityId> unknown = {"nope"};
  CHECK_THROWS_AS(model.evaluate(std::span<const EntityId>(unknown), sp(y), 0), InputError);
}

TEST_CASE("model derivatives against finite differences") {
  const ImplicitModel model(square_with_hole_model());
  int tested = 0;
  for (int t = 0; t < 400 && tested < 60; ++t) {
    const Vec x = (Vec(2) << uniform(-0.55, 0.55), uniform(-0.55, 0.55)).finished();
    if (model.evaluate(sp(x), 0).value < 1e-3) continue;
    bool near_flat = false;
    for (const auto& e : model.entities())
      for (const auto& p : e.patches) {
        const HullValue f = hull_function(p.hull, sp(x));
        near_flat = near_flat || f.interior_flat || std::abs(f.jet.value) < 1e-3 ||
                    std::abs(normalized_patch_function(p, sp(x)).value) < 1e-3;
      }
    if (near_flat) continue;
    ++tested;
    auto [eg, eh] = fd_scaled([&](const Vec& y) { return model.evaluate(sp(y)); }, x);
    CHECK(eg <= 1e-5);
    CHECK(eh <= 1e-3);
  }
  CHECK(tested >= 30);
}

TEST_CASE("cube with cylinder model") {
  const ImplicitModel model(cube_cylinder_model());
  const Mat b = cube_cylinder_boundary_samples(200);
  for (int i = 0; i < b.rows(); ++i) {
    const Vec x = b.row(i).transpose();
    CHECK(model.evaluate(sp(x), 0).value <= 1e-7);
  }
  for (const auto& x : {Eigen::Vector3d(-0.4, -0.4, 0.0), Eigen::Vector3d(-0.35, -0.2, 0.1),
                        Eigen::Vector3d(-0.2, -0.35, -0.1), Eigen::Vector3d(-0.4, -0.1, -0.15)}) {
    const Vec v = x;
    CHECK(model.evaluate(sp(v), 0).value >= 1e-3);
  }
}

TEST_CASE("model file round trip and errors") {
  const ModelSpec spec = square_with_hole_model();
  auto dir = std::filesystem::temp_directory_path() / "hoopt_unit";
  std::filesystem::create_directories(dir);
  save_model(spec, dir / "model.json");
  const ModelSpec back = load_model_spec(dir / "model.json");
  REQUIRE(back.entities.size() == spec.entities.size());
  for (std::size_t e = 0; e < spec.entities.size(); ++e) {
    CHECK(back.entities[e].id == spec.entities[e].id);
    for (std::size_t p = 0; p < spec.entities[e].patches.size(); ++p) {
      CHECK((back.entities[e].patches[p].points - spec.entities[e].patches[p].points).norm() == 0.0);
      CHECK((back.entities[e].patches[p].weights - spec.entities[e].patches[p].weights).norm() == 0.0);
    }
  }
  nlohmann::json bad = model_to_json(spec);
  bad["entities"][1]["patches"][0]["weights"] = {1.0, -1.0};
  CHECK_THROWS_AS(model_from_json(bad), InputError);
  BezierPatch quintic = curve_patch({{0, 0}, {1, 1}, {2, 0}, {3, 1}, {4, 0}, {5, 1}});
  CHECK_THROWS_AS(implicitize_patch(quintic), UnsupportedError);
}
