#include "hoopt/objective.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

using nlohmann::json;

namespace hoopt {

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("config: expected an object");
  RunConfig c;
  try {
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
    if (j.contains("step_tolerance")) c.step_tolerance = j.at("step_tolerance").get<double>();
    if (j.contains("max_iterations")) c.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("quadrature_exactness")) c.quadrature_exactness = j.at("quadrature_exactness").get<int>();
  } catch (const json::exception& ex) {
    throw InputError(std::string("config: ") + ex.what());
  }
  if (!(c.lambda > 0.0)) throw InputError("config: lambda must be positive");
  if (!(c.tolerance > 0.0) || !(c.step_tolerance > 0.0)) throw InputError("config: tolerances must be positive");
  if (c.max_iterations < 0) throw InputError("config: max_iterations must be non-negative");
  if (c.quadrature_exactness < -1 || c.quadrature_exactness > max_quadrature_exactness)
    throw InputError("config: quadrature_exactness out of range");
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"lambda", c.lambda},
          {"tolerance", c.tolerance},
          {"step_tolerance", c.step_tolerance},
          {"max_iterations", c.max_iterations},
          {"quadrature_exactness", c.quadrature_exactness}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(parse_json_file(path));
  } catch (const InputError& ex) {
    const std::string what = ex.what();
    if (what.rfind(path.string(), 0) == 0) throw;
    throw InputError(path.string() + ": " + what);
  }
}

namespace {

// Measure sqrt(det(T^T T)) of a D x k tangent matrix with derivatives with
// respect to vec(T), column-major.
struct Measure {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

Measure facet_measure(const Mat& T, int order) {
  const int D = static_cast<int>(T.rows()), k = static_cast<int>(T.cols());
  const Mat G = T.transpose() * T;
  Measure m;
  m.value = std::sqrt(G.determinant());
  if (order < 1) return m;
  const Mat Gi = G.inverse();
  const Mat P = T * Gi;
  const Mat PT = P * T.transpose();
  auto id = [D](int l, int r) { return r * D + l; };
  m.gradient.resize(D * k);
  for (int r = 0; r < k; ++r)
    for (int l = 0; l < D; ++l) m.gradient(id(l, r)) = m.value * P(l, r);
  if (order < 2) return m;
  m.hessian.resize(D * k, D * k);
  for (int r = 0; r < k; ++r)
    for (int a = 0; a < D; ++a)
      for (int s = 0; s < k; ++s)
        for (int b = 0; b < D; ++b)
          m.hessian(id(a, r), id(b, s)) =
              m.value * (P(b, s) * P(a, r) + (a == b ? Gi(s, r) : 0.0) - P(a, s) * P(b, r) - PT(a, b) * Gi(s, r));
  return m;
}

struct Accumulator {
  Vec gradient;
  std::vector<Eigen::Triplet<double>> triplets;

  void add(std::span<const int> g, const Vec& ge, const Mat* he) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] >= 0) gradient(g[i]) += ge(i);
    if (!he) return;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] < 0) continue;
      for (std::size_t j = 0; j < g.size(); ++j)
        if (g[j] >= 0) triplets.emplace_back(g[i], g[j], 0.5 * ((*he)(i, j) + (*he)(j, i)));
    }
  }
};

}  // namespace

FunctionalEvaluation boundary_deviation(const Mesh& mesh, const ImplicitModel& model, const DofMap& dofs,
                                        int order, int exactness) {
  if (order < 0 || order > 2) throw UsageError("boundary deviation order must be 0, 1 or 2");
  const int D = mesh.dimension;
  const int k = D - 1;
  if (model.dimension() != D) throw InputError("model dimension does not match the mesh");
  const int q = exactness < 0 ? default_boundary_exactness(mesh.degree) : exactness;
  const QuadratureRule& rule = quadrature_for(k, q);
  const SimplexBasis& basis = basis_for(k, mesh.degree);
  std::vector<BasisSample> samples;
  for (int i = 0; i < rule.size(); ++i) {
    const Vec eta = rule.points.row(i).transpose();
    samples.push_back(basis.evaluate(std::span<const double>(eta.data(), k), 1));
  }
  const int n = basis.size();
  const int nl = n * D;
  const int nz = D + D * k;  // (x, vec T)

  FunctionalEvaluation out;
  Accumulator acc{Vec::Zero(order >= 1 ? dofs.size() : 0), {}};
  const auto geometry = facet_geometry(mesh);

  for (std::size_t b = 0; b < mesh.boundary.size(); ++b) {
    const auto& facet = mesh.boundary[b];
    std::vector<int> ids;
    for (const auto& e : facet.entities) {
      if (!model.contains(e)) throw InputError("boundary facet " + std::to_string(b) + ": unknown entity id '" + e + "'");
      ids.push_back(model.index_of(e));
    }
    if (ids.empty()) continue;
    const auto& nodes = geometry[b].nodes;
    Mat X(n, D);
    for (int a = 0; a < n; ++a) X.row(a) = mesh.nodes.row(nodes[a]);
    Vec ge = Vec::Zero(order >= 1 ? nl : 0);
    Mat he = Mat::Zero(order >= 2 ? nl : 0, order >= 2 ? nl : 0);
    for (int qp = 0; qp < rule.size(); ++qp) {
      const BasisSample& s = samples[qp];
      const Vec x = X.transpose() * s.values;
      const Mat T = X.transpose() * s.gradients;  // D x k
      const Measure m = facet_measure(T, order);
      const double w = rule.weights(qp);
      Vec gz = Vec::Zero(order >= 1 ? nz : 0);
      Mat hz = Mat::Zero(order >= 2 ? nz : 0, order >= 2 ? nz : 0);
      for (int id : ids) {
        const ScaledJet g = model.entity_function(id, std::span<const double>(x.data(), D), order >= 1 ? 2 : 0);
        const double g2 = g.value * g.value;
        out.value += w * g2 * m.value;
        if (order < 1) continue;
        gz.head(D) += 2.0 * g.value * m.value * g.gradient;
        gz.tail(D * k) += g2 * m.gradient;
        if (order < 2) continue;
        const Mat hxx = 2.0 * (g.gradient * g.gradient.transpose() + g.scaled_hessian);
        hz.topLeftCorner(D, D) += m.value * hxx;
        const Mat hxt = 2.0 * g.value * g.gradient * m.gradient.transpose();
        hz.topRightCorner(D, D * k) += hxt;
        hz.bottomLeftCorner(D * k, D) += hxt.transpose();
        hz.bottomRightCorner(D * k, D * k) += g2 * m.hessian;
      }
      if (order < 1) continue;
      // z = B x_local with x_local ordered (node, component)
      Mat B = Mat::Zero(nz, nl);
      for (int a = 0; a < n; ++a)
        for (int l = 0; l < D; ++l) {
          B(l, a * D + l) = s.values(a);
          for (int r = 0; r < k; ++r) B(D + r * D + l, a * D + l) = s.gradients(a, r);
        }
      ge.noalias() += w * B.transpose() * gz;
      if (order >= 2) he.noalias() += w * B.transpose() * hz * B;
    }
    if (order < 1) continue;
    std::vector<int> g(nl);
    for (int a = 0; a < n; ++a)
      for (int l = 0; l < D; ++l) g[a * D + l] = dofs.index(nodes[a], l);
    acc.add(g, ge, order >= 2 ? &he : nullptr);
  }

  // Point terms keep nodes targeting several entities close to all of them.
  for (const auto& slide : mesh.slide) {
    if (slide.entities.size() < 2) continue;
    const Vec x = mesh.nodes.row(slide.node).transpose();
    Vec ge = Vec::Zero(D);
    Mat he = Mat::Zero(D, D);
    for (const auto& e : slide.entities) {
      if (!model.contains(e)) throw InputError("slide node " + std::to_string(slide.node) + ": unknown entity id '" + e + "'");
      const ScaledJet g = model.entity_function(model.index_of(e), std::span<const double>(x.data(), D), order >= 1 ? 2 : 0);
      out.value += g.value * g.value;
      if (order < 1) continue;
      ge += 2.0 * g.value * g.gradient;
      he += 2.0 * (g.gradient * g.gradient.transpose() + g.scaled_hessian);
    }
    if (order < 1) continue;
    std::vector<int> gi(D);
    for (int l = 0; l < D; ++l) gi[l] = dofs.index(slide.node, l);
    acc.add(gi, ge, order >= 2 ? &he : nullptr);
  }

  if (order >= 1) out.gradient = std::move(acc.gradient);
  if (order >= 2) {
    out.hessian.resize(dofs.size(), dofs.size());
    out.hessian.setFromTriplets(acc.triplets.begin(), acc.triplets.end());
  }
  return out;
}

double max_boundary_deviation(const Mesh& mesh, const ImplicitModel& model, int exactness) {
  const int D = mesh.dimension;
  const int k = D - 1;
  const QuadratureRule& rule = quadrature_for(k, exactness < 0 ? default_boundary_exactness(mesh.degree) : exactness);
  const SimplexBasis& basis = basis_for(k, mesh.degree);
  const auto geometry = facet_geometry(mesh);
  double worst = 0.0;
  for (std::size_t b = 0; b < mesh.boundary.size(); ++b) {
    const auto& nodes = geometry[b].nodes;
    Mat X(basis.size(), D);
    for (int a = 0; a < basis.size(); ++a) X.row(a) = mesh.nodes.row(nodes[a]);
    for (int qp = 0; qp < rule.size(); ++qp) {
      const Vec eta = rule.points.row(qp).transpose();
      const Vec x = X.transpose() * basis.evaluate(std::span<const double>(eta.data(), k), 0).values;
      for (const auto& e : mesh.boundary[b].entities) {
        if (!model.contains(e)) throw InputError("boundary facet " + std::to_string(b) + ": unknown entity id '" + e + "'");
        const double g = model.entity_function(model.index_of(e), std::span<const double>(x.data(), D), 0).value;
        worst = std::max(worst, std::abs(g));
      }
    }
  }
  return worst;
}

ObjectiveValue combined_objective(const Mesh& mesh, const MetricSource& metric, const ImplicitModel* model,
                                  const DofMap& dofs, const ObjectiveOptions& options, int order) {
  if (options.lambda < 0.0) throw UsageError("penalty weight must be non-negative");
  ObjectiveValue out;
  FunctionalOptions fo;
  fo.exactness = options.exactness;
  fo.metric_derivatives = options.metric_derivatives;
  FunctionalResult f = functional(mesh, metric, dofs, order, fo);
  if (!is_finite(f)) {
    out.finite = false;
    out.invalid_element = std::get<Infinite>(f).element;
    out.H = out.F = std::numeric_limits<double>::infinity();
    return out;
  }
  auto& fe = std::get<FunctionalEvaluation>(f);
  out.F = fe.value;
  if (order >= 1) out.gradient = std::move(fe.gradient);
  if (order >= 2) out.hessian = std::move(fe.hessian);
  if (model && (!mesh.boundary.empty() || !mesh.slide.empty())) {
    FunctionalEvaluation g = boundary_deviation(mesh, *model, dofs, order, options.boundary_exactness);
    out.G = g.value;
    if (order >= 1) out.gradient += options.lambda * g.gradient;
    if (order >= 2) out.hessian += options.lambda * g.hessian;
  }
  out.H = out.F + options.lambda * out.G;
  return out;
}

}  // namespace hoopt
