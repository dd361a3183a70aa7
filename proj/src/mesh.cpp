#include "hoopt/mesh.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace hoopt {

using nlohmann::json;

Mat Mesh::element_nodes(int element) const {
  const auto& conn = elements.at(element);
  Mat x(static_cast<Eigen::Index>(conn.size()), dimension);
  for (std::size_t i = 0; i < conn.size(); ++i) x.row(i) = nodes.row(conn[i]);
  return x;
}

std::vector<int> face_local_nodes(int dimension, int degree, int face) {
  const auto& elem = basis_for(dimension, degree);
  const auto& facet = basis_for(dimension - 1, degree);
  std::vector<int> face_vertices;
  for (int v = 0; v <= dimension; ++v)
    if (v != face) face_vertices.push_back(v);
  std::vector<int> out;
  out.reserve(facet.size());
  for (const auto& beta : facet.lattice()) {
    // lattice weights on face vertices: mu_0 = p - sum(beta), mu_m = beta_{m-1}
    std::array<int, 4> lambda{0, 0, 0, 0};
    int sum = 0;
    for (int m = 0; m < dimension - 1; ++m) sum += beta[m];
    lambda[face_vertices[0]] = degree - sum;
    for (int m = 1; m < dimension; ++m) lambda[face_vertices[m]] = beta[m - 1];
    LatticeIndex alpha{0, 0, 0};
    for (int k = 0; k < dimension; ++k) alpha[k] = lambda[k + 1];
    out.push_back(elem.node_of(alpha));
  }
  return out;
}

std::vector<FacetGeometry> facet_geometry(const Mesh& mesh) {
  const int d = mesh.dimension;
  std::vector<std::vector<int>> faces(d + 1);
  for (int f = 0; f <= d; ++f) faces[f] = face_local_nodes(d, mesh.degree, f);

  std::vector<FacetGeometry> out;
  out.reserve(mesh.boundary.size());
  for (std::size_t b = 0; b < mesh.boundary.size(); ++b) {
    const auto& facet = mesh.boundary[b];
    std::set<int> facet_nodes(facet.nodes.begin(), facet.nodes.end());
    // Candidate vertex sets: the facet vertices are among its nodes.
    bool found = false;
    for (int e = 0; e < mesh.element_count() && !found; ++e) {
      const auto& conn = mesh.elements[e];
      for (int f = 0; f <= d; ++f) {
        bool all = true;
        for (int v = 0; v <= d && all; ++v)
          if (v != f && !facet_nodes.count(conn[v])) all = false;
        if (!all) continue;
        std::set<int> local;
        for (int i : faces[f]) local.insert(conn[i]);
        if (local != facet_nodes) continue;
        FacetGeometry g;
        g.element = e;
        g.local_face = f;
        for (int i : faces[f]) g.nodes.push_back(conn[i]);
        out.push_back(std::move(g));
        found = true;
        break;
      }
    }
    if (!found)
      throw InputError("boundary facet " + std::to_string(b) +
                       " is not a face of any element");
  }
  return out;
}

ValidityReport check_validity(const Mesh& mesh, const QuadratureRule& rule) {
  const auto& basis = basis_for(mesh.dimension, mesh.degree);
  if (rule.dimension != mesh.dimension)
    throw UsageError("quadrature dimension does not match the mesh");
  ValidityReport report;
  report.min_determinant = std::numeric_limits<double>::infinity();
  std::vector<BasisSample> samples;
  samples.reserve(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    Vec xi = rule.points.row(q).transpose();
    samples.push_back(basis.evaluate(std::span<const double>(xi.data(), xi.size()), 1));
  }
  for (int e = 0; e < mesh.element_count(); ++e) {
    Mat x = mesh.element_nodes(e);
    for (int q = 0; q < rule.size(); ++q) {
      Mat jac = x.transpose() * samples[q].gradients;
      const double det = jac.determinant();
      report.min_determinant = std::min(report.min_determinant, det);
      if (!(det > 0.0)) {
        report.valid = false;
        report.invalid.push_back({e, q, det});
      }
    }
  }
  return report;
}

ValidityReport check_validity(const Mesh& mesh, int exactness) {
  return check_validity(mesh, quadrature_for(mesh.dimension, exactness));
}

namespace {

int simplex_size(int d, int p) {
  int n = 1;
  for (int k = 1; k <= d; ++k) n = n * (p + k) / k;
  return n;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw InputError(where + "." + key + ": " + ex.what());
  }
}

std::vector<int> int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer())
      throw InputError(where + "[" + std::to_string(i) + "]: expected an integer");
    out.push_back(j[i].get<int>());
  }
  return out;
}

std::vector<EntityId> id_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of entity ids");
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw InputError(where + "[" + std::to_string(i) + "]: expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

void check_node_index(int node, int count, const std::string& where) {
  if (node < 0 || node >= count)
    throw InputError(where + ": node index " + std::to_string(node) + " out of range");
}

}  // namespace

void validate_mesh(const Mesh& mesh) {
  const int d = mesh.dimension;
  if (d != 2 && d != 3) throw InputError("mesh.dimension must be 2 or 3");
  if (mesh.degree < 1 || mesh.degree > 6) throw InputError("mesh.degree must be in [1, 6]");
  if (mesh.nodes.cols() != d) throw InputError("mesh.nodes: coordinates must have dimension entries");
  const int n = simplex_size(d, mesh.degree);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& conn = mesh.elements[e];
    const std::string where = "mesh.elements[" + std::to_string(e) + "]";
    if (static_cast<int>(conn.size()) != n)
      throw InputError(where + ": expected " + std::to_string(n) + " nodes, got " +
                       std::to_string(conn.size()));
    for (int v : conn) check_node_index(v, mesh.node_count(), where);
  }
  const int nf = simplex_size(d - 1, mesh.degree);
  for (std::size_t b = 0; b < mesh.boundary.size(); ++b) {
    const std::string where = "mesh.boundary[" + std::to_string(b) + "]";
    if (static_cast<int>(mesh.boundary[b].nodes.size()) != nf)
      throw InputError(where + ".facet: expected " + std::to_string(nf) + " nodes");
    for (int v : mesh.boundary[b].nodes) check_node_index(v, mesh.node_count(), where);
  }
  for (std::size_t i = 0; i < mesh.fixed.size(); ++i)
    check_node_index(mesh.fixed[i], mesh.node_count(), "mesh.dof.fixed[" + std::to_string(i) + "]");
  std::set<int> fixed(mesh.fixed.begin(), mesh.fixed.end());
  for (std::size_t i = 0; i < mesh.slide.size(); ++i) {
    const std::string where = "mesh.dof.slide[" + std::to_string(i) + "]";
    check_node_index(mesh.slide[i].node, mesh.node_count(), where);
    if (fixed.count(mesh.slide[i].node))
      throw InputError(where + ": node " + std::to_string(mesh.slide[i].node) +
                       " is also fixed");
    if (mesh.slide[i].entities.empty()) throw InputError(where + ": empty entity set");
  }
}

Mesh mesh_from_json(const json& j) {
  Mesh mesh;
  mesh.dimension = field<int>(j, "dimension", "mesh");
  mesh.degree = field<int>(j, "degree", "mesh");
  if (mesh.dimension != 2 && mesh.dimension != 3) throw InputError("mesh.dimension must be 2 or 3");
  const json& nodes = j.contains("nodes") ? j.at("nodes") : throw InputError("mesh: missing field 'nodes'");
  if (!nodes.is_array()) throw InputError("mesh.nodes: expected an array");
  mesh.nodes.resize(static_cast<Eigen::Index>(nodes.size()), mesh.dimension);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "mesh.nodes[" + std::to_string(i) + "]";
    if (!nodes[i].is_array() || static_cast<int>(nodes[i].size()) != mesh.dimension)
      throw InputError(where + ": expected " + std::to_string(mesh.dimension) + " coordinates");
    for (int k = 0; k < mesh.dimension; ++k) {
      if (!nodes[i][k].is_number()) throw InputError(where + ": coordinate is not a number");
      mesh.nodes(i, k) = nodes[i][k].get<double>();
    }
  }
  const json& elements = j.contains("elements") ? j.at("elements") : throw InputError("mesh: missing field 'elements'");
  if (!elements.is_array()) throw InputError("mesh.elements: expected an array");
  for (std::size_t e = 0; e < elements.size(); ++e)
    mesh.elements.push_back(int_list(elements[e], "mesh.elements[" + std::to_string(e) + "]"));
  if (j.contains("boundary")) {
    const json& boundary = j.at("boundary");
    if (!boundary.is_array()) throw InputError("mesh.boundary: expected an array");
    for (std::size_t b = 0; b < boundary.size(); ++b) {
      const std::string where = "mesh.boundary[" + std::to_string(b) + "]";
      if (!boundary[b].is_object() || !boundary[b].contains("facet"))
        throw InputError(where + ": missing field 'facet'");
      BoundaryFacet f;
      f.nodes = int_list(boundary[b].at("facet"), where + ".facet");
      if (boundary[b].contains("entities"))
        f.entities = id_list(boundary[b].at("entities"), where + ".entities");
      mesh.boundary.push_back(std::move(f));
    }
  }
  if (j.contains("dof")) {
    const json& dof = j.at("dof");
    if (dof.contains("fixed")) mesh.fixed = int_list(dof.at("fixed"), "mesh.dof.fixed");
    if (dof.contains("slide")) {
      const json& slide = dof.at("slide");
      if (!slide.is_array()) throw InputError("mesh.dof.slide: expected an array");
      for (std::size_t i = 0; i < slide.size(); ++i) {
        const std::string where = "mesh.dof.slide[" + std::to_string(i) + "]";
        SlideNode s;
        s.node = field<int>(slide[i], "node", where);
        if (!slide[i].contains("entities")) throw InputError(where + ": missing field 'entities'");
        s.entities = id_list(slide[i].at("entities"), where + ".entities");
        mesh.slide.push_back(std::move(s));
      }
    }
  }
  validate_mesh(mesh);
  return mesh;
}

json mesh_to_json(const Mesh& mesh) {
  json j;
  j["dimension"] = mesh.dimension;
  j["degree"] = mesh.degree;
  json nodes = json::array();
  for (int i = 0; i < mesh.node_count(); ++i) {
    json row = json::array();
    for (int k = 0; k < mesh.dimension; ++k) row.push_back(mesh.nodes(i, k));
    nodes.push_back(std::move(row));
  }
  j["nodes"] = std::move(nodes);
  j["elements"] = mesh.elements;
  json boundary = json::array();
  for (const auto& f : mesh.boundary)
    boundary.push_back({{"facet", f.nodes}, {"entities", f.entities}});
  j["boundary"] = std::move(boundary);
  json slide = json::array();
  for (const auto& s : mesh.slide) slide.push_back({{"node", s.node}, {"entities", s.entities}});
  j["dof"] = {{"fixed", mesh.fixed}, {"slide", std::move(slide)}};
  return j;
}

Mesh load_mesh(const std::filesystem::path& path) {
  json j = parse_json_file(path);
  try {
    return mesh_from_json(j);
  } catch (const InputError& ex) {
    throw InputError(path.string() + ": " + ex.what());
  }
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  write_text(path, mesh_to_json(mesh).dump(1) + "\n");
}

Mesh structured_mesh(int dimension, std::array<int, 3> divisions, int degree, const Box& box) {
  if (dimension != 2 && dimension != 3) throw UsageError("structured mesh dimension must be 2 or 3");
  for (int k = 0; k < dimension; ++k)
    if (divisions[k] < 1) throw UsageError("structured mesh divisions must be positive");
  const auto& basis = basis_for(dimension, degree);
  const int d = dimension;
  std::array<long, 3> fine{1, 1, 1};
  for (int k = 0; k < d; ++k) fine[k] = static_cast<long>(divisions[k]) * degree + 1;
  auto fine_id = [&](const std::array<long, 3>& c) { return c[0] + fine[0] * (c[1] + fine[1] * c[2]); };

  // Simplices as vertex lists in coarse lattice coordinates, relative to the cell corner.
  std::vector<std::vector<std::array<int, 3>>> cell_simplices;
  if (d == 2) {
    cell_simplices.push_back({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    cell_simplices.push_back({{0, 0, 0}, {1, 1, 0}, {0, 1, 0}});
  } else {
    std::array<int, 3> perm{0, 1, 2};
    do {
      std::vector<std::array<int, 3>> s(4, {0, 0, 0});
      for (int m = 1; m <= 3; ++m) {
        s[m] = s[m - 1];
        s[m][perm[m - 1]] += 1;
      }
      Eigen::Matrix3d e;
      for (int m = 1; m <= 3; ++m)
        for (int k = 0; k < 3; ++k) e(k, m - 1) = s[m][k] - s[0][k];
      if (e.determinant() < 0) std::swap(s[1], s[2]);
      cell_simplices.push_back(s);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  std::vector<std::vector<long>> raw;
  std::array<int, 3> c{0, 0, 0};
  for (c[2] = 0; c[2] < (d == 3 ? divisions[2] : 1); ++c[2]) {
    for (c[1] = 0; c[1] < divisions[1]; ++c[1]) {
      for (c[0] = 0; c[0] < divisions[0]; ++c[0]) {
        for (const auto& s : cell_simplices) {
          std::vector<long> conn;
          for (const auto& alpha : basis.lattice()) {
            int a0 = degree;
            for (int k = 0; k < d; ++k) a0 -= alpha[k];
            std::array<long, 3> pos{0, 0, 0};
            for (int k = 0; k < d; ++k) {
              long v = static_cast<long>(a0) * (c[k] + s[0][k]);
              for (int m = 1; m <= d; ++m) v += static_cast<long>(alpha[m - 1]) * (c[k] + s[m][k]);
              pos[k] = v;
            }
            conn.push_back(fine_id(pos));
          }
          raw.push_back(std::move(conn));
        }
      }
    }
  }

  std::vector<long> used;
  for (const auto& conn : raw) used.insert(used.end(), conn.begin(), conn.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  Mesh mesh;
  mesh.dimension = d;
  mesh.degree = degree;
  mesh.nodes.resize(static_cast<Eigen::Index>(used.size()), d);
  for (std::size_t i = 0; i < used.size(); ++i) {
    long id = used[i];
    std::array<long, 3> pos{0, 0, 0};
    pos[0] = id % fine[0];
    id /= fine[0];
    pos[1] = id % fine[1];
    pos[2] = id / fine[1];
    for (int k = 0; k < d; ++k) {
      const double t = static_cast<double>(pos[k]) / static_cast<double>(fine[k] - 1);
      mesh.nodes(static_cast<Eigen::Index>(i), k) =
          pos[k] == fine[k] - 1 ? box.upper[k] : box.lower[k] + t * (box.upper[k] - box.lower[k]);
    }
  }
  for (const auto& conn : raw) {
    std::vector<int> e;
    for (long id : conn)
      e.push_back(static_cast<int>(std::lower_bound(used.begin(), used.end(), id) - used.begin()));
    mesh.elements.push_back(std::move(e));
  }
  return mesh;
}

}  // namespace hoopt
