#pragma once

#include "hoopt/simplex_basis.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace hoopt {

using EntityId = std::string;

struct BoundaryFacet {
  std::vector<int> nodes;
  std::vector<EntityId> entities;
};

struct SlideNode {
  int node = -1;
  std::vector<EntityId> entities;
};

struct Mesh {
  int dimension = 2;
  int degree = 1;
  Mat nodes;  // one row per node
  std::vector<std::vector<int>> elements;
  std::vector<BoundaryFacet> boundary;
  std::vector<int> fixed;
  std::vector<SlideNode> slide;

  int node_count() const { return static_cast<int>(nodes.rows()); }
  int element_count() const { return static_cast<int>(elements.size()); }
  Mat element_nodes(int element) const;
};

// A boundary facet seen as a face of its owning element.
// nodes are ordered along the (d-1)-simplex lattice of the facet.
struct FacetGeometry {
  int element = -1;
  int local_face = -1;  // index of the opposite element vertex
  std::vector<int> nodes;
};

std::vector<FacetGeometry> facet_geometry(const Mesh& mesh);

struct InvalidSample {
  int element = -1;
  int point = -1;
  double determinant = 0.0;
};

struct ValidityReport {
  bool valid = true;
  double min_determinant = 0.0;
  std::vector<InvalidSample> invalid;
};

ValidityReport check_validity(const Mesh& mesh, const QuadratureRule& rule);
ValidityReport check_validity(const Mesh& mesh, int exactness);

Mesh mesh_from_json(const nlohmann::json& j);
nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

struct Box {
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> upper{1.0, 1.0, 1.0};
};

// Straight-sided simplicial mesh of an axis-aligned box. Each cell is split
// into 2 triangles or 6 Kuhn tetrahedra along its main diagonal.
// The mesh carries no boundary or dof data.
Mesh structured_mesh(int dimension, std::array<int, 3> divisions, int degree, const Box& box);

// Element indices of the lattice nodes lying on local face `face`,
// ordered along the facet lattice (vertices ascending, then lexicographic).
std::vector<int> face_local_nodes(int dimension, int degree, int face);

void validate_mesh(const Mesh& mesh);

}  // namespace hoopt
