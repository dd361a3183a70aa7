#pragma once

#include "hoopt/mesh.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hoopt {

// Rational Bezier curve or tensor-product surface.
// Surface control points are stored with index i*(n+1)+j for bidegree (m,n).
struct BezierPatch {
  int embedding = 2;   // D
  int parametric = 1;  // 1 curve, 2 surface
  std::array<int, 2> degree{1, 0};
  Mat points;  // one row per control point
  Vec weights;
  EntityId entity;

  int control_count() const;
};

void validate_patch(const BezierPatch& patch);

// Point of the patch at parameter u in [0,1]^parametric.
Vec patch_point(const BezierPatch& patch, std::span<const double> u);

// De Casteljau split of a curve at parameter t.
std::pair<BezierPatch, BezierPatch> split_curve(const BezierPatch& curve, double t);

// Matrix representation: M(x) = sum_k x_k * coefficients[k] + coefficients[D].
// Rows follow the Bernstein basis of the moving hyperplanes, columns the
// independent moving hyperplanes.
struct MRep {
  int dimension = 2;
  std::vector<Mat> coefficients;
  std::array<int, 2> nu{0, 0};

  int rows() const { return static_cast<int>(coefficients.front().rows()); }
  int cols() const { return static_cast<int>(coefficients.front().cols()); }
  Mat at(std::span<const double> x) const;
};

MRep implicitize_patch(const BezierPatch& patch);

// Sampled drop-of-rank check: smallest singular value of M(phi(u)) at most
// 1e-8 times the largest at `samples` parameters.
bool rank_drops_on_patch(const MRep& rep, const BezierPatch& patch, int samples = 50);

// Splits planar curves of degree >= 3 at double points.
std::vector<BezierPatch> split_autointersections(const BezierPatch& curve);

// Value, gradient and plain Hessian.
struct Jet {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

// Value, gradient and the value-scaled Hessian value * hessian.
struct ScaledJet {
  double value = 0.0;
  Vec gradient;
  Mat scaled_hessian;
};

// Determinant layer output: gamma, grad gamma, gamma * Hessian and
// gamma^2 * third derivative (scaled_third[j](k,l)).
struct ImplicitDerivatives {
  double value = 0.0;
  Vec gradient;
  Mat scaled_hessian;
  std::vector<Mat> scaled_third;
};

ImplicitDerivatives determinant_layer(const MRep& rep, std::span<const double> x, int order = 3);

// gamma / |grad gamma| with gradient and value-scaled Hessian, from scaled inputs.
// Throws NumericalError when |grad gamma| <= 1e-12.
ScaledJet normalize(const ImplicitDerivatives& g);

// Same normalization from plain derivatives up to third order.
Jet normalize_plain(double value, const Vec& gradient, const Mat& hessian,
                    std::span<const Mat> third);

// f trim h with f the normalized hull function and h the normalized patch function.
ScaledJet trim(const Jet& f, const ScaledJet& h);

// f + g - sqrt(f^2 + g^2).
Jet r_conjunction(const Jet& f, const Jet& g);
// Same for nonnegative operands in value-scaled form.
ScaledJet r_conjunction(const ScaledJet& f, const ScaledJet& g);

struct Hyperplane {
  Vec normal;  // unit, pointing into the hull
  double offset = 0.0;
};

struct ConvexHull {
  std::vector<Hyperplane> planes;
  Mat vertices;  // points whose hull was taken, after extrusion
};

ConvexHull convex_hull_rep(const BezierPatch& patch);

// Normalized hull function; `interior_flat` marks interior points where the
// unnormalized function has a vanishing gradient (value treated as +infinity).
struct HullValue {
  Jet jet;
  bool interior_flat = false;
};

HullValue hull_function(const ConvexHull& hull, std::span<const double> x, int order = 2);

// Plain r-conjunction of the hull hyperplanes with derivatives up to third order.
struct HullRaw {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
  std::vector<Mat> third;
};

HullRaw hull_raw(const ConvexHull& hull, std::span<const double> x);

struct ImplicitPatch {
  BezierPatch patch;
  MRep rep;
  ConvexHull hull;
};

ImplicitPatch prepare_patch(const BezierPatch& patch);

// Normalized patch function; at points of the zero-set the gradient is the
// one-sided limit when the zero-set has codimension one, else zero.
ScaledJet normalized_patch_function(const ImplicitPatch& patch, std::span<const double> x, int order = 2);

// Trimmed patch function.
ScaledJet patch_function(const ImplicitPatch& patch, std::span<const double> x, int order = 2);

struct ImplicitEntity {
  EntityId id;
  int parametric = 1;
  std::vector<ImplicitPatch> patches;
};

struct ModelEntitySpec {
  EntityId id;
  std::string type;  // "curve" or "surface"
  std::vector<BezierPatch> patches;
};

struct ModelSpec {
  int dimension = 2;
  std::vector<ModelEntitySpec> entities;
  nlohmann::json associations = nlohmann::json::object();
};

class ImplicitModel {
 public:
  ImplicitModel() = default;
  explicit ImplicitModel(const ModelSpec& spec);

  int dimension() const { return dimension_; }
  const std::vector<ImplicitEntity>& entities() const { return entities_; }
  const ImplicitEntity& entity(const EntityId& id) const;
  int index_of(const EntityId& id) const;
  bool contains(const EntityId& id) const { return index_.count(id) > 0; }
  std::vector<EntityId> ids() const;

  ScaledJet entity_function(int index, std::span<const double> x, int order = 2) const;
  // r-conjunction of the listed entity functions, in list order.
  ScaledJet evaluate(std::span<const int> indices, std::span<const double> x, int order = 2) const;
  ScaledJet evaluate(std::span<const EntityId> ids, std::span<const double> x, int order = 2) const;
  // Whole model.
  ScaledJet evaluate(std::span<const double> x, int order = 2) const;

 private:
  int dimension_ = 2;
  std::vector<ImplicitEntity> entities_;
  std::map<EntityId, int> index_;
};

ImplicitModel implicitize_model(const ModelSpec& spec);

ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& spec);
ModelSpec load_model_spec(const std::filesystem::path& path);
ImplicitModel load_model(const std::filesystem::path& path);
void save_model(const ModelSpec& spec, const std::filesystem::path& path);

}  // namespace hoopt
