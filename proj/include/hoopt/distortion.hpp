#pragma once

#include "hoopt/mesh.hpp"
#include "hoopt/metric.hpp"

#include <Eigen/Sparse>

#include <filesystem>
#include <variant>

namespace hoopt {

using SparseMat = Eigen::SparseMatrix<double>;

// Free coordinates of the mesh nodes. Fixed nodes carry no unknowns.
class DofMap {
 public:
  DofMap() = default;
  explicit DofMap(const Mesh& mesh);

  int size() const { return count_; }
  int dimension() const { return dimension_; }
  // -1 for fixed coordinates.
  int index(int node, int component) const { return map_[node * dimension_ + component]; }

  Vec gather(const Mesh& mesh) const;
  void scatter(const Vec& x, Mesh& mesh) const;

 private:
  int dimension_ = 0;
  int count_ = 0;
  std::vector<int> map_;
};

struct DistortionSample {
  double distortion = 0.0;  // +inf when sigma <= 0
  double quality = 0.0;
  double sigma = 0.0;
  double sigma0 = 0.0;
  bool regularized = false;  // sigma <= 0 was clipped
};

// jacobian is the map from the equilateral simplex, d x d.
DistortionSample pointwise_distortion(const Mat& jacobian, const Mat& metric);

struct ElementQuality {
  double eta = 0.0;  // +inf for invalid elements
  double quality = 0.0;
  double min_pointwise_quality = 0.0;
  std::vector<DistortionSample> samples;
};

ElementQuality element_distortion(const Mesh& mesh, int element, const MetricSource& metric,
                                  const QuadratureRule& rule);

enum class MetricDerivatives { full, frozen };

struct FunctionalOptions {
  int exactness = -1;  // -1: 2 p d
  MetricDerivatives metric_derivatives = MetricDerivatives::full;
};

int default_exactness(const Mesh& mesh);

struct FunctionalEvaluation {
  double value = 0.0;
  Vec gradient;       // order >= 1
  SparseMat hessian;  // order >= 2
};

// An inverted configuration: some sample has sigma <= 0.
struct Infinite {
  int element = -1;
};

using FunctionalResult = std::variant<FunctionalEvaluation, Infinite>;

inline bool is_finite(const FunctionalResult& r) {
  return std::holds_alternative<FunctionalEvaluation>(r);
}

FunctionalResult functional(const Mesh& mesh, const MetricSource& metric, const DofMap& dofs,
                            int order, const FunctionalOptions& options = {});

// Squared distortion and its derivatives with respect to
// z = (row-major jacobian entries, physical point).
struct LocalDistortion {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

LocalDistortion squared_distortion_local(const Mat& jacobian, const MetricEvaluation& metric,
                                         int order, MetricDerivatives mode);

struct QualityStatistics {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

QualityStatistics statistics(std::span<const double> values);

struct QualityReport {
  std::vector<ElementQuality> elements;
  QualityStatistics quality;
};

QualityReport quality_report(const Mesh& mesh, const MetricSource& metric, int exactness = -1);
std::string quality_csv(const QualityReport& report);
void write_quality_csv(const QualityReport& report, const std::filesystem::path& path);

}  // namespace hoopt
