#include "hoopt/implicit.hpp"

#include "hoopt/errors.hpp"
#include "hoopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hoopt {

using nlohmann::json;

namespace {

constexpr double kNullCutoff = 1e-10;
constexpr double kRankDrop = 1e-8;
constexpr double kDegenerate = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Vec bernstein(int n, double t) {
  Vec b(n + 1);
  for (int i = 0; i <= n; ++i) b(i) = binomial(n, i) * std::pow(t, i) * std::pow(1.0 - t, n - i);
  return b;
}

// Homogeneous control coefficients (w x, w), one row per control point.
Mat homogeneous(const BezierPatch& p) {
  Mat c(p.points.rows(), p.embedding + 1);
  for (int i = 0; i < p.points.rows(); ++i) {
    c.row(i).head(p.embedding) = p.weights(i) * p.points.row(i);
    c(i, p.embedding) = p.weights(i);
  }
  return c;
}

double bbox_diagonal(const Mat& pts) {
  return (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
}

// Directions of the centered point cloud, ordered by decreasing spread,
// with the half-thickness along each.
struct Spread {
  Mat directions;  // D x D, columns
  Vec thickness;
};

Spread point_spread(const Mat& pts) {
  const int D = static_cast<int>(pts.cols());
  Mat centered = pts.rowwise() - pts.colwise().mean();
  Mat gram = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  Spread s;
  s.directions.resize(D, D);
  s.thickness.resize(D);
  for (int k = 0; k < D; ++k) {
    const int col = D - 1 - k;
    s.directions.col(k) = es.eigenvectors().col(col);
    s.thickness(k) = (centered * s.directions.col(k)).cwiseAbs().maxCoeff();
  }
  return s;
}

// Right null space of A by SVD with a relative cutoff.
Mat null_space(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > kNullCutoff * smax) ++rank;
  return svd.matrixV().rightCols(A.cols() - rank);
}

// M-rep whose zero set is the affine subspace {x : planes^T x + offsets = 0}.
MRep flat_rep(const Mat& normals, const Vec& offsets) {
  const int D = static_cast<int>(normals.rows());
  const int c = static_cast<int>(normals.cols());
  MRep rep;
  rep.dimension = D;
  rep.coefficients.assign(D + 1, Mat::Zero(1, c));
  for (int j = 0; j < c; ++j) {
    for (int k = 0; k < D; ++k) rep.coefficients[k](0, j) = normals(k, j);
    rep.coefficients[D](0, j) = offsets(j);
  }
  return rep;
}

MRep moving_hyperplane_rep(const BezierPatch& p, std::array<int, 2> nu) {
  const int D = p.embedding;
  const Mat c = homogeneous(p);
  const int m = p.degree[0], n = p.parametric == 2 ? p.degree[1] : 0;
  const int n1 = nu[0], n2 = p.parametric == 2 ? nu[1] : 0;
  const int rows_out = (n1 + m + 1) * (n2 + n + 1);
  const int unknowns = (n1 + 1) * (n2 + 1) * (D + 1);
  Mat A = Mat::Zero(rows_out, unknowns);
  for (int j1 = 0; j1 <= n1; ++j1)
    for (int j2 = 0; j2 <= n2; ++j2)
      for (int i1 = 0; i1 <= m; ++i1)
        for (int i2 = 0; i2 <= n; ++i2) {
          const double f = binomial(n1, j1) * binomial(m, i1) / binomial(n1 + m, i1 + j1) *
                           binomial(n2, j2) * binomial(n, i2) / binomial(n2 + n, i2 + j2);
          const int row = (i1 + j1) * (n2 + n + 1) + (i2 + j2);
          const int cp = i1 * (n + 1) + i2;
          const int base = (j1 * (n2 + 1) + j2) * (D + 1);
          for (int s = 0; s <= D; ++s) A(row, base + s) += f * c(cp, s);
        }
  const Mat null = null_space(A);
  MRep rep;
  rep.dimension = D;
  rep.nu = {n1, n2};
  const int r = (n1 + 1) * (n2 + 1);
  rep.coefficients.assign(D + 1, Mat::Zero(r, null.cols()));
  for (int col = 0; col < null.cols(); ++col)
    for (int j = 0; j < r; ++j)
      for (int s = 0; s <= D; ++s) rep.coefficients[s](j, col) = null(j * (D + 1) + s, col);
  return rep;
}

// Sample parameters on a deterministic grid strictly inside the domain.
std::vector<std::array<double, 2>> parameter_samples(int parametric, int count) {
  std::vector<std::array<double, 2>> out;
  if (parametric == 1) {
    for (int i = 0; i < count; ++i) out.push_back({(i + 0.5) / count, 0.0});
  } else {
    const int side = std::max(2, static_cast<int>(std::ceil(std::sqrt(count))));
    for (int i = 0; i < side && static_cast<int>(out.size()) < count; ++i)
      for (int j = 0; j < side && static_cast<int>(out.size()) < count; ++j)
        out.push_back({(i + 0.5) / side, (j + 0.5) / side});
  }
  return out;
}

Vec singular_values_at(const MRep& rep, std::span<const double> x) {
  Eigen::JacobiSVD<Mat> svd(rep.at(x));
  return svd.singularValues();
}

// M(x) must have full row rank away from the patch.
bool full_rank_off_patch(const MRep& rep, const BezierPatch& p) {
  const Vec lo = p.points.colwise().minCoeff().transpose();
  const Vec hi = p.points.colwise().maxCoeff().transpose();
  const double diag = std::max((hi - lo).norm(), 1e-12);
  const int D = p.embedding;
  int good = 0, total = 0;
  for (int t = 0; t < 7; ++t) {
    Vec x(D);
    for (int k = 0; k < D; ++k) x(k) = lo(k) - 0.37 * diag + (0.31 + 0.17 * t + 0.11 * k) * 1.7 * diag;
    Vec s = singular_values_at(rep, std::span<const double>(x.data(), D));
    ++total;
    if (s(s.size() - 1) > 1e-6 * s(0)) ++good;
  }
  return good * 2 > total;
}

// ---- jets with third derivatives, for the hull fold ----

struct Jet3 {
  double v = 0.0;
  Vec g;
  Mat h;
  std::vector<Mat> t;  // t[j](k,l)
};

Jet3 linear_jet(const Vec& n, double value) {
  const int D = static_cast<int>(n.size());
  return {value, n, Mat::Zero(D, D), std::vector<Mat>(D, Mat::Zero(D, D))};
}

Jet3 rconj3(const Jet3& f, const Jet3& g) {
  const int D = static_cast<int>(f.g.size());
  const double S = std::hypot(f.v, g.v);
  Jet3 w;
  w.v = f.v + g.v - S;
  w.g = f.g + g.g;
  w.h = f.h + g.h;
  w.t.resize(D);
  for (int j = 0; j < D; ++j) w.t[j] = f.t[j] + g.t[j];
  if (S == 0.0) return w;
  const Vec Sg = (f.v * f.g + g.v * g.g) / S;
  const Mat Q = f.g * f.g.transpose() + f.v * f.h + g.g * g.g.transpose() + g.v * g.h;
  const Mat Sh = (Q - Sg * Sg.transpose()) / S;
  w.g -= Sg;
  w.h -= Sh;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k) {
        double q = f.h(i, k) * f.g(j) + f.g(i) * f.h(j, k) + f.g(k) * f.h(i, j) + f.v * f.t[i](j, k) +
                   g.h(i, k) * g.g(j) + g.g(i) * g.h(j, k) + g.g(k) * g.h(i, j) + g.v * g.t[i](j, k);
        q -= Sh(i, k) * Sg(j) + Sg(i) * Sh(j, k) + Sg(k) * Sh(i, j);
        w.t[i](j, k) -= q / S;
      }
  return w;
}

Mat sym(const Mat& A) { return 0.5 * (A + A.transpose()); }

}  // namespace

// ---------------------------------------------------------------- patches

int BezierPatch::control_count() const {
  return parametric == 1 ? degree[0] + 1 : (degree[0] + 1) * (degree[1] + 1);
}

void validate_patch(const BezierPatch& p) {
  if (p.embedding != 2 && p.embedding != 3) throw InputError("patch: embedding dimension must be 2 or 3");
  if (p.parametric != 1 && p.parametric != 2) throw InputError("patch: parametric dimension must be 1 or 2");
  if (p.parametric == 2 && p.embedding != 3) throw InputError("patch: surfaces need a 3D embedding");
  if (p.degree[0] < 1 || (p.parametric == 2 && p.degree[1] < 1))
    throw InputError("patch: degrees must be at least 1");
  if (p.points.rows() != p.control_count())
    throw InputError("patch: expected " + std::to_string(p.control_count()) + " control points, got " +
                     std::to_string(p.points.rows()));
  if (p.points.cols() != p.embedding) throw InputError("patch: control point dimension mismatch");
  if (p.weights.size() != p.points.rows()) throw InputError("patch: weight count mismatch");
  if ((p.weights.array() <= 0.0).any()) throw InputError("patch: weights must be positive");
  const bool curve2 = p.parametric == 1 && p.embedding == 2 && p.degree[0] <= 4;
  const bool curve3 = p.parametric == 1 && p.embedding == 3 && p.degree[0] <= 3;
  const bool surface = p.parametric == 2 && p.degree[0] <= 2 && p.degree[1] <= 2;
  if (!(curve2 || curve3 || surface)) throw UnsupportedError("patch: degree outside the supported table");
}

Vec patch_point(const BezierPatch& p, std::span<const double> u) {
  const Mat c = homogeneous(p);
  Vec h = Vec::Zero(p.embedding + 1);
  if (p.parametric == 1) {
    const Vec b = bernstein(p.degree[0], u[0]);
    h = c.transpose() * b;
  } else {
    const Vec b1 = bernstein(p.degree[0], u[0]);
    const Vec b2 = bernstein(p.degree[1], u[1]);
    for (int i = 0; i <= p.degree[0]; ++i)
      for (int j = 0; j <= p.degree[1]; ++j) h += b1(i) * b2(j) * c.row(i * (p.degree[1] + 1) + j).transpose();
  }
  return h.head(p.embedding) / h(p.embedding);
}

std::pair<BezierPatch, BezierPatch> split_curve(const BezierPatch& curve, double t) {
  const int n = curve.degree[0];
  std::vector<Vec> level;
  for (int i = 0; i <= n; ++i) level.push_back(homogeneous(curve).row(i).transpose());
  std::vector<Vec> left, right(n + 1);
  left.push_back(level.front());
  right[n] = level.back();
  for (int r = 1; r <= n; ++r) {
    for (int i = 0; i + r <= n; ++i) level[i] = (1.0 - t) * level[i] + t * level[i + 1];
    left.push_back(level.front());
    right[n - r] = level[n - r];
  }
  auto build = [&](const std::vector<Vec>& h) {
    BezierPatch out = curve;
    for (int i = 0; i <= n; ++i) {
      const double w = h[i](curve.embedding);
      out.weights(i) = w;
      out.points.row(i) = h[i].head(curve.embedding).transpose() / w;
    }
    return out;
  };
  return {build(left), build(right)};
}

Mat MRep::at(std::span<const double> x) const {
  Mat m = coefficients[dimension];
  for (int k = 0; k < dimension; ++k) m += x[k] * coefficients[k];
  return m;
}

bool rank_drops_on_patch(const MRep& rep, const BezierPatch& patch, int samples) {
  for (const auto& u : parameter_samples(patch.parametric, samples)) {
    const Vec x = patch_point(patch, u);
    const Vec s = singular_values_at(rep, std::span<const double>(x.data(), x.size()));
    if (s(s.size() - 1) > kRankDrop * std::max(s(0), 1e-300)) return false;
  }
  return true;
}

MRep implicitize_patch(const BezierPatch& p) {
  validate_patch(p);
  const int D = p.embedding;
  const double diag = bbox_diagonal(p.points);
  const Spread spread = point_spread(p.points);
  const double flat = 1e-10 * std::max(diag, 1e-300);
  const Vec center = p.points.colwise().mean().transpose();
  // straight curves and flat surfaces: the supporting affine subspace
  const int intrinsic = p.parametric;
  bool degenerate = true;
  for (int k = intrinsic; k < D; ++k) degenerate = degenerate && spread.thickness(k) <= flat;
  if (degenerate && spread.thickness(0) > flat) {
    const Mat normals = spread.directions.rightCols(D - intrinsic);
    const Vec offsets = -(normals.transpose() * center);
    return flat_rep(normals, offsets);
  }
  std::vector<std::array<int, 2>> candidates;
  if (p.parametric == 1) {
    for (int extra = 0; extra <= 3; ++extra) candidates.push_back({p.degree[0] - 1 + extra, 0});
  } else {
    const int m = p.degree[0], n = p.degree[1];
    const std::array<int, 2> base{std::max(2 * m - 1, 0), std::max(n - 1, 0)};
    for (int total = 0; total <= 4; ++total)
      for (int a = total; a >= 0; --a) candidates.push_back({base[0] + a, base[1] + total - a});
  }
  for (const auto& nu : candidates) {
    MRep rep = moving_hyperplane_rep(p, nu);
    if (rep.cols() < rep.rows()) continue;
    if (!rank_drops_on_patch(rep, p)) continue;
    if (!full_rank_off_patch(rep, p)) continue;
    return rep;
  }
  throw NumericalError("implicitization: no moving-hyperplane degree passes the rank-drop check");
}

std::vector<BezierPatch> split_autointersections(const BezierPatch& curve) {
  if (curve.parametric != 1 || curve.embedding != 2 || curve.degree[0] < 3) return {curve};
  const MRep rep = implicitize_patch(curve);
  if (rep.rows() != rep.cols() || rep.rows() < 2) return {curve};
  // |grad det M|^2 along the curve
  auto q = [&](double u) {
    const double uu[1] = {u};
    const Vec x = patch_point(curve, uu);
    Eigen::JacobiSVD<Mat> svd(rep.at(std::span<const double>(x.data(), 2)), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    Vec a(s.size());
    for (int i = 0; i < s.size(); ++i) {
      a(i) = 1.0;
      for (int j = 0; j < s.size(); ++j)
        if (j != i) a(i) *= s(j);
    }
    const Mat adj = svd.matrixV() * a.asDiagonal() * svd.matrixU().transpose();
    double out = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double d = (adj * rep.coefficients[k]).trace();
      out += d * d;
    }
    return out;
  };
  constexpr int samples = 400;
  constexpr double margin = 0.01;
  std::vector<double> u(samples + 1), v(samples + 1);
  double vmax = 0.0;
  for (int i = 0; i <= samples; ++i) {
    u[i] = margin + (1.0 - 2 * margin) * i / samples;
    v[i] = q(u[i]);
    vmax = std::max(vmax, v[i]);
  }
  auto slope = [&](double t) {
    const double h = 1e-7;
    return q(t + h) - q(t - h);
  };
  for (int i = 1; i < samples; ++i) {
    if (!(v[i] <= v[i - 1] && v[i] <= v[i + 1])) continue;
    double a = u[i - 1], b = u[i + 1];
    if (slope(a) > 0 || slope(b) < 0) continue;
    for (int it = 0; it < 80 && b - a > 1e-14; ++it) {
      const double m = 0.5 * (a + b);
      (slope(m) < 0 ? a : b) = m;
    }
    const double t = 0.5 * (a + b);
    if (t < margin || t > 1.0 - margin) continue;
    if (q(t) > 1e-12 * vmax) continue;
    auto [left, right] = split_curve(curve, t);
    std::vector<BezierPatch> out = split_autointersections(left);
    for (auto& piece : split_autointersections(right)) out.push_back(std::move(piece));
    return out;
  }
  return {curve};
}

// ---------------------------------------------------------------- layers

ImplicitDerivatives determinant_layer(const MRep& rep, std::span<const double> x, int order) {
  const int D = rep.dimension;
  const Mat M = rep.at(x);
  const int r = static_cast<int>(M.rows());
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  const Mat& U = svd.matrixU();
  ImplicitDerivatives out;
  out.value = 1.0;
  Vec a(r);
  for (int i = 0; i < r; ++i) {
    out.value *= s(i) * s(i);
    a(i) = 1.0;
    for (int j = 0; j < r; ++j)
      if (j != i) a(i) *= s(j) * s(j);
  }
  if (order < 1) return out;
  const Mat A = U * a.asDiagonal() * U.transpose();
  std::vector<Mat> dN(D);
  for (int k = 0; k < D; ++k) {
    const Mat t = rep.coefficients[k] * M.transpose();
    dN[k] = t + t.transpose();
  }
  auto ddN = [&](int k, int l) {
    const Mat t = rep.coefficients[k] * rep.coefficients[l].transpose();
    return Mat(t + t.transpose());
  };
  out.gradient.resize(D);
  for (int k = 0; k < D; ++k) out.gradient(k) = (A * dN[k]).trace();
  if (order < 2) return out;
  const double g = out.value;
  std::vector<Mat> B(D);
  for (int k = 0; k < D; ++k) B[k] = out.gradient(k) * A - A * dN[k] * A;
  out.scaled_hessian.resize(D, D);
  for (int j = 0; j < D; ++j)
    for (int k = 0; k < D; ++k) out.scaled_hessian(j, k) = (B[k] * dN[j]).trace() + g * (A * ddN(j, k)).trace();
  out.scaled_hessian = sym(out.scaled_hessian);
  if (order < 3) return out;
  out.scaled_third.assign(D, Mat::Zero(D, D));
  for (int k = 0; k < D; ++k)
    for (int l = 0; l < D; ++l) {
      const Mat C = out.scaled_hessian(k, l) * A + out.gradient(l) * B[k] - out.gradient(k) * B[l] -
                    B[k] * dN[l] * A - A * dN[l] * B[k] - g * A * ddN(k, l) * A;
      for (int j = 0; j < D; ++j)
        out.scaled_third[j](k, l) =
            (C * dN[j]).trace() + g * (B[k] * ddN(j, l)).trace() + g * (B[l] * ddN(j, k)).trace();
    }
  // symmetrize over all index permutations
  std::vector<Mat> t = out.scaled_third;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k)
        out.scaled_third[i](j, k) =
            (t[i](j, k) + t[i](k, j) + t[j](i, k) + t[j](k, i) + t[k](i, j) + t[k](j, i)) / 6.0;
  return out;
}

ScaledJet normalize(const ImplicitDerivatives& in) {
  const double g = in.gradient.norm();
  if (!(g > kDegenerate)) throw NumericalError("normalize: vanishing gradient");
  const int D = static_cast<int>(in.gradient.size());
  ScaledJet out;
  out.value = in.value / g;
  if (in.scaled_hessian.size() == 0) {
    out.gradient = in.gradient / g;
    return out;
  }
  const Vec& a = in.gradient;
  const Mat& S2 = in.scaled_hessian;
  const double g2 = g * g;
  const Vec K1 = S2 * a / g2;  // gamma_hat * grad |grad gamma|
  out.gradient = (a - K1) / g;
  if (in.scaled_third.empty()) return out;
  Mat S3a = Mat::Zero(D, D);
  for (int j = 0; j < D; ++j) S3a += a(j) * in.scaled_third[j];
  const Mat K2 = (S3a / g2 + S2 * S2 / g2 - K1 * K1.transpose()) / g;  // gamma_hat^2 * Hess |grad gamma|
  const Mat cross = out.gradient * K1.transpose() + K1 * out.gradient.transpose();
  out.scaled_hessian = sym((S2 / g - K2 - cross) / g);
  return out;
}

Jet normalize_plain(double value, const Vec& a, const Mat& H, std::span<const Mat> third) {
  const double g = a.norm();
  if (!(g > kDegenerate)) throw NumericalError("normalize: vanishing gradient");
  const int D = static_cast<int>(a.size());
  Jet out;
  out.value = value / g;
  const Vec dg = H * a / g;
  out.gradient = (a - out.value * dg) / g;
  Mat Ta = Mat::Zero(D, D);
  for (int j = 0; j < D; ++j) Ta += a(j) * third[j];
  const Mat d2g = (Ta + H * H - dg * dg.transpose()) / g;
  out.hessian = sym(H / g - (a * dg.transpose() + dg * a.transpose()) / (g * g) - value * d2g / (g * g) +
                    2.0 * value * dg * dg.transpose() / (g * g * g));
  return out;
}

ScaledJet trim(const Jet& f, const ScaledJet& h) {
  const int D = static_cast<int>(h.gradient.size());
  ScaledJet out;
  out.gradient = Vec::Zero(D);
  out.scaled_hessian = Mat::Zero(D, D);
  const double hv = h.value;
  const double h2 = hv * hv, h3 = h2 * hv, h4 = h2 * h2;
  double g = 0.0;
  Vec dg = Vec::Zero(D);
  Mat d2g = Mat::Zero(D, D);
  if (f.value == kInf) {
    // deep inside a flat hull: g vanishes with all derivatives
  } else {
    const double R = std::sqrt(h4 + f.value * f.value);
    if (R == 0.0) {
      out.gradient = h.gradient;
      return out;
    }
    const double rmf = f.value > 0 ? h4 / (R + f.value) : R - f.value;  // R - f
    g = 0.5 * rmf;
    const Vec a = 2.0 * h3 * h.gradient;
    dg = 0.5 * (a - rmf * f.gradient) / R;
    const Mat outer = (h4 * f.gradient * f.gradient.transpose() -
                       f.value * (a * f.gradient.transpose() + f.gradient * a.transpose()) - a * a.transpose()) /
                      (R * R);
    const Mat hh = h.gradient * h.gradient.transpose();
    d2g = 0.5 * (2.0 * h2 * (h.scaled_hessian + 3.0 * hh) + outer - rmf * f.hessian) / R;
  }
  const double s = std::hypot(hv, g);
  out.value = s;
  if (s == 0.0) {
    out.gradient = h.gradient;
    return out;
  }
  out.gradient = (hv * h.gradient + g * dg) / s;
  out.scaled_hessian = sym(h.gradient * h.gradient.transpose() + h.scaled_hessian + dg * dg.transpose() +
                           g * d2g - out.gradient * out.gradient.transpose());
  return out;
}

Jet r_conjunction(const Jet& f, const Jet& g) {
  const double S = std::hypot(f.value, g.value);
  Jet w;
  w.value = f.value + g.value - S;
  w.gradient = f.gradient + g.gradient;
  w.hessian = f.hessian + g.hessian;
  if (S == 0.0) return w;
  const Vec dS = (f.value * f.gradient + g.value * g.gradient) / S;
  const Mat d2S = (f.gradient * f.gradient.transpose() + f.value * f.hessian + g.gradient * g.gradient.transpose() +
                   g.value * g.hessian - dS * dS.transpose()) /
                  S;
  w.gradient -= dS;
  w.hessian -= d2S;
  return w;
}

ScaledJet r_conjunction(const ScaledJet& f, const ScaledJet& g) {
  const double S = std::hypot(f.value, g.value);
  ScaledJet w;
  w.gradient = f.gradient + g.gradient;
  const int D = static_cast<int>(w.gradient.size());
  w.scaled_hessian = Mat::Zero(D, D);
  if (S == 0.0) return w;
  const double den = f.value + g.value + S;
  w.value = den > 0.0 ? 2.0 * f.value * g.value / den : f.value + g.value - S;
  const Vec dS = (f.value * f.gradient + g.value * g.gradient) / S;
  w.gradient -= dS;
  if (f.scaled_hessian.size() == 0 || g.scaled_hessian.size() == 0) return w;
  const Mat SdS = f.gradient * f.gradient.transpose() + f.scaled_hessian + g.gradient * g.gradient.transpose() +
                  g.scaled_hessian - dS * dS.transpose();
  if (den > 0.0) {
    w.scaled_hessian = sym(2.0 * g.value / den * f.scaled_hessian + 2.0 * f.value / den * g.scaled_hessian -
                           2.0 * f.value * g.value / (S * den) * SdS);
  } else {
    // operands of mixed sign: plain form
    const Mat Hf = f.value != 0.0 ? Mat(f.scaled_hessian / f.value) : Mat::Zero(D, D);
    const Mat Hg = g.value != 0.0 ? Mat(g.scaled_hessian / g.value) : Mat::Zero(D, D);
    w.scaled_hessian = sym(w.value * (Hf + Hg - SdS / S));
  }
  return w;
}

// ---------------------------------------------------------------- hull

ConvexHull convex_hull_rep(const BezierPatch& patch) {
  const int D = patch.embedding;
  Mat pts = patch.points;
  const double width = 1e-2 * bbox_diagonal(pts);
  if (!(width > 0.0)) throw NumericalError("convex hull: control points coincide");
  const Spread spread = point_spread(pts);
  for (int k = 0; k < D; ++k) {
    if (spread.thickness(k) >= width) continue;
    const Vec dir = spread.directions.col(k);
    Mat ext(2 * pts.rows(), D);
    ext.topRows(pts.rows()) = pts.rowwise() + width * dir.transpose();
    ext.bottomRows(pts.rows()) = pts.rowwise() - width * dir.transpose();
    pts = ext;
  }
  ConvexHull hull;
  hull.vertices = pts;
  const double tol = 1e-10 * bbox_diagonal(pts);
  const int n = static_cast<int>(pts.rows());
  if (D == 2) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return pts(a, 0) < pts(b, 0) || (pts(a, 0) == pts(b, 0) && pts(a, 1) < pts(b, 1));
    });
    auto cross = [&](int o, int a, int b) {
      return (pts(a, 0) - pts(o, 0)) * (pts(b, 1) - pts(o, 1)) - (pts(a, 1) - pts(o, 1)) * (pts(b, 0) - pts(o, 0));
    };
    std::vector<int> chain;
    for (int pass = 0; pass < 2; ++pass) {
      const std::size_t start = chain.size();
      for (int idx = 0; idx < n; ++idx) {
        const int i = pass == 0 ? order[idx] : order[n - 1 - idx];
        while (chain.size() >= start + 2 && cross(chain[chain.size() - 2], chain.back(), i) <= tol * tol) chain.pop_back();
        chain.push_back(i);
      }
      chain.pop_back();
    }
    for (std::size_t e = 0; e < chain.size(); ++e) {
      const Vec a = pts.row(chain[e]).transpose();
      const Vec b = pts.row(chain[(e + 1) % chain.size()]).transpose();
      const Vec t = (b - a).normalized();
      Hyperplane hp{Vec(2), 0.0};
      hp.normal << -t(1), t(0);
      hp.offset = -hp.normal.dot(a);
      hull.planes.push_back(hp);
    }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          const Eigen::Vector3d a = pts.row(i).transpose(), b = pts.row(j).transpose(), c = pts.row(k).transpose();
          Eigen::Vector3d nrm = (b - a).cross(c - a);
          if (nrm.norm() <= tol * bbox_diagonal(pts)) continue;
          nrm.normalize();
          const Vec side = (pts.rowwise() - a.transpose()) * nrm;
          double sign = 0.0;
          if (side.minCoeff() >= -tol) sign = 1.0;
          else if (side.maxCoeff() <= tol) sign = -1.0;
          else continue;
          Hyperplane hp{Vec(sign * nrm), -sign * nrm.dot(a)};
          bool duplicate = false;
          for (const auto& q : hull.planes)
            duplicate = duplicate || ((q.normal - hp.normal).norm() < 1e-9 && std::abs(q.offset - hp.offset) < tol);
          if (!duplicate) hull.planes.push_back(hp);
        }
  }
  if (static_cast<int>(hull.planes.size()) < D + 1) throw NumericalError("convex hull: construction failed");
  return hull;
}

HullRaw hull_raw(const ConvexHull& hull, std::span<const double> x) {
  const Eigen::Map<const Vec> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Jet3 acc;
  for (std::size_t i = 0; i < hull.planes.size(); ++i) {
    const auto& p = hull.planes[i];
    Jet3 lin = linear_jet(p.normal, p.normal.dot(xv) + p.offset);
    acc = i == 0 ? lin : rconj3(acc, lin);
  }
  return {acc.v, acc.g, acc.h, acc.t};
}

HullValue hull_function(const ConvexHull& hull, std::span<const double> x, int order) {
  (void)order;
  const HullRaw raw = hull_raw(hull, x);
  const int D = static_cast<int>(raw.gradient.size());
  HullValue out;
  if (raw.gradient.norm() <= kDegenerate) {
    out.jet = {raw.value > 0.0 ? kInf : -1.0 / kDegenerate, Vec::Zero(D), Mat::Zero(D, D)};
    out.interior_flat = raw.value > 0.0;
    return out;
  }
  out.jet = normalize_plain(raw.value, raw.gradient, raw.hessian, raw.third);
  return out;
}

// ---------------------------------------------------------------- patch functions

ImplicitPatch prepare_patch(const BezierPatch& patch) {
  ImplicitPatch out;
  out.patch = patch;
  out.rep = implicitize_patch(patch);
  out.hull = convex_hull_rep(patch);
  return out;
}

ScaledJet normalized_patch_function(const ImplicitPatch& patch, std::span<const double> x, int order) {
  const MRep& rep = patch.rep;
  const int D = rep.dimension;
  Eigen::JacobiSVD<Mat> svd(rep.at(x), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const int r = static_cast<int>(s.size());
  const double smax = std::max(s(0), 1e-300);
  if (s(r - 1) <= kDegenerate * smax) {
    ScaledJet out;
    out.gradient = Vec::Zero(D);
    out.scaled_hessian = Mat::Zero(D, D);
    if (D - patch.patch.parametric == 1) {
      int multiplicity = 0;
      for (int i = 0; i < r; ++i)
        if (s(i) <= 1e-6 * smax) ++multiplicity;
      Vec n(D);
      const Vec u = svd.matrixU().col(r - 1), v = svd.matrixV().col(r - 1);
      for (int k = 0; k < D; ++k) n(k) = u.dot(rep.coefficients[k] * v);
      if (n.norm() > 0.0) {
        Eigen::Index big;
        n.cwiseAbs().maxCoeff(&big);
        if (n(big) < 0) n = -n;
        out.gradient = n.normalized() / (2.0 * multiplicity);
      }
    }
    return out;
  }
  const ImplicitDerivatives d = determinant_layer(rep, x, order < 1 ? 1 : 3);
  if (!(d.gradient.norm() > 0.0)) throw NumericalError("normalize: vanishing gradient off the zero set");
  if (order < 1) return {d.value / d.gradient.norm(), Vec::Zero(D), Mat::Zero(D, D)};
  ImplicitDerivatives in = d;
  // the gradient guard of normalize is absolute; rescale gamma so it is not triggered by magnitude alone
  const double scale = 1.0 / d.gradient.norm();
  in.value *= scale;
  in.gradient *= scale;
  in.scaled_hessian *= scale * scale;
  for (auto& t : in.scaled_third) t *= scale * scale * scale;
  return normalize(in);
}

ScaledJet patch_function(const ImplicitPatch& patch, std::span<const double> x, int order) {
  const ScaledJet h = normalized_patch_function(patch, x, order);
  const HullValue f = hull_function(patch.hull, x, order);
  return trim(f.jet, h);
}

// ---------------------------------------------------------------- model

ImplicitModel::ImplicitModel(const ModelSpec& spec) : dimension_(spec.dimension) {
  for (const auto& e : spec.entities) {
    if (index_.count(e.id)) throw InputError("model: duplicate entity id '" + e.id + "'");
    ImplicitEntity entity;
    entity.id = e.id;
    entity.parametric = e.type == "surface" ? 2 : 1;
    for (std::size_t i = 0; i < e.patches.size(); ++i) {
      try {
        for (const auto& piece : split_autointersections(e.patches[i]))
          entity.patches.push_back(prepare_patch(piece));
      } catch (const Error& ex) {
        throw Error(ex.kind(), "entity '" + e.id + "' patch " + std::to_string(i) + ": " + ex.what());
      }
    }
    if (entity.patches.empty()) throw InputError("model: entity '" + e.id + "' has no patches");
    index_[e.id] = static_cast<int>(entities_.size());
    entities_.push_back(std::move(entity));
  }
}

const ImplicitEntity& ImplicitModel::entity(const EntityId& id) const { return entities_[index_of(id)]; }

int ImplicitModel::index_of(const EntityId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("model: unknown entity id '" + id + "'");
  return it->second;
}

std::vector<EntityId> ImplicitModel::ids() const {
  std::vector<EntityId> out;
  for (const auto& e : entities_) out.push_back(e.id);
  return out;
}

ScaledJet ImplicitModel::entity_function(int index, std::span<const double> x, int order) const {
  const auto& e = entities_.at(index);
  ScaledJet acc = patch_function(e.patches.front(), x, order);
  for (std::size_t i = 1; i < e.patches.size(); ++i) acc = r_conjunction(acc, patch_function(e.patches[i], x, order));
  return acc;
}

ScaledJet ImplicitModel::evaluate(std::span<const int> indices, std::span<const double> x, int order) const {
  if (indices.empty()) throw UsageError("model: empty entity set");
  ScaledJet acc = entity_function(indices[0], x, order);
  for (std::size_t i = 1; i < indices.size(); ++i) acc = r_conjunction(acc, entity_function(indices[i], x, order));
  return acc;
}

ScaledJet ImplicitModel::evaluate(std::span<const EntityId> ids, std::span<const double> x, int order) const {
  std::vector<int> idx;
  for (const auto& id : ids) idx.push_back(index_of(id));
  return evaluate(std::span<const int>(idx), x, order);
}

ScaledJet ImplicitModel::evaluate(std::span<const double> x, int order) const {
  std::vector<int> idx(entities_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return evaluate(std::span<const int>(idx), x, order);
}

ImplicitModel implicitize_model(const ModelSpec& spec) { return ImplicitModel(spec); }

ModelSpec model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("entities") || !j.at("entities").is_array())
    throw InputError("model: missing array 'entities'");
  ModelSpec spec;
  int dimension = 0;
  const json& entities = j.at("entities");
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const std::string where = "model.entities[" + std::to_string(e) + "]";
    const json& je = entities[e];
    if (!je.is_object() || !je.contains("id") || !je.at("id").is_string())
      throw InputError(where + ": missing string field 'id'");
    ModelEntitySpec ent;
    ent.id = je.at("id").get<std::string>();
    ent.type = je.value("type", std::string("curve"));
    if (ent.type != "curve" && ent.type != "surface") throw InputError(where + ".type: expected curve or surface");
    if (!je.contains("patches") || !je.at("patches").is_array()) throw InputError(where + ": missing array 'patches'");
    for (std::size_t p = 0; p < je.at("patches").size(); ++p) {
      const std::string pw = where + ".patches[" + std::to_string(p) + "]";
      const json& jp = je.at("patches")[p];
      try {
        BezierPatch patch;
        patch.entity = ent.id;
        patch.parametric = ent.type == "surface" ? 2 : 1;
        const json& deg = jp.at("degree");
        if (deg.is_array()) {
          patch.degree = {deg.at(0).get<int>(), deg.at(1).get<int>()};
        } else {
          patch.degree = {deg.get<int>(), 0};
        }
        const json& pts = jp.at("points");
        if (!pts.is_array() || pts.empty()) throw InputError("expected control points");
        const int D = static_cast<int>(pts.at(0).size());
        patch.embedding = D;
        patch.points.resize(static_cast<Eigen::Index>(pts.size()), D);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (static_cast<int>(pts[i].size()) != D) throw InputError("inconsistent point dimension");
          for (int k = 0; k < D; ++k) patch.points(i, k) = pts[i].at(k).get<double>();
        }
        patch.weights = Vec::Ones(patch.points.rows());
        if (jp.contains("weights")) {
          const auto w = jp.at("weights").get<std::vector<double>>();
          patch.weights = Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
        }
        validate_patch(patch);
        if (dimension != 0 && dimension != D) throw InputError("mixed embedding dimensions");
        dimension = D;
        ent.patches.push_back(std::move(patch));
      } catch (const InputError& ex) {
        throw InputError(pw + ": " + ex.what());
      } catch (const json::exception& ex) {
        throw InputError(pw + ": " + ex.what());
      }
    }
    spec.entities.push_back(std::move(ent));
  }
  if (dimension == 0) throw InputError("model: no patches");
  spec.dimension = dimension;
  if (j.contains("associations")) spec.associations = j.at("associations");
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json entities = json::array();
  for (const auto& e : spec.entities) {
    json patches = json::array();
    for (const auto& p : e.patches) {
      json pts = json::array();
      for (int i = 0; i < p.points.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < p.points.cols(); ++k) row.push_back(p.points(i, k));
        pts.push_back(row);
      }
      json w = json::array();
      for (int i = 0; i < p.weights.size(); ++i) w.push_back(p.weights(i));
      json deg = p.parametric == 2 ? json::array({p.degree[0], p.degree[1]}) : json(p.degree[0]);
      patches.push_back({{"degree", deg}, {"points", pts}, {"weights", w}});
    }
    entities.push_back({{"id", e.id}, {"type", e.type}, {"patches", patches}});
  }
  return {{"entities", entities}, {"associations", spec.associations}};
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  try {
    return model_from_json(parse_json_file(path));
  } catch (const InputError& ex) {
    const std::string msg = ex.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw InputError(path.string() + ": " + msg);
  }
}

ImplicitModel load_model(const std::filesystem::path& path) { return ImplicitModel(load_model_spec(path)); }

void save_model(const ModelSpec& spec, const std::filesystem::path& path) {
  write_text(path, model_to_json(spec).dump(1) + "\n");
}

}  // namespace hoopt
