#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace schauder {

inline constexpr int kMaxDim = 2;

/// Point of R^N, N <= 2, stored inline (no heap traffic in hot loops).
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
/// Small dense N x N matrix with inline storage.
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Value and spatial derivatives (to order 3) of a scalar field at one point.
///
/// `third[i](j, k)` holds D_ijk. Entries above `order` are left at zero.
struct ScalarJet {
  int order = 0;
  double value = 0.0;
  Point grad;
  SmallMatrix hess;
  std::array<SmallMatrix, kMaxDim> third;

  ScalarJet() = default;
  ScalarJet(int dim, int ord) : order(ord) {
    grad = Point::Zero(dim);
    hess = SmallMatrix::Zero(dim, dim);
    for (auto& t : third) t = SmallMatrix::Zero(dim, dim);
  }

  [[nodiscard]] int dim() const { return static_cast<int>(grad.size()); }

  static ScalarJet constant(int dim, int ord, double v) {
    ScalarJet j(dim, ord);
    j.value = v;
    return j;
  }

  ScalarJet& operator+=(const ScalarJet& o) {
    value += o.value;
    grad += o.grad;
    hess += o.hess;
    for (int i = 0; i < dim(); ++i) third[i] += o.third[i];
    return *this;
  }

  ScalarJet& operator*=(double s) {
    value *= s;
    grad *= s;
    hess *= s;
    for (int i = 0; i < dim(); ++i) third[i] *= s;
    return *this;
  }

  /// Adds `w * o`.
  void axpy(double w, const ScalarJet& o) {
    value += w * o.value;
    grad += w * o.grad;
    hess += w * o.hess;
    for (int i = 0; i < dim(); ++i) third[i] += w * o.third[i];
  }

  [[nodiscard]] double d3(int i, int j, int k) const { return third[i](j, k); }
};

inline ScalarJet operator+(ScalarJet a, const ScalarJet& b) { return a += b; }
inline ScalarJet operator*(double s, ScalarJet a) { return a *= s; }

/// Leibniz rule up to third order.
inline ScalarJet operator*(const ScalarJet& f, const ScalarJet& g) {
  const int n = f.dim();
  ScalarJet r(n, std::min(f.order, g.order));
  r.value = f.value * g.value;
  r.grad = f.value * g.grad + g.value * f.grad;
  r.hess = f.value * g.hess + g.value * f.hess + f.grad * g.grad.transpose() + g.grad * f.grad.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        r.third[i](j, k) = f.third[i](j, k) * g.value + f.hess(i, j) * g.grad[k] + f.hess(i, k) * g.grad[j] +
                           f.hess(j, k) * g.grad[i] + f.grad[i] * g.hess(j, k) + f.grad[j] * g.hess(i, k) +
                           f.grad[k] * g.hess(i, j) + f.value * g.third[i](j, k);
  return r;
}

/// Chain rule F(g(x)) given F, F', F'', F''' at g(x).
inline ScalarJet compose(const std::array<double, 4>& outer, const ScalarJet& g) {
  const int n = g.dim();
  ScalarJet r(n, g.order);
  const double f0 = outer[0], f1 = outer[1], f2 = outer[2], f3 = outer[3];
  r.value = f0;
  r.grad = f1 * g.grad;
  r.hess = f1 * g.hess + f2 * g.grad * g.grad.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        r.third[i](j, k) = f1 * g.third[i](j, k) +
                           f2 * (g.hess(i, j) * g.grad[k] + g.hess(i, k) * g.grad[j] + g.hess(j, k) * g.grad[i]) +
                           f3 * g.grad[i] * g.grad[j] * g.grad[k];
  return r;
}

/// Jet of the coordinate function x -> x_j.
inline ScalarJet coordinate_jet(const Point& x, int j, int ord) {
  ScalarJet r(static_cast<int>(x.size()), ord);
  r.value = x[j];
  r.grad[j] = 1.0;
  return r;
}

/// Jet of x -> |x|^2.
inline ScalarJet norm2_jet(const Point& x, int ord) {
  const int n = static_cast<int>(x.size());
  ScalarJet r(n, ord);
  r.value = x.squaredNorm();
  r.grad = 2.0 * x;
  r.hess = 2.0 * SmallMatrix::Identity(n, n);
  return r;
}

/// Jet of x -> (shift + |x|^2)^p for a nonnegative integer p.
inline ScalarJet weight_power_jet(const Point& x, double shift, int p, int ord) {
  const int n = static_cast<int>(x.size());
  if (p == 0) return ScalarJet::constant(n, ord, 1.0);
  const double w = shift + x.squaredNorm();
  auto pw = [&](int e) { return e < 0 ? 0.0 : std::pow(w, e); };
  const double pd = p;
  const std::array<double, 4> outer{pw(p), pd * pw(p - 1), pd * (pd - 1) * pw(p - 2),
                                    pd * (pd - 1) * (pd - 2) * pw(p - 3)};
  ScalarJet inner = norm2_jet(x, ord);
  inner.value = w;
  return compose(outer, inner);
}

/// Jet of a radial profile g(|x|) given g, g', g'', g''' at |x|.
/// Valid for |x| > 0; at the origin the caller must supply a profile that is flat there.
inline ScalarJet radial_jet(const Point& x, const std::array<double, 4>& g, int ord) {
  const int n = static_cast<int>(x.size());
  ScalarJet r(n, ord);
  r.value = g[0];
  const double rho = x.norm();
  if (rho == 0.0) {
    r.hess = g[2] * SmallMatrix::Identity(n, n);
    return r;
  }
  const Point e = x / rho;
  const SmallMatrix proj = SmallMatrix::Identity(n, n) - e * e.transpose();
  r.grad = g[1] * e;
  r.hess = g[2] * e * e.transpose() + (g[1] / rho) * proj;
  const double mixed = g[2] / rho - g[1] / (rho * rho);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        r.third[i](j, k) =
            g[3] * e[i] * e[j] * e[k] + mixed * (proj(i, k) * e[j] + proj(j, k) * e[i] + proj(i, j) * e[k]);
  return r;
}

}  // namespace schauder
