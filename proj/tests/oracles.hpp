#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the interpolation or projection code under test.

#include "psopt/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using psopt::Matrix;
using psopt::Vector;

/// Dense KKT matrix [[A, X^T], [X, 0]] with A_ij = ((y_i - b).(y_j - b))^2 / 2.
inline Matrix kkt(const std::vector<Vector>& pts, const Vector& base) {
  const auto npt = static_cast<Eigen::Index>(pts.size());
  const auto n = base.size();
  Matrix w = Matrix::Zero(npt + n + 1, npt + n + 1);
  for (Eigen::Index i = 0; i < npt; ++i) {
    const Vector yi = pts[static_cast<std::size_t>(i)] - base;
    for (Eigen::Index j = 0; j < npt; ++j) {
      const double d = yi.dot(pts[static_cast<std::size_t>(j)] - base);
      w(i, j) = 0.5 * d * d;
    }
    w(npt, i) = w(i, npt) = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) w(npt + 1 + k, i) = w(i, npt + 1 + k) = yi[k];
  }
  return w;
}

/// Least-Frobenius-change interpolant: minimize |H_new - H_old|_F over
/// quadratics q with q(y_j) = values_j, solved as one dense equality
/// constrained least squares problem in (c, g, upper triangle of D).
struct DenseQuadratic {
  double c = 0.0;
  Vector g;
  Matrix H;
  double value(const Vector& x, const Vector& base) const {
    const Vector d = x - base;
    return c + g.dot(d) + 0.5 * d.dot(H * d);
  }
};

inline DenseQuadratic least_change(const std::vector<Vector>& pts, const std::vector<double>& values,
                                   const Vector& base, const Matrix& h_old) {
  const auto n = base.size();
  const Eigen::Index nt = n * (n + 1) / 2;
  const Eigen::Index nv = 1 + n + nt;
  const auto m = static_cast<Eigen::Index>(pts.size());
  Matrix M = Matrix::Zero(m, nv);
  Vector rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Vector d = pts[static_cast<std::size_t>(r)] - base;
    M(r, 0) = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) M(r, 1 + k) = d[k];
    Eigen::Index t = 0;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a; b < n; ++b, ++t) M(r, 1 + n + t) = (a == b ? 0.5 : 1.0) * d[a] * d[b];
    rhs[r] = values[static_cast<std::size_t>(r)] - 0.5 * d.dot(h_old * d);
  }
  // Frobenius weights: diagonal entries once, off-diagonal entries twice.
  Matrix P = Matrix::Zero(nv, nv);
  Eigen::Index t = 0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a; b < n; ++b, ++t) P(1 + n + t, 1 + n + t) = a == b ? 1.0 : 2.0;
  Matrix K = Matrix::Zero(nv + m, nv + m);
  K.topLeftCorner(nv, nv) = P;
  K.topRightCorner(nv, m) = M.transpose();
  K.bottomLeftCorner(m, nv) = M;
  Vector b = Vector::Zero(nv + m);
  b.tail(m) = rhs;
  const Vector z = K.fullPivLu().solve(b);
  DenseQuadratic q;
  q.c = z[0];
  q.g = z.segment(1, n);
  Matrix D = Matrix::Zero(n, n);
  t = 0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b2 = a; b2 < n; ++b2, ++t) D(a, b2) = D(b2, a) = z[1 + n + t];
  q.H = h_old + D;
  return q;
}

/// Projection onto a Euclidean ball acting on selected coordinates.
inline Vector radial(const Vector& s, double radius) {
  const double n = s.norm();
  return n > radius ? Vector(s * (radius / n)) : s;
}

/// Minimizer of g.s + s.H.s / 2 for symmetric positive definite H.
inline Vector quadratic_minimizer(const Vector& g, const Matrix& H) { return H.ldlt().solve(-g); }

/// Central finite-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace oracle
