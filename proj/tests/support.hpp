#pragma once

// Test helpers: random instances and brute-force oracles that share no code
// with the library's solvers.

#include "otprop/measures.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace otprop::test {

inline RowMatrix points(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// Uniform points in the closed ball B(0, radius) by rejection.
inline RowMatrix ball_points(std::mt19937_64& gen, int n, int d, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  RowMatrix out(n, d);
  for (int i = 0; i < n; ++i) {
    do {
      for (int c = 0; c < d; ++c) out(i, c) = u(gen);
    } while (out.row(i).norm() > radius);
  }
  return out;
}

inline Vector random_weights(std::mt19937_64& gen, int n, double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = u(gen);
  return w / w.sum();
}

inline DiscreteMeasure uniform_ball_measure(std::mt19937_64& gen, int n, int d, double radius = 1.0) {
  return DiscreteMeasure::uniform(ball_points(gen, n, d, radius));
}

inline RowMatrix squared_cost(const RowMatrix& x, const RowMatrix& y) {
  RowMatrix c(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) c(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  }
  return c;
}

/// Simplex projection by enumerating supports and checking the KKT conditions.
inline Vector project_kkt(const Vector& v) {
  const int k = static_cast<int>(v.size());
  for (int size = 1; size <= k; ++size) {
    std::vector<bool> pick(static_cast<std::size_t>(k), false);
    std::fill(pick.begin(), pick.begin() + size, true);
    do {
      double sum = 0.0;
      for (int i = 0; i < k; ++i) if (pick[static_cast<std::size_t>(i)]) sum += v[i];
      const double tau = (sum - 1.0) / size;
      bool ok = true;
      Vector theta = Vector::Zero(k);
      for (int i = 0; i < k && ok; ++i) {
        if (pick[static_cast<std::size_t>(i)]) {
          theta[i] = v[i] - tau;
          ok = theta[i] > 0.0;
        } else {
          ok = v[i] - tau <= 1e-14;
        }
      }
      if (ok) return theta;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return Vector();
}

/// Entropic OT value in the primal: matrix scaling on the Gibbs kernel
/// (plain, not log-domain), then <P, C> + lambda KL(P | a b^T).
inline double plan_space_entropic(const RowMatrix& cost, const Vector& a, const Vector& b, double lambda,
                                  int iterations = 100000) {
  const RowMatrix kernel = (-cost.array() / lambda).exp().matrix();
  Vector u = Vector::Ones(a.size());
  Vector v = Vector::Ones(b.size());
  for (int t = 0; t < iterations; ++t) {
    const Vector u_next = a.cwiseQuotient(kernel * v);
    const Vector v_next = b.cwiseQuotient(kernel.transpose() * u_next);
    const double change = std::max((u_next - u).cwiseAbs().maxCoeff() / u_next.cwiseAbs().maxCoeff(),
                                   (v_next - v).cwiseAbs().maxCoeff() / v_next.cwiseAbs().maxCoeff());
    u = u_next;
    v = v_next;
    if (change < 1e-16) break;
  }
  double value = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      const double p = u[i] * kernel(i, j) * v[j];
      if (p > 0.0) value += p * cost(i, j) + lambda * p * std::log(p / (a[i] * b[j]));
    }
  }
  return value;
}

/// Minimum cost over the vertices of the transportation polytope, found by
/// solving the marginal equations on every (I + J - 1)-cell support.
inline double vertex_enumeration(const RowMatrix& cost, const Vector& a, const Vector& b) {
  const int I = static_cast<int>(a.size()), J = static_cast<int>(b.size());
  const int cells = I * J, basis = I + J - 1;
  Eigen::MatrixXd constraints = Eigen::MatrixXd::Zero(I + J, cells);
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      constraints(i, i * J + j) = 1.0;
      constraints(I + j, i * J + j) = 1.0;
    }
  }
  Eigen::VectorXd rhs(I + J);
  rhs << a, b;
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(static_cast<std::size_t>(cells), false);
  std::fill(pick.begin(), pick.begin() + basis, true);
  do {
    std::vector<int> idx;
    for (int c = 0; c < cells; ++c) if (pick[static_cast<std::size_t>(c)]) idx.push_back(c);
    Eigen::MatrixXd sub(I + J, basis);
    for (int k = 0; k < basis; ++k) sub.col(k) = constraints.col(idx[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.rank() < basis) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    if ((sub * x - rhs).cwiseAbs().maxCoeff() > 1e-12 || x.minCoeff() < -1e-12) continue;
    double value = 0.0;
    for (int k = 0; k < basis; ++k) value += x[k] * cost(idx[static_cast<std::size_t>(k)] / J, idx[static_cast<std::size_t>(k)] % J);
    best = std::min(best, value);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

/// W_0 between equal-size uniform 1-D samples: pair sorted values.
inline double sorted_pairing(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

/// Grid over the two-simplex {(t, 1 - t)} at the given resolution; returns the minimising t.
inline double grid_argmin_2(const std::function<double(double)>& f, double step = 0.01) {
  double best_t = 0.0, best = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    const double t = i * step;
    const double v = f(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace otprop::test
