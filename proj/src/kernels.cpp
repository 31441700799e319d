#include "otprop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace otprop::kernels {

namespace {

void check_shapes(const RowMatrix& cost, std::size_t potential_size, std::size_t out_size) {
  if (static_cast<std::size_t>(cost.cols()) != potential_size ||
      static_cast<std::size_t>(cost.rows()) != out_size) {
    throw InputError("kernels: cost / potential / output size mismatch");
  }
}

constexpr double kFloor = -700.0;

// Below this many cost entries a parallel region costs more than the loop.
constexpr Eigen::Index kParallelWork = 1 << 14;

}  // namespace

void squared_distances(const RowMatrix& a, const RowMatrix& b, RowMatrix& out) {
  if (a.cols() != b.cols()) throw InputError("squared_distances: dimension mismatch");
  const Eigen::Index rows = a.rows(), cols = b.rows(), d = a.cols();
  out.resize(rows, cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* x = a.row(i).data();
    double* dst = out.row(i).data();
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double* y = b.row(j).data();
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        s += diff * diff;
      }
      dst[j] = s;
    }
  }
}

void inner_product_cost(const RowMatrix& a, const RowMatrix& b, RowMatrix& out) {
  if (a.cols() != b.cols()) throw InputError("inner_product_cost: dimension mismatch");
  const Eigen::Index rows = a.rows(), cols = b.rows(), d = a.cols();
  out.resize(rows, cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* x = a.row(i).data();
    double* dst = out.row(i).data();
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double* y = b.row(j).data();
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) s += x[k] * y[k];
      dst[j] = -2.0 * s;
    }
  }
}

void softmin_rows(const RowMatrix& cost, std::span<const double> log_weights,
                  std::span<const double> potential, double lambda, std::span<double> out) {
  check_shapes(cost, potential.size(), out.size());
  if (log_weights.size() != potential.size()) throw InputError("softmin_rows: weight size mismatch");
  const Eigen::Index rows = cost.rows(), cols = cost.cols();
  const double inv_lambda = 1.0 / lambda;

  // z_ij = shift_j - c_ij / lambda with shift_j = log w_j + pot_j / lambda.
  thread_local std::vector<double> shift;
  shift.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index j = 0; j < cols; ++j) {
    shift[static_cast<std::size_t>(j)] = log_weights[static_cast<std::size_t>(j)] +
                                         potential[static_cast<std::size_t>(j)] * inv_lambda;
  }

  const Eigen::Map<const Eigen::ArrayXd> shift_view(shift.data(), cols);

#pragma omp parallel if (rows * cols >= kParallelWork)
  {
    thread_local Eigen::ArrayXd z;
    z.resize(cols);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < rows; ++i) {
      z = shift_view - Eigen::Map<const Eigen::ArrayXd>(cost.row(i).data(), cols) * inv_lambda;
      const double zmax = z.maxCoeff();
      // Terms below exp(kFloor) cannot change a sum that is already >= 1;
      // clamping keeps the vectorised exp off its underflow path.
      const double s = (z - zmax).max(kFloor).exp().sum();
      out[static_cast<std::size_t>(i)] = -lambda * (zmax + std::log(s));
    }
  }
}

void hardmin_rows(const RowMatrix& cost, std::span<const double> potential, std::span<double> out) {
  check_shapes(cost, potential.size(), out.size());
  const Eigen::Index rows = cost.rows(), cols = cost.cols();
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* c = cost.row(i).data();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cols; ++j) best = std::min(best, c[j] - potential[static_cast<std::size_t>(j)]);
    out[static_cast<std::size_t>(i)] = best;
  }
}

}  // namespace otprop::kernels
