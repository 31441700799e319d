#include "otprop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Serial, unoptimised versions of the kernels. Test oracle and benchmark
// baseline only; library code calls the parallel versions.

namespace otprop::kernels::reference {

void squared_distances(const RowMatrix& a, const RowMatrix& b, RowMatrix& out) {
  if (a.cols() != b.cols()) throw InputError("squared_distances: dimension mismatch");
  out.resize(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) out(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
}

void inner_product_cost(const RowMatrix& a, const RowMatrix& b, RowMatrix& out) {
  if (a.cols() != b.cols()) throw InputError("inner_product_cost: dimension mismatch");
  out.resize(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) out(i, j) = -2.0 * a.row(i).dot(b.row(j));
  }
}

void softmin_rows(const RowMatrix& cost, std::span<const double> log_weights,
                  std::span<const double> potential, double lambda, std::span<double> out) {
  if (static_cast<std::size_t>(cost.cols()) != potential.size() ||
      static_cast<std::size_t>(cost.rows()) != out.size() || log_weights.size() != potential.size()) {
    throw InputError("kernels: cost / potential / output size mismatch");
  }
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < potential.size(); ++j) {
      const double z = log_weights[j] + (potential[j] - cost(i, static_cast<Eigen::Index>(j))) / lambda;
      zmax = std::max(zmax, z);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < potential.size(); ++j) {
      const double z = log_weights[j] + (potential[j] - cost(i, static_cast<Eigen::Index>(j))) / lambda;
      s += std::exp(z - zmax);
    }
    out[static_cast<std::size_t>(i)] = -lambda * (zmax + std::log(s));
  }
}

void hardmin_rows(const RowMatrix& cost, std::span<const double> potential, std::span<double> out) {
  if (static_cast<std::size_t>(cost.cols()) != potential.size() ||
      static_cast<std::size_t>(cost.rows()) != out.size()) {
    throw InputError("kernels: cost / potential / output size mismatch");
  }
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < potential.size(); ++j) {
      best = std::min(best, cost(i, static_cast<Eigen::Index>(j)) - potential[j]);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
}

}  // namespace otprop::kernels::reference
