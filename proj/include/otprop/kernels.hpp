#pragma once

// Dense inner loops shared by the Sinkhorn and c-transform code.
//
// Two implementations with identical contracts: the default one splits rows
// across OpenMP threads, `reference` is a plain serial loop kept as the test
// oracle and benchmark baseline. Results agree to rounding.

#include "otprop/common.hpp"

#include <span>

namespace otprop::kernels {

/// out(i, j) = ||a_i - b_j||^2.
void squared_distances(const RowMatrix& a, const RowMatrix& b, RowMatrix& out);

/// out(i, j) = -2 <a_i, b_j>.
void inner_product_cost(const RowMatrix& a, const RowMatrix& b, RowMatrix& out);

/// Soft minimum over each row:
///   out_i = -lambda * log sum_j exp(log_w_j + (pot_j - cost_ij) / lambda)
/// evaluated with the row maximum subtracted. lambda > 0.
void softmin_rows(const RowMatrix& cost, std::span<const double> log_weights,
                  std::span<const double> potential, double lambda, std::span<double> out);

/// out_i = min_j (cost_ij - pot_j).
void hardmin_rows(const RowMatrix& cost, std::span<const double> potential, std::span<double> out);

namespace reference {

void squared_distances(const RowMatrix& a, const RowMatrix& b, RowMatrix& out);
void inner_product_cost(const RowMatrix& a, const RowMatrix& b, RowMatrix& out);
void softmin_rows(const RowMatrix& cost, std::span<const double> log_weights,
                  std::span<const double> potential, double lambda, std::span<double> out);
void hardmin_rows(const RowMatrix& cost, std::span<const double> potential, std::span<double> out);

}  // namespace reference

}  // namespace otprop::kernels
