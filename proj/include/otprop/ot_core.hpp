#pragma once

// Entropic optimal transport between discrete measures under the quadratic
// cost: log-domain Sinkhorn, the Sinkhorn divergence, c-transforms and a few
// numerical identities of the regularised problem.

#include "otprop/common.hpp"
#include "otprop/measures.hpp"

#include <optional>

namespace otprop {

/// Dense ground-cost matrix with its largest entry cached.
class CostMatrix {
 public:
  /// Takes ownership of `entries` (I x J). `symmetric` promises entries == entries^T.
  explicit CostMatrix(RowMatrix entries, bool symmetric = false);

  const RowMatrix& entries() const { return entries_; }
  /// J x I view used by the column update; aliases entries() when symmetric.
  const RowMatrix& transposed() const { return symmetric_ ? entries_ : transposed_; }
  double max_entry() const { return max_entry_; }
  bool symmetric() const { return symmetric_; }
  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }

  /// Rows `keep_rows` and columns `keep_cols` of this matrix.
  CostMatrix restricted(const std::vector<std::size_t>& keep_rows,
                        const std::vector<std::size_t>& keep_cols) const;

 private:
  RowMatrix entries_;
  RowMatrix transposed_;
  double max_entry_ = 0.0;
  bool symmetric_ = false;
};

/// Squared Euclidean cost ||x_i - y_j||^2.
CostMatrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b);
/// Self cost of one point set; stored once.
CostMatrix self_cost_matrix(const RowMatrix& points);
/// Inner-product cost s(x, y) = -2 <x, y>.
CostMatrix s_cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b);

inline constexpr double kDefaultSinkhornTolerance = 1e-9;
inline constexpr double kScalingStageTolerance = 1e-3;

struct SinkhornConfig {
  double lambda = 1.0;
  /// Fixed iteration budget; empty means iterate until the marginal residual
  /// drops below `tolerance`.
  std::optional<int> max_iterations;
  double tolerance = kDefaultSinkhornTolerance;
  /// Unbounded mode gives up once the best residual has not improved by
  /// `stall_improvement` for `stall_window` iterations and the second
  /// potential has moved by less than 1e-12 (relative) over that window.
  int stall_window = 100;
  double stall_improvement = 1e-16;
  /// Unbounded mode also stops (unconverged) after this many iterations.
  int iteration_cap = 1000000;
  /// Unbounded mode only: starting second potential instead of zero.
  /// Ignored in bounded mode, whose iterates always start from zero.
  std::optional<Vector> initial_psi;
  /// Unbounded mode only: reach `lambda` through lambda_s = max_entry / 2^s,
  /// each stage warm-started from the previous one and solved to
  /// max(tolerance, kScalingStageTolerance). The fixed point is the same; only
  /// the path to it changes. `iterations` then counts all stages.
  bool epsilon_scaling = false;

  void validate() const;
};

/// Output of a Sinkhorn run.
struct DualSolution {
  Vector phi;
  Vector psi;
  double cost = 0.0;  // <phi, a> + <psi, b>
  int iterations = 0;
  double marginal_residual = 0.0;  // L1 error of the implied plan's marginals
  double lambda = 0.0;
  bool converged = false;  // unbounded mode reached the tolerance
  bool stalled = false;    // unbounded mode stopped on the stall guard
  int residual_increases = 0;
};

/// Alternating log-domain Sinkhorn from psi = 0. Weights must be strictly positive.
DualSolution sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b, const SinkhornConfig& cfg);
DualSolution sinkhorn(const CostMatrix& cost, const Vector& a, const Vector& b, const SinkhornConfig& cfg);

/// W_lambda(a, a) with the averaged fixed-point update
/// psi <- (psi + T_a(psi)) / 2; the first iteration is the plain transform
/// T_a(0). phi and psi in the result are the same potential.
DualSolution sinkhorn_symmetric(const DiscreteMeasure& a, const SinkhornConfig& cfg);
DualSolution sinkhorn_symmetric(const CostMatrix& self_cost, const Vector& a, const SinkhornConfig& cfg);

struct SinkhornDivergence {
  double value = 0.0;
  DualSolution cross;   // W(a, b)
  DualSolution self_a;  // W(a, a)
  DualSolution self_b;  // W(b, b)
};

/// S(a, b) = W(a, b) - (W(a, a) + W(b, b)) / 2. For identical inputs the
/// cross term is the symmetric solve, so the value is exactly zero.
SinkhornDivergence sinkhorn_divergence(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                       const SinkhornConfig& cfg);

/// c-transform of a potential `psi` carried by `b`, evaluated at `query`:
/// soft minimum for lambda > 0, hard minimum for lambda == 0.
Vector c_transform(const Vector& psi, const DiscreteMeasure& b, const RowMatrix& query, double lambda);

/// s-transform of `phi` carried by `a` for the cost -2<x,y>, evaluated at `query`.
Vector s_transform(const Vector& phi, const DiscreteMeasure& a, const RowMatrix& query, double lambda);

/// Semi-dual objective  sum_i a_i psi^{c,lambda}(x_i) + sum_j b_j psi_j.
double semidual_value(const Vector& psi, const DiscreteMeasure& a, const DiscreteMeasure& b, double lambda);

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = W_lambda(a, b); rhs = int|x|^2 da + int|y|^2 db + W^s_lambda(a, b).
IdentityCheck s_cost_identity_check(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                    const SinkhornConfig& cfg);

/// lhs = W_lambda(a, b); rhs = lambda * W_1(T a, T b) with T x = x / sqrt(lambda).
IdentityCheck rescaling_check(const DiscreteMeasure& a, const DiscreteMeasure& b, const SinkhornConfig& cfg);

/// Upper bound on W_lambda - W_0 for measures supported in B(0, R) in R^d:
/// 2 d lambda log(8 e^2 R^2 / (sqrt(d) lambda)).
double regularization_bias_bound(std::size_t d, double lambda, double radius);

/// Error bound after `iterations` Sinkhorn steps: max_entry^2 / (lambda * iterations).
double iteration_error_bound(double max_entry, double lambda, int iterations);

}  // namespace otprop
