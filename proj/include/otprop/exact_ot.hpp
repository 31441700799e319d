#pragma once

// Un-regularised discrete optimal transport (W_0) as a transportation linear
// program, solved with a network simplex on the bipartite source/sink graph.

#include "otprop/common.hpp"
#include "otprop/measures.hpp"
#include "otprop/ot_core.hpp"

namespace otprop {

struct ExactConfig {
  /// Pivot cap; 0 picks a size-dependent default.
  long max_pivots = 0;
  /// Supplies are perturbed by this amount (and the last demand by I times
  /// it) while pivoting, which rules out degenerate pivots. Flows are
  /// recomputed from the unperturbed marginals on the final basis.
  double perturbation = 1e-12;
};

struct TransportPlan {
  RowMatrix plan;   // I x J, row sums a, column sums b
  double cost = 0.0;
  Vector dual_phi;  // source potentials
  Vector dual_psi;  // sink potentials, dual_psi[0] == 0
  long pivots = 0;
};

/// Optimal plan for the squared Euclidean cost. The returned plan is a basic
/// solution with at most I + J - 1 nonzero entries.
TransportPlan solve_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactConfig& cfg = {});
TransportPlan solve_exact(const RowMatrix& cost, const Vector& a, const Vector& b, const ExactConfig& cfg = {});

/// W_0(a, b).
double w0(const DiscreteMeasure& a, const DiscreteMeasure& b);

}  // namespace otprop
