#include "otprop/ot_core.hpp"

#include "otprop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace otprop {

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vector checked_log_weights(const Vector& w, const char* which) {
  Vector out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) {
      throw InputError(std::string("sinkhorn: zero weight at atom ") + std::to_string(i) + " of " + which +
                       " (filter zero-weight atoms first)");
    }
    out[i] = std::log(w[i]);
  }
  return out;
}

void require_finite(const Vector& v, const char* what, int iteration) {
  if (!v.allFinite()) {
    throw NumericError(std::string("sinkhorn: non-finite ") + what + " potential at iteration " +
                       std::to_string(iteration));
  }
}

// L1 deviation of the row marginal of the plan exp((phi_i + psi_j - c_ij)/lambda) a_i b_j
// from a, given next = softmin of psi (the following phi update):
// row_i = a_i exp((phi_i - next_i) / lambda).
double row_residual(const Vector& a, const Vector& phi, const Vector& next, double lambda) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) r += a[i] * std::abs(1.0 - std::exp((phi[i] - next[i]) / lambda));
  return r;
}

// Bookkeeping shared by the alternating and symmetric loops.
//
// The stall guard fires only when the residual has not improved for a whole
// window and the potential has also stopped moving. Separated clusters at
// small lambda produce long stretches where the residual is flat to the last
// bit while the potentials drift steadily; those are progress, not a stall.
class StopRule {
 public:
  explicit StopRule(const SinkhornConfig& cfg) : cfg_(cfg) {}

  // Returns true when iteration `iter` with residual `res` is the last one.
  bool done(int iter, double res, const Vector& potential, DualSolution& out) {
    if (res > previous_ * (1.0 + 1e-10) + 1e-14) ++out.residual_increases;
    previous_ = res;
    out.marginal_residual = res;
    out.iterations = iter;
    if (cfg_.max_iterations) {
      if (iter >= *cfg_.max_iterations) {
        out.converged = res <= cfg_.tolerance;
        return true;
      }
      return false;
    }
    if (res <= cfg_.tolerance) {
      out.converged = true;
      return true;
    }
    if (iter >= cfg_.iteration_cap) return true;
    if (res < best_ - cfg_.stall_improvement) {
      best_ = res;
      mark(iter, potential);
    } else if (iter - last_mark_ >= cfg_.stall_window) {
      const double scale = std::max(1.0, potential.cwiseAbs().maxCoeff());
      if ((potential - snapshot_).cwiseAbs().maxCoeff() <= kStallMovement * scale) {
        out.stalled = true;
        return true;
      }
      mark(iter, potential);
    }
    return false;
  }

 private:
  static constexpr double kStallMovement = 1e-12;

  void mark(int iter, const Vector& potential) {
    last_mark_ = iter;
    snapshot_ = potential;
  }

  const SinkhornConfig& cfg_;
  double previous_ = std::numeric_limits<double>::infinity();
  double best_ = std::numeric_limits<double>::infinity();
  int last_mark_ = 0;
  Vector snapshot_;
};

}  // namespace

CostMatrix::CostMatrix(RowMatrix entries, bool symmetric)
    : entries_(std::move(entries)), symmetric_(symmetric) {
  if (entries_.rows() < 1 || entries_.cols() < 1) throw InputError("CostMatrix: empty");
  if (symmetric_ && entries_.rows() != entries_.cols()) throw InputError("CostMatrix: symmetric but not square");
  if (!symmetric_) transposed_ = entries_.transpose();
  max_entry_ = entries_.maxCoeff();
}

CostMatrix CostMatrix::restricted(const std::vector<std::size_t>& keep_rows,
                                  const std::vector<std::size_t>& keep_cols) const {
  RowMatrix sub(static_cast<Eigen::Index>(keep_rows.size()), static_cast<Eigen::Index>(keep_cols.size()));
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    const double* src = entries_.row(static_cast<Eigen::Index>(keep_rows[r])).data();
    double* dst = sub.row(static_cast<Eigen::Index>(r)).data();
    for (std::size_t c = 0; c < keep_cols.size(); ++c) dst[c] = src[keep_cols[c]];
  }
  return CostMatrix(std::move(sub), symmetric_ && keep_rows == keep_cols);
}

CostMatrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) {
    throw InputError("cost_matrix: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
  RowMatrix c;
  kernels::squared_distances(a.points(), b.points(), c);
  return CostMatrix(std::move(c));
}

CostMatrix self_cost_matrix(const RowMatrix& points) {
  RowMatrix c;
  kernels::squared_distances(points, points, c);
  return CostMatrix(std::move(c), /*symmetric=*/true);
}

CostMatrix s_cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw InputError("s_cost_matrix: dimension mismatch");
  RowMatrix c;
  kernels::inner_product_cost(a.points(), b.points(), c);
  return CostMatrix(std::move(c));
}

void SinkhornConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("sinkhorn: lambda must be > 0");
  if (!(tolerance > 0.0)) throw InputError("sinkhorn: tolerance must be > 0");
  if (max_iterations && *max_iterations < 1) throw InputError("sinkhorn: iteration budget must be >= 1");
  if (stall_window < 1) throw InputError("sinkhorn: stall window must be >= 1");
  if (iteration_cap < 1) throw InputError("sinkhorn: iteration cap must be >= 1");
}

DualSolution sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b, const SinkhornConfig& cfg) {
  return sinkhorn(cost_matrix(a, b), a.weights(), b.weights(), cfg);
}

namespace {

// Unbounded solve at cfg.lambda reached through a halving schedule that
// starts at the largest cost entry. Each stage starts from the previous
// stage's second potential; only the last stage has to meet cfg.tolerance.
template <class Solve>
DualSolution scaled_solve(const SinkhornConfig& cfg, double max_entry, Solve solve) {
  SinkhornConfig stage = cfg;
  stage.epsilon_scaling = false;
  std::vector<double> schedule;
  for (double l = max_entry; l > cfg.lambda; l *= 0.5) schedule.push_back(l);
  schedule.push_back(cfg.lambda);

  DualSolution out;
  int iterations = 0;
  int increases = 0;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const bool last = s + 1 == schedule.size();
    stage.lambda = schedule[s];
    stage.tolerance = last ? cfg.tolerance : std::max(cfg.tolerance, kScalingStageTolerance);
    if (s > 0) stage.initial_psi = out.psi;
    out = solve(stage);
    iterations += out.iterations;
    increases += out.residual_increases;
  }
  out.iterations = iterations;
  out.residual_increases = increases;
  return out;
}

}  // namespace

DualSolution sinkhorn(const CostMatrix& cost, const Vector& a, const Vector& b, const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.rows() != a.size() || cost.cols() != b.size()) throw InputError("sinkhorn: cost / weight size mismatch");
  if (cfg.epsilon_scaling && !cfg.max_iterations) {
    return scaled_solve(cfg, cost.max_entry(), [&](const SinkhornConfig& stage) { return sinkhorn(cost, a, b, stage); });
  }
  const double lambda = cfg.lambda;
  const Vector log_a = checked_log_weights(a, "a");
  const Vector log_b = checked_log_weights(b, "b");

  DualSolution out;
  out.lambda = lambda;
  out.psi = Vector::Zero(b.size());
  if (!cfg.max_iterations && cfg.initial_psi) {
    if (cfg.initial_psi->size() != b.size()) throw InputError("sinkhorn: initial_psi has the wrong size");
    out.psi = *cfg.initial_psi;
  }
  out.phi.resize(a.size());
  Vector next_phi(a.size());

  kernels::softmin_rows(cost.entries(), view(log_b), view(out.psi), lambda, view(out.phi));
  require_finite(out.phi, "phi", 1);

  StopRule stop(cfg);
  for (int iter = 1;; ++iter) {
    kernels::softmin_rows(cost.transposed(), view(log_a), view(out.phi), lambda, view(out.psi));
    require_finite(out.psi, "psi", iter);
    kernels::softmin_rows(cost.entries(), view(log_b), view(out.psi), lambda, view(next_phi));
    require_finite(next_phi, "phi", iter + 1);
    if (stop.done(iter, row_residual(a, out.phi, next_phi, lambda), out.psi, out)) break;
    out.phi.swap(next_phi);
  }
  out.cost = a.dot(out.phi) + b.dot(out.psi);
  return out;
}

DualSolution sinkhorn_symmetric(const DiscreteMeasure& a, const SinkhornConfig& cfg) {
  return sinkhorn_symmetric(self_cost_matrix(a.points()), a.weights(), cfg);
}

DualSolution sinkhorn_symmetric(const CostMatrix& self_cost, const Vector& a, const SinkhornConfig& cfg) {
  cfg.validate();
  if (self_cost.rows() != a.size() || self_cost.cols() != a.size()) {
    throw InputError("sinkhorn_symmetric: cost / weight size mismatch");
  }
  if (cfg.epsilon_scaling && !cfg.max_iterations) {
    return scaled_solve(cfg, self_cost.max_entry(),
                        [&](const SinkhornConfig& stage) { return sinkhorn_symmetric(self_cost, a, stage); });
  }
  const double lambda = cfg.lambda;
  const Vector log_a = checked_log_weights(a, "a");

  DualSolution out;
  out.lambda = lambda;
  Vector transform(a.size());
  int iter = 0;
  if (!cfg.max_iterations && cfg.initial_psi) {
    if (cfg.initial_psi->size() != a.size()) throw InputError("sinkhorn_symmetric: initial_psi has the wrong size");
    out.psi = *cfg.initial_psi;
  } else {
    out.psi = Vector::Zero(a.size());
    kernels::softmin_rows(self_cost.entries(), view(log_a), view(out.psi), lambda, view(transform));
    out.psi = transform;
    iter = 1;
  }
  require_finite(out.psi, "symmetric", iter);

  StopRule stop(cfg);
  for (;; ++iter) {
    kernels::softmin_rows(self_cost.entries(), view(log_a), view(out.psi), lambda, view(transform));
    require_finite(transform, "symmetric", iter + 1);
    if (stop.done(iter, row_residual(a, out.psi, transform, lambda), out.psi, out)) break;
    out.psi = 0.5 * (out.psi + transform);
  }
  out.phi = out.psi;
  out.cost = 2.0 * a.dot(out.psi);
  return out;
}

SinkhornDivergence sinkhorn_divergence(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                       const SinkhornConfig& cfg) {
  SinkhornDivergence out;
  out.self_a = sinkhorn_symmetric(a, cfg);
  if (a.identical_to(b)) {
    out.self_b = out.self_a;
    out.cross = out.self_a;
  } else {
    out.self_b = sinkhorn_symmetric(b, cfg);
    out.cross = sinkhorn(a, b, cfg);
  }
  out.value = out.cross.cost - 0.5 * (out.self_a.cost + out.self_b.cost);
  return out;
}

Vector c_transform(const Vector& psi, const DiscreteMeasure& b, const RowMatrix& query, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("c_transform: lambda must be >= 0");
  if (psi.size() != static_cast<Eigen::Index>(b.size())) throw InputError("c_transform: potential size mismatch");
  if (query.cols() != static_cast<Eigen::Index>(b.dim())) throw InputError("c_transform: dimension mismatch");
  if (!psi.allFinite() || !query.allFinite()) throw InputError("c_transform: non-finite input");
  RowMatrix c;
  kernels::squared_distances(query, b.points(), c);
  Vector out(query.rows());
  if (lambda == 0.0) {
    kernels::hardmin_rows(c, view(psi), view(out));
  } else {
    const Vector log_b = b.weights().array().log().matrix();
    kernels::softmin_rows(c, view(log_b), view(psi), lambda, view(out));
  }
  return out;
}

Vector s_transform(const Vector& phi, const DiscreteMeasure& a, const RowMatrix& query, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("s_transform: lambda must be >= 0");
  if (phi.size() != static_cast<Eigen::Index>(a.size())) throw InputError("s_transform: potential size mismatch");
  if (query.cols() != static_cast<Eigen::Index>(a.dim())) throw InputError("s_transform: dimension mismatch");
  RowMatrix c;
  kernels::inner_product_cost(query, a.points(), c);
  Vector out(query.rows());
  if (lambda == 0.0) {
    kernels::hardmin_rows(c, view(phi), view(out));
  } else {
    const Vector log_a = a.weights().array().log().matrix();
    kernels::softmin_rows(c, view(log_a), view(phi), lambda, view(out));
  }
  return out;
}

double semidual_value(const Vector& psi, const DiscreteMeasure& a, const DiscreteMeasure& b, double lambda) {
  if (!(lambda > 0.0)) throw InputError("semidual_value: lambda must be > 0");
  return a.weights().dot(c_transform(psi, b, a.points(), lambda)) + b.weights().dot(psi);
}

namespace {

SinkhornConfig converged_config(const SinkhornConfig& cfg) {
  SinkhornConfig out = cfg;
  out.max_iterations.reset();
  out.initial_psi.reset();
  return out;
}

double second_moment(const DiscreteMeasure& m) {
  return m.weights().dot(m.points().rowwise().squaredNorm());
}

}  // namespace

IdentityCheck s_cost_identity_check(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                    const SinkhornConfig& cfg) {
  const SinkhornConfig conv = converged_config(cfg);
  IdentityCheck out;
  out.lhs = sinkhorn(a, b, conv).cost;
  out.rhs = second_moment(a) + second_moment(b) + sinkhorn(s_cost_matrix(a, b), a.weights(), b.weights(), conv).cost;
  return out;
}

IdentityCheck rescaling_check(const DiscreteMeasure& a, const DiscreteMeasure& b, const SinkhornConfig& cfg) {
  SinkhornConfig conv = converged_config(cfg);
  IdentityCheck out;
  out.lhs = sinkhorn(a, b, conv).cost;
  const double lambda = conv.lambda;
  const double scale = 1.0 / std::sqrt(lambda);
  conv.lambda = 1.0;
  out.rhs = lambda * sinkhorn(a.scaled(scale), b.scaled(scale), conv).cost;
  return out;
}

double regularization_bias_bound(std::size_t d, double lambda, double radius) {
  const double dd = static_cast<double>(d);
  return 2.0 * dd * lambda * std::log(8.0 * std::exp(2.0) * radius * radius / (std::sqrt(dd) * lambda));
}

double iteration_error_bound(double max_entry, double lambda, int iterations) {
  if (!(lambda > 0.0) || iterations < 1) throw InputError("iteration_error_bound: need lambda > 0, iterations >= 1");
  return max_entry * max_entry / (lambda * static_cast<double>(iterations));
}

}  // namespace otprop
