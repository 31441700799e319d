#include "otprop/estimator.hpp"

#include "otprop/exact_ot.hpp"
#include "otprop/kernels.hpp"

#include <cmath>
#include <numeric>

namespace otprop {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::W0: return "W0";
    case LossKind::Wlambda: return "Wlambda";
    case LossKind::Slambda: return "Slambda";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "W0") return LossKind::W0;
  if (text == "Wlambda") return LossKind::Wlambda;
  if (text == "Slambda") return LossKind::Slambda;
  throw InputError("unknown loss '" + text + "' (expected W0, Wlambda or Slambda)");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::ThetaTolerance: return "theta_tolerance";
    case StopReason::NoDescent: return "no_descent";
    case StopReason::MaxIterations: return "max_iterations";
  }
  return "?";
}

void LossSpec::validate() const {
  if (kind != LossKind::W0 && (!(lambda > 0.0) || !std::isfinite(lambda))) {
    throw InputError("loss " + to_string(kind) + " needs lambda > 0");
  }
  if (iteration_budget && *iteration_budget < 1) throw InputError("iteration budget must be >= 1");
  if (!(sinkhorn_tolerance > 0.0)) throw InputError("sinkhorn tolerance must be > 0");
  if (sinkhorn_iteration_cap < 1) throw InputError("sinkhorn iteration cap must be >= 1");
}

void DescentConfig::validate() const {
  if (!(step_size > 0.0)) throw InputError("step size must be > 0");
  if (max_outer_iterations < 1) throw InputError("max outer iterations must be >= 1");
  if (!(theta_tolerance > 0.0)) throw InputError("theta tolerance must be > 0");
  if (!(backtracking > 0.0 && backtracking < 1.0)) throw InputError("backtracking factor must be in (0, 1)");
  if (max_halvings < 0) throw InputError("max halvings must be >= 0");
}

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

Vector gather(const Vector& full, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[static_cast<Eigen::Index>(idx[i])];
  return out;
}

}  // namespace

struct ProportionObjective::State {
  const MixtureModel& model;
  const DiscreteMeasure& target;
  LossSpec spec;
  bool warm_start;

  CostMatrix cross_cost;                  // stacked source atoms x target atoms
  std::optional<CostMatrix> source_self;  // S_lambda only
  std::optional<DualSolution> target_self;
  std::vector<std::size_t> all_target;

  std::optional<Vector> warm_cross;  // last psi on target atoms
  std::optional<Vector> warm_self;   // last symmetric potential on all source atoms

  State(const MixtureModel& m, const DiscreteMeasure& t, LossSpec s, bool warm)
      : model(m),
        target(t),
        spec(std::move(s)),
        warm_start(warm),
        cross_cost(cost_matrix(DiscreteMeasure::uniform(m.stacked_points()), t)),
        all_target(iota_indices(t.size())) {
    spec.validate();
    if (m.dim() != t.dim()) throw InputError("estimator: source and target dimensions differ");
    if (spec.kind == LossKind::Slambda) source_self = self_cost_matrix(m.stacked_points());
  }

  SinkhornConfig sinkhorn_config(const std::optional<Vector>& warm) const {
    SinkhornConfig cfg;
    cfg.lambda = spec.lambda;
    cfg.max_iterations = spec.iteration_budget;
    cfg.tolerance = spec.sinkhorn_tolerance;
    cfg.iteration_cap = spec.sinkhorn_iteration_cap;
    cfg.epsilon_scaling = spec.epsilon_scaling;
    // A scaled solve restarts from the largest cost entry, where a potential
    // from the target lambda is no help.
    if (warm_start && !spec.iteration_budget && !spec.epsilon_scaling && warm) cfg.initial_psi = warm;
    return cfg;
  }

  // Component-wise <phi, mu_k> from a potential on all stacked source atoms.
  Vector component_means(const Vector& phi_full) const {
    Vector g(static_cast<Eigen::Index>(model.num_components()));
    for (std::size_t k = 0; k < model.num_components(); ++k) {
      const auto& comp = model.components()[k];
      g[static_cast<Eigen::Index>(k)] =
          comp.weights().dot(phi_full.segment(static_cast<Eigen::Index>(model.offsets()[k]),
                                              static_cast<Eigen::Index>(comp.size())));
    }
    return g;
  }

  // Potential on all source atoms: solver values on kept atoms, c-transform
  // of the partner potential on dropped ones.
  Vector extend(const Vector& phi_kept, const std::vector<std::size_t>& kept, const std::vector<std::size_t>& dropped,
                const CostMatrix& full_cost, const std::vector<std::size_t>& partner_cols, const Vector& partner_potential,
                const Vector& partner_weights, double lambda) const {
    Vector full(static_cast<Eigen::Index>(model.total_atoms()));
    for (std::size_t i = 0; i < kept.size(); ++i) full[static_cast<Eigen::Index>(kept[i])] = phi_kept[static_cast<Eigen::Index>(i)];
    if (dropped.empty()) return full;
    const CostMatrix rows = full_cost.restricted(dropped, partner_cols);
    Vector ext(static_cast<Eigen::Index>(dropped.size()));
    if (lambda == 0.0) {
      kernels::hardmin_rows(rows.entries(), view(partner_potential), view(ext));
    } else {
      const Vector log_w = partner_weights.array().log().matrix();
      kernels::softmin_rows(rows.entries(), view(log_w), view(partner_potential), lambda, view(ext));
    }
    for (std::size_t i = 0; i < dropped.size(); ++i) full[static_cast<Eigen::Index>(dropped[i])] = ext[static_cast<Eigen::Index>(i)];
    return full;
  }

  LossEvaluation evaluate(const SimplexVector& theta) {
    if (theta.size() != model.num_components()) {
      throw InputError("estimator: theta has " + std::to_string(theta.size()) + " entries, model has " +
                       std::to_string(model.num_components()) + " components");
    }
    const Vector w = model.mixture_weights(theta.values());
    std::vector<std::size_t> kept, dropped;
    for (std::size_t i = 0; i < model.total_atoms(); ++i) {
      (w[static_cast<Eigen::Index>(i)] >= kZeroWeightThreshold ? kept : dropped).push_back(i);
    }
    // Normalised the same way as reweight(), so an unfiltered mu_theta built
    // from the model compares bitwise equal to it.
    const DiscreteMeasure mu_theta(gather_rows(kept), gather(w, kept));
    const Vector& w_kept = mu_theta.weights();
    const bool filtered = !dropped.empty();
    const CostMatrix cross = filtered ? cross_cost.restricted(kept, all_target) : cross_cost;
    const Vector& b = target.weights();

    LossEvaluation out;
    out.zero_entries = (theta.values().array() <= 0.0).any();

    switch (spec.kind) {
      case LossKind::W0: {
        const TransportPlan plan = solve_exact(cross.entries(), w_kept, b);
        out.value = plan.cost;
        const Vector phi = extend(plan.dual_phi, kept, dropped, cross_cost, all_target, plan.dual_psi, b, 0.0);
        out.gradient = component_means(phi);
        break;
      }
      case LossKind::Wlambda: {
        const DualSolution sol = sinkhorn(cross, w_kept, b, sinkhorn_config(warm_cross));
        warm_cross = sol.psi;
        out.value = sol.cost;
        out.sinkhorn_iterations = sol.iterations;
        const Vector phi = extend(sol.phi, kept, dropped, cross_cost, all_target, sol.psi, b, spec.lambda);
        out.gradient = component_means(phi);
        break;
      }
      case LossKind::Slambda: {
        if (!target_self) {
          target_self = sinkhorn_symmetric(self_cost_matrix(target.points()), b, sinkhorn_config(std::nullopt));
          out.sinkhorn_iterations += target_self->iterations;
        }
        const CostMatrix self = filtered ? source_self->restricted(kept, kept) : *source_self;
        std::optional<Vector> warm_kept;
        if (warm_self) warm_kept = gather(*warm_self, kept);
        const DualSolution sym = sinkhorn_symmetric(self, w_kept, sinkhorn_config(warm_kept));
        out.sinkhorn_iterations += sym.iterations;
        if (!warm_self) warm_self = Vector::Zero(static_cast<Eigen::Index>(model.total_atoms()));
        for (std::size_t i = 0; i < kept.size(); ++i) (*warm_self)[static_cast<Eigen::Index>(kept[i])] = sym.psi[static_cast<Eigen::Index>(i)];

        const Vector sym_full = extend(sym.psi, kept, dropped, *source_self, kept, sym.psi, w_kept, spec.lambda);
        if (mu_theta.identical_to(target)) {
          out.value = 0.0;
          out.gradient = Vector::Zero(static_cast<Eigen::Index>(model.num_components()));
          break;
        }
        const DualSolution sol = sinkhorn(cross, w_kept, b, sinkhorn_config(warm_cross));
        warm_cross = sol.psi;
        out.sinkhorn_iterations += sol.iterations;
        out.value = sol.cost - 0.5 * (sym.cost + target_self->cost);
        const Vector phi = extend(sol.phi, kept, dropped, cross_cost, all_target, sol.psi, b, spec.lambda);
        out.gradient = component_means(phi) - component_means(sym_full);
        break;
      }
    }
    if (!std::isfinite(out.value) || !out.gradient.allFinite()) {
      throw NumericError("estimator: non-finite loss or gradient");
    }
    return out;
  }

  RowMatrix gather_rows(const std::vector<std::size_t>& idx) const {
    if (idx.size() == model.total_atoms()) return model.stacked_points();
    RowMatrix out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(model.dim()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = model.stacked_points().row(static_cast<Eigen::Index>(idx[i]));
    return out;
  }
};

ProportionObjective::ProportionObjective(const MixtureModel& model, const DiscreteMeasure& target, LossSpec spec,
                                         bool warm_start)
    : state_(std::make_unique<State>(model, target, std::move(spec), warm_start)) {}
ProportionObjective::~ProportionObjective() = default;
ProportionObjective::ProportionObjective(ProportionObjective&&) noexcept = default;
ProportionObjective& ProportionObjective::operator=(ProportionObjective&&) noexcept = default;

LossEvaluation ProportionObjective::evaluate(const SimplexVector& theta) { return state_->evaluate(theta); }
const LossSpec& ProportionObjective::spec() const { return state_->spec; }
std::size_t ProportionObjective::num_components() const { return state_->model.num_components(); }

double loss(const MixtureModel& model, const SimplexVector& theta, const DiscreteMeasure& target,
            const LossSpec& spec) {
  return ProportionObjective(model, target, spec).evaluate(theta).value;
}

Vector gradient(const MixtureModel& model, const SimplexVector& theta, const DiscreteMeasure& target,
                const LossSpec& spec) {
  return ProportionObjective(model, target, spec).evaluate(theta).gradient;
}

Vector tangent_projection(const Vector& g) { return (g.array() - g.mean()).matrix(); }

EstimateResult estimate(const MixtureModel& model, const DiscreteMeasure& target, const LossSpec& spec,
                        const DescentConfig& cfg) {
  cfg.validate();
  const std::size_t k = model.num_components();
  SimplexVector theta = cfg.seed_theta ? *cfg.seed_theta : SimplexVector::uniform(k);
  if (theta.size() != k) throw InputError("estimate: seed theta has the wrong size");

  ProportionObjective objective(model, target, spec, cfg.warm_start);
  EstimateResult result{theta, {}, {}, false, StopReason::MaxIterations, 0, 0};

  LossEvaluation current = objective.evaluate(theta);
  result.total_sinkhorn_iterations += current.sinkhorn_iterations;
  ++result.loss_evaluations;
  result.loss_trace.push_back(current.value);
  result.gradient_norm_trace.push_back(tangent_projection(current.gradient).norm());

  double step = cfg.step_size;
  for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
    double trial = step;
    std::optional<SimplexVector> accepted;
    LossEvaluation next;
    bool stationary = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, trial *= cfg.backtracking) {
      SimplexVector candidate = project_simplex(theta.values() - trial * current.gradient);
      if ((candidate.values() - theta.values()).norm() <= cfg.theta_tolerance) {
        stationary = true;
        break;
      }
      next = objective.evaluate(candidate);
      result.total_sinkhorn_iterations += next.sinkhorn_iterations;
      ++result.loss_evaluations;
      if (next.value <= current.value) {
        accepted = std::move(candidate);
        break;
      }
    }
    if (stationary) {
      result.converged = true;
      result.stop_reason = StopReason::ThetaTolerance;
      break;
    }
    if (!accepted) {
      result.stop_reason = StopReason::NoDescent;
      break;
    }
    const double moved = (accepted->values() - theta.values()).norm();
    theta = std::move(*accepted);
    current = std::move(next);
    result.loss_trace.push_back(current.value);
    result.gradient_norm_trace.push_back(tangent_projection(current.gradient).norm());
    if (moved <= cfg.theta_tolerance) {
      result.converged = true;
      result.stop_reason = StopReason::ThetaTolerance;
      break;
    }
    step = std::min(cfg.step_size, trial / cfg.backtracking);
  }
  result.theta_hat = theta;
  return result;
}

}  // namespace otprop
