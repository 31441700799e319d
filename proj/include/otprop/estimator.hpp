#pragma once

// Class-proportion estimation: projected gradient descent over the simplex
// on theta -> L(mu_theta, nu) for an OT loss L.

#include "otprop/common.hpp"
#include "otprop/measures.hpp"
#include "otprop/ot_core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace otprop {

enum class LossKind { W0, Wlambda, Slambda };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct LossSpec {
  LossKind kind = LossKind::W0;
  double lambda = 0.0;                  // ignored for W0
  std::optional<int> iteration_budget;  // empty: Sinkhorn runs to tolerance
  double sinkhorn_tolerance = kDefaultSinkhornTolerance;
  int sinkhorn_iteration_cap = SinkhornConfig{}.iteration_cap;  // unbounded mode only
  bool epsilon_scaling = false;                                 // unbounded mode only

  void validate() const;
};

struct DescentConfig {
  double step_size = 0.05;
  int max_outer_iterations = 500;
  double theta_tolerance = 1e-6;
  double backtracking = 0.5;  // step shrink factor in (0, 1)
  int max_halvings = 8;
  std::optional<SimplexVector> seed_theta;  // empty: uniform
  /// Start each converged Sinkhorn solve from the previous potentials.
  bool warm_start = true;

  void validate() const;
};

enum class StopReason { ThetaTolerance, NoDescent, MaxIterations };
std::string to_string(StopReason reason);

struct EstimateResult {
  SimplexVector theta_hat;
  std::vector<double> loss_trace;           // accepted iterates
  std::vector<double> gradient_norm_trace;  // tangent-projected gradient norms
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIterations;
  long total_sinkhorn_iterations = 0;
  int loss_evaluations = 0;
};

struct LossEvaluation {
  double value = 0.0;
  Vector gradient;  // d/d theta_k = <phi, mu_k>
  long sinkhorn_iterations = 0;
  bool zero_entries = false;  // theta had zero entries; gradient uses extended potentials
};

/// Loss and envelope gradient for a fixed (model, target, loss) triple.
/// Cost matrices and the target self-term are computed once and reused
/// across evaluations.
class ProportionObjective {
 public:
  ProportionObjective(const MixtureModel& model, const DiscreteMeasure& target, LossSpec spec,
                      bool warm_start = false);
  ~ProportionObjective();
  ProportionObjective(ProportionObjective&&) noexcept;
  ProportionObjective& operator=(ProportionObjective&&) noexcept;

  LossEvaluation evaluate(const SimplexVector& theta);

  const LossSpec& spec() const;
  std::size_t num_components() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

double loss(const MixtureModel& model, const SimplexVector& theta, const DiscreteMeasure& target,
            const LossSpec& spec);

Vector gradient(const MixtureModel& model, const SimplexVector& theta, const DiscreteMeasure& target,
                const LossSpec& spec);

/// g minus its mean: the component of g tangent to the simplex.
Vector tangent_projection(const Vector& g);

EstimateResult estimate(const MixtureModel& model, const DiscreteMeasure& target, const LossSpec& spec,
                        const DescentConfig& cfg = {});

}  // namespace otprop
