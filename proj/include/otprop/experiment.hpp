#pragma once

// Monte Carlo harness: repetitions x loss x lambda x iteration budget,
// squared-error and timing aggregation.

#include "otprop/datagen.hpp"
#include "otprop/estimator.hpp"
#include "otprop/measures.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace otprop {

/// One (loss, lambda, budget) combination. W0 cells carry lambda 0 and no budget.
struct CellKey {
  LossKind loss = LossKind::W0;
  double lambda = 0.0;
  std::optional<int> ell;

  bool operator==(const CellKey&) const = default;
  std::string label() const;
};

struct SweepConfig {
  std::vector<double> lambda_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  std::vector<LossKind> losses{LossKind::W0, LossKind::Wlambda, LossKind::Slambda};
  std::vector<std::optional<int>> iteration_budgets{std::nullopt};
  int repetitions = 50;
  std::uint64_t base_seed = 1;
  std::optional<SimplexVector> theta_star;  // empty: proportions of the hidden target labels
  DescentConfig descent;
  double sinkhorn_tolerance = kDefaultSinkhornTolerance;
  int sinkhorn_iteration_cap = SinkhornConfig{}.iteration_cap;
  bool epsilon_scaling = false;
  int threads = 1;
  /// Also record W0(mu_thetahat, nu) - W0(mu_theta*, nu) on the sample
  /// (empirical surrogate of the excess risk; two extra exact solves per run).
  bool excess_risk = false;

  void validate() const;
  /// W0 once (if requested), then every lambda x budget for each regularised loss.
  std::vector<CellKey> cells() const;
};

struct Dataset {
  LabeledSample source;
  DiscreteMeasure target;
  std::vector<int> target_labels;  // may be empty for ingested data
};

struct RunRecord {
  CellKey cell;
  int rep = 0;
  double error = 0.0;  // ||theta_hat - theta*||^2
  double seconds = 0.0;
  long sinkhorn_iters = 0;
  bool converged = false;
  std::uint64_t dataset_hash = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> theta_hat;
  std::optional<double> empirical_excess_risk;
};

struct CellAggregate {
  CellKey cell;
  int runs = 0;
  int failures = 0;
  double mean_error = 0.0;
  double median_error = 0.0;
  double q1_error = 0.0;
  double q3_error = 0.0;
  double total_seconds = 0.0;
  long total_sinkhorn_iters = 0;
  std::optional<double> mean_empirical_excess_risk;
};

struct ExperimentReport {
  std::vector<double> theta_star;
  int repetitions = 0;
  std::uint64_t base_seed = 0;
  std::vector<RunRecord> records;  // cell-major, repetition-minor
  std::vector<CellAggregate> aggregates;

  std::vector<const RunRecord*> records_for(const CellKey& cell) const;
  const CellAggregate& aggregate_for(const CellKey& cell) const;
};

/// Repetition r of every cell uses the dataset produced by `make_dataset(r)`.
ExperimentReport run_sweep(const std::function<Dataset(int)>& make_dataset, const SweepConfig& cfg);

/// Simulated data; repetition r draws with seed base_seed + r.
ExperimentReport run_sweep(const GaussianMixtureSpec& spec, const SampleBudget& budget, const SweepConfig& cfg);

/// Ingested data; every repetition reuses the same dataset.
ExperimentReport run_sweep(const LabeledSample& source, const DiscreteMeasure& target, const SweepConfig& cfg);

/// Per-cell statistics from raw records (failed runs excluded from error statistics).
std::vector<CellAggregate> aggregate(const std::vector<RunRecord>& records, const std::vector<CellKey>& cells);

/// Empirical class frequencies of labels in 1..K.
SimplexVector evaluate_target_proportions(const std::vector<int>& labels, int num_classes);

struct PairedComparison {
  std::vector<int> reps;
  std::vector<double> differences;  // error(a) - error(b) per repetition
  double mean = 0.0;
  double median = 0.0;
};

PairedComparison compare_cells(const ExperimentReport& report, const CellKey& a, const CellKey& b);

/// FNV-1a over source coordinates, labels and target coordinates.
std::uint64_t dataset_hash(const LabeledSample& source, const DiscreteMeasure& target);

/// Type-7 (linear interpolation) sample quantile of unsorted values.
double quantile(std::vector<double> values, double p);

inline constexpr const char* kRecordCsvHeader =
    "loss,lambda,ell,rep,error,seconds,sinkhorn_iters,converged,dataset_hash";

void write_records_csv(const std::string& path, const ExperimentReport& report);
std::vector<RunRecord> read_records_csv(const std::string& path);
void write_aggregates_json(const std::string& path, const ExperimentReport& report);

}  // namespace otprop
