#pragma once

// Simulated source/target data: isotropic Gaussian mixtures sharing their
// components but not their proportions, with fixed per-class counts.

#include "otprop/measures.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace otprop {

struct GaussianMixtureSpec {
  int num_classes = 0;
  int dim = 0;
  RowMatrix means;  // num_classes x dim
  double sigma = 1.0;
  SimplexVector source_props = SimplexVector::uniform(1);
  SimplexVector target_props = SimplexVector::uniform(1);

  void validate() const;
};

/// Exact number of draws per class (not multinomial).
struct SampleBudget {
  std::vector<int> per_class_source;
  std::vector<int> per_class_target;

  void validate(int num_classes) const;
};

struct SimulatedData {
  LabeledSample source;
  DiscreteMeasure target;
  std::vector<int> target_labels;  // for evaluation only
};

/// Class by class, point by point, coordinate by coordinate: source from
/// Philox stream 1 and target from stream 2, both keyed by `seed`.
SimulatedData draw(const GaussianMixtureSpec& spec, const SampleBudget& budget, std::uint64_t seed);

/// K = 5, d = 6, sigma = 1, 50 source points per class, target counts
/// (20, 5, 8, 7, 10). Means are uniform in [-2.5, 2.5]^6 (Philox stream 0 of
/// `seed`), redrawn until all pairwise distances are >= 4 sigma.
std::pair<GaussianMixtureSpec, SampleBudget> default_paper_spec(std::uint64_t seed);

/// Rejection-sampled means in [-half_width, half_width]^dim with pairwise distance >= min_separation.
RowMatrix separated_means(int num_classes, int dim, double half_width, double min_separation, std::uint64_t seed);

}  // namespace otprop
