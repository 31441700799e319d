#pragma once

#include "otprop/common.hpp"

#include <cstddef>
#include <vector>

namespace otprop {

/// Weighted point cloud: n atoms in R^d with probability weights.
///
/// Weights are renormalised to sum to one on construction; construction
/// fails on negative or non-finite weights, or when the raw sum is far from 1.
class DiscreteMeasure {
 public:
  DiscreteMeasure(RowMatrix points, Vector weights);

  /// Uniform weights 1/n on the given atoms.
  static DiscreteMeasure uniform(RowMatrix points);

  const RowMatrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }

  /// Atoms and weights compare bitwise equal.
  bool identical_to(const DiscreteMeasure& other) const;

  /// Push-forward by x -> scale * x.
  DiscreteMeasure scaled(double scale) const;

 private:
  RowMatrix points_;
  Vector weights_;
};

/// Element of the probability simplex.
class SimplexVector {
 public:
  explicit SimplexVector(Vector theta);

  static SimplexVector uniform(std::size_t k);
  static SimplexVector vertex(std::size_t k, std::size_t index);

  const Vector& values() const { return theta_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }
  double operator[](std::size_t k) const { return theta_[static_cast<Eigen::Index>(k)]; }

 private:
  Vector theta_;
};

/// Source points with 1-based class labels in {1..K}.
struct LabeledSample {
  RowMatrix points;
  std::vector<int> labels;

  /// Largest label, i.e. K.
  int num_classes() const;
};

/// K component measures sharing a dimension.
class MixtureModel {
 public:
  explicit MixtureModel(std::vector<DiscreteMeasure> components);

  const std::vector<DiscreteMeasure>& components() const { return components_; }
  std::size_t num_components() const { return components_.size(); }
  std::size_t dim() const { return components_.front().dim(); }

  /// All component atoms stacked in component order.
  const RowMatrix& stacked_points() const { return stacked_; }
  /// offsets()[k] is the first stacked row of component k; offsets()[K] = total.
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  std::size_t total_atoms() const { return offsets_.back(); }

  /// Weights of reweight(theta) without building a measure.
  Vector mixture_weights(const Vector& theta) const;

 private:
  std::vector<DiscreteMeasure> components_;
  RowMatrix stacked_;
  std::vector<std::size_t> offsets_;
};

/// Splits a labelled sample into uniform per-class measures.
MixtureModel from_labeled(const LabeledSample& sample);

/// mu_theta = sum_k theta_k mu_k. Zero-weight atoms are kept.
DiscreteMeasure reweight(const MixtureModel& model, const SimplexVector& theta);

/// Euclidean projection onto the simplex (sort-and-threshold).
SimplexVector project_simplex(const Vector& v);

/// Measure restricted to atoms of weight >= threshold, with the original indices.
struct FilteredMeasure {
  DiscreteMeasure measure;
  std::vector<std::size_t> kept;  // kept[i] = original index of atom i
};

inline constexpr double kZeroWeightThreshold = 1e-15;

FilteredMeasure filter_positive(const DiscreteMeasure& m, double threshold = kZeroWeightThreshold);

}  // namespace otprop
