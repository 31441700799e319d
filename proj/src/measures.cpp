#include "otprop/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace otprop {

namespace {

constexpr double kRawSumTolerance = 1e-8;
constexpr double kSumTolerance = 1e-12;

Vector normalised_probabilities(Vector w, const char* what) {
  if (w.size() == 0) throw InputError(std::string(what) + ": empty weight vector");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) throw InputError(std::string(what) + ": non-finite weight");
    if (w[i] < 0.0) throw InputError(std::string(what) + ": negative weight");
  }
  const double total = w.sum();
  if (std::abs(total - 1.0) > kRawSumTolerance) {
    throw InputError(std::string(what) + ": weights sum to " + std::to_string(total));
  }
  if (std::abs(total - 1.0) > kSumTolerance) w /= total;
  return w;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(RowMatrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw InputError("DiscreteMeasure: need at least one atom and one dimension");
  }
  if (points_.rows() != weights_.size()) {
    throw InputError("DiscreteMeasure: " + std::to_string(points_.rows()) + " atoms but " +
                     std::to_string(weights_.size()) + " weights");
  }
  if (!points_.allFinite()) throw InputError("DiscreteMeasure: non-finite coordinate");
  weights_ = normalised_probabilities(std::move(weights_), "DiscreteMeasure");
}

DiscreteMeasure DiscreteMeasure::uniform(RowMatrix points) {
  const auto n = points.rows();
  if (n < 1) throw InputError("DiscreteMeasure: need at least one atom");
  return DiscreteMeasure(std::move(points), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

bool DiscreteMeasure::identical_to(const DiscreteMeasure& other) const {
  return points_.rows() == other.points_.rows() && points_.cols() == other.points_.cols() &&
         points_ == other.points_ && weights_ == other.weights_;
}

DiscreteMeasure DiscreteMeasure::scaled(double scale) const {
  return DiscreteMeasure(points_ * scale, weights_);
}

SimplexVector::SimplexVector(Vector theta) : theta_(std::move(theta)) {
  theta_ = normalised_probabilities(std::move(theta_), "SimplexVector");
}

SimplexVector SimplexVector::uniform(std::size_t k) {
  if (k == 0) throw InputError("SimplexVector: K must be >= 1");
  return SimplexVector(Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k)));
}

SimplexVector SimplexVector::vertex(std::size_t k, std::size_t index) {
  if (index >= k) throw InputError("SimplexVector: vertex index out of range");
  Vector e = Vector::Zero(static_cast<Eigen::Index>(k));
  e[static_cast<Eigen::Index>(index)] = 1.0;
  return SimplexVector(std::move(e));
}

int LabeledSample::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

MixtureModel::MixtureModel(std::vector<DiscreteMeasure> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InputError("MixtureModel: no components");
  const auto d = components_.front().dim();
  offsets_.reserve(components_.size() + 1);
  offsets_.push_back(0);
  for (const auto& c : components_) {
    if (c.dim() != d) throw InputError("MixtureModel: components differ in dimension");
    offsets_.push_back(offsets_.back() + c.size());
  }
  stacked_.resize(static_cast<Eigen::Index>(offsets_.back()), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < components_.size(); ++k) {
    stacked_.middleRows(static_cast<Eigen::Index>(offsets_[k]),
                        static_cast<Eigen::Index>(components_[k].size())) = components_[k].points();
  }
}

Vector MixtureModel::mixture_weights(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != components_.size()) {
    throw InputError("reweight: theta has " + std::to_string(theta.size()) + " entries, model has " +
                     std::to_string(components_.size()) + " components");
  }
  Vector w(static_cast<Eigen::Index>(total_atoms()));
  for (std::size_t k = 0; k < components_.size(); ++k) {
    w.segment(static_cast<Eigen::Index>(offsets_[k]), static_cast<Eigen::Index>(components_[k].size())) =
        theta[static_cast<Eigen::Index>(k)] * components_[k].weights();
  }
  return w;
}

MixtureModel from_labeled(const LabeledSample& sample) {
  if (sample.points.rows() != static_cast<Eigen::Index>(sample.labels.size())) {
    throw InputError("from_labeled: point/label count mismatch");
  }
  if (sample.labels.empty()) throw InputError("from_labeled: empty sample");
  const int k_max = sample.num_classes();
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(std::max(k_max, 0)));
  for (std::size_t i = 0; i < sample.labels.size(); ++i) {
    const int label = sample.labels[i];
    if (label < 1) throw InputError("from_labeled: label " + std::to_string(label) + " is not in 1..K");
    rows[static_cast<std::size_t>(label - 1)].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<DiscreteMeasure> components;
  components.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].empty()) {
      throw InputError("from_labeled: class " + std::to_string(k + 1) + " has no observations");
    }
    RowMatrix pts(static_cast<Eigen::Index>(rows[k].size()), sample.points.cols());
    for (std::size_t r = 0; r < rows[k].size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = sample.points.row(rows[k][r]);
    components.push_back(DiscreteMeasure::uniform(std::move(pts)));
  }
  return MixtureModel(std::move(components));
}

DiscreteMeasure reweight(const MixtureModel& model, const SimplexVector& theta) {
  return DiscreteMeasure(model.stacked_points(), model.mixture_weights(theta.values()));
}

SimplexVector project_simplex(const Vector& v) {
  const auto k = v.size();
  if (k < 1) throw InputError("project_simplex: empty vector");
  if (!v.allFinite()) throw InputError("project_simplex: non-finite entry");

  std::vector<double> sorted(v.data(), v.data() + k);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    cumulative += sorted[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
  }
  Vector out = (v.array() - tau).max(0.0).matrix();
  // Feasible input (within the simplex tolerance) is returned unchanged,
  // which makes the projection exactly idempotent.
  if ((v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= kSumTolerance) out = v;
  return SimplexVector(std::move(out));
}

FilteredMeasure filter_positive(const DiscreteMeasure& m, double threshold) {
  std::vector<std::size_t> kept;
  kept.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights()[static_cast<Eigen::Index>(i)] >= threshold) kept.push_back(i);
  }
  if (kept.empty()) throw InputError("filter_positive: every atom has zero weight");
  if (kept.size() == m.size()) return {m, std::move(kept)};
  RowMatrix pts(static_cast<Eigen::Index>(kept.size()), m.points().cols());
  Vector w(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    pts.row(static_cast<Eigen::Index>(i)) = m.points().row(static_cast<Eigen::Index>(kept[i]));
    w[static_cast<Eigen::Index>(i)] = m.weights()[static_cast<Eigen::Index>(kept[i])];
  }
  return {DiscreteMeasure(std::move(pts), w / w.sum()), std::move(kept)};
}

}  // namespace otprop
