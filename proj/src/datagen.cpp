#include "otprop/datagen.hpp"

#include "otprop/rng.hpp"

#include <cmath>
#include <string>

namespace otprop {

void GaussianMixtureSpec::validate() const {
  if (num_classes < 1 || dim < 1) throw InputError("gaussian mixture: need K >= 1 and d >= 1");
  if (!(sigma > 0.0)) throw InputError("gaussian mixture: sigma must be > 0");
  if (means.rows() != num_classes || means.cols() != dim) {
    throw InputError("gaussian mixture: means must be K x d");
  }
  if (source_props.size() != static_cast<std::size_t>(num_classes) ||
      target_props.size() != static_cast<std::size_t>(num_classes)) {
    throw InputError("gaussian mixture: proportion vectors must have K entries");
  }
}

void SampleBudget::validate(int num_classes) const {
  if (per_class_source.size() != static_cast<std::size_t>(num_classes) ||
      per_class_target.size() != static_cast<std::size_t>(num_classes)) {
    throw InputError("sample budget: need one count per class");
  }
  for (int c : per_class_source) {
    if (c < 1) throw InputError("sample budget: every source class needs >= 1 point");
  }
  for (int c : per_class_target) {
    if (c < 1) throw InputError("sample budget: every target class needs >= 1 point");
  }
}

namespace {

void fill_class(PhiloxStream& rng, const GaussianMixtureSpec& spec, int k, int count, RowMatrix& out,
                Eigen::Index& row) {
  for (int n = 0; n < count; ++n, ++row) {
    for (int c = 0; c < spec.dim; ++c) out(row, c) = spec.means(k, c) + spec.sigma * rng.normal();
  }
}

}  // namespace

SimulatedData draw(const GaussianMixtureSpec& spec, const SampleBudget& budget, std::uint64_t seed) {
  spec.validate();
  budget.validate(spec.num_classes);
  int m = 0, n = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    m += budget.per_class_source[static_cast<std::size_t>(k)];
    n += budget.per_class_target[static_cast<std::size_t>(k)];
  }

  LabeledSample source;
  source.points.resize(m, spec.dim);
  source.labels.reserve(static_cast<std::size_t>(m));
  PhiloxStream source_rng(seed, 1);
  Eigen::Index row = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    const int count = budget.per_class_source[static_cast<std::size_t>(k)];
    fill_class(source_rng, spec, k, count, source.points, row);
    source.labels.insert(source.labels.end(), static_cast<std::size_t>(count), k + 1);
  }

  RowMatrix target_points(n, spec.dim);
  std::vector<int> target_labels;
  target_labels.reserve(static_cast<std::size_t>(n));
  PhiloxStream target_rng(seed, 2);
  row = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    const int count = budget.per_class_target[static_cast<std::size_t>(k)];
    fill_class(target_rng, spec, k, count, target_points, row);
    target_labels.insert(target_labels.end(), static_cast<std::size_t>(count), k + 1);
  }
  return {std::move(source), DiscreteMeasure::uniform(std::move(target_points)), std::move(target_labels)};
}

RowMatrix separated_means(int num_classes, int dim, double half_width, double min_separation, std::uint64_t seed) {
  PhiloxStream rng(seed, 0);
  RowMatrix means(num_classes, dim);
  constexpr int kMaxAttempts = 100000;
  for (int k = 0; k < num_classes; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      for (int c = 0; c < dim; ++c) means(k, c) = half_width * (2.0 * rng.uniform() - 1.0);
      placed = true;
      for (int other = 0; other < k && placed; ++other) {
        placed = (means.row(k) - means.row(other)).norm() >= min_separation;
      }
    }
    if (!placed) throw InputError("separated_means: could not place mean " + std::to_string(k + 1));
  }
  return means;
}

std::pair<GaussianMixtureSpec, SampleBudget> default_paper_spec(std::uint64_t seed) {
  constexpr int kClasses = 5;
  constexpr int kDim = 6;
  constexpr double kSigma = 1.0;
  GaussianMixtureSpec spec;
  spec.num_classes = kClasses;
  spec.dim = kDim;
  spec.sigma = kSigma;
  spec.means = separated_means(kClasses, kDim, 2.5 * kSigma, 4.0 * kSigma, seed);
  SampleBudget budget{std::vector<int>(kClasses, 50), {20, 5, 8, 7, 10}};
  spec.source_props = SimplexVector::uniform(kClasses);
  Vector target(kClasses);
  int total = 0;
  for (int c : budget.per_class_target) total += c;
  for (int k = 0; k < kClasses; ++k) {
    target[k] = static_cast<double>(budget.per_class_target[static_cast<std::size_t>(k)]) / total;
  }
  spec.target_props = SimplexVector(target);
  return {std::move(spec), std::move(budget)};
}

}  // namespace otprop
