#include "otprop/experiment.hpp"

#include "otprop/config.hpp"
#include "otprop/csv_io.hpp"
#include "otprop/exact_ot.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace otprop {

std::string CellKey::label() const {
  std::string out = to_string(loss);
  if (loss != LossKind::W0) {
    out += "(lambda=" + format_double(lambda) + ", ell=" + (ell ? std::to_string(*ell) : "inf") + ")";
  }
  return out;
}

void SweepConfig::validate() const {
  if (repetitions < 1) throw InputError("sweep: repetitions must be >= 1");
  if (losses.empty()) throw InputError("sweep: no losses selected");
  if (threads < 1) throw InputError("sweep: threads must be >= 1");
  const bool regularised = std::any_of(losses.begin(), losses.end(), [](LossKind k) { return k != LossKind::W0; });
  if (regularised) {
    if (lambda_grid.empty()) throw InputError("sweep: empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] > 0.0)) throw InputError("sweep: lambda values must be > 0");
      if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) throw InputError("sweep: lambda grid must be strictly increasing");
    }
    if (iteration_budgets.empty()) throw InputError("sweep: no iteration budgets");
    for (const auto& b : iteration_budgets) {
      if (b && *b < 1) throw InputError("sweep: iteration budgets must be >= 1");
    }
  }
  if (!(sinkhorn_tolerance > 0.0)) throw InputError("sweep: sinkhorn tolerance must be > 0");
  if (sinkhorn_iteration_cap < 1) throw InputError("sweep: sinkhorn iteration cap must be >= 1");
  descent.validate();
}

std::vector<CellKey> SweepConfig::cells() const {
  std::vector<CellKey> out;
  if (std::find(losses.begin(), losses.end(), LossKind::W0) != losses.end()) out.push_back({LossKind::W0, 0.0, std::nullopt});
  for (const auto kind : {LossKind::Wlambda, LossKind::Slambda}) {
    if (std::find(losses.begin(), losses.end(), kind) == losses.end()) continue;
    for (const auto& ell : iteration_budgets) {
      for (const double lambda : lambda_grid) out.push_back({kind, lambda, ell});
    }
  }
  return out;
}

std::vector<const RunRecord*> ExperimentReport::records_for(const CellKey& cell) const {
  std::vector<const RunRecord*> out;
  for (const auto& r : records) {
    if (r.cell == cell) out.push_back(&r);
  }
  return out;
}

const CellAggregate& ExperimentReport::aggregate_for(const CellKey& cell) const {
  for (const auto& a : aggregates) {
    if (a.cell == cell) return a;
  }
  throw InputError("report has no cell " + cell.label());
}

std::uint64_t dataset_hash(const LabeledSample& source, const DiscreteMeasure& target) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto mix_matrix = [&](const RowMatrix& m) {
    const std::int64_t shape[2] = {m.rows(), m.cols()};
    mix_bytes(shape, sizeof(shape));
    mix_bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  };
  mix_matrix(source.points);
  mix_bytes(source.labels.data(), source.labels.size() * sizeof(int));
  mix_matrix(target.points());
  return h;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SimplexVector evaluate_target_proportions(const std::vector<int>& labels, int num_classes) {
  if (labels.empty()) throw InputError("target proportions: no labels");
  if (num_classes < 1) throw InputError("target proportions: need K >= 1");
  Vector counts = Vector::Zero(num_classes);
  for (int l : labels) {
    if (l < 1 || l > num_classes) {
      throw InputError("target proportions: label " + std::to_string(l) + " is not in 1.." + std::to_string(num_classes));
    }
    counts[l - 1] += 1.0;
  }
  return SimplexVector(counts / static_cast<double>(labels.size()));
}

std::vector<CellAggregate> aggregate(const std::vector<RunRecord>& records, const std::vector<CellKey>& cells) {
  std::vector<CellAggregate> out;
  for (const auto& cell : cells) {
    CellAggregate a;
    a.cell = cell;
    std::vector<double> errors;
    std::vector<double> risks;
    for (const auto& r : records) {
      if (!(r.cell == cell)) continue;
      ++a.runs;
      a.total_seconds += r.seconds;
      a.total_sinkhorn_iters += r.sinkhorn_iters;
      if (r.failed) {
        ++a.failures;
        continue;
      }
      errors.push_back(r.error);
      if (r.empirical_excess_risk) risks.push_back(*r.empirical_excess_risk);
    }
    if (errors.empty()) {
      a.mean_error = a.median_error = a.q1_error = a.q3_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double e : errors) sum += e;
      a.mean_error = sum / static_cast<double>(errors.size());
      a.median_error = quantile(errors, 0.5);
      a.q1_error = quantile(errors, 0.25);
      a.q3_error = quantile(errors, 0.75);
    }
    if (!risks.empty()) {
      double sum = 0.0;
      for (double r : risks) sum += r;
      a.mean_empirical_excess_risk = sum / static_cast<double>(risks.size());
    }
    out.push_back(a);
  }
  return out;
}

namespace {

struct PreparedDataset {
  MixtureModel model;
  DiscreteMeasure target;
  std::uint64_t hash;
  SimplexVector theta_star;
};

RunRecord run_cell(const CellKey& cell, int rep, const PreparedDataset& data, const SweepConfig& cfg) {
  RunRecord rec;
  rec.cell = cell;
  rec.rep = rep;
  rec.dataset_hash = data.hash;
  LossSpec spec;
  spec.kind = cell.loss;
  spec.lambda = cell.lambda;
  spec.iteration_budget = cell.ell;
  spec.sinkhorn_tolerance = cfg.sinkhorn_tolerance;
  spec.sinkhorn_iteration_cap = cfg.sinkhorn_iteration_cap;
  spec.epsilon_scaling = cfg.epsilon_scaling;
  const auto start = std::chrono::steady_clock::now();
  try {
    const EstimateResult est = estimate(data.model, data.target, spec, cfg.descent);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.error = (est.theta_hat.values() - data.theta_star.values()).squaredNorm();
    rec.sinkhorn_iters = est.total_sinkhorn_iterations;
    rec.converged = est.converged;
    rec.theta_hat.assign(est.theta_hat.values().data(), est.theta_hat.values().data() + est.theta_hat.size());
    if (cfg.excess_risk) {
      const double at_hat = w0(reweight(data.model, est.theta_hat), data.target);
      const double at_star = w0(reweight(data.model, data.theta_star), data.target);
      rec.empirical_excess_risk = at_hat - at_star;
    }
  } catch (const std::exception& e) {
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.failed = true;
    rec.failure = e.what();
    rec.error = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace

ExperimentReport run_sweep(const std::function<Dataset(int)>& make_dataset, const SweepConfig& cfg) {
  cfg.validate();
  const auto cells = cfg.cells();

  std::vector<PreparedDataset> datasets;
  datasets.reserve(static_cast<std::size_t>(cfg.repetitions));
  for (int r = 0; r < cfg.repetitions; ++r) {
    Dataset d = make_dataset(r);
    MixtureModel model = from_labeled(d.source);
    const int k = static_cast<int>(model.num_components());
    SimplexVector star = cfg.theta_star ? *cfg.theta_star
                         : d.target_labels.empty()
                             ? throw InputError("sweep: theta_star not given and target labels unavailable")
                             : evaluate_target_proportions(d.target_labels, k);
    if (star.size() != model.num_components()) throw InputError("sweep: theta_star has the wrong number of classes");
    const std::uint64_t h = dataset_hash(d.source, d.target);
    datasets.push_back({std::move(model), std::move(d.target), h, std::move(star)});
  }

  ExperimentReport report;
  report.theta_star.assign(datasets.front().theta_star.values().data(),
                           datasets.front().theta_star.values().data() + datasets.front().theta_star.size());
  report.repetitions = cfg.repetitions;
  report.base_seed = cfg.base_seed;
  const long jobs = static_cast<long>(cells.size()) * cfg.repetitions;
  report.records.resize(static_cast<std::size_t>(jobs));

#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.threads)
  for (long job = 0; job < jobs; ++job) {
    const auto c = static_cast<std::size_t>(job / cfg.repetitions);
    const int r = static_cast<int>(job % cfg.repetitions);
    report.records[static_cast<std::size_t>(job)] = run_cell(cells[c], r, datasets[static_cast<std::size_t>(r)], cfg);
  }

  report.aggregates = aggregate(report.records, cells);
  return report;
}

ExperimentReport run_sweep(const GaussianMixtureSpec& spec, const SampleBudget& budget, const SweepConfig& cfg) {
  return run_sweep(
      [&](int r) {
        SimulatedData sim = draw(spec, budget, cfg.base_seed + static_cast<std::uint64_t>(r));
        return Dataset{std::move(sim.source), std::move(sim.target), std::move(sim.target_labels)};
      },
      cfg);
}

ExperimentReport run_sweep(const LabeledSample& source, const DiscreteMeasure& target, const SweepConfig& cfg) {
  return run_sweep([&](int) { return Dataset{source, target, {}}; }, cfg);
}

PairedComparison compare_cells(const ExperimentReport& report, const CellKey& a, const CellKey& b) {
  const auto ra = report.records_for(a);
  const auto rb = report.records_for(b);
  if (ra.empty() || rb.empty()) throw InputError("compare_cells: cell not in report");
  std::vector<int> reps_a, reps_b;
  for (const auto* r : ra) reps_a.push_back(r->rep);
  for (const auto* r : rb) reps_b.push_back(r->rep);
  std::sort(reps_a.begin(), reps_a.end());
  std::sort(reps_b.begin(), reps_b.end());
  if (reps_a != reps_b) throw InputError("compare_cells: cells cover different repetitions");

  PairedComparison out;
  for (const int rep : reps_a) {
    const auto* x = *std::find_if(ra.begin(), ra.end(), [rep](const RunRecord* r) { return r->rep == rep; });
    const auto* y = *std::find_if(rb.begin(), rb.end(), [rep](const RunRecord* r) { return r->rep == rep; });
    if (x->failed || y->failed) continue;
    out.reps.push_back(rep);
    out.differences.push_back(x->error - y->error);
  }
  if (out.differences.empty()) throw InputError("compare_cells: no repetition succeeded in both cells");
  double sum = 0.0;
  for (double d : out.differences) sum += d;
  out.mean = sum / static_cast<double>(out.differences.size());
  out.median = quantile(out.differences, 0.5);
  return out;
}

namespace {

std::string hash_hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

}  // namespace

void write_records_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << kRecordCsvHeader << '\n';
  for (const auto& r : report.records) {
    out << to_string(r.cell.loss) << ',' << format_double(r.cell.lambda) << ','
        << (r.cell.ell ? std::to_string(*r.cell.ell) : "inf") << ',' << r.rep << ','
        << (r.failed ? "nan" : format_double(r.error)) << ',' << format_double(r.seconds) << ','
        << r.sinkhorn_iters << ',' << (r.converged ? 1 : 0) << ',' << hash_hex(r.dataset_hash) << '\n';
  }
}

std::vector<RunRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kRecordCsvHeader) throw InputError(path + ": unexpected record header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_list(line);
    if (f.size() != 9) throw InputError(path + ": malformed record '" + line + "'");
    RunRecord r;
    r.cell.loss = parse_loss_kind(f[0]);
    r.cell.lambda = parse_number(f[1], "lambda");
    if (f[2] != "inf") r.cell.ell = static_cast<int>(parse_number(f[2], "ell"));
    r.rep = static_cast<int>(parse_number(f[3], "rep"));
    r.failed = f[4] == "nan";
    r.error = r.failed ? std::numeric_limits<double>::quiet_NaN() : parse_number(f[4], "error");
    r.seconds = parse_number(f[5], "seconds");
    r.sinkhorn_iters = static_cast<long>(parse_number(f[6], "sinkhorn_iters"));
    r.converged = f[7] == "1";
    r.dataset_hash = std::stoull(f[8], nullptr, 16);
    out.push_back(std::move(r));
  }
  return out;
}

void write_aggregates_json(const std::string& path, const ExperimentReport& report) {
  using nlohmann::json;
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json cells = json::array();
  for (const auto& a : report.aggregates) {
    json c;
    c["loss"] = to_string(a.cell.loss);
    c["lambda"] = a.cell.lambda;
    c["ell"] = a.cell.ell ? json(*a.cell.ell) : json("inf");
    c["runs"] = a.runs;
    c["failures"] = a.failures;
    c["mean_error"] = num(a.mean_error);
    c["median_error"] = num(a.median_error);
    c["q1_error"] = num(a.q1_error);
    c["q3_error"] = num(a.q3_error);
    c["total_seconds"] = a.total_seconds;
    c["total_sinkhorn_iters"] = a.total_sinkhorn_iters;
    if (a.mean_empirical_excess_risk) c["mean_empirical_excess_risk"] = num(*a.mean_empirical_excess_risk);
    cells.push_back(std::move(c));
  }
  json doc;
  doc["theta_star"] = report.theta_star;
  doc["repetitions"] = report.repetitions;
  doc["base_seed"] = report.base_seed;
  doc["error_metric"] = "squared_euclidean";
  doc["timing_scope"] = "estimation call only";
  doc["cells"] = std::move(cells);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << std::setw(2) << doc << '\n';
}

}  // namespace otprop
