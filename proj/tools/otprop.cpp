// otprop: command-line front end.
//
//   otprop solve      SOURCE TARGET [--loss ...]     OT cost between two point clouds
//   otprop estimate   --source S --target T [...]    class proportions of T
//   otprop simulate   [--seed N] [--spec-file F]     Gaussian-mixture source/target CSVs
//   otprop experiment --config F [--threads N]       Monte Carlo sweep
//
// Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.

#include "otprop/config.hpp"
#include "otprop/csv_io.hpp"
#include "otprop/datagen.hpp"
#include "otprop/estimator.hpp"
#include "otprop/exact_ot.hpp"
#include "otprop/experiment.hpp"
#include "otprop/ot_core.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace otprop;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

// ---------------------------------------------------------------------------
// Shared helpers

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  throw InputError(path + ": empty file");
}

// Measure CSVs may carry a trailing label column; it is ignored here.
DiscreteMeasure read_measure(const std::string& path) {
  const auto header = split_list(first_line(path));
  if (!header.empty() && header.back() == "label") return DiscreteMeasure::uniform(read_source_csv(path).points);
  return read_target_csv(path);
}

SimplexVector parse_simplex(const std::string& text, const std::string& what) {
  std::vector<double> values;
  for (const auto& token : split_list(text)) values.push_back(parse_number(token, what));
  if (values.empty()) throw InputError(what + ": empty list");
  return SimplexVector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

std::optional<int> parse_budget(const std::string& text) {
  if (text == "inf" || text == "unbounded") return std::nullopt;
  const double v = parse_number(text, "iteration budget");
  if (v != std::floor(v) || v < 1) throw InputError("iteration budget must be a positive integer or 'inf'");
  return static_cast<int>(v);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

std::string sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Mixture spec files (key=value):
//   num_classes, dim, sigma, source_counts, target_counts   required
//   means             K*d numbers, row-major; drawn from the seed when absent
//   means_half_width  box for drawn means (default 2.5)
//   means_min_separation  (default 4 * sigma)
//   source_props, target_props  default: normalised counts

const std::vector<std::string> kSpecKeys = {"num_classes", "dim", "sigma", "source_counts", "target_counts",
                                            "means", "means_half_width", "means_min_separation",
                                            "source_props", "target_props"};

std::vector<int> counts_from(const KeyValueConfig& cfg, const std::string& key) {
  if (!cfg.has(key)) throw InputError("spec file: missing '" + key + "'");
  std::vector<int> out;
  for (double v : cfg.get_doubles(key, {})) {
    if (v != std::floor(v) || v < 1) throw InputError("spec file: '" + key + "' entries must be positive integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

SimplexVector props_from(const KeyValueConfig& cfg, const std::string& key, const std::vector<int>& counts) {
  if (cfg.has(key)) return parse_simplex(*cfg.get(key), "spec file: " + key);
  Vector v(static_cast<Eigen::Index>(counts.size()));
  double total = 0.0;
  for (int c : counts) total += c;
  for (std::size_t k = 0; k < counts.size(); ++k) v[static_cast<Eigen::Index>(k)] = counts[k] / total;
  return SimplexVector(v);
}

std::pair<GaussianMixtureSpec, SampleBudget> load_mixture_spec(const std::string& path, std::uint64_t seed) {
  const KeyValueConfig cfg = KeyValueConfig::load(path);
  if (const auto unknown = cfg.unknown_keys(kSpecKeys); !unknown.empty()) {
    throw InputError("spec file: unknown key '" + unknown.front() + "'");
  }
  for (const char* key : {"num_classes", "dim"}) {
    if (!cfg.has(key)) throw InputError(std::string("spec file: missing '") + key + "'");
  }
  GaussianMixtureSpec spec;
  spec.num_classes = static_cast<int>(cfg.get_long("num_classes", 0));
  spec.dim = static_cast<int>(cfg.get_long("dim", 0));
  spec.sigma = cfg.get_double("sigma", 1.0);
  if (spec.num_classes < 1 || spec.dim < 1) throw InputError("spec file: num_classes and dim must be >= 1");
  SampleBudget budget{counts_from(cfg, "source_counts"), counts_from(cfg, "target_counts")};
  budget.validate(spec.num_classes);
  if (cfg.has("means")) {
    const auto flat = cfg.get_doubles("means", {});
    if (flat.size() != static_cast<std::size_t>(spec.num_classes * spec.dim)) {
      throw InputError("spec file: 'means' needs num_classes * dim numbers");
    }
    spec.means = Eigen::Map<const RowMatrix>(flat.data(), spec.num_classes, spec.dim);
  } else {
    spec.means = separated_means(spec.num_classes, spec.dim, cfg.get_double("means_half_width", 2.5),
                                 cfg.get_double("means_min_separation", 4.0 * spec.sigma), seed);
  }
  spec.source_props = props_from(cfg, "source_props", budget.per_class_source);
  spec.target_props = props_from(cfg, "target_props", budget.per_class_target);
  spec.validate();
  return {spec, budget};
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string source, target;
  std::string loss = "W0";
  double lambda = 0.0;
  int iters = 0;  // 0: unbounded
  double tol = kDefaultSinkhornTolerance;
  bool eps_scaling = false;
  std::string dual_out, plan_out;
};

void write_duals(const std::string& path, const Vector& phi, const Vector& psi) {
  std::ostringstream out;
  out << "side,index,potential\n";
  for (Eigen::Index i = 0; i < phi.size(); ++i) out << "source," << i + 1 << ',' << format_double(phi[i]) << '\n';
  for (Eigen::Index j = 0; j < psi.size(); ++j) out << "target," << j + 1 << ',' << format_double(psi[j]) << '\n';
  write_text(path, out.str());
}

void write_plan(const std::string& path, const RowMatrix& plan) {
  std::ostringstream out;
  out << "i,j,mass\n";
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      if (plan(i, j) > 0.0) out << i + 1 << ',' << j + 1 << ',' << format_double(plan(i, j)) << '\n';
    }
  }
  write_text(path, out.str());
}

// Plan implied by entropic potentials: exp((phi_i + psi_j - c_ij) / lambda) a_i b_j.
RowMatrix entropic_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, const DualSolution& sol) {
  const CostMatrix c = cost_matrix(a, b);
  RowMatrix plan(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      plan(i, j) = std::exp((sol.phi[i] + sol.psi[j] - c.entries()(i, j)) / sol.lambda) * a.weights()[i] *
                   b.weights()[j];
    }
  }
  return plan;
}

int run_solve(const SolveArgs& args) {
  const LossKind kind = parse_loss_kind(args.loss);
  const DiscreteMeasure a = read_measure(args.source);
  const DiscreteMeasure b = read_measure(args.target);
  if (a.dim() != b.dim()) throw InputError("source and target dimensions differ");

  if (kind == LossKind::W0) {
    const TransportPlan plan = solve_exact(a, b);
    std::cout << sig12(plan.cost) << '\n';
    if (!args.dual_out.empty()) write_duals(args.dual_out, plan.dual_phi, plan.dual_psi);
    if (!args.plan_out.empty()) write_plan(args.plan_out, plan.plan);
    return 0;
  }

  SinkhornConfig cfg;
  cfg.lambda = args.lambda;
  if (args.iters > 0) cfg.max_iterations = args.iters;
  cfg.tolerance = args.tol;
  cfg.epsilon_scaling = args.eps_scaling;
  cfg.validate();

  DualSolution cross;
  double value = 0.0;
  if (kind == LossKind::Wlambda) {
    cross = sinkhorn(a, b, cfg);
    value = cross.cost;
  } else {
    const SinkhornDivergence div = sinkhorn_divergence(a, b, cfg);
    cross = div.cross;
    value = div.value;
  }
  std::cout << sig12(value) << '\n';
  if (!cfg.max_iterations && !cross.converged) {
    std::cerr << "warning: Sinkhorn stopped at residual " << cross.marginal_residual << " after "
              << cross.iterations << " iterations\n";
  }
  if (!args.dual_out.empty()) write_duals(args.dual_out, cross.phi, cross.psi);
  if (!args.plan_out.empty()) write_plan(args.plan_out, entropic_plan(a, b, cross));
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string source, target;
  std::string loss = "W0";
  double lambda = 0.0;
  int iters = 0;
  double tol = kDefaultSinkhornTolerance;
  bool eps_scaling = false;
  DescentConfig descent;
  std::string seed_theta;
  bool no_warm_start = false;
  std::string theta_out = "theta.json";
  std::string trace_out;
};

int run_estimate(EstimateArgs args) {
  LossSpec spec;
  spec.kind = parse_loss_kind(args.loss);
  spec.lambda = args.lambda;
  if (args.iters > 0) spec.iteration_budget = args.iters;
  spec.sinkhorn_tolerance = args.tol;
  spec.epsilon_scaling = args.eps_scaling;
  spec.validate();
  if (!args.seed_theta.empty()) args.descent.seed_theta = parse_simplex(args.seed_theta, "--seed-theta");
  args.descent.warm_start = !args.no_warm_start;
  args.descent.validate();

  const LabeledSample source = read_source_csv(args.source);
  const DiscreteMeasure target = read_measure(args.target);
  const MixtureModel model = from_labeled(source);
  const EstimateResult res = estimate(model, target, spec, args.descent);

  nlohmann::json doc;
  std::vector<double> theta(res.theta_hat.values().data(), res.theta_hat.values().data() + res.theta_hat.size());
  doc["theta"] = theta;
  doc["loss"] = to_string(spec.kind);
  doc["lambda"] = spec.kind == LossKind::W0 ? nlohmann::json(nullptr) : nlohmann::json(spec.lambda);
  doc["iteration_budget"] = spec.iteration_budget ? nlohmann::json(*spec.iteration_budget) : nlohmann::json("inf");
  doc["final_loss"] = res.loss_trace.back();
  doc["converged"] = res.converged;
  doc["stop_reason"] = to_string(res.stop_reason);
  doc["outer_iterations"] = res.loss_trace.size() - 1;
  doc["loss_evaluations"] = res.loss_evaluations;
  doc["sinkhorn_iterations"] = res.total_sinkhorn_iterations;
  std::ostringstream json_text;
  json_text << std::setw(2) << doc << '\n';
  write_text(args.theta_out, json_text.str());

  if (!args.trace_out.empty()) {
    std::ostringstream trace;
    trace << "iteration,loss,gradient_norm\n";
    for (std::size_t t = 0; t < res.loss_trace.size(); ++t) {
      trace << t << ',' << format_double(res.loss_trace[t]) << ',' << format_double(res.gradient_norm_trace[t]) << '\n';
    }
    write_text(args.trace_out, trace.str());
  }

  std::cout << "class,theta\n";
  for (std::size_t k = 0; k < res.theta_hat.size(); ++k) std::cout << k + 1 << ',' << format_double(res.theta_hat[k]) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::uint64_t seed = 1;
  std::string spec_file;
  std::string source_out = "source.csv";
  std::string target_out = "target.csv";
  std::string labels_out = "target_labels.csv";
};

std::pair<GaussianMixtureSpec, SampleBudget> resolve_spec(const std::string& spec_file, std::uint64_t seed) {
  return spec_file.empty() ? default_paper_spec(seed) : load_mixture_spec(spec_file, seed);
}

int run_simulate(const SimulateArgs& args) {
  const auto [spec, budget] = resolve_spec(args.spec_file, args.seed);
  const SimulatedData data = draw(spec, budget, args.seed);
  write_source_csv(args.source_out, data.source);
  write_target_csv(args.target_out, data.target.points());
  write_labels_csv(args.labels_out, data.target_labels);
  std::cout << "source " << data.source.points.rows() << " rows -> " << args.source_out << '\n'
            << "target " << data.target.size() << " rows -> " << args.target_out << '\n'
            << "labels -> " << args.labels_out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// experiment
//
// Config keys (flags of the same name override the file):
//   data = simulate | files          spec_file, seed          source, target, target_labels
//   repetitions, lambda_grid, losses, iteration_budgets, theta_star
//   sinkhorn_tolerance, sinkhorn_iteration_cap, epsilon_scaling
//   step_size, max_outer_iterations, theta_tolerance, backtracking, max_halvings, warm_start
//   threads, excess_risk, records_out, aggregates_out

const std::vector<std::string> kExperimentKeys = {
    "data", "spec_file", "seed", "source", "target", "target_labels", "repetitions", "lambda_grid", "losses",
    "iteration_budgets", "theta_star", "sinkhorn_tolerance", "sinkhorn_iteration_cap", "epsilon_scaling",
    "step_size", "max_outer_iterations", "theta_tolerance", "backtracking", "max_halvings", "warm_start",
    "threads", "excess_risk", "records_out", "aggregates_out"};

int run_experiment(const std::string& config_path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  KeyValueConfig cfg = config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(config_path);
  for (const auto& [key, value] : overrides) cfg.set(key, value);
  if (const auto unknown = cfg.unknown_keys(kExperimentKeys); !unknown.empty()) {
    throw InputError("experiment config: unknown key '" + unknown.front() + "'");
  }

  SweepConfig sweep;
  sweep.repetitions = static_cast<int>(cfg.get_long("repetitions", sweep.repetitions));
  sweep.base_seed = static_cast<std::uint64_t>(cfg.get_long("seed", static_cast<long>(sweep.base_seed)));
  sweep.lambda_grid = cfg.get_doubles("lambda_grid", sweep.lambda_grid);
  sweep.losses.clear();
  for (const auto& name : cfg.get_strings("losses", {"W0", "Wlambda", "Slambda"})) sweep.losses.push_back(parse_loss_kind(name));
  sweep.iteration_budgets.clear();
  for (const auto& b : cfg.get_strings("iteration_budgets", {"inf"})) sweep.iteration_budgets.push_back(parse_budget(b));
  if (cfg.has("theta_star")) sweep.theta_star = parse_simplex(*cfg.get("theta_star"), "theta_star");
  sweep.sinkhorn_tolerance = cfg.get_double("sinkhorn_tolerance", sweep.sinkhorn_tolerance);
  sweep.sinkhorn_iteration_cap = static_cast<int>(cfg.get_long("sinkhorn_iteration_cap", sweep.sinkhorn_iteration_cap));
  sweep.epsilon_scaling = cfg.get_bool("epsilon_scaling", sweep.epsilon_scaling);
  sweep.descent.step_size = cfg.get_double("step_size", sweep.descent.step_size);
  sweep.descent.max_outer_iterations = static_cast<int>(cfg.get_long("max_outer_iterations", sweep.descent.max_outer_iterations));
  sweep.descent.theta_tolerance = cfg.get_double("theta_tolerance", sweep.descent.theta_tolerance);
  sweep.descent.backtracking = cfg.get_double("backtracking", sweep.descent.backtracking);
  sweep.descent.max_halvings = static_cast<int>(cfg.get_long("max_halvings", sweep.descent.max_halvings));
  sweep.descent.warm_start = cfg.get_bool("warm_start", sweep.descent.warm_start);
  sweep.threads = static_cast<int>(cfg.get_long("threads", sweep.threads));
  sweep.excess_risk = cfg.get_bool("excess_risk", sweep.excess_risk);
  sweep.validate();

  const std::string records_out = cfg.get_string("records_out", "records.csv");
  const std::string aggregates_out = cfg.get_string("aggregates_out", "aggregates.json");
  const std::string data = cfg.get_string("data", "simulate");

  ExperimentReport report;
  if (data == "simulate") {
    const auto [spec, budget] = resolve_spec(cfg.get_string("spec_file", ""), sweep.base_seed);
    if (!sweep.theta_star) sweep.theta_star = spec.target_props;
    report = run_sweep(spec, budget, sweep);
  } else if (data == "files") {
    for (const char* key : {"source", "target"}) {
      if (!cfg.has(key)) throw InputError(std::string("experiment config: data=files needs '") + key + "'");
    }
    const LabeledSample source = read_source_csv(*cfg.get("source"));
    const DiscreteMeasure target = read_measure(*cfg.get("target"));
    if (!sweep.theta_star) {
      if (!cfg.has("target_labels")) throw InputError("experiment config: give theta_star or target_labels");
      sweep.theta_star = evaluate_target_proportions(read_labels_csv(*cfg.get("target_labels")), source.num_classes());
    }
    report = run_sweep(source, target, sweep);
  } else {
    throw InputError("experiment config: data must be 'simulate' or 'files'");
  }

  write_records_csv(records_out, report);
  write_aggregates_json(aggregates_out, report);
  int failures = 0;
  for (const auto& a : report.aggregates) failures += a.failures;
  std::cout << report.records.size() << " runs (" << failures << " failed) -> " << records_out << ", "
            << aggregates_out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport class-proportion estimation"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* cmd_solve = app.add_subcommand("solve", "OT cost between two point clouds");
  cmd_solve->add_option("source", solve.source, "First measure (CSV x1..xd[,label])")->required();
  cmd_solve->add_option("target", solve.target, "Second measure (CSV x1..xd)")->required();
  cmd_solve->add_option("--loss", solve.loss, "W0, Wlambda or Slambda")->capture_default_str();
  cmd_solve->add_option("--lambda", solve.lambda, "Entropic regularisation (> 0)");
  cmd_solve->add_option("--iters", solve.iters, "Sinkhorn iteration budget (0: run to tolerance)")->capture_default_str();
  cmd_solve->add_option("--tol", solve.tol, "Marginal residual tolerance")->capture_default_str();
  cmd_solve->add_flag("--eps-scaling", solve.eps_scaling, "Reach lambda through a halving schedule");
  cmd_solve->add_option("--dual-out", solve.dual_out, "Write potentials CSV");
  cmd_solve->add_option("--plan-out", solve.plan_out, "Write nonzero plan entries CSV");

  EstimateArgs est;
  auto* cmd_est = app.add_subcommand("estimate", "Estimate class proportions of an unlabelled target");
  cmd_est->add_option("--source", est.source, "Labelled source CSV (x1..xd,label)")->required();
  cmd_est->add_option("--target", est.target, "Target CSV (x1..xd)")->required();
  cmd_est->add_option("--loss", est.loss, "W0, Wlambda or Slambda")->capture_default_str();
  cmd_est->add_option("--lambda", est.lambda, "Entropic regularisation (> 0)");
  cmd_est->add_option("--iters", est.iters, "Sinkhorn iteration budget (0: run to tolerance)")->capture_default_str();
  cmd_est->add_option("--tol", est.tol, "Marginal residual tolerance")->capture_default_str();
  cmd_est->add_flag("--eps-scaling", est.eps_scaling, "Reach lambda through a halving schedule");
  cmd_est->add_option("--step", est.descent.step_size, "Initial step size")->capture_default_str();
  cmd_est->add_option("--max-outer", est.descent.max_outer_iterations, "Outer iteration cap")->capture_default_str();
  cmd_est->add_option("--theta-tol", est.descent.theta_tolerance, "Stop when theta moves less than this")->capture_default_str();
  cmd_est->add_option("--backtracking", est.descent.backtracking, "Step shrink factor in (0, 1)")->capture_default_str();
  cmd_est->add_option("--max-halvings", est.descent.max_halvings, "Backtracking steps per iteration")->capture_default_str();
  cmd_est->add_option("--seed-theta", est.seed_theta, "Starting proportions, comma separated (default uniform)");
  cmd_est->add_flag("--no-warm-start", est.no_warm_start, "Start every Sinkhorn solve from zero");
  cmd_est->add_option("--theta-out", est.theta_out, "Result JSON")->capture_default_str();
  cmd_est->add_option("--trace-out", est.trace_out, "Per-iteration loss trace CSV");

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Draw a simulated source/target pair");
  cmd_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  cmd_sim->add_option("--spec-file", sim.spec_file, "Mixture spec (key=value); default: the 5-class protocol");
  cmd_sim->add_option("--source-out", sim.source_out)->capture_default_str();
  cmd_sim->add_option("--target-out", sim.target_out)->capture_default_str();
  cmd_sim->add_option("--labels-out", sim.labels_out)->capture_default_str();

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  auto* cmd_exp = app.add_subcommand("experiment", "Monte Carlo sweep over losses, lambdas and budgets");
  cmd_exp->add_option("--config", config_path, "key=value config file");
  for (const auto& key : kExperimentKeys) {
    std::string flag = "--" + key;
    for (auto& ch : flag) if (ch == '_') ch = '-';
    cmd_exp->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                                              "Override '" + key + "'");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*cmd_solve) return run_solve(solve);
    if (*cmd_est) return run_estimate(est);
    if (*cmd_sim) return run_simulate(sim);
    if (*cmd_exp) return run_experiment(config_path, overrides);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
