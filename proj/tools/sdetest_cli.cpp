// Command-line front end: simulate, estimate, test, power.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdetest/sdetest.hpp"

namespace {

using namespace sdetest;

enum Exit { ok = 0, unexpected = 1, usage = 2, estimation = 3, rao_undefined = 4, failure_budget = 5 };

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::estimation: return estimation;
    case ErrorCode::rao_undefined: return rao_undefined;
    case ErrorCode::failure_budget: return failure_budget;
    case ErrorCode::invalid_argument:
    case ErrorCode::domain:
    case ErrorCode::boundary:
    case ErrorCode::io: return usage;
    default: return unexpected;
  }
}

ParamVector parse_theta(const std::string& text, const Model& model) {
  const auto flat = parse_double_list(text);
  require(flat.size() == model.dim(), "expected " + std::to_string(model.dim()) + " comma-separated parameters");
  const ParamVector theta = ParamVector::from_flat(flat, model.m1);
  const std::size_t bad = model.box.first_violation(theta);
  if (bad < model.box.size()) {
    throw Error(ErrorCode::invalid_argument, "parameter " + std::to_string(bad) + " lies outside the box [" +
                                                 format_double(model.box.lower(bad)) + ", " +
                                                 format_double(model.box.upper(bad)) + "]");
  }
  return theta;
}

Contrast parse_contrast(const std::string& s) {
  if (s == "corrected") return Contrast::corrected;
  if (s == "local_gaussian") return Contrast::local_gaussian;
  throw Error(ErrorCode::invalid_argument, "unknown contrast '" + s + "'");
}

void require_writable(const std::string& file) {
  if (file.empty() || file == "-") return;
  const auto dir = std::filesystem::absolute(file).parent_path();
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::io, "output directory does not exist: " + dir.string());
  }
}

void require_readable(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + file + "'");
}

template <class Write>
void write_output(const std::string& file, Write&& write) {
  if (file.empty() || file == "-") {
    write(std::cout);
    return;
  }
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot open '" + file + "' for writing");
  write(os);
  if (!os) throw Error(ErrorCode::io, "failed writing '" + file + "'");
}

struct SimulateArgs {
  std::string model = "ou";
  std::string theta;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t refine = 30;
  double x0 = 1.0;
  std::optional<double> delta;
  std::string output;
};

int run_simulate(const SimulateArgs& a) {
  require_writable(a.output);
  const Model model = make_model(a.model);
  const ParamVector theta = parse_theta(a.theta, model);
  require(a.n >= 2, "--n must be at least 2");
  const double delta = a.delta ? *a.delta : observation_schedule(a.n).delta;
  const SamplePath path = euler_maruyama(model, theta, SimConfig{a.n, delta, a.refine, a.x0, a.seed});
  write_output(a.output, [&](std::ostream& os) { write_path_csv(os, path); });
  return ok;
}

struct EstimateArgs {
  std::string input;
  std::string model = "ou";
  std::string contrast = "corrected";
  bool adaptive = false;
  bool json = false;
};

nlohmann::json fit_json(const FitResult& fit) {
  nlohmann::json j;
  j["theta_hat"] = fit.theta_hat.flat();
  j["objective"] = fit.objective;
  j["converged"] = fit.converged;
  j["at_boundary"] = fit.at_boundary;
  j["adaptive"] = fit.adaptive;
  j["iterations"] = fit.iterations;
  j["restarts_used"] = fit.restarts_used;
  j["evaluations"] = fit.evaluations;
  if (fit.adaptive) j["stage_objectives"] = fit.stage_objectives;
  return j;
}

int run_estimate(const EstimateArgs& a) {
  require_readable(a.input);
  const QLContext ctx(make_model(a.model), load_path_csv(a.input), parse_contrast(a.contrast));
  const FitResult fit = a.adaptive ? adaptive_estimate(ctx) : mqle(ctx);
  if (a.json) {
    std::cout << fit_json(fit).dump() << '\n';
    return ok;
  }
  std::cout << "theta_hat = " << format_double_list(fit.theta_hat.flat()) << '\n'
            << "objective = " << format_double(fit.objective) << '\n'
            << "converged = " << (fit.converged ? "true" : "false") << '\n'
            << "at_boundary = " << (fit.at_boundary ? "true" : "false") << '\n'
            << "adaptive = " << (fit.adaptive ? "true" : "false") << '\n'
            << "iterations = " << fit.iterations << '\n'
            << "restarts_used = " << fit.restarts_used << '\n';
  return ok;
}

struct TestArgs {
  std::string input;
  std::string model = "ou";
  std::string contrast = "corrected";
  std::string null;
  std::string stat = "t";
  double level = 0.05;
  std::optional<double> threshold;
  std::string theta_hat;
  std::string append;
};

int run_test(const TestArgs& a) {
  require_readable(a.input);
  require_writable(a.append);
  const Model model = make_model(a.model);
  const ParamVector null = parse_theta(a.null, model);
  const bool stepwise = a.stat == "step" || a.stat == "STEP";
  const StatKind kind = stepwise ? StatKind::STEP_BETA : parse_stat_kind(a.stat);
  require(a.level > 0.0 && a.level < 1.0, "--level must lie in (0, 1)");
  if (kind == StatKind::BS && !a.threshold) {
    throw Error(ErrorCode::invalid_argument, "--stat bs needs an empirical --threshold");
  }
  const Calibration cal = a.threshold ? Calibration::empirical(*a.threshold, a.level) : Calibration::asymptotic(a.level);
  const QLContext ctx(model, load_path_csv(a.input), parse_contrast(a.contrast));

  std::vector<TestReport> reports;
  if (stepwise) {
    const auto beta = initial_beta(ctx).beta;
    const auto alpha = adaptive_alpha_step(ctx, beta);
    reports.push_back(stepwise_beta(ctx, beta, null.beta, cal));
    reports.push_back(stepwise_alpha(ctx, alpha, null.alpha, beta, cal));
  } else {
    const ParamVector theta_hat = a.theta_hat.empty() ? mqle(ctx).theta_hat : parse_theta(a.theta_hat, model);
    switch (kind) {
      case StatKind::T: reports.push_back(t_statistic(ctx, theta_hat, null, cal)); break;
      case StatKind::GQLRT: reports.push_back(gqlrt_statistic(ctx, theta_hat, null, cal)); break;
      case StatKind::WALD: reports.push_back(wald_statistic(ctx, theta_hat, null, cal)); break;
      case StatKind::RAO: reports.push_back(rao_statistic(ctx, theta_hat, null, cal)); break;
      case StatKind::AKL: reports.push_back(phi_divergence_statistic(ctx, theta_hat, null, PhiKind::AKL, cal)); break;
      case StatKind::BS: reports.push_back(phi_divergence_statistic(ctx, theta_hat, null, PhiKind::BS, cal)); break;
      default: throw Error(ErrorCode::invalid_argument, "use --stat step for the stepwise statistics");
    }
  }

  std::cout << test_report_csv_header() << '\n';
  for (const auto& r : reports) std::cout << test_report_csv_row(r) << '\n';
  if (!a.append.empty()) {
    const bool fresh = !std::filesystem::exists(a.append) || std::filesystem::file_size(a.append) == 0;
    std::ofstream os(a.append, std::ios::app | std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot open '" + a.append + "' for appending");
    if (fresh) os << test_report_csv_header() << '\n';
    for (const auto& r : reports) os << test_report_csv_row(r) << '\n';
  }
  return ok;
}

struct PowerArgs {
  std::string config;
  std::optional<std::size_t> workers;
  std::string output;
  std::string echo;
};

int run_power(const PowerArgs& a) {
  CliConfig cfg = load_cli_config(a.config);
  if (a.workers) cfg.workers = *a.workers;
  if (!a.output.empty()) cfg.output_csv = a.output;
  if (!a.echo.empty()) cfg.output_echo = a.echo;
  if (cfg.output_echo.empty() && !cfg.output_csv.empty() && cfg.output_csv != "-") {
    cfg.output_echo = cfg.output_csv + ".config";
  }
  require(cfg.workers >= 1, "--workers must be at least 1");
  require_writable(cfg.output_csv);
  require_writable(cfg.output_echo);

  RunOptions opts;
  opts.workers = cfg.workers;
  const PowerTable table = run_power_study(cfg.experiment, opts);
  write_output(cfg.output_csv, [&](std::ostream& os) { write_power_csv(os, table); });
  if (!cfg.output_echo.empty()) {
    write_output(cfg.output_echo, [&](std::ostream& os) { write_config_echo(os, cfg.experiment); });
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypothesis tests for discretely observed ergodic diffusions"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate an observed path (CSV t,x)");
  s->add_option("--model", sim.model, "ou or cir")->capture_default_str();
  s->add_option("--theta", sim.theta, "a1,a2,b1")->required();
  s->add_option("--n", sim.n, "number of increments (>= 2)")->required();
  s->add_option("--seed", sim.seed, "RNG seed")->required();
  s->add_option("--refine", sim.refine, "Euler substeps per observation")->capture_default_str();
  s->add_option("--x0", sim.x0, "initial state")->capture_default_str();
  s->add_option("--delta", sim.delta, "observation step (default n^(-2/3))");
  s->add_option("-o,--output", sim.output, "output file (default stdout)");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Fit the model to a path");
  e->add_option("--input", est.input, "path CSV")->required();
  e->add_option("--model", est.model, "ou or cir")->capture_default_str();
  e->add_option("--contrast", est.contrast, "corrected or local_gaussian")->capture_default_str();
  e->add_flag("--adaptive", est.adaptive, "two-stage adaptive estimator");
  e->add_flag("--json", est.json, "print one JSON record");

  TestArgs tst;
  auto* t = app.add_subcommand("test", "Test a simple null hypothesis on a path");
  t->add_option("--input", tst.input, "path CSV")->required();
  t->add_option("--model", tst.model, "ou or cir")->capture_default_str();
  t->add_option("--contrast", tst.contrast, "corrected or local_gaussian")->capture_default_str();
  t->add_option("--null", tst.null, "a1,a2,b1")->required();
  t->add_option("--stat", tst.stat, "t, gqlrt, wald, rao, akl, bs or step")->capture_default_str();
  t->add_option("--level", tst.level, "test level")->capture_default_str();
  t->add_option("--threshold", tst.threshold, "empirical threshold (otherwise chi-square)");
  t->add_option("--theta-hat", tst.theta_hat, "use this estimate instead of fitting");
  t->add_option("--append", tst.append, "append the report row to this CSV");

  PowerArgs pw;
  auto* p = app.add_subcommand("power", "Run a Monte Carlo power study");
  p->add_option("--config", pw.config, "flat key = value config file")->required();
  p->add_option("--workers", pw.workers, "worker threads (results do not depend on it)");
  p->add_option("-o,--output", pw.output, "power table CSV (overrides output.csv)");
  p->add_option("--echo", pw.echo, "config echo file (overrides output.echo)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? ok : usage;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*e) return run_estimate(est);
    if (*t) return run_test(tst);
    if (*p) return run_power(pw);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code(err);
  } catch (const std::exception& err) {
    std::cerr << "unexpected error: " << err.what() << '\n';
    return unexpected;
  }
  return unexpected;
}
