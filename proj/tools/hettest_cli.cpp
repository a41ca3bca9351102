// Command-line front end: test a CSV dataset, or run size/power simulations.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hettest/hettest.hpp"

namespace {

using namespace hettest;
using nlohmann::json;

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct CommonOptions {
  std::vector<std::string> methods;
  double h1_const = 1.0;
  std::optional<double> c_n;
  int boot_reps = 500;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

struct TestOptions {
  std::string input;
  std::string response;
  std::vector<std::string> covariates;
  std::vector<double> h_mults;
  double alpha = 0.05;
  std::string residuals;
  std::vector<double> speed_distances;
  std::vector<std::string> time_units;
};

struct SimOptions {
  std::string example = "ex1";
  long n = 200;
  int p = 2;
  double a = 0.0;
  std::string cov = "sigma1";
  std::string error;
  std::string base = "ex1";
  std::string shape = "square";
  bool nonstandard = false;
  double h_mult = 1.25;
  std::vector<double> alphas;
  long reps = 200;
  unsigned threads = 0;
  std::vector<double> a_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<int> p_grid{2, 4, 6, 8, 10, 12};
  std::vector<double> multipliers = default_multipliers();
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t> &flag) {
  if (flag)
    return *flag;
  if (const char *env = std::getenv("HET_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception &) {
      throw DomainError(std::string("HET_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return 1;
}

std::vector<Method> resolve_methods(const std::vector<std::string> &names) {
  std::vector<Method> out;
  for (const auto &n : names)
    out.push_back(parse_method(n));
  if (out.empty())
    out.push_back(Method::drmat);
  return out;
}

TestConfig make_config(const CommonOptions &c, double h_mult, std::uint64_t seed) {
  TestConfig cfg;
  cfg.h_multiplier = h_mult;
  cfg.h1_constant = c.h1_const;
  cfg.c_n = c.c_n;
  cfg.boot_reps = c.boot_reps;
  cfg.seed = seed;
  return cfg;
}

void emit(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write '" + path + "'");
  out << text;
}

void add_common(CLI::App *cmd, CommonOptions &c) {
  cmd->add_option("--method", c.methods, "drmat | zheng | zfn | zfn-low (repeatable)");
  cmd->add_option("--h1-const", c.h1_const, "mean bandwidth constant")->check(CLI::PositiveNumber);
  cmd->add_option("--c-n", c.c_n, "fixed ridge constant for dimension selection")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--boot-reps", c.boot_reps, "wild-bootstrap replicates (zfn)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "master seed (fallback: HET_SEED)");
  cmd->add_option("--out", c.out, "output path (default stdout)");
  cmd->add_option("--format", c.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
}

// ---------------------------------------------------------------------------
// test

int run_test_command(const CommonOptions &common, const TestOptions &opt) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t seed = resolve_seed(common.seed);
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0))
    throw DomainError("--alpha must lie in (0, 1)");

  const io::CsvTable table = io::read_csv_table(opt.input);
  Dataset data = io::dataset_from_table(table, opt.response, opt.covariates);
  io::require_min_rows(data);
  if (!opt.speed_distances.empty()) {
    if (opt.speed_distances.size() != opt.covariates.size() + 1)
      throw DomainError("--speed-distances needs one distance for the response and each covariate");
    std::vector<io::TimeUnit> units;
    for (const auto &u : opt.time_units)
      units.push_back(io::parse_time_unit(u));
    if (!units.empty() && units.size() != opt.speed_distances.size())
      throw DomainError("--time-units needs one unit per converted column");
    Matrix times(data.n(), data.p() + 1);
    times.col(0) = data.y;
    times.rightCols(data.p()) = data.X;
    const Matrix speeds = io::to_speeds(times, opt.speed_distances, units);
    data.y = speeds.col(0);
    data.X = speeds.rightCols(data.p());
  }

  std::vector<double> mults = opt.h_mults;
  if (mults.empty())
    mults.push_back(1.25);

  json results = json::array();
  std::optional<DrmatOutcome> first_drmat;
  for (Method m : resolve_methods(common.methods)) {
    for (double mult : mults) {
      const TestConfig cfg = make_config(common, mult, seed);
      json entry;
      if (m == Method::drmat) {
        DrmatOutcome outcome = drmat_detailed(data, cfg);
        entry = io::to_json(outcome.result);
        entry["basis"] = io::matrix_to_json(outcome.basis.basis);
        entry["eigenvalues"] = io::vector_to_json(outcome.basis.eigenvalues);
        entry["c_n"] = outcome.basis.c_n;
        entry["p_value_reject"] = outcome.result.p_value <= opt.alpha;
        if (!first_drmat)
          first_drmat = std::move(outcome);
      } else {
        const TestResult r = run_test(m, data, cfg);
        entry = io::to_json(r);
        entry["p_value_reject"] = r.p_value <= opt.alpha;
      }
      entry["h_multiplier"] = mult;
      results.push_back(std::move(entry));
    }
  }

  // Residual-vs-index pairs for plotting.
  std::string residual_path = opt.residuals;
  if (residual_path.empty() && !common.out.empty() && common.out != "-") {
    std::filesystem::path p(common.out);
    residual_path = (p.parent_path() / (p.stem().string() + "_residuals.csv")).string();
  }
  if (first_drmat && !residual_path.empty()) {
    std::ostringstream csv;
    csv << "row,residual,index1\n";
    const Vector index1 = data.X * first_drmat->basis.basis.col(0);
    for (Eigen::Index i = 0; i < data.n(); ++i)
      csv << (i + 1) << ',' << io::format_double(first_drmat->fit.resid[i]) << ','
          << io::format_double(index1[i]) << '\n';
    emit(residual_path, csv.str());
  }

  if (common.format == "csv") {
    std::ostringstream csv;
    csv << "method,h_mult,statistic,raw_stat,variance_est,qhat,p_value,reject,n,p,h,h1\n";
    for (const auto &r : results) {
      auto num = [&](const char *k) {
        return r[k].is_null() ? std::string() : io::format_double(r[k].get<double>());
      };
      csv << r["method"].get<std::string>() << ',' << num("h_multiplier") << ','
          << num("statistic") << ',' << num("raw_stat") << ',' << num("variance_est") << ','
          << (r["qhat"].is_null() ? std::string() : std::to_string(r["qhat"].get<int>())) << ','
          << num("p_value") << ',' << (r["p_value_reject"].get<bool>() ? 1 : 0) << ','
          << r["n"].get<long>() << ',' << r["p"].get<long>() << ',' << num("h") << ','
          << num("h1") << '\n';
    }
    emit(common.out, csv.str());
    return kOk;
  }

  json report;
  report["command"] = "test";
  report["input"] = opt.input;
  report["response"] = opt.response;
  report["covariates"] = opt.covariates;
  report["alpha"] = opt.alpha;
  report["seed"] = seed;
  report["results"] = std::move(results);
  report["metadata"] = {
      {"wall_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};
  emit(common.out, report.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------
// simulations

ScenarioSpec make_spec(const SimOptions &s, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.example = parse_example(s.example);
  spec.n = s.n;
  spec.p = s.p;
  spec.a = s.a;
  spec.covariance = parse_covariance(s.cov);
  if (!s.error.empty())
    spec.error = parse_error_law(s.error);
  else
    spec.error = (spec.example == Example::ex2 ||
                  (spec.example == Example::local && parse_example(s.base) == Example::ex2))
                     ? ErrorLaw::student_t6
                     : ErrorLaw::std_normal;
  spec.base = parse_example(s.base);
  spec.shape = parse_local_shape(s.shape);
  spec.allow_nonstandard = s.nonstandard;
  spec.seed = seed;
  return spec;
}

HarnessOptions make_harness(const CommonOptions &c, const SimOptions &s) {
  HarnessOptions h;
  h.config = make_config(c, s.h_mult, 0);
  if (!s.alphas.empty())
    h.alphas = s.alphas;
  h.threads = s.threads;
  return h;
}

void write_report(const CommonOptions &c, const ExperimentReport &rep) {
  if (c.format == "csv") {
    std::ostringstream csv;
    io::write_report_csv(csv, rep);
    emit(c.out, csv.str());
  } else {
    emit(c.out, io::to_json(rep).dump(2) + "\n");
  }
}

void add_sim(CLI::App *cmd, SimOptions &s) {
  cmd->add_option("--example", s.example, "ex1 | ex2 | ex3 | local");
  cmd->add_option("--n", s.n, "sample size")->check(CLI::Range(2L, 100000000L));
  cmd->add_option("--p", s.p, "covariate dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--a", s.a, "heteroscedasticity strength")->check(CLI::NonNegativeNumber);
  cmd->add_option("--cov", s.cov, "sigma1 | sigma2")->check(CLI::IsMember({"sigma1", "sigma2"}));
  cmd->add_option("--error", s.error, "std_normal | student_t6 (default per example)");
  cmd->add_option("--base", s.base, "base example for --example local");
  cmd->add_option("--shape", s.shape, "local alternative variance shape: zero | square");
  cmd->add_flag("--nonstandard", s.nonstandard, "allow non-default covariance/error laws");
  cmd->add_option("--h-mult", s.h_mult, "test bandwidth multiplier")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", s.alphas, "nominal levels (repeatable)");
  cmd->add_option("--reps", s.reps, "replications")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", s.threads, "worker threads (0: all cores)");
}

template <class Fn>
int guarded(Fn &&fn) {
  auto fail = [](int code, const char *kind, const std::string &msg) {
    json err{{"error", {{"kind", kind}, {"message", msg}, {"exit_code", code}}}};
    std::cerr << err.dump() << "\n";
    return code;
  };
  try {
    return fn();
  } catch (const DomainError &e) {
    return fail(kUsage, "usage", e.what());
  } catch (const DegenerateDataError &e) {
    return fail(kData, "degenerate_data", e.what());
  } catch (const DataError &e) {
    return fail(kData, "data", e.what());
  } catch (const NumericalError &e) {
    return fail(kNumerical, "numerical", e.what());
  } catch (const std::exception &e) {
    return fail(kNumerical, "internal", e.what());
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Heteroscedasticity tests for regression models"};
  app.require_subcommand(1);

  CommonOptions common;
  TestOptions topt;
  SimOptions sim;

  auto *test = app.add_subcommand("test", "run tests on a CSV dataset");
  add_common(test, common);
  test->add_option("--input", topt.input, "CSV file with a header row")->required();
  test->add_option("--response", topt.response, "response column (name or 0-based index)")
      ->required();
  test->add_option("--covariates", topt.covariates, "covariate columns")
      ->required()
      ->delimiter(',');
  test->add_option("--h-mult", topt.h_mults, "test bandwidth multipliers (repeatable)");
  test->add_option("--alpha", topt.alpha, "nominal level for the reject flag");
  test->add_option("--residuals", topt.residuals, "residual-vs-index CSV path");
  test->add_option("--speed-distances", topt.speed_distances,
                   "convert times to speeds: metres for response then each covariate")
      ->delimiter(',');
  test->add_option("--time-units", topt.time_units, "s | min | h per converted column")
      ->delimiter(',');

  auto *simulate = app.add_subcommand("simulate", "rejection rates for one scenario");
  auto *power = app.add_subcommand("power-curve", "rejection rates over a grid of a");
  auto *dims = app.add_subcommand("dim-sweep", "rejection rates over covariate dimensions");
  auto *bws = app.add_subcommand("bw-sweep", "rejection rates over bandwidth multipliers");
  auto *gen = app.add_subcommand("generate", "write one simulated dataset as CSV");
  for (auto *cmd : {simulate, power, dims, bws, gen}) {
    add_common(cmd, common);
    add_sim(cmd, sim);
  }
  power->add_option("--a-grid", sim.a_grid, "values of a")->delimiter(',');
  dims->add_option("--p-grid", sim.p_grid, "covariate dimensions")->delimiter(',');
  bws->add_option("--multipliers", sim.multipliers, "bandwidth multipliers")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kUsage;
  }

  return guarded([&]() -> int {
    if (test->parsed())
      return run_test_command(common, topt);

    const std::uint64_t seed = resolve_seed(common.seed);
    const ScenarioSpec spec = make_spec(sim, seed);
    if (gen->parsed()) {
      std::ostringstream csv;
      io::write_dataset_csv(csv, generate(spec));
      emit(common.out, csv.str());
      return kOk;
    }

    const HarnessOptions hopts = make_harness(common, sim);
    const std::vector<Method> methods = resolve_methods(common.methods);
    ExperimentReport rep;
    if (simulate->parsed()) {
      const auto t0 = std::chrono::steady_clock::now();
      rep.master_seed = seed;
      rep.config = hopts.config;
      for (Method m : methods)
        for (auto &row : rejection_rates(spec, m, sim.reps, hopts))
          rep.rows.push_back(std::move(row));
      rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else if (power->parsed()) {
      for (Method m : methods) {
        ExperimentReport part = power_curve_a(spec, sim.a_grid, m, sim.reps, hopts);
        if (rep.rows.empty())
          rep = part;
        else {
          rep.rows.insert(rep.rows.end(), part.rows.begin(), part.rows.end());
          rep.wall_seconds += part.wall_seconds;
        }
      }
    } else if (dims->parsed()) {
      rep = dimension_sweep(spec, sim.p_grid, methods, sim.reps, hopts);
    } else {
      for (Method m : methods) {
        ExperimentReport part = bandwidth_sweep(spec, sim.multipliers, m, sim.reps, hopts);
        if (rep.rows.empty())
          rep = part;
        else {
          rep.rows.insert(rep.rows.end(), part.rows.begin(), part.rows.end());
          rep.wall_seconds += part.wall_seconds;
        }
      }
    }
    write_report(common, rep);
    return kOk;
  });
}
