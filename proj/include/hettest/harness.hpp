#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hettest/errors.hpp"
#include "hettest/hetero_tests.hpp"
#include "hettest/random.hpp"
#include "hettest/scenarios.hpp"

namespace hettest {

/// One (scenario, method, alpha) cell of a size/power table.
struct RateRow {
  ScenarioSpec spec;  // spec.seed holds the master seed
  Method method = Method::drmat;
  double alpha = 0.05;
  double h_multiplier = 1.25;
  long first_rep = 0;
  long reps = 0;
  long rejections = 0;
  long errors = 0;  // replications that failed; counted as non-rejections
  double rate = 0.0;
  double mc_stderr = 0.0;
  std::map<int, long> qhat_counts;  // drmat only

  bool operator==(const RateRow &) const = default;
};

struct ExperimentReport {
  std::vector<RateRow> rows;
  std::uint64_t master_seed = 0;
  TestConfig config;
  double wall_seconds = 0.0;
};

struct HarnessOptions {
  std::vector<double> alphas{0.05};
  TestConfig config;
  long first_rep = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

using TestFunction = std::function<TestResult(const Dataset &, const TestConfig &)>;

inline double mc_stderr(double rate, long reps) {
  return reps > 0 ? std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps)) : 0.0;
}

inline void finalize(RateRow &row) {
  row.rate = row.reps > 0 ? static_cast<double>(row.rejections) / row.reps : 0.0;
  row.mc_stderr = mc_stderr(row.rate, row.reps);
}

/// Pools two runs of the same cell over adjacent replication ranges.
inline RateRow merge(const RateRow &a, const RateRow &b) {
  detail::require(a.spec == b.spec && a.method == b.method && a.alpha == b.alpha &&
                      a.h_multiplier == b.h_multiplier,
                  "merge: rows describe different cells");
  RateRow out = a;
  out.first_rep = std::min(a.first_rep, b.first_rep);
  out.reps = a.reps + b.reps;
  out.rejections = a.rejections + b.rejections;
  out.errors = a.errors + b.errors;
  for (const auto &[q, c] : b.qhat_counts)
    out.qhat_counts[q] += c;
  finalize(out);
  return out;
}

namespace detail {

struct ReplicationOutcome {
  double p_value = 1.0;
  int qhat = 0;
  bool failed = false;
};

template <class Body>
void parallel_for(long count, unsigned threads, Body body) {
  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, std::max(1L, count)));
  if (threads <= 1) {
    for (long i = 0; i < count; ++i)
      body(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (long i = next++; i < count; i = next++)
        body(i);
    });
  for (auto &th : pool)
    th.join();
}

} // namespace detail

/// Seed of the dataset for replication `rep` under `master`.
inline std::uint64_t replication_seed(std::uint64_t master, long rep) {
  return derive_seed(master, static_cast<std::uint64_t>(rep));
}

/// Runs `reps` replications of `spec` (seeds derived from spec.seed and the
/// replication index) and returns one row per alpha. Per-replication
/// errors are tallied in `errors` and never rejected.
inline std::vector<RateRow> rejection_rates(const ScenarioSpec &spec, Method method,
                                            const TestFunction &test, long reps,
                                            const HarnessOptions &opts = {}) {
  detail::require(reps >= 1, "rejection_rate: reps must be >= 1");
  for (double a : opts.alphas)
    detail::require(a > 0.0 && a < 1.0, "rejection_rate: alpha must lie in (0, 1)");

  std::vector<detail::ReplicationOutcome> outcomes(static_cast<std::size_t>(reps));
  detail::parallel_for(reps, opts.threads, [&](long k) {
    const long rep = opts.first_rep + k;
    ScenarioSpec local = spec;
    local.seed = replication_seed(spec.seed, rep);
    TestConfig cfg = opts.config;
    cfg.seed = derive_seed(local.seed, 0xB007);
    auto &out = outcomes[static_cast<std::size_t>(k)];
    try {
      const TestResult r = test(generate(local), cfg);
      out.p_value = r.p_value;
      out.qhat = r.qhat.value_or(0);
    } catch (const std::exception &) {
      out.failed = true;
    }
  });

  std::vector<RateRow> rows;
  for (double alpha : opts.alphas) {
    RateRow row;
    row.spec = spec;
    row.method = method;
    row.alpha = alpha;
    row.h_multiplier = opts.config.h_multiplier;
    row.first_rep = opts.first_rep;
    row.reps = reps;
    for (const auto &o : outcomes) {
      if (o.failed) {
        ++row.errors;
        continue;
      }
      if (o.p_value <= alpha)
        ++row.rejections;
      if (o.qhat > 0)
        ++row.qhat_counts[o.qhat];
    }
    finalize(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<RateRow> rejection_rates(const ScenarioSpec &spec, Method method, long reps,
                                            const HarnessOptions &opts = {}) {
  return rejection_rates(
      spec, method, [method](const Dataset &d, const TestConfig &c) { return run_test(method, d, c); },
      reps, opts);
}

inline RateRow rejection_rate(const ScenarioSpec &spec, Method method, double alpha, long reps,
                              HarnessOptions opts = {}) {
  opts.alphas = {alpha};
  return rejection_rates(spec, method, reps, opts).front();
}

namespace detail {

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline ExperimentReport start_report(const ScenarioSpec &base, const HarnessOptions &opts) {
  ExperimentReport rep;
  rep.master_seed = base.seed;
  rep.config = opts.config;
  return rep;
}

inline void append(ExperimentReport &rep, std::vector<RateRow> rows) {
  for (auto &r : rows)
    rep.rows.push_back(std::move(r));
}

} // namespace detail

/// Rows over the heteroscedasticity strength grid.
inline ExperimentReport power_curve_a(const ScenarioSpec &base, const std::vector<double> &a_grid,
                                      Method method, long reps, const HarnessOptions &opts = {}) {
  detail::Stopwatch clock;
  ExperimentReport rep = detail::start_report(base, opts);
  for (double a : a_grid) {
    ScenarioSpec s = base;
    s.a = a;
    detail::append(rep, rejection_rates(s, method, reps, opts));
  }
  rep.wall_seconds = clock.seconds();
  return rep;
}

/// Rows over the covariate dimension for each method.
inline ExperimentReport dimension_sweep(const ScenarioSpec &base, const std::vector<int> &p_grid,
                                        const std::vector<Method> &methods, long reps,
                                        const HarnessOptions &opts = {}) {
  detail::Stopwatch clock;
  ExperimentReport rep = detail::start_report(base, opts);
  for (int p : p_grid) {
    ScenarioSpec s = base;
    s.p = p;
    for (Method m : methods)
      detail::append(rep, rejection_rates(s, m, reps, opts));
  }
  rep.wall_seconds = clock.seconds();
  return rep;
}

inline std::vector<double> default_multipliers() {
  std::vector<double> m;
  for (int i = 0; i <= 5; ++i)
    m.push_back(0.5 + 0.25 * i);
  return m;
}

/// Rows over test-bandwidth multipliers.
inline ExperimentReport bandwidth_sweep(const ScenarioSpec &spec, const std::vector<double> &multipliers,
                                        Method method, long reps, const HarnessOptions &opts = {}) {
  detail::Stopwatch clock;
  ExperimentReport rep = detail::start_report(spec, opts);
  for (double mult : multipliers) {
    HarnessOptions o = opts;
    o.config.h_multiplier = mult;
    detail::append(rep, rejection_rates(spec, method, reps, o));
  }
  rep.wall_seconds = clock.seconds();
  return rep;
}

/// True when consecutive rates never drop by more than `k_stderr` combined
/// Monte Carlo standard errors.
inline bool nondecreasing_within_noise(const std::vector<RateRow> &rows, double k_stderr = 2.0) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double tol =
        k_stderr * std::hypot(rows[i - 1].mc_stderr, rows[i].mc_stderr);
    if (rows[i].rate < rows[i - 1].rate - tol)
      return false;
  }
  return true;
}

} // namespace hettest
