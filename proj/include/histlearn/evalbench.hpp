#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "histlearn/workload.hpp"

namespace histlearn::evalbench {

/// Mean of |s - s_hat| / max(100, s) over the test set, in percent.
double avg_rel_error(std::span<const double> truths, std::span<const double> estimates);

enum class Method { equihist, sphist, online_equihist };

std::string method_name(Method m);

enum class SweepVar { train_queries, buckets, range };

std::string sweep_var_name(SweepVar v);

/// One seeded, deterministic experiment sweep: per (sweep value, seed),
/// generate data, generate and label workloads, fit each method, measure
/// test error.
struct ExperimentConfig {
  workload::Preset preset = workload::Preset::type1;
  std::vector<std::int64_t> ranges = {1024};
  std::int64_t records = 100000;
  workload::QueryModel model = workload::QueryModel::uniform;
  double max_volume_fraction = 0.2;
  std::vector<Method> methods = {Method::equihist, Method::sphist};
  std::int64_t buckets = 20;
  std::int64_t train_queries = 400;
  std::int64_t test_queries = 5000;
  std::vector<std::uint64_t> seeds;  // resolved by the caller
  SweepVar sweep = SweepVar::train_queries;
  std::vector<std::int64_t> sweep_values;
  double online_gamma = 1.0;  // for the online method
  std::int64_t omp_budget = 0;
  bool omp_normalize = false;

  /// Parses `key = value` lines; '#' starts a comment. Unknown keys are
  /// rejected. The seeds key lists per-run seed offsets.
  static ExperimentConfig parse(std::istream& in);

  void validate() const;
};

struct ResultRow {
  std::string method;
  std::string sweep_var;
  std::int64_t sweep_value = 0;
  double mean_err_pct = 0.0;
  double std_err_pct = 0.0;
  int seeds = 0;
  double wall_ms = 0.0;             // mean per-seed fit+eval wall time
  std::vector<double> per_seed_err; // kept in memory, not written to CSV
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

ResultTable run_experiment(const ExperimentConfig& cfg, int jobs = 1);

/// Writes the results CSV and a gnuplot script (log-scale error axis, one
/// series per method, data inlined).
void emit_results(const ResultTable& table, const std::string& csv_path,
                  const std::string& plot_path);

}  // namespace histlearn::evalbench
