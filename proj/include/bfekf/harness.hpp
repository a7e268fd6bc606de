#pragma once

#include <bfekf/estimator.hpp>
#include <bfekf/types.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bfekf::harness {

enum class ExperimentId { example1, tire, intersection, bench_eval, bench_predict };

std::string experiment_name(ExperimentId id);
// Throws ConfigError for unknown names.
ExperimentId parse_experiment(const std::string& name);

// Flat "section.key" -> value store read from an INI file. Every lookup is
// recorded so unknown keys can be rejected after an experiment has read its
// parameters.
class Config {
 public:
  Config() = default;
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  // Throws ConfigError naming every key that was never looked up.
  void reject_unused() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

struct RunOptions {
  ExperimentId experiment = ExperimentId::example1;
  Config config;
  std::uint64_t seed = 1;
  std::optional<int> runs;                  // overrides the config's run count
  std::filesystem::path out_root = "results";
  std::vector<Method> methods;              // empty: experiment default
  std::vector<Index> nw_sweep;              // benchmarks; empty: default sweep
  bool write_outputs = true;
};

// Result of one experiment: machine-readable metrics plus the directory the
// report was written to (empty if write_outputs is false).
struct Report {
  nlohmann::json metrics;
  std::filesystem::path directory;
};

Report run(const RunOptions& options);

// Individual experiments. Each reads its keys from options.config.
Report run_example1(const RunOptions& options);
Report run_tire(const RunOptions& options);
Report run_intersection(const RunOptions& options);
Report run_bench_eval(const RunOptions& options);
Report run_bench_predict(const RunOptions& options);

// Parallelism for Monte Carlo runs: BFEKF_THREADS if set, else the hardware
// concurrency, never below 1.
unsigned worker_count();

// Calls body(i) for i in [0, n) on up to worker_count() threads. The first
// exception thrown by any call is rethrown after all threads finish.
void parallel_for(Index n, const std::function<void(Index)>& body);

// sqrt(mean((a - b)^2)) over all entries. Throws on empty or mismatched input.
double compute_rmse(const Mat& estimates, const Mat& truth);
double compute_rmse(const std::vector<double>& estimates, const std::vector<double>& truth);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for fewer than two values
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
Summary summarize(std::vector<double> values);
nlohmann::json to_json(const Summary& s);

// Table written as a CSV with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};
void write_table(const std::filesystem::path& path, const Table& table);
std::string format_number(double v);

// results/<experiment>/<timestamp> (suffixed if it already exists).
std::filesystem::path make_output_directory(const std::filesystem::path& root, const std::string& experiment);

}  // namespace bfekf::harness
