#include <bfekf/harness.hpp>

#include "report_util.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>

namespace bfekf::harness {

namespace {

using Clock = std::chrono::steady_clock;

struct BenchSettings {
  std::vector<Index> sweep;
  int warmup = 3;
  int repetitions = 20;
  int points = 64;
  double support = 5.0;
  double spacing = 1.0;
  double length_scale = 1.0;
  double dense_limit_bytes = 1073741824.0;
};

BenchSettings read_settings(const RunOptions& options) {
  const Config& cfg = options.config;
  BenchSettings s;
  const auto configured = cfg.numbers("bench.nw_sweep", {1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5});
  if (!options.nw_sweep.empty()) {
    s.sweep = options.nw_sweep;
  } else {
    for (const double v : configured) s.sweep.push_back(static_cast<Index>(std::llround(v)));
  }
  s.warmup = static_cast<int>(cfg.integer("bench.warmup", s.warmup));
  s.repetitions = static_cast<int>(cfg.integer("bench.repetitions", s.repetitions));
  s.points = static_cast<int>(cfg.integer("bench.points", s.points));
  s.support = cfg.number("basis.support", s.support);
  s.spacing = cfg.number("basis.spacing", s.spacing);
  s.length_scale = cfg.number("basis.length_scale", s.length_scale);
  s.dense_limit_bytes = cfg.number("bench.dense_memory_limit_bytes", s.dense_limit_bytes);
  if (s.sweep.empty()) throw ConfigError("empty n_w sweep");
  for (const Index n : s.sweep) {
    if (n < 8) throw ConfigError("n_w sweep values must be at least 8");
  }
  if (s.warmup < 0 || s.repetitions < 1 || s.points < 1) throw ConfigError("invalid benchmark repetition counts");
  return s;
}

// Square 2D grid with about n_w / 2 centers, two outputs sharing it.
basis::CartesianGrid square_grid(Index total_weights, double spacing) {
  const auto m = std::max<Index>(2, static_cast<Index>(std::llround(std::sqrt(static_cast<double>(total_weights) / 2.0))));
  const double extent = spacing * static_cast<double>(m - 1);
  return basis::CartesianGrid::regular(Eigen::Vector2d::Zero(), Eigen::Vector2d::Constant(extent), spacing);
}

// Median seconds per call of body over the repetitions, after warmup.
template <class Body>
Summary time_calls(const BenchSettings& s, double calls_per_rep, Body&& body) {
  for (int i = 0; i < s.warmup; ++i) body();
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(s.repetitions));
  for (int i = 0; i < s.repetitions; ++i) {
    const auto start = Clock::now();
    body();
    t.push_back(std::chrono::duration<double>(Clock::now() - start).count() / calls_per_rep);
  }
  return summarize(std::move(t));
}

// Least-squares slope of log(t) against log(n).
double loglog_slope(const std::vector<double>& n, const std::vector<double>& t) {
  if (n.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    mx += std::log(n[i]);
    my += std::log(t[i]);
  }
  mx /= static_cast<double>(n.size());
  my /= static_cast<double>(n.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    sxy += (std::log(n[i]) - mx) * (std::log(t[i]) - my);
    sxx += (std::log(n[i]) - mx) * (std::log(n[i]) - mx);
  }
  return sxy / sxx;
}

bool dense_fits(Index centers, const BenchSettings& s, double* bytes) {
  const auto mem = memory_estimate(static_cast<std::uint64_t>(centers), 2, 64);
  *bytes = static_cast<double>(mem.total_bits()) / 8.0;
  return *bytes <= s.dense_limit_bytes;
}

}  // namespace

Report run_bench_eval(const RunOptions& options) {
  const BenchSettings s = read_settings(options);
  options.config.reject_unused();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;

  Report report;
  report.directory = detail::open_report(options);
  nlohmann::json& m = report.metrics;
  m["experiment"] = "bench-eval";
  m["repetitions"] = s.repetitions;
  m["points_per_repetition"] = s.points;
  Table table{{"n_w", "centers", "dense_median_s", "dense_std_s", "csrbf_median_s", "csrbf_std_s", "fast_csrbf_median_s",
               "fast_csrbf_std_s", "fast_csrbf_stacked_median_s", "staggered_over_stacked"},
              {}};

  volatile double sink = 0.0;
  for (const Index requested : s.sweep) {
    const auto grid = square_grid(requested, s.spacing);
    const Index nw = 2 * grid.size();
    const double extent = grid.axis(0).back();
    std::uniform_real_distribution<double> coord(0.0, extent);
    std::vector<Vec> pts(static_cast<std::size_t>(s.points));
    for (auto& p : pts) p = Eigen::Vector2d(coord(rng), coord(rng));
    Vec theta(nw);
    for (Index i = 0; i < nw; ++i) theta(i) = normal(rng);

    const Expansion dense{grid, basis::BasisConfig::gaussian(s.length_scale), 2, WeightOrdering::staggered};
    const Expansion compact{grid, basis::BasisConfig::wendland(s.support), 2, WeightOrdering::staggered};
    const Expansion stacked{grid, basis::BasisConfig::wendland(s.support), 2, WeightOrdering::stacked};
    const auto per_rep = static_cast<double>(s.points);
    auto eval = [&](const Expansion& ex, basis::Selection sel) {
      return [&, sel] {
        double acc = 0.0;
        for (const auto& p : pts) acc += eval_unknown(ex, p, theta, sel).sum();
        sink = sink + acc;
      };
    };
    const Summary d = time_calls(s, per_rep, eval(dense, basis::Selection::exact));
    const Summary e = time_calls(s, per_rep, eval(compact, basis::Selection::exact));
    const Summary f = time_calls(s, per_rep, eval(compact, basis::Selection::fast));
    const Summary fs = time_calls(s, per_rep, eval(stacked, basis::Selection::fast));
    const double ratio = f.median / fs.median;

    nlohmann::json row = {{"n_w", nw},
                          {"centers", grid.size()},
                          {"dense", to_json(d)},
                          {"csrbf", to_json(e)},
                          {"fast_csrbf", to_json(f)},
                          {"fast_csrbf_stacked", to_json(fs)},
                          {"staggered_over_stacked", ratio}};
    m["sweep"].push_back(row);
    table.add({std::to_string(nw), std::to_string(grid.size()), format_number(d.median), format_number(d.stddev),
               format_number(e.median), format_number(e.stddev), format_number(f.median), format_number(f.stddev),
               format_number(fs.median), format_number(ratio)});
  }
  const auto& sw = m["sweep"];
  const double first = sw.front()["fast_csrbf"]["median"].get<double>();
  const double last = sw.back()["fast_csrbf"]["median"].get<double>();
  m["fast_csrbf_ratio_last_over_first"] = last / first;
  // Closest sweep entry to 1e4 weights.
  std::size_t near = 0;
  for (std::size_t i = 0; i < sw.size(); ++i) {
    const auto nw = static_cast<double>(sw[i]["n_w"].get<Index>());
    const auto best = static_cast<double>(sw[near]["n_w"].get<Index>());
    if (std::abs(std::log(nw / 1e4)) < std::abs(std::log(best / 1e4))) near = i;
  }
  m["dense_over_fast_near_1e4"] = {{"n_w", sw[near]["n_w"]},
                                   {"ratio", sw[near]["dense"]["median"].get<double>() /
                                                 sw[near]["fast_csrbf"]["median"].get<double>()}};
  if (!report.directory.empty()) write_table(report.directory / "table.csv", table);
  return report;
}

Report run_bench_predict(const RunOptions& options) {
  const BenchSettings s = read_settings(options);
  const double Ts = options.config.number("model.sample_time", 0.2);
  const double q = options.config.number("model.process_variance", 0.1);
  const double r = options.config.number("model.measurement_variance", 0.2);
  const double prior = options.config.number("model.prior_weight_variance", 0.01);
  options.config.reject_unused();

  Report report;
  report.directory = detail::open_report(options);
  nlohmann::json& m = report.metrics;
  m["experiment"] = "bench-predict";
  m["repetitions"] = s.repetitions;
  Table table{{"n_w", "centers", "memory_bytes", "dense_median_s", "dense_std_s", "csrbf_median_s", "csrbf_std_s",
               "fast_csrbf_median_s", "fast_csrbf_std_s"},
              {}};
  const Mat Qw = q * Mat::Identity(2, 2);
  const Mat R = r * Mat::Identity(2, 2);
  std::vector<double> dense_n, dense_t;
  std::optional<Index> dense_cap;

  for (const Index requested : s.sweep) {
    const auto grid = square_grid(requested, s.spacing);
    const Index nw = 2 * grid.size();
    const double mid = 0.5 * grid.axis(0).back();
    Vec x0(4);
    x0 << mid, mid, 0.0, 0.0;
    const Mat P0 = 0.1 * Mat::Identity(4, 4);
    const Vec u(0);
    double bytes = 0.0;
    const bool fits = dense_fits(grid.size(), s, &bytes);

    nlohmann::json row = {{"n_w", nw}, {"centers", grid.size()}, {"memory_bytes", bytes}};
    std::vector<std::string> cells{std::to_string(nw), std::to_string(grid.size()), format_number(bytes)};
    for (const Method method : {Method::dense, Method::csrbf, Method::fast_csrbf}) {
      const std::string name(method_name(method));
      if (method == Method::dense && !fits) {
        if (!dense_cap) dense_cap = nw;
        row[name] = nullptr;
        cells.insert(cells.end(), {"skipped", "skipped"});
        continue;
      }
      const auto cfg = method == Method::dense ? basis::BasisConfig::gaussian(s.length_scale, prior)
                                               : basis::BasisConfig::wendland(s.support, prior);
      auto model = std::make_shared<AugmentedModel>(build_cv_model(Ts, Qw, R, grid, cfg));
      Estimator est(model, method, x0, P0);
      const Summary t = time_calls(s, 1.0, [&] { est.predict(u); });
      row[name] = to_json(t);
      cells.insert(cells.end(), {format_number(t.median), format_number(t.stddev)});
      if (method == Method::dense) {
        dense_n.push_back(static_cast<double>(nw));
        dense_t.push_back(t.median);
      }
    }
    m["sweep"].push_back(row);
    table.add(std::move(cells));
  }

  const auto& sw = m["sweep"];
  for (const char* name : {"csrbf", "fast-csrbf"}) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : sw) {
      const double t = row[name]["median"].get<double>();
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    m["flatness"][name] = hi / lo;
  }
  m["dense_loglog_slope"] = loglog_slope(dense_n, dense_t);
  m["dense_memory_guard_n_w"] = dense_cap ? nlohmann::json(*dense_cap) : nlohmann::json(nullptr);
  m["dense_memory_limit_bytes"] = s.dense_limit_bytes;
  if (!report.directory.empty()) write_table(report.directory / "table.csv", table);
  return report;
}

}  // namespace bfekf::harness
