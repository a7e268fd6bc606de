#include <bfekf/harness.hpp>
#include <bfekf/sim.hpp>

#include "report_util.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace bfekf::harness {

namespace {

struct MethodSetup {
  Method method;
  std::shared_ptr<const AugmentedModel> model;
};

struct TireRun {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::vector<double> curve;  // G * u_f over the sweep, final weights
  std::vector<double> slips;  // visited true slips
};

TireRun filter_accelerations(const MethodSetup& setup, const std::vector<const sim::Trajectory*>& picks,
                             double initial_variance, const std::vector<double>& sweep, double gain) {
  const Mat P0 = Mat::Constant(1, 1, initial_variance);
  Estimator est(setup.model, setup.method, Vec::Zero(1), P0);
  TireRun r;
  std::vector<double> truth;
  try {
    for (std::size_t n = 0; n < picks.size(); ++n) {
      const auto& t = *picks[n];
      if (n > 0) est.restart(Vec::Zero(1), P0);
      for (Index k = 0; k < t.steps(); ++k) {
        const Vec u = t.inputs.col(k);
        est.correct(t.observations.col(k), u);
        est.predict(u);
        if (!est.x().allFinite()) {
          r.diverged = true;
          return r;
        }
        r.slips.push_back(t.truth(0, k));
        truth.push_back(t.truth(1, k));
      }
    }
  } catch (const NumericalError&) {
    r.diverged = true;
    return r;
  }
  std::vector<double> estimate;
  estimate.reserve(r.slips.size());
  for (const double s : r.slips) estimate.push_back(gain * est.query(Vec::Constant(1, s)).mean(0));
  r.rmse = compute_rmse(estimate, truth);
  for (const double s : sweep) r.curve.push_back(gain * est.query(Vec::Constant(1, s)).mean(0));
  return r;
}

}  // namespace

Report run_tire(const RunOptions& options) {
  const Config& cfg = options.config;
  TireParams params;
  params.rear_axle = cfg.number("vehicle.rear_axle", params.rear_axle);
  params.front_axle = cfg.number("vehicle.front_axle", params.front_axle);
  params.gravity = cfg.number("vehicle.gravity", params.gravity);
  params.mass = cfg.number("vehicle.mass", params.mass);
  params.sample_time = cfg.number("vehicle.sample_time", params.sample_time);
  params.slip_floor = cfg.number("vehicle.slip_floor", params.slip_floor);
  const auto rdiag = cfg.numbers("filter.measurement_variance", {0.1, 0.01});
  if (rdiag.size() != 2) throw ConfigError("filter.measurement_variance needs two values");
  params.R = detail::to_vec(rdiag).asDiagonal();
  const double initial_variance = cfg.number("filter.initial_state_variance", 1e-6);
  const auto coupling_name = cfg.text("filter.observation_coupling", "exact");
  if (coupling_name != "exact" && coupling_name != "ignore") {
    throw ConfigError("filter.observation_coupling must be exact or ignore");
  }
  const auto coupling = coupling_name == "exact" ? ObservationCoupling::exact : ObservationCoupling::ignore;

  const double lo = cfg.number("basis.lower", -0.5);
  const double hi = cfg.number("basis.upper", 0.5);
  const double spacing = cfg.number("basis.spacing", 0.025);
  const auto grid = basis::CartesianGrid::regular(Vec::Constant(1, lo), Vec::Constant(1, hi), spacing);

  TireParams sparse_params = params;
  sparse_params.process_variance = cfg.number("csrbf.process_variance", 1.0);
  const auto sparse_cfg =
      basis::BasisConfig::wendland(cfg.number("csrbf.support", 0.15), cfg.number("csrbf.prior_weight_variance", 1e-5));
  const double sparse_sigma = cfg.number("csrbf.weight_noise", 1e-8);

  TireParams dense_params = params;
  dense_params.process_variance = cfg.number("rbf.process_variance", 1.0);
  const auto dense_cfg =
      basis::BasisConfig::gaussian(cfg.number("rbf.length_scale", 0.01), cfg.number("rbf.prior_weight_variance", 1e-5));
  const double dense_sigma = cfg.number("rbf.weight_noise", 1e-8);

  sim::TireSim simcfg;
  simcfg.pacejka.B = cfg.number("pacejka.B", simcfg.pacejka.B);
  simcfg.pacejka.C = cfg.number("pacejka.C", simcfg.pacejka.C);
  simcfg.pacejka.D = cfg.number("pacejka.D", simcfg.pacejka.D);
  simcfg.pacejka.E = cfg.number("pacejka.E", simcfg.pacejka.E);
  simcfg.gain = params.gain();
  simcfg.sample_time = params.sample_time;
  simcfg.slip_floor = params.slip_floor;
  simcfg.acceleration_noise_std = cfg.number("simulation.acceleration_noise_std", simcfg.acceleration_noise_std);
  simcfg.speed_noise_std = cfg.number("simulation.speed_noise_std", simcfg.speed_noise_std);
  simcfg.wheel_speed_noise_std = cfg.number("simulation.wheel_speed_noise_std", simcfg.wheel_speed_noise_std);
  auto& prof = simcfg.profile;
  prof.rise_time = cfg.number("simulation.rise_time", prof.rise_time);
  prof.peak_min = cfg.number("simulation.peak_slip_min", prof.peak_min);
  prof.peak_max = cfg.number("simulation.peak_slip_max", prof.peak_max);
  prof.cruise_min = cfg.number("simulation.cruise_slip_min", prof.cruise_min);
  prof.cruise_max = cfg.number("simulation.cruise_slip_max", prof.cruise_max);
  prof.decay_time = cfg.number("simulation.decay_time", prof.decay_time);
  prof.target_speed = cfg.number("simulation.target_speed", prof.target_speed);
  const Index pool_size = cfg.integer("simulation.pool", 100);
  const Index per_run = cfg.integer("simulation.accelerations_per_run", 5);
  if (per_run < 1 || per_run > pool_size) throw ConfigError("accelerations_per_run must be in [1, pool]");
  const int runs = detail::run_count(options, "simulation.runs", 50);
  const Index sweep_points = cfg.integer("output.sweep_points", 201);
  if (sweep_points < 2) throw ConfigError("output.sweep_points must be at least 2");
  const auto methods = detail::methods_or(options, "filter.methods", "csrbf,dense");
  cfg.reject_unused();

  const auto pool = sim::simulate_tire_runs(simcfg, pool_size, options.seed);
  const auto seeds = detail::run_seeds(options.seed ^ 0x9e3779b97f4a7c15ULL, runs);
  std::vector<std::vector<const sim::Trajectory*>> picks(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    std::vector<std::size_t> order(static_cast<std::size_t>(pool_size));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seeds[static_cast<std::size_t>(i)]);
    std::shuffle(order.begin(), order.end(), rng);
    for (Index n = 0; n < per_run; ++n) picks[static_cast<std::size_t>(i)].push_back(&pool[order[static_cast<std::size_t>(n)]]);
  }
  std::vector<double> sweep(static_cast<std::size_t>(sweep_points));
  for (Index i = 0; i < sweep_points; ++i) {
    sweep[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(sweep_points - 1);
  }

  Report report;
  report.directory = detail::open_report(options);
  nlohmann::json& m = report.metrics;
  m["experiment"] = "tire";
  m["runs"] = runs;
  m["seed"] = options.seed;
  m["gain"] = params.gain();
  Table table{{"method", "rmse_mean", "rmse_std", "diverged"}, {}};
  Table curve{{"slip", "truth"}, {}};
  std::vector<std::vector<std::string>> curve_cols;

  for (const Method method : methods) {
    MethodSetup setup{method, nullptr};
    if (method == Method::dense) {
      setup.model = std::make_shared<AugmentedModel>(build_tire_model(dense_params, grid, dense_cfg, dense_sigma, coupling));
    } else {
      setup.model =
          std::make_shared<AugmentedModel>(build_tire_model(sparse_params, grid, sparse_cfg, sparse_sigma, coupling));
    }
    std::vector<TireRun> results(static_cast<std::size_t>(runs));
    parallel_for(runs, [&](Index i) {
      const auto idx = static_cast<std::size_t>(i);
      results[idx] = filter_accelerations(setup, picks[idx], initial_variance, sweep, params.gain());
    });
    std::vector<double> rmse;
    int diverged = 0;
    for (const auto& r : results) {
      if (r.diverged) {
        ++diverged;
      } else {
        rmse.push_back(r.rmse);
      }
    }
    if (diverged > 0) {
      std::cerr << "warning: " << diverged << " diverged runs excluded (" << method_name(method) << ")\n";
    }
    const std::string mname(method_name(method));
    const Summary sum = summarize(rmse);
    m["methods"][mname]["rmse"] = to_json(sum);
    m["methods"][mname]["diverged"] = diverged;
    m["methods"][mname]["rmse_per_run"] = rmse;
    table.add({mname, format_number(sum.mean), format_number(sum.stddev), std::to_string(diverged)});

    // Mean and 3 sigma band across realizations.
    std::vector<std::string> mean_col, lo_col, hi_col;
    for (std::size_t p = 0; p < sweep.size(); ++p) {
      std::vector<double> v;
      for (const auto& r : results) {
        if (!r.diverged) v.push_back(r.curve[p]);
      }
      const Summary s = summarize(v);
      mean_col.push_back(format_number(s.mean));
      lo_col.push_back(format_number(s.mean - 3.0 * s.stddev));
      hi_col.push_back(format_number(s.mean + 3.0 * s.stddev));
    }
    curve.header.push_back(mname + "_mean");
    curve.header.push_back(mname + "_lower3s");
    curve.header.push_back(mname + "_upper3s");
    curve_cols.push_back(std::move(mean_col));
    curve_cols.push_back(std::move(lo_col));
    curve_cols.push_back(std::move(hi_col));

    if (method == methods.front()) {
      Table hist{{"slip", "count"}, {}};
      const Index bins = 50;
      std::vector<long> counts(static_cast<std::size_t>(bins), 0);
      for (const auto& r : results) {
        for (const double s : r.slips) {
          const auto b = static_cast<Index>(std::floor((s - lo) / (hi - lo) * static_cast<double>(bins)));
          if (b >= 0 && b < bins) ++counts[static_cast<std::size_t>(b)];
        }
      }
      for (Index b = 0; b < bins; ++b) {
        hist.add({format_number(lo + (hi - lo) * (static_cast<double>(b) + 0.5) / static_cast<double>(bins)),
                  std::to_string(counts[static_cast<std::size_t>(b)])});
      }
      if (!report.directory.empty()) write_table(report.directory / "slip_histogram.csv", hist);
    }
  }

  for (std::size_t p = 0; p < sweep.size(); ++p) {
    std::vector<std::string> row{format_number(sweep[p]), format_number(params.gain() * sim::pacejka_mu(sweep[p], simcfg.pacejka))};
    for (const auto& col : curve_cols) row.push_back(col[p]);
    curve.add(std::move(row));
  }
  if (!report.directory.empty()) {
    write_table(report.directory / "table.csv", table);
    write_table(report.directory / "friction_curve.csv", curve);
    sim::write_csv(report.directory / "acceleration0.csv", pool.front());
    sim::write_sidecar(report.directory / "acceleration0.json", pool.front());
  }
  return report;
}

}  // namespace bfekf::harness
