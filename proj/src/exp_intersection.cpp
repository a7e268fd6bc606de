#include <bfekf/harness.hpp>
#include <bfekf/sim.hpp>

#include "report_util.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

namespace bfekf::harness {

namespace {

using Clock = std::chrono::steady_clock;

struct Variant {
  std::string name;
  Method method;
  std::shared_ptr<const AugmentedModel> model;
};

struct VehicleScore {
  double position = 0.0;
  double velocity = 0.0;
};

struct VariantRun {
  std::vector<VehicleScore> vehicles;
  std::vector<double> time_update;         // seconds per call
  std::vector<double> measurement_update;  // seconds per call
  std::vector<double> active_centers;
  bool diverged = false;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

VariantRun filter_vehicles(const Variant& v, const std::vector<sim::Trajectory>& cars, double initial_variance) {
  const Mat P0 = initial_variance * Mat::Identity(4, 4);
  Estimator est(v.model, v.method, cars.front().states.col(0), P0);
  const Vec u(0);
  VariantRun out;
  try {
    for (std::size_t n = 0; n < cars.size(); ++n) {
      const auto& t = cars[n];
      if (n > 0) est.restart(t.states.col(0), P0);
      Mat est_states(4, t.steps());
      for (Index k = 0; k < t.steps(); ++k) {
        auto start = Clock::now();
        const auto rep = est.correct(t.observations.col(k), u);
        out.measurement_update.push_back(seconds_since(start));
        out.active_centers.push_back(static_cast<double>(rep.active_centers));
        if (!est.x().allFinite()) {
          out.diverged = true;
          return out;
        }
        est_states.col(k) = est.x();
        start = Clock::now();
        est.predict(u);
        out.time_update.push_back(seconds_since(start));
      }
      out.vehicles.push_back({compute_rmse(Mat(est_states.topRows(2)), Mat(t.states.topRows(2))),
                              compute_rmse(Mat(est_states.bottomRows(2)), Mat(t.states.bottomRows(2)))});
    }
  } catch (const NumericalError&) {
    out.diverged = true;
  }
  return out;
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

}  // namespace

Report run_intersection(const RunOptions& options) {
  const Config& cfg = options.config;
  sim::IntersectionSim simcfg;
  simcfg.geometry.approach = cfg.number("geometry.approach", simcfg.geometry.approach);
  simcfg.geometry.radius = cfg.number("geometry.radius", simcfg.geometry.radius);
  simcfg.geometry.exit = cfg.number("geometry.exit", simcfg.geometry.exit);
  simcfg.speed = cfg.number("simulation.speed", simcfg.speed);
  simcfg.speed_deviation = cfg.number("simulation.speed_deviation", simcfg.speed_deviation);
  simcfg.sample_time = cfg.number("simulation.sample_time", simcfg.sample_time);
  simcfg.measurement_variance = cfg.number("simulation.measurement_variance", simcfg.measurement_variance);
  const Index vehicles = cfg.integer("simulation.vehicles", 50);
  if (vehicles < 2) throw ConfigError("simulation.vehicles must be at least 2");
  const int runs = detail::run_count(options, "simulation.runs", 3);

  const double q = cfg.number("filter.process_variance", 0.1);
  const double r = cfg.number("filter.measurement_variance", 0.2);
  const double initial_variance = cfg.number("filter.initial_state_variance", 0.1);
  const double prior = cfg.number("filter.prior_weight_variance", 0.01);
  const double sigma = cfg.number("filter.weight_noise", 0.0);
  const double dense_limit = cfg.number("filter.dense_memory_limit_bytes", 1073741824.0);
  const auto xb = cfg.numbers("basis.x_bounds", {-32.0, 32.0});
  const auto yb = cfg.numbers("basis.y_bounds", {-2.0, 32.0});
  if (xb.size() != 2 || yb.size() != 2) throw ConfigError("basis bounds need two values");
  const double spacing = cfg.number("basis.spacing", 1.0);
  const double support = cfg.number("basis.support", 5.0);
  const double length_scale = cfg.number("basis.length_scale", 1.0);
  const auto methods = detail::methods_or(options, "filter.methods", "dense,csrbf,fast-csrbf");
  const bool baseline = cfg.flag("filter.cv_baseline", true);
  cfg.reject_unused();

  const auto grid = basis::CartesianGrid::regular(Eigen::Vector2d(xb[0], yb[0]), Eigen::Vector2d(xb[1], yb[1]), spacing);
  const Mat Qw = q * Mat::Identity(2, 2);
  const Mat R = r * Mat::Identity(2, 2);

  Report report;
  report.directory = detail::open_report(options);
  nlohmann::json& m = report.metrics;
  m["experiment"] = "intersection";
  m["runs"] = runs;
  m["vehicles"] = vehicles;
  m["seed"] = options.seed;
  m["centers"] = grid.size();
  m["weights"] = 2 * grid.size();

  std::vector<Variant> variants;
  for (const Method method : methods) {
    if (method == Method::dense) {
      const auto mem = memory_estimate(static_cast<std::uint64_t>(grid.size()), 2, 64);
      const double bytes = static_cast<double>(mem.total_bits()) / 8.0;
      m["dense_memory_bytes"] = bytes;
      if (bytes > dense_limit) {
        std::cerr << "warning: dense method skipped, needs " << bytes << " bytes\n";
        m["dense_skipped"] = true;
        continue;
      }
      variants.push_back({"dense", method,
                          std::make_shared<AugmentedModel>(
                              build_cv_model(simcfg.sample_time, Qw, R, grid, basis::BasisConfig::gaussian(length_scale, prior), sigma))});
    } else {
      variants.push_back({std::string(method_name(method)), method,
                          std::make_shared<AugmentedModel>(
                              build_cv_model(simcfg.sample_time, Qw, R, grid, basis::BasisConfig::wendland(support, prior), sigma))});
    }
  }
  if (baseline) {
    auto cv = build_cv_model(simcfg.sample_time, Qw, R, grid, basis::BasisConfig::wendland(support, prior), sigma);
    const auto& lin = static_cast<const LinearKnownModel&>(*cv.known);
    cv.known = std::make_shared<LinearKnownModel>(lin.F(), Mat::Zero(4, 0), lin.H(), lin.D());
    cv.expansion.outputs = 0;
    cv.validate();
    variants.push_back({"cv", Method::csrbf, std::make_shared<AugmentedModel>(std::move(cv))});
  }

  const auto seeds = detail::run_seeds(options.seed, runs);
  const auto nv = static_cast<std::size_t>(vehicles);
  // Per variant: position / velocity RMSE per vehicle index and path, averaged over runs.
  struct Accum {
    std::vector<double> pos, vel;
    std::vector<double> pos_path[2], vel_path[2];
    std::vector<int> path_count[2];
    std::vector<double> tu, mu, active;
    int diverged = 0;
    int kept = 0;
  };
  std::vector<Accum> acc(variants.size());
  for (auto& a : acc) {
    a.pos.assign(nv, 0.0);
    a.vel.assign(nv, 0.0);
    for (int p = 0; p < 2; ++p) {
      a.pos_path[p].assign(nv, 0.0);
      a.vel_path[p].assign(nv, 0.0);
      a.path_count[p].assign(nv, 0);
    }
  }

  for (int run = 0; run < runs; ++run) {
    const auto cars = sim::simulate_intersection(simcfg, vehicles, seeds[static_cast<std::size_t>(run)]);
    if (run == 0 && !report.directory.empty()) {
      sim::write_csv(report.directory / "vehicle0.csv", cars.front());
      sim::write_sidecar(report.directory / "vehicle0.json", cars.front());
    }
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      const auto res = filter_vehicles(variants[vi], cars, initial_variance);
      auto& a = acc[vi];
      if (res.diverged) {
        ++a.diverged;
        std::cerr << "warning: " << variants[vi].name << " diverged in run " << run << "\n";
        continue;
      }
      ++a.kept;
      for (std::size_t n = 0; n < nv; ++n) {
        a.pos[n] += res.vehicles[n].position;
        a.vel[n] += res.vehicles[n].velocity;
        const int p = cars[n].label == "left" ? 0 : 1;
        a.pos_path[p][n] += res.vehicles[n].position;
        a.vel_path[p][n] += res.vehicles[n].velocity;
        ++a.path_count[p][n];
      }
      a.tu.insert(a.tu.end(), res.time_update.begin(), res.time_update.end());
      a.mu.insert(a.mu.end(), res.measurement_update.begin(), res.measurement_update.end());
      a.active.insert(a.active.end(), res.active_centers.begin(), res.active_centers.end());
    }
  }

  Table timing{{"method", "time_update_mean_s", "time_update_std_s", "measurement_update_mean_s",
                "measurement_update_std_s", "mean_active_centers"},
               {}};
  Table curves{{"vehicle"}, {}};
  std::vector<std::vector<double>> curve_cols;
  int dense_index = -1;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    auto& a = acc[vi];
    const auto& name = variants[vi].name;
    if (name == "dense" && a.kept > 0) dense_index = static_cast<int>(vi);
    auto& jm = m["methods"][name];
    jm["diverged_runs"] = a.diverged;
    if (a.kept == 0) continue;
    for (std::size_t n = 0; n < nv; ++n) {
      a.pos[n] /= a.kept;
      a.vel[n] /= a.kept;
      for (int p = 0; p < 2; ++p) {
        if (a.path_count[p][n] > 0) {
          a.pos_path[p][n] /= a.path_count[p][n];
          a.vel_path[p][n] /= a.path_count[p][n];
        } else {
          a.pos_path[p][n] = a.vel_path[p][n] = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
    jm["position_rmse"] = a.pos;
    jm["velocity_rmse"] = a.vel;
    jm["position_rmse_left"] = a.pos_path[0];
    jm["position_rmse_right"] = a.pos_path[1];
    jm["velocity_rmse_left"] = a.vel_path[0];
    jm["velocity_rmse_right"] = a.vel_path[1];
    const Summary tu = summarize(a.tu);
    const Summary mu = summarize(a.mu);
    jm["time_update"] = to_json(tu);
    jm["measurement_update"] = to_json(mu);
    jm["active_centers"] = to_json(summarize(a.active));
    timing.add({name, format_number(tu.mean), format_number(tu.stddev), format_number(mu.mean), format_number(mu.stddev),
                format_number(summarize(a.active).mean)});
    for (const auto* col : {&a.pos, &a.vel, &a.pos_path[0], &a.pos_path[1], &a.vel_path[0], &a.vel_path[1]}) {
      curve_cols.push_back(*col);
    }
    for (const char* suffix : {"_position", "_velocity", "_position_left", "_position_right", "_velocity_left",
                               "_velocity_right"}) {
      curves.header.push_back(name + suffix);
    }
  }

  // Gap of each sparse method to dense over early and late windows of vehicles.
  if (dense_index >= 0) {
    const auto& d = acc[static_cast<std::size_t>(dense_index)];
    const std::size_t w = std::max<std::size_t>(1, nv / 5);
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      const auto& name = variants[vi].name;
      if (static_cast<int>(vi) == dense_index || name == "cv" || acc[vi].kept == 0) continue;
      const auto& a = acc[vi];
      nlohmann::json g;
      for (const auto& [label, mine, ref] :
           {std::tuple{"position", &a.pos, &d.pos}, std::tuple{"velocity", &a.vel, &d.vel}}) {
        std::vector<double> gap(nv);
        for (std::size_t n = 0; n < nv; ++n) gap[n] = (*mine)[n] - (*ref)[n];
        const double early = window_mean(gap, 0, w);
        const double late = window_mean(gap, nv - w, nv);
        const double dense_late = window_mean(*ref, nv - w, nv);
        g[label] = {{"early_gap", early},
                    {"late_gap", late},
                    {"dense_late_rmse", dense_late},
                    {"late_relative_gap", late / dense_late}};
      }
      const auto& dt = m["methods"]["dense"];
      const auto& st = m["methods"][name];
      g["time_update_speedup"] = dt["time_update"]["mean"].get<double>() / st["time_update"]["mean"].get<double>();
      g["measurement_update_speedup"] =
          dt["measurement_update"]["mean"].get<double>() / st["measurement_update"]["mean"].get<double>();
      m["comparison"][name] = g;
    }
  }

  for (std::size_t n = 0; n < nv; ++n) {
    std::vector<std::string> row{std::to_string(n + 1)};
    for (const auto& col : curve_cols) row.push_back(format_number(col[n]));
    curves.add(std::move(row));
  }
  if (!report.directory.empty()) {
    write_table(report.directory / "table.csv", timing);
    write_table(report.directory / "rmse_vs_vehicles.csv", curves);
  }
  return report;
}

}  // namespace bfekf::harness
