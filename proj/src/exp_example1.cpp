#include <bfekf/harness.hpp>
#include <bfekf/sim.hpp>

#include "report_util.hpp"

#include <cmath>
#include <iostream>

namespace bfekf::harness {

namespace {

struct RunResult {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
};

// Correct with y_k, score the filtered position against the truth, predict.
RunResult filter_run(const std::shared_ptr<const AugmentedModel>& model, Method method, const sim::Trajectory& t,
                     double initial_variance) {
  const Vec x0 = t.states.col(0);
  Estimator est(model, method, x0, initial_variance * Mat::Identity(2, 2));
  const Vec u(0);
  std::vector<double> estimate, truth;
  estimate.reserve(static_cast<std::size_t>(t.steps()));
  truth.reserve(static_cast<std::size_t>(t.steps()));
  RunResult r;
  try {
    for (Index k = 0; k < t.steps(); ++k) {
      est.correct(t.observations.col(k), u);
      if (!est.x().allFinite()) {
        r.diverged = true;
        return r;
      }
      estimate.push_back(est.x()(0));
      truth.push_back(t.states(0, k));
      est.predict(u);
    }
  } catch (const NumericalError&) {
    r.diverged = true;
    return r;
  }
  r.rmse = compute_rmse(estimate, truth);
  return r;
}

}  // namespace

Report run_example1(const RunOptions& options) {
  const Config& cfg = options.config;
  Example1Params params;
  params.process_variance = cfg.number("model.process_variance", params.process_variance);
  params.measurement_variance = cfg.number("model.measurement_variance", params.measurement_variance);
  params.prior_weight_variance = cfg.number("model.prior_weight_variance", params.prior_weight_variance);
  params.support = cfg.number("basis.support", params.support);
  params.spacing = cfg.number("basis.spacing", params.spacing);
  const auto pb = cfg.numbers("basis.position_bounds", {-20.0, 120.0});
  const auto vb = cfg.numbers("basis.velocity_bounds", {-6.0, 8.0});
  if (pb.size() != 2 || vb.size() != 2) throw ConfigError("bounds need two values");
  params.position_bounds = detail::to_vec(pb);
  params.velocity_bounds = detail::to_vec(vb);
  const double initial_variance = cfg.number("model.initial_state_variance", 1.0);

  sim::Example1Sim simcfg;
  simcfg.steps = cfg.integer("simulation.steps", simcfg.steps);
  simcfg.process_variance = cfg.number("simulation.process_variance", simcfg.process_variance);
  simcfg.measurement_variance = cfg.number("simulation.measurement_variance", simcfg.measurement_variance);
  const int runs = detail::run_count(options, "simulation.runs", 50);
  const auto methods = detail::methods_or(options, "filter.methods", "csrbf");
  cfg.reject_unused();

  const auto models = build_1d_models(params);
  const std::vector<std::pair<std::string, std::shared_ptr<const AugmentedModel>>> named = {
      {"a", std::make_shared<AugmentedModel>(models.a)},
      {"b", std::make_shared<AugmentedModel>(models.b)},
      {"c", std::make_shared<AugmentedModel>(models.c)},
  };
  const auto seeds = detail::run_seeds(options.seed, runs);

  std::vector<sim::Trajectory> scen[2];
  for (int s = 0; s < 2; ++s) scen[s].resize(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    scen[0][idx] = sim::simulate_scenario1(simcfg, seeds[idx]);
    scen[1][idx] = sim::simulate_scenario2(simcfg, seeds[idx]);
  }

  Report report;
  report.directory = detail::open_report(options);
  nlohmann::json& m = report.metrics;
  m["experiment"] = "example1";
  m["runs"] = runs;
  m["seed"] = options.seed;
  Table table{{"method", "model", "scenario1", "scenario2"}, {}};
  Table per_run{{"method", "model", "scenario", "run", "rmse", "diverged"}, {}};

  for (const Method method : methods) {
    const std::string mname(method_name(method));
    for (const auto& [label, model] : named) {
      std::vector<std::string> row{mname, label};
      for (int s = 0; s < 2; ++s) {
        std::vector<RunResult> results(static_cast<std::size_t>(runs));
        parallel_for(runs, [&](Index i) {
          const auto idx = static_cast<std::size_t>(i);
          results[idx] = filter_run(model, method, scen[s][idx], initial_variance);
        });
        std::vector<double> kept;
        int diverged = 0;
        for (int i = 0; i < runs; ++i) {
          const auto& r = results[static_cast<std::size_t>(i)];
          if (r.diverged) {
            ++diverged;
          } else {
            kept.push_back(r.rmse);
          }
          per_run.add({mname, label, std::to_string(s + 1), std::to_string(i), format_number(r.rmse),
                       r.diverged ? "1" : "0"});
        }
        if (diverged > 0) {
          std::cerr << "warning: " << diverged << " diverged runs excluded (" << mname << ", model " << label
                    << ", scenario " << s + 1 << ")\n";
        }
        const Summary sum = summarize(kept);
        const std::string sname = "scenario" + std::to_string(s + 1);
        auto& cell = m["methods"][mname][label][sname];
        cell = to_json(sum);
        cell["diverged"] = diverged;
        row.push_back(format_number(kept.empty() ? std::numeric_limits<double>::quiet_NaN() : sum.mean));
      }
      table.add(std::move(row));
    }
  }

  if (!report.directory.empty()) {
    write_table(report.directory / "table.csv", table);
    write_table(report.directory / "runs.csv", per_run);
    for (int s = 0; s < 2; ++s) {
      const auto name = "scenario" + std::to_string(s + 1);
      sim::write_csv(report.directory / (name + "_run0.csv"), scen[s][0]);
      sim::write_sidecar(report.directory / (name + "_run0.json"), scen[s][0]);
    }
  }
  return report;
}

}  // namespace bfekf::harness
