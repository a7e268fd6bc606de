// Acceptance runner. `acceptance AC1 AC5` runs the named criteria (all if none
// are named), prints one PASS/FAIL line each and exits nonzero on any failure.

#include <bfekf/detail/filter_core.hpp>
#include <bfekf/estimator.hpp>
#include <bfekf/filter.hpp>
#include <bfekf/harness.hpp>
#include <bfekf/sim.hpp>

#include "../support/gen.hpp"
#include "../support/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef BFEKF_CONFIG_DIR
#error "BFEKF_CONFIG_DIR must point at the configs directory"
#endif
#ifndef BFEKF_ACCEPTANCE_OUT
#define BFEKF_ACCEPTANCE_OUT "acceptance_results"
#endif

using namespace bfekf;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Check = std::function<void(Outcome&)>;

harness::Report run_experiment(harness::ExperimentId id, const std::string& ini) {
  harness::RunOptions o;
  o.experiment = id;
  o.config = harness::Config::load(std::string(BFEKF_CONFIG_DIR) + "/" + ini);
  o.out_root = BFEKF_ACCEPTANCE_OUT;
  return harness::run(o);
}

double min_eig(const Mat& P) { return Eigen::SelfAdjointEigenSolver<Mat>(P).eigenvalues().minCoeff(); }

// ---------------------------------------------------------------- AC1
void ac1(Outcome& out) {
  using basis::wendland_derivative;
  using basis::wendland_value;
  const double h = 1e-6, tol = 1e-6;
  double worst_fd = 0.0;
  // Derivative against central differences across and beyond the support.
  for (int i = 1; i < 2000; ++i) {
    const double r = 1.5 * i / 2000.0;
    if (r < h) continue;
    const double fd = (wendland_value(r + h) - wendland_value(std::max(0.0, r - h))) / (r + h - std::max(0.0, r - h));
    worst_fd = std::max(worst_fd, std::abs(fd - wendland_derivative(r)));
  }
  out.expect(worst_fd <= tol, "derivative vs finite differences");

  bool cutoff = true;
  for (int i = 0; i <= 1000; ++i) {
    const double r = 1.0 + 3.0 * i / 1000.0;
    cutoff = cutoff && wendland_value(r) == 0.0 && wendland_derivative(r) == 0.0;
  }
  for (int i = 0; i < 1000; ++i) cutoff = cutoff && wendland_value(i / 1000.0) > 0.0;
  out.expect(cutoff, "support cutoff");
  out.expect(wendland_value(0.0) == 1.0, "w(0) = 1");

  // C1 at r0 = 1: values and slopes meet from both sides.
  const double one_left = (wendland_value(1.0) - wendland_value(1.0 - h)) / h;
  const double one_right = (wendland_value(1.0 + h) - wendland_value(1.0)) / h;
  const double one_central = (wendland_value(1.0 + h) - wendland_value(1.0 - h)) / (2.0 * h);
  double c1 = std::max({std::abs(one_left - wendland_derivative(1.0)), std::abs(one_right - wendland_derivative(1.0)),
                        std::abs(one_central - wendland_derivative(1.0)),
                        std::abs(wendland_value(1.0 - h) - wendland_value(1.0)),
                        std::abs(wendland_derivative(1.0 - h) - wendland_derivative(1.0))});
  // C1 at r0 = 0 for the radial profile w(|t|): its central difference must
  // match w'(0) = 0 and the value must be continuous.
  const double zero_central = (wendland_value(h) - wendland_value(h)) / (2.0 * h);
  c1 = std::max({c1, std::abs(zero_central - wendland_derivative(0.0)), std::abs(wendland_value(h) - wendland_value(0.0))});
  out.expect(c1 <= tol, "C1 at r in {0, 1}");

  bool threw = false;
  try {
    (void)wendland_value(-0.1);
  } catch (const DomainError&) {
    threw = true;
  }
  out.expect(threw, "negative radius rejected");
  out.detail << "max |fd - w'| = " << worst_fd << ", C1 residual = " << c1;
}

// ---------------------------------------------------------------- AC2
std::vector<Index> brute_force_active(const Vec& x, const basis::CartesianGrid& g, double alpha) {
  std::vector<Index> out;
  for (Index i = 0; i < g.size(); ++i) {
    if ((x - g.center(i)).norm() / alpha < 1.0) out.push_back(i);
  }
  return out;
}

void ac2(Outcome& out) {
  gen::Rng rng(20240601);
  Index superset = 0, bitwise = 0, bounded = 0, exact_ok = 0, largest = 0;
  const Index cases = 10000;
  for (Index c = 0; c < cases; ++c) {
    const int P = static_cast<int>(rng.integer(1, 3));
    const double delta = rng.uniform(0.2, 2.0);
    const auto g = gen::grid(rng, P, delta, P == 3 ? 10 : 20);
    const double alpha = rng.uniform(0.3, 4.0) * delta;
    const auto cfg = basis::BasisConfig::wendland(alpha);
    const Vec x = gen::point_near(rng, g, 2.0 * alpha);
    const auto exact = basis::active_exact(x, g, cfg);
    const auto fast = basis::active_fast(x, g, cfg);
    superset += std::includes(fast.indices.begin(), fast.indices.end(), exact.indices.begin(), exact.indices.end());
    exact_ok += exact.indices == brute_force_active(x, g, alpha);
    const Vec all = basis::eval_all(x, g, cfg);
    const Vec scattered = basis::scatter(fast, basis::eval_active(x, g, cfg, fast), g.size());
    bitwise += (scattered.array() == all.array()).all();
    bounded += static_cast<std::uint64_t>(fast.size()) <= basis::active_upper_bound(alpha, delta, P);
    largest = std::max(largest, fast.size());
  }
  out.expect(superset == cases, "fast superset of exact");
  out.expect(exact_ok == cases, "exact equals brute force");
  out.expect(bitwise == cases, "eval_active bitwise equal to dense evaluation");
  out.expect(bounded == cases, "active count bound");
  out.detail << cases << " cases: superset " << superset << ", bitwise " << bitwise << ", bounded " << bounded
             << ", largest active set " << largest;
}

// ---------------------------------------------------------------- AC3
double rel_step_error(const FilterState& s, const oracle::MonolithicEkf& o) {
  Vec m(s.x.size() + s.theta.size());
  m << s.x, s.theta;
  return std::max(oracle::rel_err(m, o.m), oracle::rel_err(s.joint_covariance(), o.P));
}

AugmentedModel cv_model(const basis::BasisConfig& cfg, double weight_noise) {
  const auto grid = basis::CartesianGrid::regular(Vec::Zero(2), Eigen::Vector2d(2.0, 3.0), 1.0);
  return build_cv_model(0.2, 0.1 * Mat::Identity(2, 2), 0.2 * Mat::Identity(2, 2), grid, cfg, weight_noise);
}

std::vector<Vec> cv_track(Index steps, std::uint64_t seed) {
  gen::Rng rng(seed);
  std::vector<Vec> ys;
  for (Index k = 0; k < steps; ++k) {
    const double t = 0.2 * static_cast<double>(k);
    ys.push_back(Eigen::Vector2d(1.2 + std::cos(0.4 * t), 1.5 + std::sin(0.4 * t)) +
                 std::sqrt(0.2) * Eigen::Vector2d(rng.normal(), rng.normal()));
  }
  return ys;
}

// Runs `steps` correct/predict pairs through both filters; returns the worst
// per-step relative error.
double compare_dense(const AugmentedModel& m, const Vec& x0, const Mat& P0, double prior,
                     const std::function<Vec(Index)>& y, const std::function<Vec(Index)>& u, Index steps) {
  auto s = FilterState::prior(x0, P0, m.weight_count(), prior);
  oracle::MonolithicEkf o(m, x0, P0);
  double worst = 0.0;
  for (Index k = 0; k < steps; ++k) {
    measurement_update_dense(s, m, y(k), u(k));
    o.correct(y(k), u(k));
    worst = std::max(worst, rel_step_error(s, o));
    time_update_dense(s, m, u(k));
    o.predict(u(k));
    worst = std::max(worst, rel_step_error(s, o));
  }
  return worst;
}

bool bitwise_equal(const FilterState& a, const FilterState& b) {
  return a.x == b.x && a.theta == b.theta && a.Px == b.Px && a.Pxt == b.Pxt && a.Ptt == b.Ptt;
}

void ac3(Outcome& out) {
  const auto none = [](Index) { return Vec(); };
  std::vector<std::pair<std::string, double>> errors;

  {
    const auto m = cv_model(basis::BasisConfig::gaussian(0.8, 0.05), 1e-4);
    const auto ys = cv_track(100, 3);
    errors.emplace_back("cv-gaussian n_w=" + std::to_string(m.weight_count()),
                        compare_dense(m, Eigen::Vector4d(2.2, 1.5, 0.0, 0.4), 0.1 * Mat::Identity(4, 4), 0.05,
                                      [&](Index k) { return ys[static_cast<std::size_t>(k)]; }, none, 100));
  }
  {
    const auto run = sim::simulate_tire_runs({}, 1, 8).front();
    for (const auto coupling : {ObservationCoupling::exact, ObservationCoupling::ignore}) {
      const auto m = build_tire_model(
          TireParams{}, basis::CartesianGrid::regular(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5), 0.05),
          basis::BasisConfig::gaussian(0.05, 1e-3), 1e-5, coupling);
      const Index steps = std::min<Index>(100, run.steps());
      errors.emplace_back(std::string("tire-") + (coupling == ObservationCoupling::exact ? "exact" : "ignore") +
                              " n_w=" + std::to_string(m.weight_count()),
                          compare_dense(m, Vec::Zero(1), Mat::Constant(1, 1, 1e-6), 1e-3,
                                        [&](Index k) { return Vec(run.observations.col(k)); },
                                        [&](Index k) { return Vec(run.inputs.col(k)); }, steps));
    }
  }
  {
    Example1Params p;
    p.position_bounds = Eigen::Vector2d(-2.0, 10.0);
    p.velocity_bounds = Eigen::Vector2d(-1.0, 3.0);
    p.spacing = 2.0;
    p.support = 10.0;
    const auto models = build_1d_models(p);
    const auto traj = sim::simulate_scenario1({}, 5);
    errors.emplace_back("learned-transition n_w=" + std::to_string(models.c.weight_count()),
                        compare_dense(models.c, Eigen::Vector2d(0.0, 1.0), Mat::Identity(2, 2),
                                      p.prior_weight_variance,
                                      [&](Index k) { return Vec(traj.observations.col(k)); }, none, 100));
  }
  for (const auto& [name, e] : errors) {
    out.expect(e <= 1e-12, name);
    out.detail << name << " max rel err " << e << "; ";
  }

  // Every center active: sparse and dense updates coincide exactly.
  const auto m = cv_model(basis::BasisConfig::wendland(40.0, 0.05), 1e-4);
  auto dense = FilterState::prior(Eigen::Vector4d(2.2, 1.5, 0.0, 0.4), 0.1 * Mat::Identity(4, 4), m.weight_count(), 0.05);
  auto sparse = dense;
  auto fast = dense;
  UpdateOptions fast_opts;
  fast_opts.selection = basis::Selection::fast;
  bool same = true;
  for (const auto& y : cv_track(100, 5)) {
    measurement_update_dense(dense, m, y, Vec());
    measurement_update_sparse(sparse, m, y, Vec());
    measurement_update_sparse(fast, m, y, Vec(), fast_opts);
    time_update_dense(dense, m, Vec());
    time_update_sparse(sparse, m, Vec());
    time_update_sparse(fast, m, Vec(), fast_opts);
    same = same && bitwise_equal(dense, sparse) && bitwise_equal(dense, fast);
  }
  out.expect(same, "sparse == dense with all centers active");
  out.detail << "sparse==dense bitwise: " << (same ? "yes" : "no");
}

// ---------------------------------------------------------------- AC4
void ac4(Outcome& out) {
  gen::Rng rng(4242);
  const Index nx = 4, nw = 80;
  const Mat J = rng.spd(nx + nw, 1e-3);
  Vec x = rng.vec(nx, -1, 1), theta = rng.vec(nw, -1, 1);
  Mat Px = J.topLeftCorner(nx, nx), Pxt = J.topRightCorner(nx, nw), Ptt = J.bottomRightCorner(nw, nw);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 500; ++k) {
    const Index ny = rng.integer(1, 3);
    const auto h = rng.subset(nw, rng.uniform(0.02, 0.3));
    auto g = rng.subset(nw, rng.uniform(0.0, 0.3));
    // Gains on the measured weights are usually but not always kept.
    if (rng.coin()) {
      g.insert(g.end(), h.begin(), h.end());
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
    }
    const Mat Hx = rng.gaussian(ny, nx);
    const Mat Ht = rng.gaussian(ny, static_cast<Index>(h.size()));
    const Mat R = rng.spd(ny, 0.1);
    const double scale = rng.coin() ? rng.uniform(0.0, 3.0) : rng.uniform(3.0, 20.0);
    detail::measurement_update_core(x, Px, theta, Pxt, Ptt, h, g, rng.vec(ny, -1, 1), Hx, Ht, R, scale, nullptr);
    Mat P(nx + nw, nx + nw);
    P << Px, Pxt, Pxt.transpose(), Ptt;
    const double tr = P.trace();
    worst = std::min(worst, min_eig(P) / tr);
    // Over-scaled gains inflate P step after step; a positive rescale keeps
    // the next innovation well conditioned and leaves min_eig/trace alone.
    Px /= tr;
    Pxt /= tr;
    Ptt /= tr;
  }
  out.expect(worst >= -1e-8, "min eigenvalue >= -1e-8 trace");
  out.detail << "500 updates, worst min_eig/trace = " << worst;
}

// ---------------------------------------------------------------- AC5
void ac5(Outcome& out) {
  const auto r = run_experiment(harness::ExperimentId::example1, "example1.ini");
  const auto& m = r.metrics["methods"].begin().value();
  auto mean = [&](const char* model, const char* sc) { return m[model][sc]["mean"].get<double>(); };
  const double a1 = mean("a", "scenario1"), b1 = mean("b", "scenario1"), c1 = mean("c", "scenario1");
  const double a2 = mean("a", "scenario2"), b2 = mean("b", "scenario2"), c2 = mean("c", "scenario2");
  out.expect(std::abs(a1 - 0.09) <= 0.045 && std::abs(b1 - 0.09) <= 0.045, "scenario 1 (a), (b) within 50% of 0.09");
  out.expect(std::abs(a1 - b1) <= 0.1 * std::min(a1, b1), "scenario 1 (a), (b) within 10%");
  out.expect(c1 >= 10.0 * std::max(a1, b1), "scenario 1 (c) 10x worse");
  out.expect(b2 < a2 && b2 < c2, "scenario 2 (b) best");
  out.detail << "scenario1 a/b/c = " << a1 << "/" << b1 << "/" << c1 << ", scenario2 a/b/c = " << a2 << "/" << b2
             << "/" << c2 << " (" << r.metrics["methods"].begin().key() << ")";
}

// ---------------------------------------------------------------- AC6
void ac6(Outcome& out) {
  const auto r = run_experiment(harness::ExperimentId::tire, "tire.ini");
  for (const char* name : {"csrbf", "dense"}) {
    const bool present = r.metrics["methods"].contains(name);
    out.expect(present, std::string(name) + " present");
    if (!present) continue;
    const double rmse = r.metrics["methods"][name]["rmse"]["mean"].get<double>();
    out.expect(rmse < 0.5, std::string(name) + " rmse < 0.5");
    out.detail << name << " rmse " << rmse << "; ";
  }
}

// ---------------------------------------------------------------- AC7
void ac7(Outcome& out) {
  const auto ev = run_experiment(harness::ExperimentId::bench_eval, "bench-eval.ini").metrics;
  const double change = ev["fast_csrbf_ratio_last_over_first"].get<double>();
  const auto first_nw = ev["sweep"].front()["n_w"].get<Index>();
  const auto last_nw = ev["sweep"].back()["n_w"].get<Index>();
  out.expect(change <= 2.0 && change >= 0.5, "fast-csrbf evaluation within 2x over the sweep");
  const double speed = ev["dense_over_fast_near_1e4"]["ratio"].get<double>();
  out.expect(speed >= 10.0, "fast-csrbf >= 10x faster than dense near 1e4");
  out.detail << "eval: fast change " << change << " (n_w " << first_nw << ".." << last_nw << "), dense/fast at n_w "
             << ev["dense_over_fast_near_1e4"]["n_w"] << " = " << speed << "; ";

  const auto pr = run_experiment(harness::ExperimentId::bench_predict, "bench-predict.ini").metrics;
  for (const char* name : {"csrbf", "fast-csrbf"}) {
    const double f = pr["flatness"][name].get<double>();
    out.expect(f <= 2.0, std::string(name) + " prediction flat within 2x");
    out.detail << "predict " << name << " max/min " << f << "; ";
  }
  const double slope = pr["dense_loglog_slope"].get<double>();
  out.expect(slope > 1.0, "dense prediction superlinear");
  const bool guarded = !pr["dense_memory_guard_n_w"].is_null();
  out.expect(guarded, "dense memory guard reached");
  if (guarded) {
    // The guard trips at the first sweep entry that no longer fits.
    const double at = pr["dense_memory_guard_n_w"].get<double>();
    out.expect(at >= 5e3 && at <= 2.5e4, "memory guard near 1e4");
    out.detail << "dense slope " << slope << ", guard at n_w " << at;
  }
}

// ---------------------------------------------------------------- AC8
void ac8(Outcome& out) {
  const auto r = run_experiment(harness::ExperimentId::intersection, "intersection.ini");
  const auto& cmp = r.metrics["comparison"];
  out.expect(cmp.contains("csrbf"), "csrbf compared to dense");
  if (!cmp.contains("csrbf")) return;
  const auto& c = cmp["csrbf"];
  for (const char* q : {"position", "velocity"}) {
    const double early = c[q]["early_gap"].get<double>(), late = c[q]["late_gap"].get<double>();
    const double rel = c[q]["late_relative_gap"].get<double>();
    out.expect(late <= early, std::string(q) + " gap shrinks");
    out.expect(rel < 0.2, std::string(q) + " late gap < 20% of dense");
    out.detail << q << " gap " << early << " -> " << late << " (" << rel << " of dense); ";
  }
  const double tu = c["time_update_speedup"].get<double>(), mu = c["measurement_update_speedup"].get<double>();
  out.expect(tu >= 3.0, "time update speedup >= 3");
  out.expect(mu >= 3.0, "measurement update speedup >= 3");
  out.detail << "speedups time " << tu << ", measurement " << mu;
}

// ---------------------------------------------------------------- AC9
void ac9(Outcome& out) {
  gen::Rng rng(909);
  double worst = std::numeric_limits<double>::infinity();
  for (int set = 0; set < 50; ++set) {
    const int P = static_cast<int>(rng.integer(1, 2));
    const auto g = gen::grid(rng, P, rng.uniform(0.3, 1.0), P == 1 ? 30 : 10);
    const auto cfg = rng.coin() ? basis::BasisConfig::wendland(rng.uniform(0.5, 3.0), rng.uniform(0.1, 2.0))
                                : basis::BasisConfig::gaussian(rng.uniform(0.3, 2.0), rng.uniform(0.1, 2.0));
    const Index n = rng.integer(5, 40);
    std::vector<Vec> pts;
    for (Index i = 0; i < n; ++i) pts.push_back(gen::point_near(rng, g, 0.5));
    Mat K(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        K(i, j) = basis::kernel_value(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], g, cfg);
      }
    }
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(K).eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    worst = std::min(worst, ev.minCoeff() / scale);
  }
  out.expect(worst >= -1e-10, "Gram matrices PSD");

  double prod_err = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int P = static_cast<int>(rng.integer(1, 3));
    const auto g = gen::grid(rng, P, rng.uniform(0.3, 1.5), 6);
    const auto cfg = basis::BasisConfig::gaussian(rng.uniform(0.3, 3.0));
    const Vec x = gen::point_near(rng, g, 1.0);
    const Vec joint = basis::eval_all(x, g, cfg);
    const Vec prod = basis::product_eval_gaussian(x, g, cfg).values;
    for (Index i = 0; i < g.size(); ++i) {
      if (joint(i) > 0.0) prod_err = std::max(prod_err, std::abs(prod(i) - joint(i)) / joint(i));
    }
  }
  out.expect(prod_err <= 1e-12, "product factorization");
  out.detail << "worst min_eig/max|eig| = " << worst << ", product rel err = " << prod_err;
}

// ---------------------------------------------------------------- AC10
void ac10(Outcome& out) {
  gen::Rng rng(1010);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const int P = static_cast<int>(rng.integer(1, 3));
    const auto g = gen::grid(rng, P, 1.0, P == 3 ? 5 : 9);
    const Index J = rng.integer(1, 4);
    const auto cfg = rng.coin() ? basis::BasisConfig::wendland(rng.uniform(0.8, 3.0))
                                : basis::BasisConfig::gaussian(rng.uniform(0.5, 2.0));
    const Expansion st{g, cfg, J, WeightOrdering::stacked};
    const Expansion sg{g, cfg, J, WeightOrdering::staggered};
    Vec th_st(st.weight_count()), th_sg(sg.weight_count());
    for (Index i = 0; i < g.size(); ++i) {
      for (Index j = 0; j < J; ++j) {
        const double w = rng.normal();
        th_st(st.weight_index(i, j)) = w;
        th_sg(sg.weight_index(i, j)) = w;
      }
    }
    const Vec z = gen::point_near(rng, g, 1.0);
    const Vec a = eval_unknown(st, z, th_st);
    const Vec b = eval_unknown(sg, z, th_sg);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
  out.expect(worst <= 1e-14, "stacked == staggered");

  harness::RunOptions o;
  o.experiment = harness::ExperimentId::bench_eval;
  o.config = harness::Config::parse("[bench]\nwarmup = 1\nrepetitions = 5\n");
  o.nw_sweep = {1000, 10000};
  o.write_outputs = false;
  const auto r = harness::run(o).metrics;
  bool reported = true;
  std::ostringstream ratios;
  for (const auto& row : r["sweep"]) {
    reported = reported && row.contains("staggered_over_stacked") && std::isfinite(row["staggered_over_stacked"].get<double>());
    if (reported) ratios << " n_w " << row["n_w"] << ": " << row["staggered_over_stacked"].get<double>();
  }
  out.expect(reported, "timing ratio reported");
  out.detail << "1000 cases worst rel diff " << worst << "; staggered/stacked time" << ratios.str();
}

struct Criterion {
  const char* name;
  double limit_s;  // runtime budget; 0 means none stated
  Check check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"AC1", 1.0, ac1},   {"AC2", 30.0, ac2},  {"AC3", 10.0, ac3},   {"AC4", 0.0, ac4},   {"AC5", 300.0, ac5},
      {"AC6", 600.0, ac6}, {"AC7", 900.0, ac7}, {"AC8", 1200.0, ac8}, {"AC9", 0.0, ac9}, {"AC10", 0.0, ac10},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return w == c.name; })) {
      std::fprintf(stderr, "unknown criterion %s\n", w.c_str());
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.check(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0) out.expect(secs < c.limit_s, "runtime limit");
    std::printf("%s %s %.2fs%s | %s\n", c.name, out.pass ? "PASS" : "FAIL", secs,
                c.limit_s > 0.0 ? (" (limit " + std::to_string(static_cast<int>(c.limit_s)) + "s)").c_str() : "",
                out.detail.str().c_str());
    std::fflush(stdout);
    failures += !out.pass;
  }
  return failures == 0 ? 0 : 1;
}
