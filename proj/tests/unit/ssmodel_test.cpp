#include <bfekf/ssmodel.hpp>

#include <doctest.h>

#include "../support/gen.hpp"
#include "../support/oracle.hpp"

#include <cmath>

using namespace bfekf;

namespace {

// Central differences of x -> propagate(x, u, u_f(transform(x, u))) and of
// theta -> propagate(x, u, Phi theta) over the active weights.
struct FdJacobians {
  Mat Fx;
  Mat Fa;
};

FdJacobians finite_differences(const AugmentedModel& m, const Vec& x, const Vec& u, const Vec& theta,
                               const basis::ActiveSet& active) {
  const auto& k = *m.known;
  const auto& ex = m.expansion;
  auto f = [&](const Vec& xx, const Vec& th) {
    const Vec z = k.transform(xx, u);
    const Vec uf = ex.outputs ? eval_unknown(ex, z, th, basis::Selection::exact) : Vec(Vec::Zero(0));
    return Vec(k.propagate(xx, u, uf));
  };
  const double h = 1e-6;
  FdJacobians out{Mat(x.size(), x.size()), Mat(x.size(), 0)};
  for (Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    const double step = h * std::max(1.0, std::abs(x(i)));
    a(i) += step;
    b(i) -= step;
    out.Fx.col(i) = (f(a, theta) - f(b, theta)) / (2 * step);
  }
  const auto idx = ex.weight_indices(active);
  out.Fa.resize(x.size(), static_cast<Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    Vec a = theta, b = theta;
    a(idx[c]) += h;
    b(idx[c]) -= h;
    out.Fa.col(static_cast<Index>(c)) = (f(x, a) - f(x, b)) / (2 * h);
  }
  return out;
}

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

AugmentedModel small_cv(bool compact) {
  const auto grid = basis::CartesianGrid::regular(Vec::Zero(2), Vec::Constant(2, 6.0), 1.0);
  const auto cfg = compact ? basis::BasisConfig::wendland(2.5, 0.1) : basis::BasisConfig::gaussian(1.0, 0.1);
  return build_cv_model(0.2, 0.1 * Mat::Identity(2, 2), 0.2 * Mat::Identity(2, 2), grid, cfg);
}

}  // namespace

TEST_CASE("eval_unknown with zero weights and a single output") {
  const auto m = small_cv(true);
  const Vec theta = Vec::Zero(m.weight_count());
  CHECK(eval_unknown(m.expansion, Vec::Constant(2, 3.3), theta).isZero(0.0));

  const auto g = basis::CartesianGrid::regular(Vec::Zero(1), Vec::Constant(1, 4.0), 1.0);
  const Expansion one{g, basis::BasisConfig::wendland(1.5), 1, WeightOrdering::stacked};
  const Vec th = Eigen::Vector<double, 5>(1.0, -2.0, 0.5, 3.0, 4.0);
  const Vec z = Vec::Constant(1, 1.7);
  const Vec b = basis::eval_all(z, g, one.config);
  CHECK(eval_unknown(one, z, th)(0) == doctest::Approx(b.dot(th)).epsilon(1e-15));
}

TEST_CASE("stacked and staggered hand example") {
  const auto g = basis::CartesianGrid::from_axes({{0.0, 1.0}});
  BasisSample sample;
  sample.active.indices = {0, 1};
  sample.values = Eigen::Vector2d(0.5, 1.0);
  const Expansion stacked{g, basis::BasisConfig::wendland(5.0), 2, WeightOrdering::stacked};
  const Expansion staggered{g, basis::BasisConfig::wendland(5.0), 2, WeightOrdering::staggered};
  const Vec a = eval_unknown(stacked, sample, Eigen::Vector4d(1, 2, 3, 4));
  const Vec b = eval_unknown(staggered, sample, Eigen::Vector4d(1, 3, 2, 4));
  CHECK(a(0) == 2.5);
  CHECK(a(1) == 5.5);
  CHECK(a == b);
  CHECK_THROWS_AS(eval_unknown(stacked, sample, Eigen::Vector3d(1, 2, 3)), ShapeError);
}

TEST_CASE("orderings agree after the index permutation") {
  gen::Rng rng(31);
  for (int c = 0; c < 300; ++c) {
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
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("constant-velocity model") {
  const auto m = small_cv(true);
  const Vec x = Eigen::Vector4d(0, 0, 1, 1);
  const Vec next = m.known->propagate(x, Vec(), Vec::Zero(2));
  CHECK((next - Eigen::Vector4d(0.2, 0.2, 1, 1)).norm() <= 1e-15);
  Mat H(2, 4);
  H << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK(m.known->observe_dx(x, Vec(), Vec::Zero(2)) == H);
  const auto jac = jacobians(m, Eigen::Vector4d(3.0, 3.0, 0.5, 0.2), Vec(), Vec::Zero(m.weight_count()));
  CHECK(jac.Fa.rows() == 4);
  CHECK(jac.Fa.cols() == 2 * jac.active.size());
  // Zero weights: the chain term vanishes.
  CHECK(jac.Fx == m.known->propagate_dx(x, Vec(), Vec::Zero(2)));
}

TEST_CASE("jacobians match finite differences for the built-in models") {
  gen::Rng rng(17);
  Example1Params p;
  p.position_bounds = Eigen::Vector2d(-2.0, 8.0);
  p.velocity_bounds = Eigen::Vector2d(-2.0, 2.0);
  p.support = 3.0;
  const auto e1 = build_1d_models(p);
  TireParams tp;
  const auto tire = build_tire_model(tp, basis::CartesianGrid::regular(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5), 0.025),
                                     basis::BasisConfig::wendland(0.15, 1e-5), 1e-8);
  const AugmentedModel models[] = {small_cv(true), small_cv(false), e1.b, e1.c, tire};
  for (const auto& m : models) {
    for (int c = 0; c < 100; ++c) {
      Vec x(m.state_dim());
      Vec u(m.known->input_dim());
      if (m.state_dim() == 4) {
        x << rng.uniform(-1.0, 7.0), rng.uniform(-1.0, 7.0), rng.normal(), rng.normal();
      } else if (m.state_dim() == 2) {
        x << rng.uniform(-1.0, 7.0), rng.uniform(-1.5, 1.5);
      } else {
        x << rng.uniform(1.0, 20.0);
        u << x(0) * (1.0 + rng.uniform(-0.3, 0.3));
      }
      Vec theta(m.weight_count());
      for (Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
      const auto jac = jacobians(m, x, u, theta);
      const auto fd = finite_differences(m, x, u, theta, jac.active);
      CHECK(rel(jac.Fx, fd.Fx) <= 1e-5);
      CHECK(rel(jac.Fa, fd.Fa) <= 1e-5);
    }
  }
}

TEST_CASE("outside the support the learned part vanishes") {
  const auto m = small_cv(true);
  const Vec far = Eigen::Vector4d(50.0, 50.0, 1.0, 0.0);
  const Vec theta = Vec::Ones(m.weight_count());
  const auto jac = jacobians(m, far, Vec(), theta);
  CHECK(jac.active.empty());
  CHECK(jac.Fa.cols() == 0);
  CHECK(eval_unknown(m.expansion, far.head(2), theta).isZero(0.0));
}

TEST_CASE("one basis evaluation serves every output") {
  const auto m = small_cv(false);
  OpCounters counters;
  const auto active = basis::all_indices(m.expansion.grid);
  sample_basis(m.expansion, Eigen::Vector2d(1.0, 2.0), active, false, &counters);
  CHECK(counters.basis_evaluations == static_cast<std::uint64_t>(m.expansion.centers()));
  CHECK(m.weight_count() == 2 * m.expansion.centers());
}

TEST_CASE("example 1 models") {
  Example1Params p;
  p.position_bounds = Eigen::Vector2d(0.0, 4.0);
  p.velocity_bounds = Eigen::Vector2d(0.0, 2.0);
  p.support = 1.5;
  const auto m = build_1d_models(p);
  CHECK(m.a.weight_count() == 0);

  gen::Rng rng(4);
  for (int c = 0; c < 20; ++c) {
    const Vec x = Eigen::Vector2d(rng.uniform(0.0, 4.0), rng.uniform(-1.0, 1.0));
    const Vec a = m.a.known->propagate(x, Vec(), Vec());
    const Vec uf = eval_unknown(m.b.expansion, x.head(1), Vec::Zero(m.b.weight_count()));
    CHECK(a == m.b.known->propagate(x, Vec(), uf));
  }

  // Interpolating weights make every node a fixed point of model (c).
  const auto& ex = m.c.expansion;
  const Index n = ex.centers();
  Mat B(n, n);
  for (Index i = 0; i < n; ++i) B.row(i) = basis::eval_all(ex.grid.center(i), ex.grid, ex.config).transpose();
  Vec theta(ex.weight_count());
  for (Index j = 0; j < 2; ++j) {
    Vec rhs(n);
    for (Index i = 0; i < n; ++i) rhs(i) = ex.grid.center(i)(j);
    const Vec w = B.fullPivLu().solve(rhs);
    for (Index i = 0; i < n; ++i) theta(ex.weight_index(i, j)) = w(i);
  }
  for (Index i = 0; i < n; ++i) {
    const Vec node = ex.grid.center(i);
    const Vec next = m.c.known->propagate(node, Vec(), eval_unknown(ex, node, theta));
    CHECK((next - node).norm() <= 1e-10);
  }
}

TEST_CASE("tire model") {
  TireParams tp;
  CHECK(tp.gain() == doctest::Approx(4.578).epsilon(1e-15));
  CHECK(tp.sample_time == 0.04);
  CHECK(wheel_slip(12.0, 12.0, 0.5) == 0.0);
  CHECK(wheel_slip(0.0, 0.1, 0.5) == doctest::Approx(0.2));
  const TireKnownModel k(tp);
  CHECK(!k.learning_active(Vec::Constant(1, 0.5), Vec::Constant(1, 1.0)));
  CHECK(k.learning_active(Vec::Constant(1, 0.6), Vec::Constant(1, 1.0)));
  const auto m = build_tire_model(tp, basis::CartesianGrid::regular(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5), 0.025),
                                  basis::BasisConfig::wendland(0.15, 1e-5), 1e-8);
  CHECK(m.weight_count() == 41);
  CHECK(m.known->observation_uses_function());
  CHECK(m.known->observe_duf(Vec::Constant(1, 5.0), Vec::Constant(1, 5.0), Vec::Zero(1))(0, 0) == tp.gain());
  CHECK_THROWS_AS(build_tire_model(tp, basis::CartesianGrid::regular(Vec::Zero(2), Vec::Ones(2), 0.5),
                                   basis::BasisConfig::wendland(0.15), 0.0),
                  ConfigError);
}

TEST_CASE("model validation") {
  auto m = small_cv(true);
  m.R = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = small_cv(true);
  m.Q = Mat::Identity(3, 3);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = small_cv(true);
  m.weight_noise = -1.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = small_cv(true);
  m.Q(0, 1) = 5.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}
