#include <bfekf/detail/filter_core.hpp>
#include <bfekf/filter.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bfekf {

namespace detail {

namespace {

constexpr Index kTile = 64;

// (M + M^T) / 2, tiled so the transposed reads stay in cache.
void symmetrize(Eigen::Ref<Mat> m) {
  const Index n = m.rows();
  for (Index jb = 0; jb < n; jb += kTile) {
    const Index je = std::min(n, jb + kTile);
    for (Index ib = 0; ib <= jb; ib += kTile) {
      const Index ie = std::min(n, ib + kTile);
      for (Index j = jb; j < je; ++j) {
        for (Index i = ib; i < std::min(ie, j); ++i) {
          const double v = 0.5 * (m(i, j) + m(j, i));
          m(i, j) = v;
          m(j, i) = v;
        }
      }
    }
  }
}

// Copies the strict lower triangle onto the upper one.
void mirror_lower(Eigen::Ref<Mat> m) {
  const Index n = m.rows();
  for (Index jb = 0; jb < n; jb += kTile) {
    const Index je = std::min(n, jb + kTile);
    for (Index ib = 0; ib <= jb; ib += kTile) {
      const Index ie = std::min(n, ib + kTile);
      for (Index j = jb; j < je; ++j) {
        for (Index i = ib; i < std::min(ie, j); ++i) m(i, j) = m(j, i);
      }
    }
  }
}

void symmetrize_subset(Eigen::Ref<Mat> m, const Positions& p) {
  for (std::size_t b = 0; b < p.size(); ++b) {
    for (std::size_t a = 0; a < b; ++a) {
      const double v = 0.5 * (m(p[a], p[b]) + m(p[b], p[a]));
      m(p[a], p[b]) = v;
      m(p[b], p[a]) = v;
    }
  }
}

Mat gather_cols(const Eigen::Ref<const Mat>& m, const Positions& p) {
  Mat out(m.rows(), static_cast<Index>(p.size()));
  for (std::size_t k = 0; k < p.size(); ++k) out.col(static_cast<Index>(k)) = m.col(p[k]);
  return out;
}

Mat gather_rows(const Mat& m, const Positions& p) {
  Mat out(static_cast<Index>(p.size()), m.cols());
  for (std::size_t k = 0; k < p.size(); ++k) out.row(static_cast<Index>(k)) = m.row(p[k]);
  return out;
}

void count(OpCounters* c, double flops) {
  if (c) c->flops += static_cast<std::uint64_t>(flops);
}

// Rejects innovation covariances that are indefinite or too ill-conditioned to
// factor reliably.
void check_innovation(const Mat& S) {
  if (!S.allFinite()) throw NumericalError("innovation covariance has non-finite entries");
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw NumericalError("innovation covariance is singular or ill-conditioned (condition " +
                         std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) + ")");
  }
}

}  // namespace

bool is_identity(const Positions& p, Index n) noexcept {
  if (static_cast<Index>(p.size()) != n) return false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] != static_cast<Index>(k)) return false;
  }
  return true;
}

void time_update_core(Vec& x, Mat& Px, Eigen::Ref<Mat> Pxt, Eigen::Ref<Mat> Ptt, const Positions& a,
                      const Vec& mean, const Mat& Fx, const Mat& Fa, const Mat& Q, double sigma,
                      OpCounters* counters) {
  const Index nx = x.size();
  const Index U = Ptt.rows();
  const auto na = static_cast<Index>(a.size());
  if (Fa.rows() != nx || Fa.cols() != na) throw ShapeError("F_theta does not match the active weights");
  if (Pxt.cols() != U || Pxt.rows() != nx) throw ShapeError("cross covariance does not match the weight block");

  Mat Pxt_new(nx, U);
  Pxt_new.noalias() = Fx * Pxt;
  Mat A(nx, nx);
  A.noalias() = Fx * Px;
  Mat Px_new(nx, nx);
  if (na == 0) {
    Px_new.noalias() = A * Fx.transpose();
  } else if (is_identity(a, U)) {
    Pxt_new.noalias() += Fa * Ptt;  // Ptt(a, :) = Ptt, symmetric
    A.noalias() += Fa * Pxt.transpose();
    Px_new.noalias() = A * Fx.transpose();
    Px_new.noalias() += Pxt_new * Fa.transpose();
  } else {
    const Mat Pta = gather_cols(Ptt, a);  // Ptt(:, a) = Ptt(a, :)^T
    const Mat Pxa = gather_cols(Pxt, a);
    Pxt_new.noalias() += Fa * Pta.transpose();
    A.noalias() += Fa * Pxa.transpose();
    Px_new.noalias() = A * Fx.transpose();
    Px_new.noalias() += gather_cols(Pxt_new, a) * Fa.transpose();
  }
  Px_new += Q;
  count(counters, static_cast<double>(nx) * nx * U + static_cast<double>(nx) * na * U +
                      2.0 * static_cast<double>(nx) * nx * (nx + na));

  Pxt = Pxt_new;
  Px = std::move(Px_new);
  symmetrize(Px);
  if (sigma != 0.0) Ptt.diagonal().array() += sigma;
  x = mean;
}

void measurement_update_core(Vec& x, Mat& Px, Eigen::Ref<Vec> theta, Eigen::Ref<Mat> Pxt, Eigen::Ref<Mat> Ptt,
                             const Positions& h, const Positions& g, const Vec& innovation, const Mat& Hx,
                             const Mat& Ht, const Mat& R, double gain_scale, OpCounters* counters) {
  const Index nx = x.size();
  const Index ny = innovation.size();
  const Index U = Ptt.rows();
  const auto nh = static_cast<Index>(h.size());
  const auto ng = static_cast<Index>(g.size());
  if (Hx.rows() != ny || Hx.cols() != nx) throw ShapeError("observation Jacobian has the wrong shape");
  if (Ht.rows() != ny || Ht.cols() != nh) throw ShapeError("weight observation Jacobian has the wrong shape");
  if (R.rows() != ny || R.cols() != ny) throw ShapeError("R has the wrong shape");

  // M = P H^T split into state rows Mx and weight rows Mt.
  Mat Mx(nx, ny);
  Mx.noalias() = Px * Hx.transpose();
  Mat Mt(U, ny);
  Mt.noalias() = Pxt.transpose() * Hx.transpose();
  if (nh > 0) {
    if (is_identity(h, U)) {
      Mx.noalias() += Pxt * Ht.transpose();
      Mt.noalias() += Ptt * Ht.transpose();
    } else {
      Mx.noalias() += gather_cols(Pxt, h) * Ht.transpose();
      Mt.noalias() += gather_cols(Ptt, h) * Ht.transpose();
    }
  }
  Mat S = R;
  S.noalias() += Hx * Mx;
  if (nh > 0) S.noalias() += Ht * gather_rows(Mt, h);
  S = 0.5 * (S + S.transpose()).eval();
  check_innovation(S);
  const Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance factorization failed");

  const Mat Lx = gain_scale * llt.solve(Mx.transpose()).transpose();
  const Mat Wx = Mx - Lx * S;  // zero for the Kalman gain
  x.noalias() += Lx * innovation;
  Px.noalias() -= Lx * Mx.transpose();
  Px.noalias() -= Wx * Lx.transpose();
  symmetrize(Px);
  Pxt.noalias() -= Lx * Mt.transpose();
  count(counters, 2.0 * static_cast<double>(nx) * ny * U + static_cast<double>(nh) * ny * U);

  if (ng == 0) return;
  if (is_identity(g, U)) {
    const Mat Lt = gain_scale * llt.solve(Mt.transpose()).transpose();
    const Mat Wt = Mt - Lt * S;
    theta.noalias() += Lt * innovation;
    Pxt.noalias() -= Wx * Lt.transpose();
    // Lt Mt^T + Wt Lt^T is symmetric; one rank-2n_y pass fills the lower
    // triangle and the mirror makes the result exactly symmetric.
    Mat left(U, 2 * ny);
    left << Lt, Wt;
    Mat right(U, 2 * ny);
    right << Mt, Lt;
    Ptt.triangularView<Eigen::Lower>() -= left * right.transpose();
    mirror_lower(Ptt);
    count(counters, 2.0 * static_cast<double>(U) * U * ny);
    return;
  }
  const Mat Mg = gather_rows(Mt, g);
  const Mat Lg = gain_scale * llt.solve(Mg.transpose()).transpose();
  const Vec dtheta = Lg * innovation;
  for (Index k = 0; k < ng; ++k) theta(g[static_cast<std::size_t>(k)]) += dtheta(k);
  const Mat WL = Wx * Lg.transpose();
  for (Index k = 0; k < ng; ++k) Pxt.col(g[static_cast<std::size_t>(k)]) -= WL.col(k);
  // Rows g lose Lg Mt^T, columns g lose its transpose; the gg block receives
  // both and gains Lg S Lg^T.
  // B = Lg Mt^T has rank n_y and is applied without being formed. Storage is
  // column-major, so the row update walks columns.
  const Mat MtT = Mt.transpose();
  constexpr Index kBlock = 256;
  Mat Bblk(ng, std::min(kBlock, U));
  for (Index j0 = 0; j0 < U; j0 += kBlock) {
    const Index w = std::min(kBlock, U - j0);
    Bblk.leftCols(w).noalias() = Lg * MtT.middleCols(j0, w);
    for (Index j = 0; j < w; ++j) {
      for (Index k = 0; k < ng; ++k) Ptt(g[static_cast<std::size_t>(k)], j0 + j) -= Bblk(k, j);
    }
  }
  for (Index k = 0; k < ng; ++k) Ptt.col(g[static_cast<std::size_t>(k)]).noalias() -= Mt * Lg.row(k).transpose();
  const Mat C = Lg * S * Lg.transpose();
  for (Index j = 0; j < ng; ++j) {
    for (Index i = 0; i < ng; ++i) Ptt(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)]) += C(i, j);
  }
  symmetrize_subset(Ptt, g);
  count(counters, 2.0 * static_cast<double>(ng) * ny * U + static_cast<double>(ng) * ng * ny);
}

}  // namespace detail

FilterState FilterState::prior(const Vec& x0, const Mat& Px0, Index weight_count, double prior_weight_variance) {
  if (Px0.rows() != x0.size() || Px0.cols() != x0.size()) throw ShapeError("Px0 must be n_x x n_x");
  if (weight_count < 0) throw ShapeError("weight count must be non-negative");
  FilterState s;
  s.x = x0;
  s.Px = Px0;
  s.theta = Vec::Zero(weight_count);
  s.Pxt = Mat::Zero(x0.size(), weight_count);
  s.Ptt = Mat::Identity(weight_count, weight_count) * prior_weight_variance;
  return s;
}

Mat FilterState::joint_covariance() const {
  const Index nx = x.size();
  const Index nw = theta.size();
  Mat P(nx + nw, nx + nw);
  P.topLeftCorner(nx, nx) = Px;
  P.topRightCorner(nx, nw) = Pxt;
  P.bottomLeftCorner(nw, nx) = Pxt.transpose();
  P.bottomRightCorner(nw, nw) = Ptt;
  return P;
}

void FilterState::check_shapes() const {
  const Index nx = x.size();
  const Index nw = theta.size();
  if (Px.rows() != nx || Px.cols() != nx || Pxt.rows() != nx || Pxt.cols() != nw || Ptt.rows() != nw ||
      Ptt.cols() != nw) {
    throw ShapeError("filter state blocks have inconsistent shapes");
  }
}

namespace {

enum class Scope { dense, sparse };

void check_model_state(const FilterState& state, const AugmentedModel& model) {
  state.check_shapes();
  if (state.state_dim() != model.state_dim()) throw ShapeError("state dimension differs from the model");
  if (state.weight_count() != model.weight_count()) throw ShapeError("weight count differs from the model");
}

basis::ActiveSet active_for(const AugmentedModel& model, const Vec& z, Scope scope, const UpdateOptions& options) {
  const auto& ex = model.expansion;
  if (ex.outputs == 0) return {};
  if (scope == Scope::dense) return basis::all_indices(ex.grid);
  return select_for(ex, z, options.selection, options.counters);
}

StepReport time_update(FilterState& state, const AugmentedModel& model, const Vec& u, const UpdateOptions& options,
                       Scope scope) {
  check_model_state(state, model);
  const auto& ex = model.expansion;
  const Vec z = model.known->transform(state.x, u);
  const auto active = active_for(model, z, scope, options);
  const auto sample = sample_basis(ex, z, active, true, options.counters);
  const auto a = ex.weight_indices(active);
  const auto lin = linearize_dynamics(model, state.x, u, sample, gather_active(ex, active, state.theta));
  if (!lin.mean.allFinite() || !lin.Fx.allFinite() || !lin.Fa.allFinite()) {
    throw NumericalError("time update produced non-finite values");
  }
  detail::time_update_core(state.x, state.Px, state.Pxt, state.Ptt, a, lin.mean, lin.Fx, lin.Fa, model.Q,
                           model.weight_noise, options.counters);
  return {active.size(), true};
}

StepReport measurement_update(FilterState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                              const UpdateOptions& options, Scope scope) {
  check_model_state(state, model);
  if (y.size() != model.obs_dim()) throw ShapeError("observation has the wrong dimension");
  const auto& ex = model.expansion;
  const auto& known = *model.known;
  const Vec z = known.transform(state.x, u);
  const auto active = active_for(model, z, scope, options);
  BasisSample sample;
  sample.active = active;
  if (known.observation_uses_function()) sample = sample_basis(ex, z, active, true, options.counters);
  const auto a = ex.weight_indices(active);
  const Vec theta_a = known.observation_uses_function() ? gather_active(ex, active, state.theta) : Vec();
  const auto lin = linearize_observation(model, state.x, u, sample, theta_a);
  const bool learning = known.learning_active(state.x, u);
  const detail::Positions h = lin.Ha.cols() > 0 ? a : detail::Positions{};
  const detail::Positions g = learning ? a : detail::Positions{};
  detail::measurement_update_core(state.x, state.Px, state.theta, state.Pxt, state.Ptt, h, g, y - lin.mean, lin.Hx,
                                  lin.Ha, model.R, options.gain_scale, options.counters);
  if (!state.x.allFinite() || !state.theta.allFinite()) throw NumericalError("measurement update diverged");
  return {active.size(), learning};
}

}  // namespace

StepReport time_update_dense(FilterState& state, const AugmentedModel& model, const Vec& u,
                             const UpdateOptions& options) {
  return time_update(state, model, u, options, Scope::dense);
}

StepReport time_update_sparse(FilterState& state, const AugmentedModel& model, const Vec& u,
                              const UpdateOptions& options) {
  return time_update(state, model, u, options, Scope::sparse);
}

StepReport measurement_update_dense(FilterState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                    const UpdateOptions& options) {
  return measurement_update(state, model, y, u, options, Scope::dense);
}

StepReport measurement_update_sparse(FilterState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                     const UpdateOptions& options) {
  return measurement_update(state, model, y, u, options, Scope::sparse);
}

FunctionEstimate query_function(const FilterState& state, const Expansion& expansion, const Vec& z) {
  if (state.weight_count() != expansion.weight_count()) throw ShapeError("weight count differs from the expansion");
  const auto active = select_for(expansion, z, basis::Selection::exact);
  const auto sample = sample_basis(expansion, z, active, false);
  const auto idx = expansion.weight_indices(active);
  const Mat Phi = unknown_weight_jacobian(expansion, sample);
  Vec theta_a(static_cast<Index>(idx.size()));
  Mat P_aa(theta_a.size(), theta_a.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    theta_a(static_cast<Index>(j)) = state.theta(idx[j]);
    for (std::size_t i = 0; i < idx.size(); ++i) P_aa(static_cast<Index>(i), static_cast<Index>(j)) = state.Ptt(idx[i], idx[j]);
  }
  FunctionEstimate out;
  out.mean = Phi * theta_a;
  out.covariance = Phi * P_aa * Phi.transpose();
  return out;
}

MemoryEstimate memory_estimate(std::uint64_t weights_per_output, std::uint64_t outputs, std::uint64_t bits_per_number) {
  if (weights_per_output == 0 || outputs == 0 || bits_per_number == 0) {
    throw DomainError("memory_estimate needs positive inputs");
  }
  std::uint64_t n = 0;
  std::uint64_t nn = 0;
  std::uint64_t total = 0;
  MemoryEstimate out;
  if (__builtin_mul_overflow(weights_per_output, outputs, &n) || __builtin_mul_overflow(n, n, &nn) ||
      __builtin_mul_overflow(nn, bits_per_number, &out.covariance_bits) ||
      __builtin_mul_overflow(n, bits_per_number, &out.mean_bits) ||
      __builtin_add_overflow(out.covariance_bits, out.mean_bits, &total)) {
    throw std::overflow_error("memory_estimate overflow");
  }
  return out;
}

}  // namespace bfekf
