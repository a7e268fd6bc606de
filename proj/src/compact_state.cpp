#include <bfekf/detail/filter_core.hpp>
#include <bfekf/estimator.hpp>

#include <algorithm>
#include <limits>

namespace bfekf {

CompactState::CompactState(const Vec& x0, const Mat& Px0, Index weight_count, double prior_weight_variance)
    : x(x0), Px(Px0), weight_count_(weight_count), untouched_variance_(prior_weight_variance) {
  if (Px0.rows() != x0.size() || Px0.cols() != x0.size()) throw ShapeError("Px0 must be n_x x n_x");
  if (weight_count < 0 || weight_count > std::numeric_limits<std::int32_t>::max()) {
    throw ShapeError("weight count out of range");
  }
  Pxt_ = Mat::Zero(x0.size(), 0);
  local_of_.assign(static_cast<std::size_t>(weight_count), -1);
  reserve(std::min<Index>(weight_count, 64));
}

void CompactState::reserve(Index capacity) {
  if (capacity <= theta_.size()) return;
  Vec theta = Vec::Zero(capacity);
  Mat Pxt = Mat::Zero(x.size(), capacity);
  Mat Ptt = Mat::Zero(capacity, capacity);
  theta.head(used_) = theta_.head(used_);
  Pxt.leftCols(used_) = Pxt_.leftCols(used_);
  Ptt.topLeftCorner(used_, used_) = Ptt_.topLeftCorner(used_, used_);
  theta_ = std::move(theta);
  Pxt_ = std::move(Pxt);
  Ptt_ = std::move(Ptt);
}

std::vector<Index> CompactState::touch(const std::vector<Index>& global) {
  std::vector<Index> pos(global.size());
  Index missing = 0;
  for (Index g : global) {
    if (g < 0 || g >= weight_count_) throw ShapeError("weight index out of range");
    if (local_of_[static_cast<std::size_t>(g)] < 0) ++missing;
  }
  if (used_ + missing > theta_.size()) {
    reserve(std::min<Index>(weight_count_, std::max<Index>(2 * theta_.size(), used_ + missing)));
  }
  for (std::size_t k = 0; k < global.size(); ++k) {
    auto& slot = local_of_[static_cast<std::size_t>(global[k])];
    if (slot < 0) {
      // Storage beyond used_ is kept zeroed, so only the variance is set.
      slot = static_cast<std::int32_t>(used_);
      global_of_.push_back(global[k]);
      Ptt_(used_, used_) = untouched_variance_;
      ++used_;
    }
    pos[k] = slot;
  }
  return pos;
}

void CompactState::add_weight_noise(double sigma) {
  if (sigma == 0.0) return;
  Ptt_.topLeftCorner(used_, used_).diagonal().array() += sigma;
  untouched_variance_ += sigma;
}

void CompactState::reset_cross_covariance() { Pxt_.leftCols(used_).setZero(); }

FilterState CompactState::to_dense() const {
  FilterState s = FilterState::prior(x, Px, weight_count_, untouched_variance_);
  for (Index j = 0; j < used_; ++j) {
    const Index gj = global_of_[static_cast<std::size_t>(j)];
    s.theta(gj) = theta_(j);
    s.Pxt.col(gj) = Pxt_.col(j);
    for (Index i = 0; i < used_; ++i) s.Ptt(global_of_[static_cast<std::size_t>(i)], gj) = Ptt_(i, j);
  }
  return s;
}

namespace {

Vec gather_theta(const CompactState& state, const std::vector<Index>& global) {
  Vec out = Vec::Zero(static_cast<Index>(global.size()));
  const auto theta = state.theta();
  for (std::size_t k = 0; k < global.size(); ++k) {
    const Index p = state.position(global[k]);
    if (p >= 0) out(static_cast<Index>(k)) = theta(p);
  }
  return out;
}

void check_model_state(const CompactState& state, const AugmentedModel& model) {
  if (state.x.size() != model.state_dim()) throw ShapeError("state dimension differs from the model");
  if (state.weight_count() != model.weight_count()) throw ShapeError("weight count differs from the model");
}

basis::ActiveSet active_for(const AugmentedModel& model, const Vec& z, const UpdateOptions& options) {
  if (model.expansion.outputs == 0) return {};
  return select_for(model.expansion, z, options.selection, options.counters);
}

}  // namespace

StepReport time_update_sparse(CompactState& state, const AugmentedModel& model, const Vec& u,
                              const UpdateOptions& options) {
  check_model_state(state, model);
  const auto& ex = model.expansion;
  const Vec z = model.known->transform(state.x, u);
  const auto active = active_for(model, z, options);
  const auto sample = sample_basis(ex, z, active, true, options.counters);
  const auto global = ex.weight_indices(active);
  const auto a = state.touch(global);
  const auto lin = linearize_dynamics(model, state.x, u, sample, gather_theta(state, global));
  if (!lin.mean.allFinite() || !lin.Fx.allFinite() || !lin.Fa.allFinite()) {
    throw NumericalError("time update produced non-finite values");
  }
  detail::time_update_core(state.x, state.Px, state.Pxt(), state.Ptt(), a, lin.mean, lin.Fx, lin.Fa, model.Q, 0.0,
                           options.counters);
  state.add_weight_noise(model.weight_noise);
  return {active.size(), true};
}

StepReport measurement_update_sparse(CompactState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                     const UpdateOptions& options) {
  check_model_state(state, model);
  if (y.size() != model.obs_dim()) throw ShapeError("observation has the wrong dimension");
  const auto& ex = model.expansion;
  const auto& known = *model.known;
  const Vec z = known.transform(state.x, u);
  const auto active = active_for(model, z, options);
  BasisSample sample;
  sample.active = active;
  const bool uses_function = known.observation_uses_function();
  if (uses_function) sample = sample_basis(ex, z, active, true, options.counters);
  const auto global = ex.weight_indices(active);
  const auto lin = linearize_observation(model, state.x, u, sample, uses_function ? gather_theta(state, global) : Vec());
  const bool learning = known.learning_active(state.x, u);
  detail::Positions a;
  if (learning || lin.Ha.cols() > 0) a = state.touch(global);
  const detail::Positions h = lin.Ha.cols() > 0 ? a : detail::Positions{};
  const detail::Positions g = learning ? a : detail::Positions{};
  detail::measurement_update_core(state.x, state.Px, state.theta(), state.Pxt(), state.Ptt(), h, g, y - lin.mean,
                                  lin.Hx, lin.Ha, model.R, options.gain_scale, options.counters);
  if (!state.x.allFinite() || !state.theta().allFinite()) throw NumericalError("measurement update diverged");
  return {active.size(), learning};
}

FunctionEstimate query_function(const CompactState& state, const Expansion& expansion, const Vec& z) {
  if (state.weight_count() != expansion.weight_count()) throw ShapeError("weight count differs from the expansion");
  const auto active = select_for(expansion, z, basis::Selection::exact);
  const auto sample = sample_basis(expansion, z, active, false);
  const auto global = expansion.weight_indices(active);
  const Mat Phi = unknown_weight_jacobian(expansion, sample);
  const auto n = static_cast<Index>(global.size());
  std::vector<Index> pos(global.size());
  for (std::size_t k = 0; k < global.size(); ++k) pos[k] = state.position(global[k]);
  const auto theta = state.theta();
  const auto Ptt = state.Ptt();
  Vec theta_a = Vec::Zero(n);
  Mat P_aa = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const Index pj = pos[static_cast<std::size_t>(j)];
    if (pj < 0) {
      P_aa(j, j) = state.untouched_variance();
      continue;
    }
    theta_a(j) = theta(pj);
    for (Index i = 0; i < n; ++i) {
      const Index pi = pos[static_cast<std::size_t>(i)];
      if (pi >= 0) P_aa(i, j) = Ptt(pi, pj);
    }
  }
  FunctionEstimate out;
  out.mean = Phi * theta_a;
  out.covariance = Phi * P_aa * Phi.transpose();
  return out;
}

}  // namespace bfekf
