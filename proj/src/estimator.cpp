#include <bfekf/estimator.hpp>

#include <string>

namespace bfekf {

std::string_view method_name(Method method) noexcept {
  switch (method) {
    case Method::dense:
      return "dense";
    case Method::csrbf:
      return "csrbf";
    case Method::fast_csrbf:
      return "fast-csrbf";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "dense") return Method::dense;
  if (name == "csrbf") return Method::csrbf;
  if (name == "fast-csrbf" || name == "fast_csrbf") return Method::fast_csrbf;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected dense, csrbf or fast-csrbf)");
}

Estimator::Estimator(std::shared_ptr<const AugmentedModel> model, Method method, const Vec& x0, const Mat& Px0)
    : model_(std::move(model)), method_(method) {
  if (!model_) throw ConfigError("estimator needs a model");
  model_->validate();
  if (x0.size() != model_->state_dim()) throw ShapeError("prior state has the wrong dimension");
  const double prior = model_->expansion.config.prior_weight_variance;
  if (method_ == Method::dense) {
    dense_ = std::make_unique<FilterState>(FilterState::prior(x0, Px0, model_->weight_count(), prior));
  } else {
    if (!model_->expansion.config.compact()) throw ConfigError("sparse methods need a compactly supported basis");
    compact_ = std::make_unique<CompactState>(x0, Px0, model_->weight_count(), prior);
  }
}

StepReport Estimator::predict(const Vec& u, OpCounters* counters) {
  UpdateOptions opt;
  opt.selection = method_ == Method::fast_csrbf ? basis::Selection::fast : basis::Selection::exact;
  opt.gain_scale = gain_scale_;
  opt.counters = counters;
  if (dense_) return time_update_dense(*dense_, *model_, u, opt);
  return time_update_sparse(*compact_, *model_, u, opt);
}

StepReport Estimator::correct(const Vec& y, const Vec& u, OpCounters* counters) {
  UpdateOptions opt;
  opt.selection = method_ == Method::fast_csrbf ? basis::Selection::fast : basis::Selection::exact;
  opt.gain_scale = gain_scale_;
  opt.counters = counters;
  if (dense_) return measurement_update_dense(*dense_, *model_, y, u, opt);
  return measurement_update_sparse(*compact_, *model_, y, u, opt);
}

void Estimator::restart(const Vec& x0, const Mat& Px0) {
  if (x0.size() != model_->state_dim() || Px0.rows() != x0.size() || Px0.cols() != x0.size()) {
    throw ShapeError("restart prior has the wrong dimension");
  }
  if (dense_) {
    dense_->x = x0;
    dense_->Px = Px0;
    dense_->Pxt.setZero();
  } else {
    compact_->x = x0;
    compact_->Px = Px0;
    compact_->reset_cross_covariance();
  }
}

FunctionEstimate Estimator::query(const Vec& z) const {
  if (dense_) return query_function(*dense_, model_->expansion, z);
  return query_function(*compact_, model_->expansion, z);
}

const Vec& Estimator::x() const noexcept { return dense_ ? dense_->x : compact_->x; }
const Mat& Estimator::Px() const noexcept { return dense_ ? dense_->Px : compact_->Px; }

Vec Estimator::theta() const {
  if (dense_) return dense_->theta;
  Vec out = Vec::Zero(compact_->weight_count());
  const auto theta = compact_->theta();
  for (Index p = 0; p < compact_->touched(); ++p) out(compact_->global(p)) = theta(p);
  return out;
}

FilterState Estimator::snapshot() const { return dense_ ? *dense_ : compact_->to_dense(); }

Index Estimator::stored_weights() const noexcept { return dense_ ? dense_->weight_count() : compact_->touched(); }

}  // namespace bfekf
