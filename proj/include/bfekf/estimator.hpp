#pragma once

#include <bfekf/filter.hpp>
#include <bfekf/ssmodel.hpp>

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace bfekf {

// Filter state that stores only weights touched by some active set so far.
// An untouched weight has mean 0, no correlation with anything, and variance
// prior + Sigma * (time updates since construction); the sparse recursion
// never changes those facts, so omitting the weight is exact.
class CompactState {
 public:
  CompactState(const Vec& x0, const Mat& Px0, Index weight_count, double prior_weight_variance);

  Vec x;
  Mat Px;

  Index weight_count() const noexcept { return weight_count_; }
  Index touched() const noexcept { return used_; }
  // Stores any missing weights and returns the storage positions of all.
  std::vector<Index> touch(const std::vector<Index>& global);
  // Storage position of a global weight, or -1.
  Index position(Index global) const { return local_of_.at(static_cast<std::size_t>(global)); }
  Index global(Index position) const { return global_of_.at(static_cast<std::size_t>(position)); }
  double untouched_variance() const noexcept { return untouched_variance_; }

  Eigen::Ref<Vec> theta() { return theta_.head(used_); }
  Eigen::Ref<Mat> Pxt() { return Pxt_.leftCols(used_); }
  Eigen::Ref<Mat> Ptt() { return Ptt_.topLeftCorner(used_, used_); }
  Eigen::Ref<const Vec> theta() const { return theta_.head(used_); }
  Eigen::Ref<const Mat> Pxt() const { return Pxt_.leftCols(used_); }
  Eigen::Ref<const Mat> Ptt() const { return Ptt_.topLeftCorner(used_, used_); }

  // Adds Sigma to every stored and every implicit weight variance.
  void add_weight_noise(double sigma);
  void reset_cross_covariance();

  FilterState to_dense() const;

 private:
  void reserve(Index capacity);

  Index weight_count_;
  double untouched_variance_;
  std::vector<std::int32_t> local_of_;
  std::vector<Index> global_of_;
  Index used_ = 0;
  Vec theta_;
  Mat Pxt_;
  Mat Ptt_;
};

StepReport time_update_sparse(CompactState& state, const AugmentedModel& model, const Vec& u,
                              const UpdateOptions& options = {});
StepReport measurement_update_sparse(CompactState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                     const UpdateOptions& options = {});
FunctionEstimate query_function(const CompactState& state, const Expansion& expansion, const Vec& z);

enum class Method {
  dense,       // full storage and gain over every weight
  csrbf,       // compact storage, exact active set
  fast_csrbf,  // compact storage, box active set
};

std::string_view method_name(Method method) noexcept;
// Accepts "dense", "csrbf", "fast-csrbf"; throws ConfigError otherwise.
Method parse_method(std::string_view name);

// One joint state and function estimator.
class Estimator {
 public:
  Estimator(std::shared_ptr<const AugmentedModel> model, Method method, const Vec& x0, const Mat& Px0);

  StepReport predict(const Vec& u, OpCounters* counters = nullptr);
  StepReport correct(const Vec& y, const Vec& u, OpCounters* counters = nullptr);
  // New state prior with the weight posterior kept and Pxt cleared.
  void restart(const Vec& x0, const Mat& Px0);
  FunctionEstimate query(const Vec& z) const;

  const Vec& x() const noexcept;
  const Mat& Px() const noexcept;
  Vec theta() const;
  FilterState snapshot() const;
  Index stored_weights() const noexcept;

  Method method() const noexcept { return method_; }
  const AugmentedModel& model() const noexcept { return *model_; }
  void set_gain_scale(double scale) noexcept { gain_scale_ = scale; }

 private:
  std::shared_ptr<const AugmentedModel> model_;
  Method method_;
  double gain_scale_ = 1.0;
  std::unique_ptr<FilterState> dense_;
  std::unique_ptr<CompactState> compact_;
};

}  // namespace bfekf
