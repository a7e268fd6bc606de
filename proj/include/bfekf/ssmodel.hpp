#pragma once

#include <bfekf/basis.hpp>
#include <bfekf/types.hpp>

#include <memory>
#include <vector>

namespace bfekf {

// Layout of the J * n weights of a J-output expansion sharing one grid of n
// centers. stacked: weight (center i, output j) sits at j*n + i.
// staggered: it sits at i*J + j.
enum class WeightOrdering { stacked, staggered };

struct Expansion {
  basis::CartesianGrid grid;
  basis::BasisConfig config;
  Index outputs = 1;  // J; zero means no learned component
  WeightOrdering ordering = WeightOrdering::staggered;

  Index centers() const noexcept { return grid.size(); }
  Index weight_count() const noexcept { return outputs * grid.size(); }
  Index weight_index(Index center, Index output) const noexcept {
    return ordering == WeightOrdering::stacked ? output * grid.size() + center : center * outputs + output;
  }
  // Position of (active slot ii, output j) inside a restricted weight vector
  // of length J * n_active. Matches the order of weight_indices().
  Index local_slot(Index ii, Index output, Index n_active) const noexcept {
    return ordering == WeightOrdering::stacked ? output * n_active + ii : ii * outputs + output;
  }
  // Global weight indices of an active set, strictly increasing.
  std::vector<Index> weight_indices(const basis::ActiveSet& active) const;
  void validate() const;
};

// Basis functions retained at one input point z = phi(x).
struct BasisSample {
  basis::ActiveSet active;
  Vec values;     // n_active
  Mat gradient;   // P x n_active; empty unless requested
};

BasisSample sample_basis(const Expansion& expansion, const Vec& z, const basis::ActiveSet& active,
                         bool with_gradient, OpCounters* counters = nullptr);

// Active set for z by the given selection rule; every center for global bases.
basis::ActiveSet select_for(const Expansion& expansion, const Vec& z, basis::Selection selection,
                            OpCounters* counters = nullptr);

// u_f = Phi theta restricted to the active weights (length J * n_active, in
// local_slot order).
Vec eval_unknown(const Expansion& expansion, const BasisSample& sample, const Vec& theta_active);

// Convenience form over a full weight vector.
Vec eval_unknown(const Expansion& expansion, const Vec& z, const Vec& theta,
                 basis::Selection selection = basis::Selection::exact);

// d u_f / d theta_active (J x J*n_active).
Mat unknown_weight_jacobian(const Expansion& expansion, const BasisSample& sample);

// d u_f / d z (J x P); needs sample.gradient.
Mat unknown_input_jacobian(const Expansion& expansion, const BasisSample& sample, const Vec& theta_active);

// Gathers theta at weight_indices(active) from a full weight vector.
Vec gather_active(const Expansion& expansion, const basis::ActiveSet& active, const Vec& theta);

// Known part of a gray-box model. The unknown function enters as u_f, a
// J-vector evaluated at z = transform(x, u).
class KnownModel {
 public:
  virtual ~KnownModel() = default;

  virtual Index state_dim() const = 0;
  virtual Index obs_dim() const = 0;
  virtual Index input_dim() const { return 0; }
  virtual Index function_dim() const = 0;
  virtual Index transform_dim() const = 0;

  virtual Vec transform(const Vec& x, const Vec& u) const = 0;
  virtual Mat transform_jacobian(const Vec& x, const Vec& u) const = 0;

  virtual Vec propagate(const Vec& x, const Vec& u, const Vec& uf) const = 0;
  virtual Mat propagate_dx(const Vec& x, const Vec& u, const Vec& uf) const = 0;
  virtual Mat propagate_duf(const Vec& x, const Vec& u, const Vec& uf) const = 0;

  virtual Vec observe(const Vec& x, const Vec& u, const Vec& uf) const = 0;
  virtual Mat observe_dx(const Vec& x, const Vec& u, const Vec& uf) const = 0;
  // When false, observe() ignores u_f and the basis is not sampled for it.
  virtual bool observation_uses_function() const { return false; }
  // Zero (n_y x J) unless the observation depends on the unknown function.
  virtual Mat observe_duf(const Vec& x, const Vec& u, const Vec& uf) const;

  // False while the weights must not be corrected at this state.
  virtual bool learning_active(const Vec& x, const Vec& u) const;
};

// x+ = F x + Gf u_f, y = H x, z = D x.
class LinearKnownModel final : public KnownModel {
 public:
  LinearKnownModel(Mat F, Mat Gf, Mat H, Mat D);

  Index state_dim() const override { return F_.rows(); }
  Index obs_dim() const override { return H_.rows(); }
  Index function_dim() const override { return Gf_.cols(); }
  Index transform_dim() const override { return D_.rows(); }

  Vec transform(const Vec& x, const Vec& u) const override;
  Mat transform_jacobian(const Vec& x, const Vec& u) const override;
  Vec propagate(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat propagate_dx(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat propagate_duf(const Vec& x, const Vec& u, const Vec& uf) const override;
  Vec observe(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat observe_dx(const Vec& x, const Vec& u, const Vec& uf) const override;

  const Mat& F() const noexcept { return F_; }
  const Mat& Gf() const noexcept { return Gf_; }
  const Mat& H() const noexcept { return H_; }
  const Mat& D() const noexcept { return D_; }

 private:
  Mat F_, Gf_, H_, D_;
};

struct TireParams {
  double rear_axle = 1.6;   // l_r [m]
  double front_axle = 1.4;  // l_f [m]
  double gravity = 9.81;    // g0 [m/s^2]
  double mass = 1000.0;     // [kg]; does not enter the discretized model
  double sample_time = 0.04;
  double process_variance = 1.0;  // q
  Mat R = Eigen::Vector2d(0.1, 0.01).asDiagonal();
  double slip_floor = 0.5;  // [m/s], lower clamp of the slip denominator

  double gain() const noexcept { return gravity * front_axle / (rear_axle + front_axle); }
};

// Longitudinal speed x with the measured front-wheel circumferential speed
// u = r_w * omega_f as input. z = slip, x+ = x + Ts G u_f, y = [G u_f; x].
class TireKnownModel final : public KnownModel {
 public:
  explicit TireKnownModel(const TireParams& params);

  Index state_dim() const override { return 1; }
  Index obs_dim() const override { return 2; }
  Index input_dim() const override { return 1; }
  Index function_dim() const override { return 1; }
  Index transform_dim() const override { return 1; }

  Vec transform(const Vec& x, const Vec& u) const override;
  Mat transform_jacobian(const Vec& x, const Vec& u) const override;
  Vec propagate(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat propagate_dx(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat propagate_duf(const Vec& x, const Vec& u, const Vec& uf) const override;
  Vec observe(const Vec& x, const Vec& u, const Vec& uf) const override;
  Mat observe_dx(const Vec& x, const Vec& u, const Vec& uf) const override;
  bool observation_uses_function() const override { return true; }
  Mat observe_duf(const Vec& x, const Vec& u, const Vec& uf) const override;
  bool learning_active(const Vec& x, const Vec& u) const override;

  const TireParams& params() const noexcept { return params_; }

 private:
  TireParams params_;
};

// Slip (u - x) / max(x, floor).
double wheel_slip(double speed, double wheel_speed, double floor);

// How the observation's dependence on the weights is linearized.
enum class ObservationCoupling {
  exact,   // H_theta = dh/du_f * Phi
  ignore,  // H_theta = 0; the chain term through x is kept
};

struct AugmentedModel {
  std::shared_ptr<const KnownModel> known;
  Expansion expansion;
  Mat Q;                       // n_x x n_x, additive on the state
  Mat R;                       // n_y x n_y
  double weight_noise = 0.0;   // Sigma = weight_noise * I
  double sample_time = 1.0;
  ObservationCoupling coupling = ObservationCoupling::exact;

  Index state_dim() const { return known->state_dim(); }
  Index obs_dim() const { return known->obs_dim(); }
  Index weight_count() const noexcept { return expansion.weight_count(); }
  // Throws ConfigError on inconsistent dimensions or non-PSD covariances.
  void validate() const;
};

struct DynamicsLinearization {
  Vec mean;  // f(x, u, u_f)
  Vec uf;
  Mat Fx;    // n_x x n_x including the chain term through the basis
  Mat Fa;    // n_x x J*n_active
};

struct ObservationLinearization {
  Vec mean;  // h(x, u, u_f)
  Mat Hx;    // n_y x n_x
  Mat Ha;    // n_y x J*n_active, or n_y x 0 when the weights do not enter h
             // or the coupling is ignored
};

// sample must hold the gradient; theta_active is in local_slot order. The
// observation form only reads the sample if the observation uses u_f.
DynamicsLinearization linearize_dynamics(const AugmentedModel& model, const Vec& x, const Vec& u,
                                         const BasisSample& sample, const Vec& theta_active);
ObservationLinearization linearize_observation(const AugmentedModel& model, const Vec& x, const Vec& u,
                                               const BasisSample& sample, const Vec& theta_active);

// Fx and Fa at (x, theta) over the active set of the requested selection.
struct Jacobians {
  basis::ActiveSet active;
  Mat Fx;
  Mat Fa;
};
Jacobians jacobians(const AugmentedModel& model, const Vec& x, const Vec& u, const Vec& theta,
                    basis::Selection selection = basis::Selection::exact);

// Intersection motion model: state [p; v] in 2D, x+ = F x + G u_f + G w with
// F = [[1, Ts], [0, 1]] (x) I, G = [Ts^2/2; Ts] (x) I, z = p, y = p + e.
// Qw is the 2 x 2 covariance of w.
AugmentedModel build_cv_model(double sample_time, const Mat& Qw, const Mat& R, basis::CartesianGrid grid,
                              basis::BasisConfig config, double weight_noise = 0.0,
                              WeightOrdering ordering = WeightOrdering::staggered);

struct Example1Params {
  double process_variance = 0.01;
  double measurement_variance = 0.01;
  double prior_weight_variance = 0.1;
  double support = 10.0;
  double spacing = 1.0;
  Vec position_bounds = Eigen::Vector2d(-20.0, 120.0);
  Vec velocity_bounds = Eigen::Vector2d(-6.0, 8.0);
};

struct Example1Models {
  AugmentedModel a;  // constant velocity, no learned part
  AugmentedModel b;  // constant velocity plus learned acceleration of position
  AugmentedModel c;  // learned transition x+ = u_f(x)
};

// Unit sample time, position measured. Noise on (a) and (b) enters through
// [1/2; 1]; (c) has independent noise on both states.
Example1Models build_1d_models(const Example1Params& params);

AugmentedModel build_tire_model(const TireParams& params, basis::CartesianGrid grid, basis::BasisConfig config,
                                double weight_noise, ObservationCoupling coupling = ObservationCoupling::exact);

}  // namespace bfekf
