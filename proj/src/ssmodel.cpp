#include <bfekf/ssmodel.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace bfekf {

namespace {

void require_symmetric_psd(const Mat& m, const char* name, bool definite) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(name) + " must be square");
  if (!m.allFinite()) throw ConfigError(std::string(name) + " has non-finite entries");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError(std::string(name) + " is not symmetric");
  }
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-10 || (definite && !(min_eig > 0.0))) {
    throw ConfigError(std::string(name) + (definite ? " is not positive definite" : " is not positive semi-definite") +
                      " (min eigenvalue " + std::to_string(min_eig) + ")");
  }
}

}  // namespace

std::vector<Index> Expansion::weight_indices(const basis::ActiveSet& active) const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(outputs * active.size()));
  if (ordering == WeightOrdering::stacked) {
    for (Index j = 0; j < outputs; ++j) {
      for (Index c : active.indices) out.push_back(j * grid.size() + c);
    }
  } else {
    for (Index c : active.indices) {
      for (Index j = 0; j < outputs; ++j) out.push_back(c * outputs + j);
    }
  }
  return out;
}

void Expansion::validate() const {
  config.validate();
  if (outputs < 0) throw ConfigError("output count must be non-negative");
  if (grid.size() <= 0) throw ConfigError("expansion grid is empty");
}

basis::ActiveSet select_for(const Expansion& expansion, const Vec& z, basis::Selection selection,
                            OpCounters* counters) {
  return basis::select_active(z, expansion.grid, expansion.config, selection, counters);
}

BasisSample sample_basis(const Expansion& expansion, const Vec& z, const basis::ActiveSet& active,
                         bool with_gradient, OpCounters* counters) {
  BasisSample s;
  s.active = active;
  if (active.size() == expansion.grid.size()) {
    s.values = basis::eval_all(z, expansion.grid, expansion.config, counters);
  } else {
    s.values = basis::eval_active(z, expansion.grid, expansion.config, active, counters);
  }
  if (with_gradient) s.gradient = basis::gradient_active(z, expansion.grid, expansion.config, active);
  return s;
}

Vec eval_unknown(const Expansion& expansion, const BasisSample& sample, const Vec& theta_active) {
  const Index n = sample.active.size();
  const Index J = expansion.outputs;
  if (theta_active.size() != J * n) {
    throw ShapeError("restricted weight vector has length " + std::to_string(theta_active.size()) + ", expected " +
                     std::to_string(J * n));
  }
  Vec uf = Vec::Zero(J);
  if (expansion.ordering == WeightOrdering::stacked) {
    for (Index j = 0; j < J; ++j) uf(j) = sample.values.dot(theta_active.segment(j * n, n));
  } else {
    // (beta^T (x) I) theta: contiguous J-blocks per center.
    for (Index ii = 0; ii < n; ++ii) {
      for (Index j = 0; j < J; ++j) uf(j) += sample.values(ii) * theta_active(ii * J + j);
    }
  }
  return uf;
}

Vec eval_unknown(const Expansion& expansion, const Vec& z, const Vec& theta, basis::Selection selection) {
  if (theta.size() != expansion.weight_count()) {
    throw ShapeError("weight vector has length " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(expansion.weight_count()));
  }
  const auto active = select_for(expansion, z, selection);
  const auto sample = sample_basis(expansion, z, active, false);
  return eval_unknown(expansion, sample, gather_active(expansion, active, theta));
}

Vec gather_active(const Expansion& expansion, const basis::ActiveSet& active, const Vec& theta) {
  const auto idx = expansion.weight_indices(active);
  Vec out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = theta(idx[k]);
  return out;
}

Mat unknown_weight_jacobian(const Expansion& expansion, const BasisSample& sample) {
  const Index n = sample.active.size();
  const Index J = expansion.outputs;
  Mat Phi = Mat::Zero(J, J * n);
  for (Index j = 0; j < J; ++j) {
    for (Index ii = 0; ii < n; ++ii) Phi(j, expansion.local_slot(ii, j, n)) = sample.values(ii);
  }
  return Phi;
}

Mat unknown_input_jacobian(const Expansion& expansion, const BasisSample& sample, const Vec& theta_active) {
  const Index n = sample.active.size();
  const Index J = expansion.outputs;
  const Index P = expansion.grid.dims();
  if (sample.gradient.cols() != n || sample.gradient.rows() != P) {
    throw ShapeError("basis sample carries no gradient");
  }
  Mat out = Mat::Zero(J, P);
  for (Index j = 0; j < J; ++j) {
    for (Index ii = 0; ii < n; ++ii) {
      out.row(j) += theta_active(expansion.local_slot(ii, j, n)) * sample.gradient.col(ii).transpose();
    }
  }
  return out;
}

Mat KnownModel::observe_duf(const Vec&, const Vec&, const Vec&) const {
  return Mat::Zero(obs_dim(), function_dim());
}

bool KnownModel::learning_active(const Vec&, const Vec&) const { return true; }

LinearKnownModel::LinearKnownModel(Mat F, Mat Gf, Mat H, Mat D)
    : F_(std::move(F)), Gf_(std::move(Gf)), H_(std::move(H)), D_(std::move(D)) {
  const Index n = F_.rows();
  if (F_.cols() != n || Gf_.rows() != n || H_.cols() != n || D_.cols() != n) {
    throw ShapeError("linear model matrices have inconsistent dimensions");
  }
}

Vec LinearKnownModel::transform(const Vec& x, const Vec&) const { return D_ * x; }
Mat LinearKnownModel::transform_jacobian(const Vec&, const Vec&) const { return D_; }

Vec LinearKnownModel::propagate(const Vec& x, const Vec&, const Vec& uf) const {
  Vec out = F_ * x;
  if (Gf_.cols() > 0) out += Gf_ * uf;
  return out;
}

Mat LinearKnownModel::propagate_dx(const Vec&, const Vec&, const Vec&) const { return F_; }
Mat LinearKnownModel::propagate_duf(const Vec&, const Vec&, const Vec&) const { return Gf_; }
Vec LinearKnownModel::observe(const Vec& x, const Vec&, const Vec&) const { return H_ * x; }
Mat LinearKnownModel::observe_dx(const Vec&, const Vec&, const Vec&) const { return H_; }

double wheel_slip(double speed, double wheel_speed, double floor) {
  return (wheel_speed - speed) / std::max(speed, floor);
}

TireKnownModel::TireKnownModel(const TireParams& params) : params_(params) {
  if (!(params_.slip_floor > 0.0)) throw ConfigError("slip floor must be positive");
  if (!(params_.sample_time > 0.0)) throw ConfigError("sample time must be positive");
}

Vec TireKnownModel::transform(const Vec& x, const Vec& u) const {
  return Vec::Constant(1, wheel_slip(x(0), u(0), params_.slip_floor));
}

Mat TireKnownModel::transform_jacobian(const Vec& x, const Vec& u) const {
  // Clamped denominator is constant, leaving only the numerator term.
  const double d = x(0) > params_.slip_floor ? -u(0) / (x(0) * x(0)) : -1.0 / params_.slip_floor;
  return Mat::Constant(1, 1, d);
}

Vec TireKnownModel::propagate(const Vec& x, const Vec&, const Vec& uf) const {
  return Vec::Constant(1, x(0) + params_.sample_time * params_.gain() * uf(0));
}

Mat TireKnownModel::propagate_dx(const Vec&, const Vec&, const Vec&) const { return Mat::Identity(1, 1); }

Mat TireKnownModel::propagate_duf(const Vec&, const Vec&, const Vec&) const {
  return Mat::Constant(1, 1, params_.sample_time * params_.gain());
}

Vec TireKnownModel::observe(const Vec& x, const Vec&, const Vec& uf) const {
  return Eigen::Vector2d(params_.gain() * uf(0), x(0));
}

Mat TireKnownModel::observe_dx(const Vec&, const Vec&, const Vec&) const { return Eigen::Vector2d(0.0, 1.0); }

Mat TireKnownModel::observe_duf(const Vec&, const Vec&, const Vec&) const {
  return Eigen::Vector2d(params_.gain(), 0.0);
}

bool TireKnownModel::learning_active(const Vec& x, const Vec&) const { return x(0) > params_.slip_floor; }

void AugmentedModel::validate() const {
  if (!known) throw ConfigError("model has no known dynamics");
  expansion.validate();
  const Index nx = known->state_dim();
  if (known->function_dim() != expansion.outputs) {
    throw ConfigError("known model expects " + std::to_string(known->function_dim()) +
                      " function outputs, expansion has " + std::to_string(expansion.outputs));
  }
  if (known->transform_dim() != expansion.grid.dims()) {
    throw ConfigError("basis input dimension " + std::to_string(known->transform_dim()) +
                      " differs from grid dimension " + std::to_string(expansion.grid.dims()));
  }
  if (Q.rows() != nx) throw ConfigError("Q must be " + std::to_string(nx) + " x " + std::to_string(nx));
  if (R.rows() != known->obs_dim()) throw ConfigError("R dimension differs from the observation dimension");
  require_symmetric_psd(Q, "Q", false);
  require_symmetric_psd(R, "R", true);
  if (!(weight_noise >= 0.0) || !std::isfinite(weight_noise)) throw ConfigError("weight noise must be non-negative");
  if (!(sample_time > 0.0)) throw ConfigError("sample time must be positive");
}

DynamicsLinearization linearize_dynamics(const AugmentedModel& model, const Vec& x, const Vec& u,
                                         const BasisSample& sample, const Vec& theta_active) {
  const auto& known = *model.known;
  const auto& ex = model.expansion;
  DynamicsLinearization lin;
  lin.uf = eval_unknown(ex, sample, theta_active);
  lin.mean = known.propagate(x, u, lin.uf);
  lin.Fx = known.propagate_dx(x, u, lin.uf);
  if (ex.outputs == 0) {
    lin.Fa = Mat::Zero(x.size(), 0);
    return lin;
  }
  const Mat f_uf = known.propagate_duf(x, u, lin.uf);
  lin.Fx += f_uf * unknown_input_jacobian(ex, sample, theta_active) * known.transform_jacobian(x, u);
  lin.Fa = f_uf * unknown_weight_jacobian(ex, sample);
  return lin;
}

ObservationLinearization linearize_observation(const AugmentedModel& model, const Vec& x, const Vec& u,
                                               const BasisSample& sample, const Vec& theta_active) {
  const auto& known = *model.known;
  const auto& ex = model.expansion;
  ObservationLinearization lin;
  if (!known.observation_uses_function() || ex.outputs == 0) {
    const Vec uf = Vec::Zero(ex.outputs);
    lin.mean = known.observe(x, u, uf);
    lin.Hx = known.observe_dx(x, u, uf);
    lin.Ha = Mat::Zero(lin.mean.size(), 0);
    return lin;
  }
  const Vec uf = eval_unknown(ex, sample, theta_active);
  lin.mean = known.observe(x, u, uf);
  lin.Hx = known.observe_dx(x, u, uf);
  const Mat h_uf = known.observe_duf(x, u, uf);
  if (h_uf.isZero(0.0)) {
    lin.Ha = Mat::Zero(lin.mean.size(), 0);
    return lin;
  }
  lin.Hx += h_uf * unknown_input_jacobian(ex, sample, theta_active) * known.transform_jacobian(x, u);
  if (model.coupling == ObservationCoupling::ignore) {
    lin.Ha = Mat::Zero(lin.mean.size(), 0);
  } else {
    lin.Ha = h_uf * unknown_weight_jacobian(ex, sample);
  }
  return lin;
}

Jacobians jacobians(const AugmentedModel& model, const Vec& x, const Vec& u, const Vec& theta,
                    basis::Selection selection) {
  if (theta.size() != model.weight_count()) throw ShapeError("weight vector length differs from the model");
  const Vec z = model.known->transform(x, u);
  Jacobians out;
  out.active = select_for(model.expansion, z, selection);
  const auto sample = sample_basis(model.expansion, z, out.active, true);
  const auto lin = linearize_dynamics(model, x, u, sample, gather_active(model.expansion, out.active, theta));
  out.Fx = lin.Fx;
  out.Fa = lin.Fa;
  return out;
}

AugmentedModel build_cv_model(double sample_time, const Mat& Qw, const Mat& R, basis::CartesianGrid grid,
                              basis::BasisConfig config, double weight_noise, WeightOrdering ordering) {
  if (grid.dims() != 2) throw ConfigError("constant-velocity model needs a 2D position grid");
  const double T = sample_time;
  const Mat I2 = Mat::Identity(2, 2);
  Mat F(4, 4);
  F << I2, T * I2, Mat::Zero(2, 2), I2;
  Mat G(4, 2);
  G << 0.5 * T * T * I2, T * I2;
  Mat H(2, 4);
  H << I2, Mat::Zero(2, 2);
  AugmentedModel m;
  m.known = std::make_shared<LinearKnownModel>(F, G, H, H);
  m.expansion = Expansion{std::move(grid), config, 2, ordering};
  m.Q = G * Qw * G.transpose();
  m.Q = 0.5 * (m.Q + m.Q.transpose());
  m.R = R;
  m.weight_noise = weight_noise;
  m.sample_time = T;
  m.validate();
  return m;
}

Example1Models build_1d_models(const Example1Params& p) {
  Mat F(2, 2);
  F << 1.0, 1.0, 0.0, 1.0;
  const Eigen::Vector2d G(0.5, 1.0);
  Mat H(1, 2);
  H << 1.0, 0.0;
  const Mat R = Mat::Constant(1, 1, p.measurement_variance);
  const Mat Qg = p.process_variance * G * G.transpose();
  const auto config = basis::BasisConfig::wendland(p.support, p.prior_weight_variance);

  const auto line = basis::CartesianGrid::regular(p.position_bounds.head(1), p.position_bounds.tail(1), p.spacing);
  Eigen::Vector2d lower(p.position_bounds(0), p.velocity_bounds(0));
  Eigen::Vector2d upper(p.position_bounds(1), p.velocity_bounds(1));
  const auto plane = basis::CartesianGrid::regular(lower, upper, p.spacing);

  Example1Models out;
  out.a.known = std::make_shared<LinearKnownModel>(F, Mat::Zero(2, 0), H, H);
  out.a.expansion = Expansion{line, config, 0, WeightOrdering::staggered};
  out.a.Q = Qg;
  out.a.R = R;
  out.a.validate();

  out.b.known = std::make_shared<LinearKnownModel>(F, Mat(G), H, H);
  out.b.expansion = Expansion{line, config, 1, WeightOrdering::staggered};
  out.b.Q = Qg;
  out.b.R = R;
  out.b.validate();

  out.c.known = std::make_shared<LinearKnownModel>(Mat::Zero(2, 2), Mat::Identity(2, 2), H, Mat::Identity(2, 2));
  out.c.expansion = Expansion{plane, config, 2, WeightOrdering::staggered};
  out.c.Q = p.process_variance * Mat::Identity(2, 2);
  out.c.R = R;
  out.c.validate();
  return out;
}

AugmentedModel build_tire_model(const TireParams& params, basis::CartesianGrid grid, basis::BasisConfig config,
                                double weight_noise, ObservationCoupling coupling) {
  if (grid.dims() != 1) throw ConfigError("tire model needs a 1D slip grid");
  AugmentedModel m;
  m.known = std::make_shared<TireKnownModel>(params);
  m.expansion = Expansion{std::move(grid), config, 1, WeightOrdering::staggered};
  m.Q = Mat::Constant(1, 1, params.process_variance);
  m.R = params.R;
  m.weight_noise = weight_noise;
  m.sample_time = params.sample_time;
  m.coupling = coupling;
  m.validate();
  return m;
}

}  // namespace bfekf
