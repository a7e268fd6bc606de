#include <bfekf/bfekf.h>

#include <bfekf/estimator.hpp>
#include <bfekf/harness.hpp>

#include <fstream>
#include <new>
#include <sstream>
#include <stdexcept>
#include <string>

struct bfekf_grid {
  bfekf::basis::CartesianGrid grid;
};

struct bfekf_model {
  std::shared_ptr<const bfekf::AugmentedModel> model;
};

struct bfekf_estimator {
  bfekf::Estimator estimator;
};

struct bfekf_report {
  std::string metrics;
  std::string directory;
};

namespace {

using bfekf::Index;
using bfekf::Mat;
using bfekf::Vec;

thread_local std::string last_error;

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class F>
bfekf_status guarded(F&& body) noexcept {
  try {
    body();
    last_error.clear();
    return BFEKF_OK;
  } catch (const ArgumentError& e) {
    last_error = e.what();
    return BFEKF_ERR_INVALID_ARGUMENT;
  } catch (const bfekf::ShapeError& e) {
    last_error = e.what();
    return BFEKF_ERR_SHAPE;
  } catch (const bfekf::ConfigError& e) {
    last_error = e.what();
    return BFEKF_ERR_CONFIG;
  } catch (const bfekf::NumericalError& e) {
    last_error = e.what();
    return BFEKF_ERR_NUMERICAL;
  } catch (const bfekf::UnsupportedError& e) {
    last_error = e.what();
    return BFEKF_ERR_UNSUPPORTED;
  } catch (const bfekf::DomainError& e) {
    last_error = e.what();
    return BFEKF_ERR_DOMAIN;
  } catch (const std::overflow_error& e) {
    last_error = e.what();
    return BFEKF_ERR_DOMAIN;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return BFEKF_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return BFEKF_ERR_OUT_OF_MEMORY;
  } catch (const std::exception& e) {
    last_error = e.what();
    return BFEKF_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return BFEKF_ERR_INTERNAL;
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw ArgumentError(message);
}

Mat row_major(const double* data, std::size_t rows, std::size_t cols) {
  Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
  if (rows * cols == 0) return m;
  require(data != nullptr, "null matrix");
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = data[i * cols + j];
  }
  return m;
}

Vec vector_of(const double* data, std::size_t n) {
  if (n == 0) return Vec(0);
  require(data != nullptr, "null vector");
  return Eigen::Map<const Vec>(data, static_cast<Index>(n));
}

void store_row_major(const Mat& m, double* out) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
  }
}

bfekf::basis::BasisConfig to_config(const bfekf_basis_spec* spec) {
  require(spec != nullptr, "null basis spec");
  switch (spec->family) {
    case BFEKF_WENDLAND:
      return bfekf::basis::BasisConfig::wendland(spec->scale, spec->prior_weight_variance);
    case BFEKF_GAUSSIAN:
      return bfekf::basis::BasisConfig::gaussian(spec->scale, spec->prior_weight_variance);
  }
  throw ArgumentError("unknown basis family");
}

bfekf::WeightOrdering to_ordering(bfekf_ordering o) {
  switch (o) {
    case BFEKF_STAGGERED:
      return bfekf::WeightOrdering::staggered;
    case BFEKF_STACKED:
      return bfekf::WeightOrdering::stacked;
  }
  throw ArgumentError("unknown weight ordering");
}

bfekf::Method to_method(bfekf_method m) {
  switch (m) {
    case BFEKF_DENSE:
      return bfekf::Method::dense;
    case BFEKF_CSRBF:
      return bfekf::Method::csrbf;
    case BFEKF_FAST_CSRBF:
      return bfekf::Method::fast_csrbf;
  }
  throw ArgumentError("unknown method");
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

}  // namespace

extern "C" {

const char* bfekf_version(void) { return "1.0.0"; }

const char* bfekf_last_error(void) { return last_error.c_str(); }

const char* bfekf_status_name(bfekf_status status) {
  switch (status) {
    case BFEKF_OK:
      return "ok";
    case BFEKF_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case BFEKF_ERR_SHAPE:
      return "shape mismatch";
    case BFEKF_ERR_CONFIG:
      return "configuration error";
    case BFEKF_ERR_NUMERICAL:
      return "numerical failure";
    case BFEKF_ERR_UNSUPPORTED:
      return "unsupported";
    case BFEKF_ERR_DOMAIN:
      return "domain error";
    case BFEKF_ERR_IO:
      return "i/o error";
    case BFEKF_ERR_OUT_OF_MEMORY:
      return "out of memory";
    case BFEKF_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

bfekf_status bfekf_wendland(double r, double* value, double* derivative) {
  return guarded([&] {
    require(value != nullptr || derivative != nullptr, "no output requested");
    const double v = bfekf::basis::wendland_value(r);
    const double d = bfekf::basis::wendland_derivative(r);
    if (value) *value = v;
    if (derivative) *derivative = d;
  });
}

bfekf_status bfekf_memory_estimate(uint64_t weights_per_output, uint64_t outputs, uint64_t bits_per_number,
                                   uint64_t* covariance_bits, uint64_t* mean_bits) {
  return guarded([&] {
    require(covariance_bits != nullptr, "null output");
    const auto est = bfekf::memory_estimate(weights_per_output, outputs, bits_per_number);
    *covariance_bits = est.covariance_bits;
    if (mean_bits) *mean_bits = est.mean_bits;
  });
}

bfekf_status bfekf_grid_regular(size_t dims, const double* lower, const double* upper, double spacing,
                                bfekf_grid** out) {
  return guarded([&] {
    require(out != nullptr && lower != nullptr && upper != nullptr, "null argument");
    require(dims > 0, "grid needs at least one dimension");
    auto g = std::make_unique<bfekf_grid>();
    g->grid = bfekf::basis::CartesianGrid::regular(vector_of(lower, dims), vector_of(upper, dims), spacing);
    *out = g.release();
  });
}

bfekf_status bfekf_grid_size(const bfekf_grid* grid, size_t* centers) {
  return guarded([&] {
    require(grid != nullptr && centers != nullptr, "null argument");
    *centers = static_cast<size_t>(grid->grid.size());
  });
}

bfekf_status bfekf_grid_dims(const bfekf_grid* grid, size_t* dims) {
  return guarded([&] {
    require(grid != nullptr && dims != nullptr, "null argument");
    *dims = static_cast<size_t>(grid->grid.dims());
  });
}

bfekf_status bfekf_grid_center(const bfekf_grid* grid, size_t index, double* coordinates) {
  return guarded([&] {
    require(grid != nullptr && coordinates != nullptr, "null argument");
    if (index >= static_cast<size_t>(grid->grid.size())) throw bfekf::DomainError("center index out of range");
    const Vec c = grid->grid.center(static_cast<Index>(index));
    for (Index p = 0; p < c.size(); ++p) coordinates[p] = c(p);
  });
}

void bfekf_grid_free(bfekf_grid* grid) { delete grid; }

bfekf_status bfekf_active_set(const bfekf_grid* grid, const bfekf_basis_spec* basis, const double* x, int fast,
                              size_t* indices, size_t capacity, size_t* count) {
  return guarded([&] {
    require(grid != nullptr && x != nullptr && count != nullptr, "null argument");
    const auto cfg = to_config(basis);
    const auto active = bfekf::basis::select_active(vector_of(x, static_cast<size_t>(grid->grid.dims())), grid->grid,
                                                    cfg, fast ? bfekf::basis::Selection::fast
                                                              : bfekf::basis::Selection::exact);
    *count = active.indices.size();
    require(active.indices.size() <= capacity && (indices != nullptr || active.indices.empty()),
            "index buffer too small");
    for (std::size_t i = 0; i < active.indices.size(); ++i) indices[i] = static_cast<size_t>(active.indices[i]);
  });
}

bfekf_status bfekf_model_cv(const bfekf_grid* grid, const bfekf_basis_spec* basis, double sample_time,
                            double process_variance, double measurement_variance, double weight_noise,
                            bfekf_ordering ordering, bfekf_model** out) {
  return guarded([&] {
    require(grid != nullptr && out != nullptr, "null argument");
    auto m = std::make_unique<bfekf_model>();
    m->model = std::make_shared<bfekf::AugmentedModel>(bfekf::build_cv_model(
        sample_time, process_variance * Mat::Identity(2, 2), measurement_variance * Mat::Identity(2, 2), grid->grid,
        to_config(basis), weight_noise, to_ordering(ordering)));
    *out = m.release();
  });
}

bfekf_status bfekf_model_linear(const bfekf_grid* grid, const bfekf_basis_spec* basis, size_t nx, size_t ny,
                                size_t outputs, const double* F, const double* Gf, const double* H, const double* D,
                                const double* Q, const double* R, double weight_noise, bfekf_ordering ordering,
                                bfekf_model** out) {
  return guarded([&] {
    require(grid != nullptr && out != nullptr, "null argument");
    require(nx > 0 && ny > 0, "state and observation dimensions must be positive");
    const auto P = static_cast<size_t>(grid->grid.dims());
    auto model = std::make_shared<bfekf::AugmentedModel>();
    model->known = std::make_shared<bfekf::LinearKnownModel>(row_major(F, nx, nx), row_major(Gf, nx, outputs),
                                                              row_major(H, ny, nx), row_major(D, P, nx));
    model->expansion =
        bfekf::Expansion{grid->grid, to_config(basis), static_cast<Index>(outputs), to_ordering(ordering)};
    model->Q = row_major(Q, nx, nx);
    model->R = row_major(R, ny, ny);
    model->weight_noise = weight_noise;
    model->validate();
    auto m = std::make_unique<bfekf_model>();
    m->model = std::move(model);
    *out = m.release();
  });
}

bfekf_status bfekf_model_tire(const bfekf_grid* grid, const bfekf_basis_spec* basis, double process_variance,
                              double weight_noise, int exact_coupling, bfekf_model** out) {
  return guarded([&] {
    require(grid != nullptr && out != nullptr, "null argument");
    bfekf::TireParams params;
    params.process_variance = process_variance;
    auto m = std::make_unique<bfekf_model>();
    m->model = std::make_shared<bfekf::AugmentedModel>(
        bfekf::build_tire_model(params, grid->grid, to_config(basis), weight_noise,
                                exact_coupling ? bfekf::ObservationCoupling::exact
                                               : bfekf::ObservationCoupling::ignore));
    *out = m.release();
  });
}

bfekf_status bfekf_model_dims(const bfekf_model* model, size_t* nx, size_t* ny, size_t* nu, size_t* outputs,
                              size_t* weights) {
  return guarded([&] {
    require(model != nullptr, "null model");
    const auto& m = *model->model;
    if (nx) *nx = static_cast<size_t>(m.state_dim());
    if (ny) *ny = static_cast<size_t>(m.obs_dim());
    if (nu) *nu = static_cast<size_t>(m.known->input_dim());
    if (outputs) *outputs = static_cast<size_t>(m.expansion.outputs);
    if (weights) *weights = static_cast<size_t>(m.weight_count());
  });
}

void bfekf_model_free(bfekf_model* model) { delete model; }

bfekf_status bfekf_estimator_create(const bfekf_model* model, bfekf_method method, const double* x0, const double* P0,
                                    bfekf_estimator** out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const auto nx = static_cast<size_t>(model->model->state_dim());
    require(x0 != nullptr && P0 != nullptr, "null prior");
    *out = new bfekf_estimator{
        bfekf::Estimator(model->model, to_method(method), vector_of(x0, nx), row_major(P0, nx, nx))};
  });
}

bfekf_status bfekf_estimator_predict(bfekf_estimator* est, const double* u, size_t nu) {
  return guarded([&] {
    require(est != nullptr, "null estimator");
    est->estimator.predict(vector_of(u, nu));
  });
}

bfekf_status bfekf_estimator_correct(bfekf_estimator* est, const double* y, size_t ny, const double* u, size_t nu) {
  return guarded([&] {
    require(est != nullptr, "null estimator");
    if (ny != static_cast<size_t>(est->estimator.model().obs_dim())) {
      throw bfekf::ShapeError("observation has the wrong length");
    }
    est->estimator.correct(vector_of(y, ny), vector_of(u, nu));
  });
}

bfekf_status bfekf_estimator_restart(bfekf_estimator* est, const double* x0, const double* P0) {
  return guarded([&] {
    require(est != nullptr && x0 != nullptr && P0 != nullptr, "null argument");
    const auto nx = static_cast<size_t>(est->estimator.model().state_dim());
    est->estimator.restart(vector_of(x0, nx), row_major(P0, nx, nx));
  });
}

bfekf_status bfekf_estimator_state(const bfekf_estimator* est, double* x, size_t nx) {
  return guarded([&] {
    require(est != nullptr && x != nullptr, "null argument");
    const Vec& s = est->estimator.x();
    require(nx == static_cast<size_t>(s.size()), "state buffer has the wrong length");
    for (Index i = 0; i < s.size(); ++i) x[i] = s(i);
  });
}

bfekf_status bfekf_estimator_covariance(const bfekf_estimator* est, double* P, size_t nx) {
  return guarded([&] {
    require(est != nullptr && P != nullptr, "null argument");
    const Mat& m = est->estimator.Px();
    require(nx == static_cast<size_t>(m.rows()), "covariance buffer has the wrong size");
    store_row_major(m, P);
  });
}

bfekf_status bfekf_estimator_query(const bfekf_estimator* est, const double* z, size_t nz, double* mean,
                                   double* covariance, size_t outputs) {
  return guarded([&] {
    require(est != nullptr && mean != nullptr, "null argument");
    const auto& ex = est->estimator.model().expansion;
    if (nz != static_cast<size_t>(ex.grid.dims())) throw bfekf::ShapeError("query point has the wrong dimension");
    require(outputs == static_cast<size_t>(ex.outputs), "output buffer has the wrong length");
    const auto f = est->estimator.query(vector_of(z, nz));
    for (Index j = 0; j < f.mean.size(); ++j) mean[j] = f.mean(j);
    if (covariance) store_row_major(f.covariance, covariance);
  });
}

bfekf_status bfekf_estimator_stored_weights(const bfekf_estimator* est, size_t* count) {
  return guarded([&] {
    require(est != nullptr && count != nullptr, "null argument");
    *count = static_cast<size_t>(est->estimator.stored_weights());
  });
}

bfekf_status bfekf_estimator_write_snapshot(const bfekf_estimator* est, const char* path) {
  return guarded([&] {
    require(est != nullptr && path != nullptr, "null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::filesystem::filesystem_error("cannot open snapshot file", path, std::error_code());
    bfekf::write_snapshot(out, est->estimator.snapshot(),
                          static_cast<std::uint64_t>(est->estimator.model().expansion.outputs));
    if (!out) throw std::filesystem::filesystem_error("snapshot write failed", path, std::error_code());
  });
}

void bfekf_estimator_free(bfekf_estimator* est) { delete est; }

bfekf_status bfekf_run_experiment(const bfekf_run_request* request, bfekf_report** out) {
  return guarded([&] {
    require(request != nullptr && out != nullptr && request->experiment != nullptr, "null argument");
    bfekf::harness::RunOptions opt;
    opt.experiment = bfekf::harness::parse_experiment(request->experiment);
    if (request->config_path) opt.config = bfekf::harness::Config::load(request->config_path);
    opt.seed = request->seed;
    if (request->runs > 0) opt.runs = request->runs;
    if (request->out_dir) opt.out_root = request->out_dir;
    if (request->methods) {
      for (const auto& name : split_list(request->methods)) {
        if (name == "all") {
          opt.methods = {bfekf::Method::dense, bfekf::Method::csrbf, bfekf::Method::fast_csrbf};
        } else {
          opt.methods.push_back(bfekf::parse_method(name));
        }
      }
    }
    if (request->nw_sweep) {
      for (const auto& item : split_list(request->nw_sweep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != item.size() || !(v >= 1.0)) throw bfekf::ConfigError("invalid n_w sweep entry '" + item + "'");
        opt.nw_sweep.push_back(static_cast<Index>(std::llround(v)));
      }
    }
    opt.write_outputs = request->write_outputs != 0;
    auto result = bfekf::harness::run(opt);
    *out = new bfekf_report{result.metrics.dump(2), result.directory.string()};
  });
}

const char* bfekf_report_metrics_json(const bfekf_report* report) { return report ? report->metrics.c_str() : ""; }

const char* bfekf_report_directory(const bfekf_report* report) { return report ? report->directory.c_str() : ""; }

void bfekf_report_free(bfekf_report* report) { delete report; }

}  // extern "C"
