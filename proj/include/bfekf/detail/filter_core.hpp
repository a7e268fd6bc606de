#pragma once

// Index-level kernels shared by the dense, sparse and compact-storage filters.
// Weight blocks are addressed through positions into storage of U weights;
// the caller maps global weight indices to those positions.

#include <bfekf/types.hpp>

#include <vector>

namespace bfekf::detail {

using Positions = std::vector<Index>;

// True if p == {0, 1, ..., n-1}.
bool is_identity(const Positions& p, Index n) noexcept;

// x <- mean; Pxt <- Fx Pxt + Fa Ptt(a, :);
// Px <- Fx Px Fx^T + Fx Pxt_a Fa^T + Fa Pxt_a^T Fx^T + Fa Ptt_aa Fa^T + Q;
// diag(Ptt) += sigma.
void time_update_core(Vec& x, Mat& Px, Eigen::Ref<Mat> Pxt, Eigen::Ref<Mat> Ptt, const Positions& a,
                      const Vec& mean, const Mat& Fx, const Mat& Fa, const Mat& Q, double sigma,
                      OpCounters* counters);

// Joseph-form correction with a gain whose weight rows are restricted to g.
// Ht holds the observation Jacobian for the weights at positions h (may have
// zero columns). An empty g freezes the weights and their covariance rows.
void measurement_update_core(Vec& x, Mat& Px, Eigen::Ref<Vec> theta, Eigen::Ref<Mat> Pxt, Eigen::Ref<Mat> Ptt,
                             const Positions& h, const Positions& g, const Vec& innovation, const Mat& Hx,
                             const Mat& Ht, const Mat& R, double gain_scale, OpCounters* counters);

}  // namespace bfekf::detail
