#pragma once

#include <Eigen/Core>

#include "transtrack/geometry.hpp"

namespace transtrack::motion {

using Vector8 = Eigen::Matrix<double, 8, 1>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;

/// Constant-velocity state over (cx, cy, aspect = w/h, h) and their velocities,
/// in pixels and pixels per frame.
struct KalmanState {
  Vector8 mean = Vector8::Zero();
  Matrix8 covariance = Matrix8::Identity();
};

/// Noise scales follow the SORT/DeepSORT convention: standard deviations are
/// proportional to the box height.
struct KalmanConfig {
  double std_weight_position = 1.0 / 20.0;
  double std_weight_velocity = 1.0 / 160.0;
  double std_aspect = 1e-2;
  double std_aspect_velocity = 1e-5;
  double std_aspect_measurement = 1e-1;
};

/// Same noise model with one filter step spanning `stride` frames: velocities
/// are per step, so the velocity noise scales grow by the stride.
/// Throws std::invalid_argument for a stride below 1.
KalmanConfig scaled_for_stride(KalmanConfig cfg, int stride);

/// Throws std::invalid_argument for non-positive extents.
KalmanState kf_init(const Box& box, const KalmanConfig& cfg = {});
KalmanState kf_predict(const KalmanState& s, const KalmanConfig& cfg = {});
/// Throws std::runtime_error when the innovation covariance is not positive
/// definite (degenerate noise configuration).
KalmanState kf_update(const KalmanState& s, const Box& measured, const KalmanConfig& cfg = {});

Box state_box(const KalmanState& s);

/// The "no motion model" baseline: the previous box, unchanged.
inline Box propagate_none(const Box& last_box) { return last_box; }

}  // namespace transtrack::motion
