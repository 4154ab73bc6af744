#include "transtrack/motion.hpp"

#include <Eigen/Cholesky>
#include <stdexcept>

namespace transtrack::motion {
namespace {

using Vector4 = Eigen::Matrix<double, 4, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;
using Matrix48 = Eigen::Matrix<double, 4, 8>;

Vector4 measurement_of(const Box& b) {
  return {b.center_x(), b.center_y(), b.width / b.height, b.height};
}

Matrix8 transition() {
  Matrix8 f = Matrix8::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  return f;
}

Matrix48 projection() {
  Matrix48 h = Matrix48::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

}  // namespace

KalmanConfig scaled_for_stride(KalmanConfig cfg, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  cfg.std_weight_velocity *= stride;
  cfg.std_aspect_velocity *= stride;
  return cfg;
}

KalmanState kf_init(const Box& box, const KalmanConfig& cfg) {
  if (!(box.width > 0.0) || !(box.height > 0.0)) {
    throw std::invalid_argument("Kalman initialization needs a box with positive extents");
  }
  KalmanState s;
  s.mean.head<4>() = measurement_of(box);
  const double h = box.height;
  Vector8 std_dev;
  std_dev << 2 * cfg.std_weight_position * h, 2 * cfg.std_weight_position * h, cfg.std_aspect,
      2 * cfg.std_weight_position * h, 10 * cfg.std_weight_velocity * h,
      10 * cfg.std_weight_velocity * h, cfg.std_aspect_velocity,
      10 * cfg.std_weight_velocity * h;
  s.covariance = std_dev.array().square().matrix().asDiagonal();
  return s;
}

KalmanState kf_predict(const KalmanState& s, const KalmanConfig& cfg) {
  const double h = s.mean(3);
  Vector8 std_dev;
  std_dev << cfg.std_weight_position * h, cfg.std_weight_position * h, cfg.std_aspect,
      cfg.std_weight_position * h, cfg.std_weight_velocity * h, cfg.std_weight_velocity * h,
      cfg.std_aspect_velocity, cfg.std_weight_velocity * h;
  const Matrix8 q = std_dev.array().square().matrix().asDiagonal();
  const Matrix8 f = transition();
  KalmanState out;
  out.mean = f * s.mean;
  out.covariance = f * s.covariance * f.transpose() + q;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

KalmanState kf_update(const KalmanState& s, const Box& measured, const KalmanConfig& cfg) {
  if (!(measured.height > 0.0)) {
    throw std::invalid_argument("Kalman measurement needs a positive height");
  }
  const double h = s.mean(3);
  Vector4 r_std{cfg.std_weight_position * h, cfg.std_weight_position * h,
                cfg.std_aspect_measurement, cfg.std_weight_position * h};
  const Matrix4 r = r_std.array().square().matrix().asDiagonal();
  const Matrix48 hm = projection();
  const Matrix4 innovation_cov = hm * s.covariance * hm.transpose() + r;
  const Eigen::LLT<Matrix4> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("Kalman innovation covariance is not positive definite");
  }
  // K = P H^T S^-1, solved as S K^T = H P.
  const Eigen::Matrix<double, 8, 4> gain = llt.solve(hm * s.covariance).transpose();
  const Vector4 innovation = measurement_of(measured) - hm * s.mean;
  KalmanState out;
  out.mean = s.mean + gain * innovation;
  out.covariance = s.covariance - gain * innovation_cov * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

Box state_box(const KalmanState& s) {
  const double h = s.mean(3);
  const double w = s.mean(2) * h;
  return {s.mean(0) - 0.5 * w, s.mean(1) - 0.5 * h, w, h};
}

}  // namespace transtrack::motion
