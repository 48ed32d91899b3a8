#include "dvio/fusion.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace dvio::fusion {
namespace {

void check_rotation(const Mat4& t, const char* name) {
  const Eigen::Matrix3d r = t.topLeftCorner<3, 3>();
  const double orth = (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (orth > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6)
    throw ConfigError(std::string(name) + " rotation block is not a proper rotation");
}

template <int M>
UpdateResult joseph_update(const NavState& s, const Eigen::Matrix<double, M, 1>& innovation,
                           const Eigen::Matrix<double, M, 6>& h, const Eigen::Matrix<double, M, M>& r,
                           double gate_sigma) {
  UpdateResult res{s, false, 0.0};
  const Eigen::Matrix<double, M, M> S = h * s.P * h.transpose() + r;
  const Eigen::LDLT<Eigen::Matrix<double, M, M>> ldlt(S);
  res.mahalanobis2 = innovation.dot(ldlt.solve(innovation));
  if (!std::isfinite(res.mahalanobis2) || res.mahalanobis2 > gate_sigma * gate_sigma) return res;

  const Eigen::Matrix<double, 6, M> K = ldlt.solve(h * s.P).transpose();
  const Mat6 ikh = Mat6::Identity() - K * h;
  Mat6 P = ikh * s.P * ikh.transpose() + K * r * K.transpose();
  P = (0.5 * (P + P.transpose())).eval();

  res.state.set(s.vector() + K * innovation);
  res.state.P = P;
  res.accepted = true;
  return res;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0 && fy > 0)) throw ConfigError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
}

void Extrinsics::validate() const {
  check_rotation(cam_from_imu, "cam_from_imu");
  check_rotation(cam_from_tof, "cam_from_tof");
}

Vec6 NavState::vector() const {
  Vec6 v;
  v << x, y, z, psi, vx, vy;
  return v;
}

void NavState::set(const Vec6& s) {
  x = s[0];
  y = s[1];
  z = s[2];
  psi = wrap_angle(s[3]);
  vx = s[4];
  vy = s[5];
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

ImuSample to_camera_frame(const ImuSample& sample, const Extrinsics& ext) {
  const Eigen::Matrix3d r = ext.cam_from_imu.topLeftCorner<3, 3>();
  return {sample.t, r * sample.accel, r * sample.gyro};
}

MetricMotion pixel_to_metric(const rigid::RigidMotion2D& m, double height_m, const CameraIntrinsics& intr,
                             double dt_s) {
  if (!(height_m > 0)) throw InvalidArgument("height must be positive");
  if (!(dt_s > 0)) throw InvalidArgument("dt must be positive");
  return {m.du * height_m / (intr.fx * dt_s), m.dv * height_m / (intr.fy * dt_s), m.dpsi / dt_s};
}

MetricMotion image_to_ego(const MetricMotion& image_motion) {
  return {-image_motion.vx, image_motion.vy, image_motion.yaw_rate};
}

NavState ekf_predict(const NavState& s, const ImuSample& imu_cam, double dt, const NoiseConfig& noise) {
  const double c = std::cos(s.psi), sn = std::sin(s.psi);
  const double ax = c * imu_cam.accel.x() - sn * imu_cam.accel.y();
  const double ay = sn * imu_cam.accel.x() + c * imu_cam.accel.y();
  // d(world accel)/d(psi)
  const double dax = -ay, day = ax;

  NavState out = s;
  out.x = s.x + s.vx * dt + 0.5 * ax * dt * dt;
  out.y = s.y + s.vy * dt + 0.5 * ay * dt * dt;
  out.vx = s.vx + ax * dt;
  out.vy = s.vy + ay * dt;
  out.psi = wrap_angle(s.psi + imu_cam.gyro.z() * dt);

  Mat6 F = Mat6::Identity();
  F(0, 3) = 0.5 * dax * dt * dt;
  F(0, 4) = dt;
  F(1, 3) = 0.5 * day * dt * dt;
  F(1, 5) = dt;
  F(4, 3) = dax * dt;
  F(5, 3) = day * dt;

  Mat6 Q = Mat6::Zero();
  const double qa = noise.accel_psd;
  for (int axis = 0; axis < 2; ++axis) {
    const int p = axis, v = 4 + axis;
    Q(p, p) = qa * dt * dt * dt / 3.0;
    Q(p, v) = Q(v, p) = qa * dt * dt / 2.0;
    Q(v, v) = qa * dt;
  }
  Q(2, 2) = noise.height_psd * dt;
  Q(3, 3) = noise.gyro_psd * dt;

  out.P = F * s.P * F.transpose() + Q;
  out.P = (0.5 * (out.P + out.P.transpose())).eval();
  return out;
}

UpdateResult ekf_update_flow(const NavState& s, const FlowMeasurement& meas, const NoiseConfig& noise) {
  const double c = std::cos(s.psi), sn = std::sin(s.psi);
  // Body-frame velocity R(psi)^T v.
  const double bx = c * s.vx + sn * s.vy;
  const double by = -sn * s.vx + c * s.vy;

  Eigen::Matrix<double, 3, 6> H = Eigen::Matrix<double, 3, 6>::Zero();
  H(0, 3) = by;
  H(0, 4) = c;
  H(0, 5) = sn;
  H(1, 3) = -bx;
  H(1, 4) = -sn;
  H(1, 5) = c;
  H(2, 3) = 1.0;

  Eigen::Vector3d y;
  y << meas.vx - bx, meas.vy - by, wrap_angle(meas.psi_anchor + meas.yaw_rate * meas.dt - s.psi);

  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  R(0, 0) = R(1, 1) = noise.flow_velocity_var;
  R(2, 2) = noise.yaw_rate_var * meas.dt * meas.dt;
  return joseph_update<3>(s, y, H, R, noise.gate_sigma);
}

UpdateResult ekf_update_height(const NavState& s, double range_m, const NoiseConfig& noise) {
  if (!(range_m > 0)) throw InvalidArgument("range must be positive");
  if (range_m > noise.tof_max_range) return {s, false, 0.0};

  Eigen::Matrix<double, 1, 6> H = Eigen::Matrix<double, 1, 6>::Zero();
  H(0, 2) = 1.0;
  Eigen::Matrix<double, 1, 1> y, R;
  y << range_m - s.z;
  const double sd = noise.tof_rel_std * range_m;
  R << sd * sd;
  return joseph_update<1>(s, y, H, R, noise.gate_sigma);
}

px4flow::Flow2 rotation_flow(const Vec3& gyro, double x, double y, double dt, const CameraIntrinsics& intr) {
  return {(intr.fx * gyro.y() - gyro.z() * y) * dt, (intr.fy * gyro.x() + gyro.z() * x) * dt};
}

PoseIncrement reference_pipeline_step(std::span<const px4flow::FlowVector> flows, const Vec3& gyro, double dt,
                                      double height_m, const CameraIntrinsics& intr) {
  if (!(height_m > 0)) throw InvalidArgument("height must be positive");
  if (!(dt > 0)) throw InvalidArgument("dt must be positive");

  const px4flow::Flow2 dominant = px4flow::dominant_flow(flows);
  double ru = 0, rv = 0;
  int n = 0;
  for (const auto& f : flows) {
    if (!f.valid) continue;
    const auto r = rotation_flow(gyro, f.x, f.y, dt, intr);
    ru += r.du;
    rv += r.dv;
    ++n;
  }
  if (n > 0) {
    ru /= n;
    rv /= n;
  }

  rigid::RigidMotion2D m;
  m.du = dominant.du - ru;
  m.dv = dominant.dv - rv;
  const MetricMotion ego = image_to_ego(pixel_to_metric(m, height_m, intr, dt));
  return {ego.vx * dt, ego.vy * dt, gyro.z() * dt, ego.vx, ego.vy};
}

}  // namespace dvio::fusion
