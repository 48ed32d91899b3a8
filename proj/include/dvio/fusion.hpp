#pragma once

#include <span>

#include <Eigen/Core>

#include "dvio/px4flow.hpp"
#include "dvio/rigid_body.hpp"

namespace dvio::fusion {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kGravity = 9.81;

struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

struct CameraIntrinsics {
  double fx = 160.0;
  double fy = 160.0;
  double cx = 80.0;
  double cy = 60.0;
  int width = 160;
  int height = 120;

  void validate() const;
};

// Camera frame: x along image columns, y against image rows, z away from the
// ground. For a level vehicle it coincides with the body frame.
struct Extrinsics {
  Mat4 cam_from_imu = Mat4::Identity();
  Mat4 cam_from_tof = Mat4::Identity();

  // Throws ConfigError unless both rotation blocks are proper rotations.
  void validate() const;
};

// State vector order: x, y, z, psi, vx, vy (world frame, z up).
struct NavState {
  double x = 0.0, y = 0.0, z = 0.0;
  double psi = 0.0;
  double vx = 0.0, vy = 0.0;
  Mat6 P = Mat6::Identity() * 1e-2;

  Vec6 vector() const;
  void set(const Vec6& s);
};

struct NoiseConfig {
  double accel_psd = 0.35;       // (m/s^2)^2 per second
  double gyro_psd = 0.01;        // (rad/s)^2 per second
  double height_psd = 0.01;      // m^2 per second, z random walk
  double flow_velocity_var = 0.05;  // (m/s)^2
  double yaw_rate_var = 0.002;      // (rad/s)^2
  double tof_rel_std = 0.0015;      // fraction of range
  double tof_max_range = 4.0;       // m
  double gate_sigma = 5.0;
};

struct MetricMotion {
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
};

// Camera ego-motion measurement for the filter. `psi_anchor` is the filter
// heading at the previous frame; yaw is fused as psi_anchor + yaw_rate * dt.
struct FlowMeasurement {
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
  double dt = 0.0;
  double psi_anchor = 0.0;
};

struct UpdateResult {
  NavState state;
  bool accepted = false;
  double mahalanobis2 = 0.0;
};

double wrap_angle(double a);

// Rotates accel and gyro into the camera frame. Lever arm is ignored.
ImuSample to_camera_frame(const ImuSample& sample, const Extrinsics& ext);

// Image-plane motion scaled to metres: v = d_pix * z / (f * dt), yaw_rate = dpsi / dt.
MetricMotion pixel_to_metric(const rigid::RigidMotion2D& m, double height_m, const CameraIntrinsics& intr,
                             double dt_s);

// Image content moves opposite to the camera; image rows point along -y.
MetricMotion image_to_ego(const MetricMotion& image_motion);

NavState ekf_predict(const NavState& s, const ImuSample& imu_cam, double dt_s, const NoiseConfig& noise = {});

// Joseph-form update on body-frame velocity and heading. A measurement whose
// Mahalanobis distance exceeds the gate leaves the state untouched.
UpdateResult ekf_update_flow(const NavState& s, const FlowMeasurement& meas, const NoiseConfig& noise = {});

// Scalar update of z from a downward range reading. Readings beyond the
// sensor range are ignored.
UpdateResult ekf_update_height(const NavState& s, double range_m, const NoiseConfig& noise = {});

struct PoseIncrement {
  double dx = 0.0;  // camera frame, metres
  double dy = 0.0;
  double dpsi = 0.0;
  double vx = 0.0;  // camera frame ego velocity
  double vy = 0.0;
};

// Rotation-induced image flow at center-origin pixel (x, y) over dt.
px4flow::Flow2 rotation_flow(const Vec3& gyro, double x, double y, double dt, const CameraIntrinsics& intr);

// Original PX4FLOW-style odometry: dominant flow, minus the mean
// gyro-predicted flow over the valid vectors, scaled by height.
PoseIncrement reference_pipeline_step(std::span<const px4flow::FlowVector> flows, const Vec3& gyro, double dt,
                                      double height_m, const CameraIntrinsics& intr);

}  // namespace dvio::fusion
