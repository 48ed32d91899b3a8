#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dvio {

struct StampedPose {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

using Trajectory = std::vector<StampedPose>;

Eigen::Quaterniond yaw_quaternion(double psi);
double yaw_of(const Eigen::Quaterniond& q);

// TUM format: "timestamp tx ty tz qx qy qz qw", whitespace separated, '#'
// starts a comment. Quaternions are normalised on read; a norm far from one
// is a parse error.
Trajectory read_tum(const std::filesystem::path& path);
void write_tum(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace dvio
