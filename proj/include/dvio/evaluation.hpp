#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dvio/trajectory.hpp"

namespace dvio::eval {

struct PosePair {
  StampedPose est;
  StampedPose gt;
};

// Nearest-timestamp pairing, |dt| <= max_dt, each pose on either side used at
// most once. Pairs come back in ground-truth time order. Throws
// DegenerateError when nothing pairs up.
std::vector<PosePair> associate(const Trajectory& traj, const Trajectory& gt, double max_dt_s = 0.02);

struct Sim3 {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * rotation * p + translation; }
};

// Closed-form similarity minimising sum |s R src_i + t - dst_i|^2.
// Throws DegenerateError for fewer than three points or collinear input.
Sim3 align_sim3(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

double alignment_residual(const Sim3& s, std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

struct RmseReport {
  double rmse = 0.0;
  double mean_error = 0.0;
  double error_std = 0.0;  // population std of per-pose position error
  std::size_t pairs = 0;
  std::size_t align_pairs = 0;
  bool window_extended = false;  // the time window was too straight and had to grow
  Sim3 alignment;
};

// Aligns on pairs within `align_window_s` of the first pair, applies the
// transform to the whole estimate and reports the position RMSE. A window
// whose ground truth is (nearly) a straight line is extended until the second
// principal spread reaches 10% of the first; DegenerateError only when the
// whole trajectory stays degenerate.
RmseReport rmse(const Trajectory& traj, const Trajectory& gt, double align_window_s = 10.0,
                double max_dt_s = 0.02);
RmseReport rmse(std::span<const PosePair> pairs, double align_window_s = 10.0);

struct RelativeError {
  double length_m = 0.0;
  bool available = false;
  double mean_error_pct = 0.0;
  std::size_t samples = 0;
};

// For every pair as start: re-anchor the estimate at the ground-truth start
// (position and yaw), walk until the ground-truth arc length reaches L, and
// take the end-point error as a percentage of L.
std::vector<RelativeError> relative_translation_error(std::span<const PosePair> pairs,
                                                      std::span<const double> lengths_m);
std::vector<RelativeError> relative_translation_error(const Trajectory& traj, const Trajectory& gt,
                                                      std::span<const double> lengths_m, double max_dt_s = 0.02);

}  // namespace dvio::eval
