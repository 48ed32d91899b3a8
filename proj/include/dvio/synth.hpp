#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dvio/dataset.hpp"

namespace dvio::synth {

struct Waypoint {
  double t = 0.0;
  double x = 0.0, y = 0.0, z = 1.0;
  double psi = 0.0;  // unwrapped
};

enum class Blend { smooth, linear };

struct PathSample {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  double psi = 0.0;
  double psi_rate = 0.0;
  double psi_acc = 0.0;
};

// Piecewise path through timed waypoints. `smooth` segments follow the quintic
// 10s^3 - 15s^4 + 6s^5 profile (rest to rest); `linear` segments move at
// constant rate. Before the first and after the last waypoint the pose holds.
class Path {
 public:
  Path() = default;
  Path(std::vector<Waypoint> waypoints, Blend blend = Blend::smooth);

  PathSample at(double t) const;
  double duration() const noexcept { return wp_.empty() ? 0.0 : wp_.back().t; }
  const std::vector<Waypoint>& waypoints() const noexcept { return wp_; }

  static Path still(double duration, double height);
  static Path square(double side, double height, double duration);
  // Out along +x, 180 degree turn while stepping `width` sideways, back along
  // the parallel line, second 180 degree turn onto the start.
  static Path two_turns(double length, double width, double height, double leg_time, double turn_time);
  // Back and forth along x without rotation; every other pair of legs is
  // offset by `width` in y so the track is not a single line.
  static Path shuttle(double length, double width, double height, double leg_time, int legs);
  static Path constant_velocity(double vx, double vy, double height, double duration);

 private:
  std::vector<Waypoint> wp_;
  Blend blend_ = Blend::smooth;
};

struct TextureConfig {
  uint64_t seed = 1;
  double cell_m = 0.03;      // finest lattice spacing
  int octaves = 4;
  double persistence = 0.6;  // amplitude ratio between successive finer octaves
  double contrast = 1.6;
};

struct SynthConfig {
  TextureConfig texture;
  Path path;
  double duration = 0.0;  // 0 selects path.duration()
  double frame_rate = 100.0;
  double imu_rate = 1000.0;
  double tof_rate = 6.94;
  double accel_noise_std = 0.0;  // per sample
  double gyro_noise_std = 0.0;
  double tof_noise_rel = 0.0;
  uint64_t noise_seed = 7;
  fusion::CameraIntrinsics intrinsics;
  bool superpoint = false;

  void validate() const;
};

// Multi-octave value noise on the ground plane, in grey levels [0, 255].
double texture_value(const TextureConfig& tex, double x, double y);

Image8 render(const TextureConfig& tex, const fusion::CameraIntrinsics& intr, const Eigen::Vector3d& pos,
              double psi);

// Stand-in for network output: a Harris heatmap and random-projection
// descriptors on the 8x8 cell grid.
superpoint::Output pseudo_superpoint(const Image8& img);

dataset::Sequence synth_generate(const SynthConfig& cfg);

}  // namespace dvio::synth
