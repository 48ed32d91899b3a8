#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "dvio/fusion.hpp"
#include "dvio/image.hpp"
#include "dvio/superpoint.hpp"
#include "dvio/trajectory.hpp"

namespace dvio::dataset {

struct RangeSample {
  double t = 0.0;
  double range = 0.0;
};

struct Sequence {
  std::vector<double> frame_times;
  std::vector<Image8> frames;
  std::vector<fusion::ImuSample> imu;
  std::vector<RangeSample> tof;
  Trajectory ground_truth;
  fusion::CameraIntrinsics intrinsics;
  fusion::Extrinsics extrinsics;
  // Directory with <frame>.heat.spt / <frame>.desc.spt, when present.
  std::optional<std::filesystem::path> spout_dir;
  // In-memory network outputs, one per frame, when generated rather than loaded.
  std::vector<superpoint::Output> spout;

  std::size_t size() const noexcept { return frames.size(); }
};

// Directory layout:
//   frames/<10-digit index>.pgm, frames.csv (index, timestamp_s),
//   imu.csv (timestamp_s, ax, ay, az, gx, gy, gz), tof.csv (timestamp_s, range_m),
//   groundtruth.txt (TUM, optional), calib.cfg, spout/ (optional).
Sequence load_sequence(const std::filesystem::path& dir);
void save_sequence(const std::filesystem::path& dir, const Sequence& seq);

std::string frame_name(std::size_t index);

Image8 read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image8& img);

}  // namespace dvio::dataset
