#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dvio/config.hpp"
#include "dvio/dataset.hpp"
#include "dvio/evaluation.hpp"
#include "dvio/fusion.hpp"
#include "dvio/orb.hpp"
#include "dvio/px4flow.hpp"
#include "dvio/superpoint.hpp"

namespace dvio::pipeline {

enum class TrackerKind { orb, px4flow, superpoint };
enum class Mode { rigid_template, reference };

TrackerKind parse_tracker(const std::string& name);
Mode parse_mode(const std::string& name);
std::string to_string(TrackerKind t);
std::string to_string(Mode m);

struct PipelineConfig {
  TrackerKind tracker = TrackerKind::orb;
  Mode mode = Mode::rigid_template;
  // 0 uses the sequence timestamps as they are.
  double frame_rate_hz = 0.0;
  std::size_t max_frames = 0;

  orb::TrackerConfig orb;
  px4flow::FlowConfig flow;
  superpoint::TrackerConfig superpoint;
  fusion::NoiseConfig noise;

  // Initial covariance diagonal: position, height, yaw, velocity.
  double init_pos_var = 1e-6;
  double init_height_var = 1e-2;
  double init_yaw_var = 1e-6;
  double init_vel_var = 1e-4;

  double align_window_s = 10.0;
  double max_dt_s = 0.02;
  std::vector<double> lengths_m = {15.0, 25.0, 50.0};

  // Throws ConfigError on contradictory settings.
  void validate() const;

  // Applies keys from a config file; unknown keys are a ConfigError.
  void apply(const KeyValueConfig& kv);
};

struct StageTiming {
  double track_ms = 0.0;
  double motion_ms = 0.0;
  double fusion_ms = 0.0;
  double total_ms = 0.0;
};

struct RunResult {
  Trajectory estimate;
  std::vector<StageTiming> timing;
  std::size_t invalid_motions = 0;
  std::size_t rejected_updates = 0;
};

// Replays a sequence: IMU prediction up to each frame, tracking, rigid-body
// or reference-mode motion, metric scaling and filter update.
RunResult run(const dataset::Sequence& seq, const PipelineConfig& cfg);

struct Metrics {
  eval::RmseReport rmse;
  std::vector<eval::RelativeError> relative;
};

Metrics evaluate(const Trajectory& estimate, const Trajectory& gt, const std::vector<double>& lengths_m,
                 double align_window_s = 10.0, double max_dt_s = 0.02);

void write_metrics_csv(const std::filesystem::path& path, const Metrics& m);
void write_timing_csv(const std::filesystem::path& path, const std::vector<StageTiming>& timing);
std::string metrics_table(const Metrics& m);

struct BenchConfig {
  std::vector<int> search_radii = {2, 4, 8, 16, 24};
  std::vector<int> orb_displacements = {8, 16, 32, 64};
  int frames = 30;
  int repeats = 5;
  uint64_t seed = 1;
};

struct BenchRow {
  std::string tracker;
  int setting = 0;
  double ms_per_frame = 0.0;
};

struct QuadraticFit {
  double a = 0.0, b = 0.0, c = 0.0;
  double r2 = 0.0;
};

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y);

struct BenchReport {
  std::vector<BenchRow> rows;
  QuadraticFit px4flow_fit;
  double orb_mean_ms = 0.0;
  double orb_max_min_ratio = 1.0;
};

// Per-frame wall time of tracking plus rigid-body estimation on synthetic
// frames: PX4FLOW over search radii, ORB over inter-frame displacements.
BenchReport bench(const BenchConfig& cfg);
void write_bench_csv(const std::filesystem::path& path, const BenchReport& report);

}  // namespace dvio::pipeline
