#include "dvio/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "dvio/rigid_body.hpp"
#include "dvio/synth.hpp"

namespace dvio::pipeline {
namespace fs = std::filesystem;
namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

superpoint::Output spout_for(const dataset::Sequence& seq, std::size_t k) {
  if (!seq.spout.empty()) return seq.spout.at(k);
  const auto name = dataset::frame_name(k);
  return superpoint::load_output(*seq.spout_dir / (name + ".heat.spt"), *seq.spout_dir / (name + ".desc.spt"));
}

std::vector<double> parse_list(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream ss(t);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  if (!ss.eof()) throw ConfigError("bad number list: '" + text + "'");
  return out;
}

}  // namespace

TrackerKind parse_tracker(const std::string& name) {
  if (name == "orb") return TrackerKind::orb;
  if (name == "px4flow") return TrackerKind::px4flow;
  if (name == "superpoint") return TrackerKind::superpoint;
  throw ConfigError("unknown tracker '" + name + "' (orb, px4flow, superpoint)");
}

Mode parse_mode(const std::string& name) {
  if (name == "template") return Mode::rigid_template;
  if (name == "reference") return Mode::reference;
  throw ConfigError("unknown mode '" + name + "' (template, reference)");
}

std::string to_string(TrackerKind t) {
  switch (t) {
    case TrackerKind::orb: return "orb";
    case TrackerKind::px4flow: return "px4flow";
    case TrackerKind::superpoint: return "superpoint";
  }
  return "?";
}

std::string to_string(Mode m) { return m == Mode::reference ? "reference" : "template"; }

void PipelineConfig::validate() const {
  if (mode == Mode::reference && tracker != TrackerKind::px4flow)
    throw ConfigError("reference mode requires the px4flow tracker");
  if (frame_rate_hz < 0) throw ConfigError("frame_rate_hz must not be negative");
  orb.thresholds.validate();
}

void PipelineConfig::apply(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    if (key == "pipeline.tracker") tracker = parse_tracker(value);
    else if (key == "pipeline.mode") mode = parse_mode(value);
    else if (key == "pipeline.frame_rate_hz") frame_rate_hz = kv.get_double(key, 0);
    else if (key == "pipeline.max_frames") max_frames = static_cast<std::size_t>(kv.get_int(key, 0));
    else if (key == "pipeline.workers") orb.workers = flow.workers = kv.get_int(key, 1);
    else if (key == "orb.fast_threshold") orb.thresholds.fast_threshold = kv.get_int(key, 0);
    else if (key == "orb.harris_threshold") orb.thresholds.harris_threshold = kv.get_int(key, 0);
    else if (key == "orb.target_min") orb.thresholds.target_min = kv.get_int(key, 0);
    else if (key == "orb.target_max") orb.thresholds.target_max = kv.get_int(key, 0);
    else if (key == "orb.hard_cap") orb.thresholds.hard_cap = kv.get_int(key, 0);
    else if (key == "orb.fast_min") orb.thresholds.fast_min = kv.get_int(key, 0);
    else if (key == "orb.fast_max") orb.thresholds.fast_max = kv.get_int(key, 0);
    else if (key == "orb.fast_step") orb.thresholds.fast_step = kv.get_int(key, 0);
    else if (key == "orb.harris_min") orb.thresholds.harris_min = kv.get_int(key, 0);
    else if (key == "orb.harris_max") orb.thresholds.harris_max = kv.get_int(key, 0);
    else if (key == "orb.harris_factor") orb.thresholds.harris_factor = kv.get_int(key, 0);
    else if (key == "orb.max_distance") orb.max_distance = kv.get_int(key, 0);
    else if (key == "px4flow.grid_rows") flow.grid_rows = kv.get_int(key, 0);
    else if (key == "px4flow.grid_cols") flow.grid_cols = kv.get_int(key, 0);
    else if (key == "px4flow.patch_size") flow.patch_size = kv.get_int(key, 0);
    else if (key == "px4flow.search_radius") flow.search_radius = kv.get_int(key, 0);
    else if (key == "px4flow.enable_halfpixel") flow.enable_halfpixel = kv.get_bool(key, true);
    else if (key == "px4flow.min_sad_margin") flow.min_sad_margin = kv.get_int(key, -1);
    else if (key == "superpoint.score_threshold") superpoint.score_threshold = kv.get_double(key, 0);
    else if (key == "superpoint.nms_radius") superpoint.nms_radius = kv.get_double(key, 0);
    else if (key == "superpoint.max_keypoints") superpoint.max_keypoints = static_cast<std::size_t>(kv.get_int(key, 0));
    else if (key == "superpoint.min_similarity") superpoint.min_similarity = kv.get_double(key, 0);
    else if (key == "ekf.accel_psd") noise.accel_psd = kv.get_double(key, 0);
    else if (key == "ekf.gyro_psd") noise.gyro_psd = kv.get_double(key, 0);
    else if (key == "ekf.height_psd") noise.height_psd = kv.get_double(key, 0);
    else if (key == "ekf.flow_velocity_var") noise.flow_velocity_var = kv.get_double(key, 0);
    else if (key == "ekf.yaw_rate_var") noise.yaw_rate_var = kv.get_double(key, 0);
    else if (key == "ekf.tof_rel_std") noise.tof_rel_std = kv.get_double(key, 0);
    else if (key == "ekf.tof_max_range") noise.tof_max_range = kv.get_double(key, 0);
    else if (key == "ekf.gate_sigma") noise.gate_sigma = kv.get_double(key, 0);
    else if (key == "ekf.init_pos_var") init_pos_var = kv.get_double(key, 0);
    else if (key == "ekf.init_height_var") init_height_var = kv.get_double(key, 0);
    else if (key == "ekf.init_yaw_var") init_yaw_var = kv.get_double(key, 0);
    else if (key == "ekf.init_vel_var") init_vel_var = kv.get_double(key, 0);
    else if (key == "eval.align_window_s") align_window_s = kv.get_double(key, 0);
    else if (key == "eval.max_dt_s") max_dt_s = kv.get_double(key, 0);
    else if (key == "eval.lengths") lengths_m = parse_list(value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

RunResult run(const dataset::Sequence& seq, const PipelineConfig& cfg) {
  cfg.validate();
  if (seq.frames.empty()) throw MissingInputError("sequence has no frames");
  if (cfg.tracker == TrackerKind::superpoint && seq.spout.empty() && !seq.spout_dir)
    throw MissingInputError("superpoint tracker needs network tensors (spout/) for every frame");
  const auto& intr = seq.intrinsics;

  std::size_t stride = 1;
  if (cfg.frame_rate_hz > 0 && seq.frame_times.size() > 1) {
    const double seq_rate = (seq.frame_times.size() - 1) / (seq.frame_times.back() - seq.frame_times.front());
    stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seq_rate / cfg.frame_rate_hz)));
  }

  orb::OrbTracker orb_tracker(cfg.orb);
  px4flow::FlowTracker flow_tracker(cfg.flow);
  superpoint::SuperPointTracker sp_tracker(cfg.superpoint);

  fusion::NavState state;
  state.z = seq.tof.empty() ? 1.0 : seq.tof.front().range;
  state.P = fusion::Mat6::Zero();
  state.P.diagonal() << cfg.init_pos_var, cfg.init_pos_var, cfg.init_height_var, cfg.init_yaw_var,
      cfg.init_vel_var, cfg.init_vel_var;

  RunResult res;
  std::size_t imu_i = 0, tof_i = 0;
  double imu_t = seq.imu.empty() ? 0.0 : seq.imu.front().t;
  double prev_frame_t = 0.0;
  double psi_anchor = state.psi;

  std::size_t processed = 0;
  for (std::size_t k = 0; k < seq.frames.size(); k += stride) {
    if (cfg.max_frames && processed >= cfg.max_frames) break;
    const double t = seq.frame_times[k];
    StageTiming timing;
    const auto t0 = Clock::now();

    // Propagate through every IMU sample up to the frame time.
    Eigen::Vector3d gyro_sum = Eigen::Vector3d::Zero();
    double gyro_time = 0.0;
    while (imu_i < seq.imu.size() && seq.imu[imu_i].t <= t) {
      const auto imu = fusion::to_camera_frame(seq.imu[imu_i], seq.extrinsics);
      const double dt = imu.t - imu_t;
      if (dt > 0) {
        if (cfg.mode == Mode::rigid_template) state = fusion::ekf_predict(state, imu, dt, cfg.noise);
        gyro_sum += imu.gyro * dt;
        gyro_time += dt;
      }
      imu_t = imu.t;
      ++imu_i;
    }
    while (tof_i < seq.tof.size() && seq.tof[tof_i].t <= t) {
      const double r = seq.tof[tof_i++].range;
      if (r > 0) state = fusion::ekf_update_height(state, r, cfg.noise).state;
    }
    const auto t1 = Clock::now();

    std::vector<TrackedMatch> matches;
    std::vector<px4flow::FlowVector> flows;
    switch (cfg.tracker) {
      case TrackerKind::orb: matches = orb_tracker.track(seq.frames[k]); break;
      case TrackerKind::px4flow: flows = flow_tracker.track(seq.frames[k]); break;
      case TrackerKind::superpoint: matches = sp_tracker.track(spout_for(seq, k)); break;
    }
    const auto t2 = Clock::now();

    const double dt_frame = t - prev_frame_t;
    const bool have_pair = processed > 0 && dt_frame > 0;
    rigid::RigidMotion2D motion;
    fusion::PoseIncrement increment;
    const Eigen::Vector3d gyro_mean = gyro_time > 0 ? Eigen::Vector3d(gyro_sum / gyro_time) : Eigen::Vector3d::Zero();
    if (have_pair) {
      if (cfg.mode == Mode::reference) {
        increment = fusion::reference_pipeline_step(flows, gyro_mean, dt_frame, state.z, intr);
      } else {
        if (cfg.tracker == TrackerKind::px4flow) matches = px4flow::to_matches(flows);
        motion = rigid::estimate_motion(matches);
      }
    }
    const auto t3 = Clock::now();

    if (have_pair) {
      if (cfg.mode == Mode::reference) {
        const double psi_mid = state.psi + 0.5 * increment.dpsi;
        const double c = std::cos(psi_mid), s = std::sin(psi_mid);
        state.x += c * increment.dx - s * increment.dy;
        state.y += s * increment.dx + c * increment.dy;
        state.vx = increment.vx * std::cos(state.psi) - increment.vy * std::sin(state.psi);
        state.vy = increment.vx * std::sin(state.psi) + increment.vy * std::cos(state.psi);
        state.psi = fusion::wrap_angle(state.psi + increment.dpsi);
      } else if (motion.valid) {
        const auto ego = fusion::image_to_ego(fusion::pixel_to_metric(motion, state.z, intr, dt_frame));
        const fusion::FlowMeasurement meas{ego.vx, ego.vy, ego.yaw_rate, dt_frame, psi_anchor};
        const auto upd = fusion::ekf_update_flow(state, meas, cfg.noise);
        if (!upd.accepted) ++res.rejected_updates;
        state = upd.state;
      } else {
        ++res.invalid_motions;
      }
    }
    psi_anchor = state.psi;
    const auto t4 = Clock::now();

    timing.fusion_ms = ms_between(t0, t1) + ms_between(t3, t4);
    timing.track_ms = ms_between(t1, t2);
    timing.motion_ms = ms_between(t2, t3);
    timing.total_ms = ms_between(t0, t4);
    res.timing.push_back(timing);
    res.estimate.push_back({t, {state.x, state.y, state.z}, yaw_quaternion(state.psi)});

    prev_frame_t = t;
    ++processed;
  }
  return res;
}

Metrics evaluate(const Trajectory& estimate, const Trajectory& gt, const std::vector<double>& lengths_m,
                 double align_window_s, double max_dt_s) {
  const auto pairs = eval::associate(estimate, gt, max_dt_s);
  return {eval::rmse(pairs, align_window_s), eval::relative_translation_error(pairs, lengths_m)};
}

void write_metrics_csv(const fs::path& path, const Metrics& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "metric,value\n";
  out << "rmse_m," << m.rmse.rmse << "\n";
  out << "error_std_m," << m.rmse.error_std << "\n";
  out << "pairs," << m.rmse.pairs << "\n";
  out << "align_pairs," << m.rmse.align_pairs << "\n";
  out << "\nlength_m,mean_error_pct\n";
  for (const auto& r : m.relative) {
    out << r.length_m << ',';
    if (r.available)
      out << r.mean_error_pct;
    else
      out << "nan";
    out << '\n';
  }
}

void write_timing_csv(const fs::path& path, const std::vector<StageTiming>& timing) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "frame,track_ms,motion_ms,fusion_ms,total_ms\n" << std::setprecision(6);
  for (std::size_t i = 0; i < timing.size(); ++i) {
    const auto& t = timing[i];
    out << i << ',' << t.track_ms << ',' << t.motion_ms << ',' << t.fusion_ms << ',' << t.total_ms << '\n';
  }
}

std::string metrics_table(const Metrics& m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "RMSE [m]            " << m.rmse.rmse << "  (std " << m.rmse.error_std << ", " << m.rmse.pairs
      << " poses, aligned on " << m.rmse.align_pairs << ")\n";
  out << "sim(3) scale        " << m.rmse.alignment.scale << "\n";
  for (const auto& r : m.relative) {
    out << "rel. error " << std::setw(6) << std::setprecision(1) << r.length_m << " m  ";
    if (r.available)
      out << std::setprecision(3) << r.mean_error_pct << " %  (" << r.samples << " sub-trajectories)\n";
    else
      out << "unavailable (trajectory too short)\n";
  }
  return out.str();
}

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = x[i] * x[i];
    A(i, 1) = x[i];
    A(i, 2) = 1.0;
    b(i) = y[i];
  }
  const Eigen::Vector3d coef = A.colPivHouseholderQr().solve(b);
  const double mean = b.mean();
  const double ss_res = (A * coef - b).squaredNorm();
  const double ss_tot = (b.array() - mean).matrix().squaredNorm();
  return {coef(0), coef(1), coef(2), ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0};
}

BenchReport bench(const BenchConfig& cfg) {
  if (cfg.frames < 2) throw ConfigError("bench needs at least 2 frames");
  if (cfg.repeats < 1) throw ConfigError("bench needs at least 1 repeat");
  synth::TextureConfig tex;
  tex.seed = cfg.seed;
  fusion::CameraIntrinsics intr;

  // Frames of a camera sliding along x at `shift` pixels per frame.
  auto frames_for = [&](double shift_px) {
    std::vector<Image8> frames;
    const double step_m = shift_px * 1.0 / intr.fx;
    for (int i = 0; i < cfg.frames; ++i) frames.push_back(synth::render(tex, intr, {i * step_m, 0.0, 1.0}, 0.0));
    return frames;
  };
  auto fastest = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };

  // Repeats are interleaved across settings so that a slow stretch of the
  // machine hits every setting alike; the fastest repeat is reported.
  const auto flow_frames = frames_for(1.0);
  std::vector<std::vector<Image8>> orb_frames;
  for (int d : cfg.orb_displacements) orb_frames.push_back(frames_for(d));
  std::vector<std::vector<double>> flow_reps(cfg.search_radii.size()), orb_reps(cfg.orb_displacements.size());

  for (int rep_i = 0; rep_i < cfg.repeats; ++rep_i) {
    for (std::size_t k = 0; k < cfg.search_radii.size(); ++k) {
      px4flow::FlowConfig fc;
      fc.search_radius = cfg.search_radii[k];
      px4flow::FlowTracker tracker(fc);
      tracker.track(flow_frames.front());
      const auto a = Clock::now();
      for (std::size_t i = 1; i < flow_frames.size(); ++i) {
        const auto flows = tracker.track(flow_frames[i]);
        volatile bool sink = rigid::estimate_motion(px4flow::to_matches(flows)).valid;
        (void)sink;
      }
      flow_reps[k].push_back(ms_between(a, Clock::now()) / static_cast<double>(flow_frames.size() - 1));
    }
    for (std::size_t k = 0; k < orb_frames.size(); ++k) {
      const auto& frames = orb_frames[k];
      orb::OrbTracker tracker;
      // Settle the threshold hysteresis before timing.
      for (int w = 0; w < 5; ++w) tracker.track(frames[w % frames.size()]);
      const auto a = Clock::now();
      for (const auto& f : frames) {
        const auto matches = tracker.track(f);
        volatile bool sink = rigid::estimate_motion(matches).valid;
        (void)sink;
      }
      orb_reps[k].push_back(ms_between(a, Clock::now()) / static_cast<double>(frames.size()));
    }
  }

  BenchReport rep;
  std::vector<double> radii, flow_ms, orb_ms;
  for (std::size_t k = 0; k < cfg.search_radii.size(); ++k) {
    rep.rows.push_back({"px4flow", cfg.search_radii[k], fastest(flow_reps[k])});
    radii.push_back(cfg.search_radii[k]);
    flow_ms.push_back(rep.rows.back().ms_per_frame);
  }
  if (radii.size() >= 3) rep.px4flow_fit = fit_quadratic(radii, flow_ms);
  for (std::size_t k = 0; k < orb_frames.size(); ++k) {
    rep.rows.push_back({"orb", cfg.orb_displacements[k], fastest(orb_reps[k])});
    orb_ms.push_back(rep.rows.back().ms_per_frame);
  }
  if (!orb_ms.empty()) {
    const auto [lo, hi] = std::minmax_element(orb_ms.begin(), orb_ms.end());
    rep.orb_mean_ms = std::accumulate(orb_ms.begin(), orb_ms.end(), 0.0) / static_cast<double>(orb_ms.size());
    rep.orb_max_min_ratio = *hi / *lo;
  }
  return rep;
}

void write_bench_csv(const fs::path& path, const BenchReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "tracker,setting,ms_per_frame\n" << std::setprecision(6);
  for (const auto& r : report.rows) out << r.tracker << ',' << r.setting << ',' << r.ms_per_frame << '\n';
  out << "\nfit,a,b,c,r2\n";
  const auto& f = report.px4flow_fit;
  out << "px4flow_quadratic," << f.a << ',' << f.b << ',' << f.c << ',' << f.r2 << '\n';
  out << "orb_constant,0,0," << report.orb_mean_ms << ",0\n";
  out << "\norb_max_min_ratio," << report.orb_max_min_ratio << '\n';
}

}  // namespace dvio::pipeline
