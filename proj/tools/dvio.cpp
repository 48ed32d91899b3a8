#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvio/config.hpp"
#include "dvio/dataset.hpp"
#include "dvio/errors.hpp"
#include "dvio/pipeline.hpp"
#include "dvio/synth.hpp"
#include "dvio/trajectory.hpp"

namespace fs = std::filesystem;
using namespace dvio;

namespace {

struct Common {
  std::string config;
  std::string tracker;
  std::string mode;
  int search_radius = 0;
  std::size_t frames = 0;
  std::vector<double> lengths;
};

pipeline::PipelineConfig make_config(const Common& c) {
  pipeline::PipelineConfig cfg;
  if (!c.config.empty()) cfg.apply(KeyValueConfig::parse_file(c.config));
  if (!c.tracker.empty()) cfg.tracker = pipeline::parse_tracker(c.tracker);
  if (!c.mode.empty()) cfg.mode = pipeline::parse_mode(c.mode);
  if (c.search_radius > 0) cfg.flow.search_radius = c.search_radius;
  if (c.frames > 0) cfg.max_frames = c.frames;
  if (!c.lengths.empty()) cfg.lengths_m = c.lengths;
  cfg.validate();
  return cfg;
}

synth::Path preset_path(const std::string& name, double duration) {
  if (name == "still") return synth::Path::still(duration > 0 ? duration : 5.0, 1.0);
  if (name == "square") return synth::Path::square(2.0, 1.0, duration > 0 ? duration : 60.0);
  if (name == "two_turns") {
    const double total = duration > 0 ? duration : 20.0;
    return synth::Path::two_turns(2.0, 1.0, 1.0, total * 0.3, total * 0.2);
  }
  if (name == "shuttle") return synth::Path::shuttle(2.0, 1.0, 1.0, duration > 0 ? duration / 4.0 : 5.0, 4);
  if (name == "constant_velocity") return synth::Path::constant_velocity(0.3, 0.0, 1.0, duration > 0 ? duration : 10.0);
  throw ConfigError("unknown preset '" + name + "' (still, square, two_turns, shuttle, constant_velocity)");
}

int cmd_run(const std::string& seq_dir, const Common& c, const fs::path& out) {
  const auto cfg = make_config(c);
  const auto seq = dataset::load_sequence(seq_dir);
  const auto res = pipeline::run(seq, cfg);
  fs::create_directories(out);
  write_tum(out / "estimate.tum", res.estimate);
  pipeline::write_timing_csv(out / "timing.csv", res.timing);
  std::cout << "frames " << res.estimate.size() << ", invalid motions " << res.invalid_motions
            << ", rejected updates " << res.rejected_updates << "\n";
  if (!seq.ground_truth.empty()) {
    const auto m = pipeline::evaluate(res.estimate, seq.ground_truth, cfg.lengths_m, cfg.align_window_s, cfg.max_dt_s);
    pipeline::write_metrics_csv(out / "metrics.csv", m);
    std::cout << pipeline::metrics_table(m);
  }
  return 0;
}

int cmd_evaluate(const std::string& est, const std::string& gt, const Common& c, const std::string& out) {
  const auto cfg = make_config(c);
  const auto m = pipeline::evaluate(read_tum(est), read_tum(gt), cfg.lengths_m, cfg.align_window_s, cfg.max_dt_s);
  std::cout << pipeline::metrics_table(m);
  if (!out.empty()) {
    fs::create_directories(out);
    pipeline::write_metrics_csv(fs::path(out) / "metrics.csv", m);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dvio: downfacing visual-inertial odometry toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string out = "out";
  std::string seq_dir, est_file, gt_file;
  uint64_t seed = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--lengths", common.lengths, "relative-error lengths in metres")->delimiter(',');
  };

  auto* run = app.add_subcommand("run", "replay a sequence directory through the pipeline");
  run->add_option("sequence", seq_dir, "sequence directory")->required();
  run->add_option("--tracker", common.tracker, "orb | px4flow | superpoint");
  run->add_option("--mode", common.mode, "template | reference");
  run->add_option("--search-radius", common.search_radius, "px4flow search radius");
  run->add_option("--frames", common.frames, "process at most this many frames");
  run->add_option("--out", out, "output directory");
  add_common(run);

  auto* ev = app.add_subcommand("evaluate", "score a TUM trajectory against ground truth");
  ev->add_option("estimate", est_file)->required()->check(CLI::ExistingFile);
  ev->add_option("groundtruth", gt_file)->required()->check(CLI::ExistingFile);
  std::string ev_out;
  ev->add_option("--out", ev_out, "also write metrics.csv here");
  add_common(ev);

  pipeline::BenchConfig bcfg;
  auto* bench = app.add_subcommand("bench", "runtime versus search radius / displacement");
  std::vector<int> radii;
  bench->add_option("--search-radius", radii, "px4flow radii (default 2,4,8,16,24)")->delimiter(',');
  bench->add_option("--frames", bcfg.frames, "frames per configuration");
  bench->add_option("--repeats", bcfg.repeats, "repeats per configuration (fastest reported)");
  bench->add_option("--seed", seed, "texture seed");
  bench->add_option("--out", out, "output directory");

  std::string preset = "square";
  double duration = 0.0;
  bool with_sp = false;
  double accel_noise = 0.0, gyro_noise = 0.0, tof_noise = 0.0;
  auto* syn = app.add_subcommand("synth", "generate a synthetic sequence directory");
  syn->add_option("--preset", preset, "still | square | two_turns | shuttle | constant_velocity");
  syn->add_option("--duration", duration, "seconds (0 = preset default)");
  syn->add_option("--seed", seed, "texture and noise seed");
  syn->add_flag("--superpoint", with_sp, "also write stand-in network tensors to spout/");
  syn->add_option("--accel-noise", accel_noise, "accelerometer noise std per sample [m/s^2]");
  syn->add_option("--gyro-noise", gyro_noise, "gyro noise std per sample [rad/s]");
  syn->add_option("--tof-noise", tof_noise, "relative range noise std");
  syn->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(seq_dir, common, out);
    if (*ev) return cmd_evaluate(est_file, gt_file, common, ev_out);
    if (*bench) {
      if (!radii.empty()) bcfg.search_radii = radii;
      bcfg.seed = seed;
      const auto rep = pipeline::bench(bcfg);
      fs::create_directories(out);
      pipeline::write_bench_csv(fs::path(out) / "bench.csv", rep);
      for (const auto& r : rep.rows) std::printf("%-8s %4d  %8.3f ms/frame\n", r.tracker.c_str(), r.setting, r.ms_per_frame);
      std::printf("px4flow quadratic fit R^2 = %.4f\norb max/min ratio = %.3f\n", rep.px4flow_fit.r2,
                  rep.orb_max_min_ratio);
      return 0;
    }
    if (*syn) {
      synth::SynthConfig sc;
      sc.path = preset_path(preset, duration);
      sc.texture.seed = seed;
      sc.noise_seed = seed;
      sc.superpoint = with_sp;
      sc.accel_noise_std = accel_noise;
      sc.gyro_noise_std = gyro_noise;
      sc.tof_noise_rel = tof_noise;
      const auto seq = synth::synth_generate(sc);
      dataset::save_sequence(out, seq);
      std::cout << "wrote " << seq.size() << " frames to " << out << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
