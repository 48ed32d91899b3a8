#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dvio/dataset.hpp"
#include "dvio/errors.hpp"
#include "dvio/px4flow.hpp"
#include "dvio/synth.hpp"

using namespace dvio;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dvio_ds_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Hand-written sequence directory, no use of save_sequence.
fs::path minimal_fixture(const std::string& name, bool with_gt = true) {
  const auto dir = temp_dir(name);
  fs::create_directories(dir / "frames");
  {
    std::ofstream calib(dir / "calib.cfg");
    calib << "# test camera\nfx = 160\nfy = 160\ncx = 16\ncy = 12\nwidth = 32\nheight = 24\n"
          << "cam_from_imu = 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n";
  }
  std::ofstream frames(dir / "frames.csv");
  frames << "index,timestamp_s\n";
  for (int i = 0; i < 3; ++i) {
    std::ofstream pgm(dir / "frames" / dataset::frame_name(i).append(".pgm"), std::ios::binary);
    pgm << "P5\n# comment\n32 24\n255\n";
    for (int k = 0; k < 32 * 24; ++k) pgm.put(static_cast<char>((k + i) % 256));
    frames << i << "," << 0.01 * i << "\n";
  }
  std::ofstream imu(dir / "imu.csv");
  imu << "timestamp_s,ax,ay,az,gx,gy,gz\n";
  for (int k = 0; k < 30; ++k) imu << 0.001 * k << ",0,0,9.81,0,0,0\n";
  std::ofstream tof(dir / "tof.csv");
  tof << "timestamp_s,range_m\n0.0,1.0\n0.015,1.01\n";
  if (with_gt) {
    std::ofstream gt(dir / "groundtruth.txt");
    gt << "# t x y z qx qy qz qw\n";
    for (int i = 0; i < 3; ++i) gt << 0.01 * i << " 0 0 1 0 0 0 1\n";
  }
  return dir;
}

}  // namespace

TEST_CASE("load_sequence reads a minimal fixture") {
  const auto seq = dataset::load_sequence(minimal_fixture("min"));
  CHECK(seq.size() == 3);
  CHECK(seq.frame_times[2] == doctest::Approx(0.02));
  CHECK(seq.imu.size() == 30);
  CHECK(seq.imu[5].accel.z() == doctest::Approx(9.81));
  CHECK(seq.tof.size() == 2);
  CHECK(seq.ground_truth.size() == 3);
  CHECK(seq.frames[1](0, 0) == 1);
  CHECK(seq.intrinsics.width == 32);
  CHECK_FALSE(seq.spout_dir.has_value());
}

TEST_CASE("load_sequence tolerates missing ground truth") {
  const auto seq = dataset::load_sequence(minimal_fixture("nogt", false));
  CHECK(seq.ground_truth.empty());
  CHECK(seq.size() == 3);
}

TEST_CASE("load_sequence rejects a repeated IMU timestamp") {
  const auto dir = minimal_fixture("dup");
  {
    std::ofstream imu(dir / "imu.csv", std::ios::app);
    imu << "0.029,0,0,9.81,0,0,0\n";
  }
  CHECK_THROWS_AS(dataset::load_sequence(dir), TimestampError);
}

TEST_CASE("load_sequence error kinds are distinct") {
  SUBCASE("malformed row") {
    const auto dir = minimal_fixture("bad");
    std::ofstream(dir / "tof.csv") << "timestamp_s,range_m\n0.0,abc\n";
    try {
      dataset::load_sequence(dir);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("wrong column count") {
    const auto dir = minimal_fixture("cols");
    std::ofstream(dir / "imu.csv") << "0.0,1,2\n";
    CHECK_THROWS_AS(dataset::load_sequence(dir), ParseError);
  }
  SUBCASE("frame size mismatch") {
    const auto dir = minimal_fixture("dim");
    std::ofstream pgm(dir / "frames" / "0000000001.pgm", std::ios::binary);
    pgm << "P5\n8 8\n255\n" << std::string(64, 'a');
    pgm.close();
    CHECK_THROWS_AS(dataset::load_sequence(dir), DimensionError);
  }
  SUBCASE("missing directory") {
    CHECK_THROWS_AS(dataset::load_sequence(fs::temp_directory_path() / "dvio_no_such_dir"), MissingInputError);
  }
  SUBCASE("truncated image") {
    const auto dir = minimal_fixture("trunc");
    std::ofstream pgm(dir / "frames" / "0000000002.pgm", std::ios::binary);
    pgm << "P5\n32 24\n255\nabc";
    pgm.close();
    CHECK_THROWS_AS(dataset::load_sequence(dir), ParseError);
  }
}

TEST_CASE("save_sequence and load_sequence round-trip") {
  synth::SynthConfig cfg;
  cfg.path = synth::Path::constant_velocity(0.2, 0.1, 1.0, 0.1);
  cfg.superpoint = true;
  const auto seq = synth::synth_generate(cfg);
  const auto dir = temp_dir("rt");
  dataset::save_sequence(dir, seq);
  const auto back = dataset::load_sequence(dir);
  REQUIRE(back.size() == seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(back.frames[i] == seq.frames[i]);
    CHECK(back.frame_times[i] == seq.frame_times[i]);
  }
  REQUIRE(back.imu.size() == seq.imu.size());
  CHECK(back.imu.back().accel == seq.imu.back().accel);
  CHECK(back.ground_truth.size() == seq.ground_truth.size());
  CHECK(back.spout_dir.has_value());
  CHECK(back.intrinsics.fx == seq.intrinsics.fx);
}

TEST_CASE("still sequence renders identical frames with zero flow") {
  synth::SynthConfig cfg;
  cfg.path = synth::Path::still(0.1, 1.0);
  const auto seq = synth::synth_generate(cfg);
  REQUIRE(seq.size() == 11);
  for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq.frames[i] == seq.frames[0]);
  for (const auto& f : px4flow::block_flow(seq.frames[0], seq.frames[5], {})) {
    CHECK(f.du2 == 0);
    CHECK(f.dv2 == 0);
  }
}

TEST_CASE("constant velocity gives the projected image shift") {
  for (auto [vx, vy, z] : {std::tuple{0.5, 0.0, 1.0}, {0.0, 0.6, 1.2}, {-0.4, 0.3, 0.8}}) {
    synth::SynthConfig cfg;
    cfg.path = synth::Path::constant_velocity(vx, vy, z, 0.2);
    const auto seq = synth::synth_generate(cfg);
    const double fx = seq.intrinsics.fx, fy = seq.intrinsics.fy;
    // Camera moving +x slides the ground towards -u; +y (against rows) slides it towards +v.
    const double su = -vx * fx / (z * cfg.frame_rate);
    const double sv = vy * fy / (z * cfg.frame_rate);
    for (std::size_t i = 1; i < seq.size(); i += 5) {
      const auto flows = px4flow::block_flow(seq.frames[i - 1], seq.frames[i], {});
      const auto d = px4flow::dominant_flow(flows);
      CHECK(std::abs(d.du - su) <= 0.5);
      CHECK(std::abs(d.dv - sv) <= 0.5);
      int valid = 0, close = 0;
      for (const auto& f : flows) {
        if (!f.valid) continue;
        ++valid;
        close += std::abs(f.du() - su) <= 0.5 && std::abs(f.dv() - sv) <= 0.5;
      }
      CHECK(close >= 0.9 * valid);
    }
  }
}

namespace {

struct Dead {
  std::vector<double> t;
  std::vector<Eigen::Vector3d> pos;
};

// Trapezoidal integration of gyro, then rotated specific force minus gravity,
// using every `stride`-th IMU sample.
Dead integrate(const dataset::Sequence& seq, std::size_t stride) {
  Dead out;
  const auto& s0 = seq.ground_truth.front();
  double psi = yaw_of(s0.orientation);
  Eigen::Vector3d p = s0.position, v = Eigen::Vector3d::Zero();
  auto world = [](const fusion::ImuSample& s, double yaw) {
    const double c = std::cos(yaw), sn = std::sin(yaw);
    return Eigen::Vector3d(c * s.accel.x() - sn * s.accel.y(), sn * s.accel.x() + c * s.accel.y(),
                           s.accel.z() - fusion::kGravity);
  };
  out.t.push_back(seq.imu[0].t);
  out.pos.push_back(p);
  for (std::size_t k = stride; k < seq.imu.size(); k += stride) {
    const auto& a = seq.imu[k - stride];
    const auto& b = seq.imu[k];
    const double dt = b.t - a.t;
    const double psi_b = psi + 0.5 * (a.gyro.z() + b.gyro.z()) * dt;
    const Eigen::Vector3d wa = world(a, psi), wb = world(b, psi_b);
    p += v * dt + dt * dt * (wa / 3.0 + wb / 6.0);
    v += 0.5 * (wa + wb) * dt;
    psi = psi_b;
    out.t.push_back(b.t);
    out.pos.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("noiseless IMU integrates back to the trajectory") {
  synth::SynthConfig cfg;
  cfg.path = synth::Path({{0, 0, 0, 1.0, 0}, {4, 1.0, 0.5, 1.1, 1.0}, {10, 0.3, 1.5, 0.9, -0.5}});
  cfg.frame_rate = 10;
  const auto seq = synth::synth_generate(cfg);
  const auto fine = integrate(seq, 1);
  const auto coarse = integrate(seq, 2);
  double worst = 0.0;
  for (const auto& gt : seq.ground_truth) {
    const auto kf = static_cast<std::size_t>(std::lround(gt.t * cfg.imu_rate));
    REQUIRE(kf % 2 == 0);
    REQUIRE(std::abs(fine.t[kf] - gt.t) < 1e-9);
    // Richardson extrapolation of the two second-order integrations.
    const Eigen::Vector3d est = (4.0 * fine.pos[kf] - coarse.pos[kf / 2]) / 3.0;
    worst = std::max(worst, (est - gt.position).norm());
  }
  CHECK(seq.ground_truth.back().t == doctest::Approx(10.0));
  CHECK(worst <= 1e-6);
}

TEST_CASE("synth_generate is deterministic") {
  synth::SynthConfig cfg;
  cfg.path = synth::Path::square(0.2, 1.0, 0.4);
  cfg.accel_noise_std = 0.05;
  cfg.gyro_noise_std = 0.01;
  cfg.tof_noise_rel = 0.01;
  cfg.superpoint = true;
  const auto a = synth::synth_generate(cfg);
  const auto b = synth::synth_generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frames[i] == b.frames[i]);
    CHECK(a.spout[i].heat.payload == b.spout[i].heat.payload);
    CHECK(a.spout[i].desc.payload == b.spout[i].desc.payload);
  }
  for (std::size_t k = 0; k < a.imu.size(); ++k) {
    CHECK(a.imu[k].accel == b.imu[k].accel);
    CHECK(a.imu[k].gyro == b.imu[k].gyro);
  }
  for (std::size_t k = 0; k < a.tof.size(); ++k) CHECK(a.tof[k].range == b.tof[k].range);
}

TEST_CASE("synth config validation") {
  synth::SynthConfig cfg;
  cfg.path = synth::Path::still(1.0, 1.0);
  cfg.imu_rate = 50;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.imu_rate = 1000;
  cfg.frame_rate = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("PGM round-trip") {
  const auto dir = temp_dir("pgm");
  Image8 img(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) img(x, y) = static_cast<uint8_t>(x * 30 + y);
  dataset::write_pgm(dir / "a.pgm", img);
  CHECK(dataset::read_pgm(dir / "a.pgm") == img);
  std::ofstream(dir / "b.pgm") << "P2\n1 1\n255\n0\n";
  CHECK_THROWS_AS(dataset::read_pgm(dir / "b.pgm"), ParseError);
}
