#include "dvio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dvio/errors.hpp"
#include "dvio/imgproc.hpp"

namespace dvio::synth {
namespace {

uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(uint64_t seed, int octave, int64_t ix, int64_t iy) {
  const uint64_t h = mix(seed ^ mix(static_cast<uint64_t>(octave) ^ mix(static_cast<uint64_t>(ix) ^
                                                                        mix(static_cast<uint64_t>(iy)))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(uint64_t seed, int octave, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
  const double tx = fade(x - fx), ty = fade(y - fy);
  const double a = lattice(seed, octave, ix, iy), b = lattice(seed, octave, ix + 1, iy);
  const double c = lattice(seed, octave, ix, iy + 1), d = lattice(seed, octave, ix + 1, iy + 1);
  return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
}

// Quintic rest-to-rest profile and its first two derivatives.
void quintic(double s, double& p, double& dp, double& ddp) {
  p = s * s * s * (10 + s * (-15 + 6 * s));
  dp = 30 * s * s * (1 - s) * (1 - s);
  ddp = 60 * s * (1 - s) * (1 - 2 * s);
}

}  // namespace

Path::Path(std::vector<Waypoint> waypoints, Blend blend) : wp_(std::move(waypoints)), blend_(blend) {
  if (wp_.empty()) throw ConfigError("path needs at least one waypoint");
  for (std::size_t i = 1; i < wp_.size(); ++i)
    if (!(wp_[i].t > wp_[i - 1].t)) throw ConfigError("path waypoints must have increasing times");
}

PathSample Path::at(double t) const {
  PathSample out;
  if (wp_.empty()) return out;
  auto hold = [&](const Waypoint& w) {
    out.pos = {w.x, w.y, w.z};
    out.psi = w.psi;
    return out;
  };
  if (t <= wp_.front().t) return hold(wp_.front());
  if (t >= wp_.back().t) return hold(wp_.back());

  const auto it = std::upper_bound(wp_.begin(), wp_.end(), t, [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& a = *(it - 1);
  const Waypoint& b = *it;
  const double T = b.t - a.t;
  const double s = (t - a.t) / T;
  double p = s, dp = 1.0, ddp = 0.0;
  if (blend_ == Blend::smooth) quintic(s, p, dp, ddp);

  const Eigen::Vector3d pa(a.x, a.y, a.z), pb(b.x, b.y, b.z);
  out.pos = pa + (pb - pa) * p;
  out.vel = (pb - pa) * (dp / T);
  out.acc = (pb - pa) * (ddp / (T * T));
  out.psi = a.psi + (b.psi - a.psi) * p;
  out.psi_rate = (b.psi - a.psi) * dp / T;
  out.psi_acc = (b.psi - a.psi) * ddp / (T * T);
  return out;
}

Path Path::still(double duration, double height) {
  return Path({{0.0, 0, 0, height, 0}, {duration, 0, 0, height, 0}});
}

Path Path::square(double side, double height, double duration) {
  const double q = duration / 4.0;
  return Path({{0.0, 0, 0, height, 0},
               {q, side, 0, height, 0},
               {2 * q, side, side, height, 0},
               {3 * q, 0, side, height, 0},
               {4 * q, 0, 0, height, 0}});
}

Path Path::two_turns(double length, double width, double height, double leg_time, double turn_time) {
  const double pi = std::numbers::pi;
  double t = 0.0;
  std::vector<Waypoint> w{{t, 0, 0, height, 0}};
  w.push_back({t += leg_time, length, 0, height, 0});
  w.push_back({t += turn_time, length, width, height, pi});
  w.push_back({t += leg_time, 0, width, height, pi});
  w.push_back({t += turn_time, 0, 0, height, 2 * pi});
  return Path(std::move(w));
}

Path Path::shuttle(double length, double width, double height, double leg_time, int legs) {
  std::vector<Waypoint> w{{0.0, 0, 0, height, 0}};
  for (int i = 1; i <= legs; ++i)
    w.push_back({i * leg_time, (i % 2) ? length : 0.0, (i % 4 >= 2) ? width : 0.0, height, 0});
  return Path(std::move(w));
}

Path Path::constant_velocity(double vx, double vy, double height, double duration) {
  return Path({{0.0, 0, 0, height, 0}, {duration, vx * duration, vy * duration, height, 0}}, Blend::linear);
}

void SynthConfig::validate() const {
  if (frame_rate < 1) throw ConfigError("frame_rate must be at least 1 Hz");
  if (imu_rate < frame_rate) throw ConfigError("imu_rate must be at least the frame rate");
  if (tof_rate <= 0) throw ConfigError("tof_rate must be positive");
  if (path.waypoints().empty()) throw ConfigError("synthetic path is empty");
  intrinsics.validate();
}

double texture_value(const TextureConfig& tex, double x, double y) {
  double sum = 0.0, norm = 0.0;
  double amp = 1.0;
  double cell = tex.cell_m;
  // Finest octave first; coarser octaves get larger amplitude.
  for (int o = 0; o < tex.octaves; ++o) {
    sum += amp * value_noise(tex.seed, o, x / cell, y / cell);
    norm += amp;
    amp /= tex.persistence;
    cell *= 2.0;
  }
  const double n = sum / norm;
  return std::clamp(127.5 + tex.contrast * (n - 0.5) * 255.0, 0.0, 255.0);
}

Image8 render(const TextureConfig& tex, const fusion::CameraIntrinsics& intr, const Eigen::Vector3d& pos,
              double psi) {
  Image8 img(intr.width, intr.height);
  const double c = std::cos(psi), s = std::sin(psi);
  const double z = pos.z();
  for (int v = 0; v < intr.height; ++v) {
    const double yc = -(v - intr.cy) * z / intr.fy;
    for (int u = 0; u < intr.width; ++u) {
      const double xc = (u - intr.cx) * z / intr.fx;
      const double gx = pos.x() + c * xc - s * yc;
      const double gy = pos.y() + s * xc + c * yc;
      img(u, v) = static_cast<uint8_t>(std::lround(texture_value(tex, gx, gy)));
    }
  }
  return img;
}

superpoint::Output pseudo_superpoint(const Image8& img) {
  using superpoint::kCell;
  const int cols = img.width() / kCell, rows = img.height() / kCell;
  const Image8 blurred = imgproc::gaussian_blur5(img);
  const auto g = imgproc::sobel3(blurred);

  std::vector<double> resp(static_cast<std::size_t>(img.width()) * img.height(), 0.0);
  double peak = 0.0;
  for (int y = 3; y < img.height() - 3; ++y) {
    for (int x = 3; x < img.width() - 3; ++x) {
      double a = 0, b = 0, d = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const double gx = g.ix(x + dx, y + dy), gy = g.iy(x + dx, y + dy);
          a += gx * gx;
          b += gx * gy;
          d += gy * gy;
        }
      const double r = std::max(0.0, a * d - b * b - 0.04 * (a + d) * (a + d));
      resp[static_cast<std::size_t>(y) * img.width() + x] = r;
      peak = std::max(peak, r);
    }
  }

  superpoint::Output out;
  out.heat.dims = {superpoint::kHeatChannels, static_cast<uint32_t>(cols), static_cast<uint32_t>(rows)};
  out.heat.scale = 1.0 / 255.0;
  out.heat.payload.assign(std::size_t{superpoint::kHeatChannels} * cols * rows, 0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      for (int ch = 0; ch < superpoint::kHeatChannels; ++ch) {
        const int x = kCell * j + ch % kCell, y = kCell * i + ch / kCell;
        const double r = peak > 0 ? resp[static_cast<std::size_t>(y) * img.width() + x] / peak : 0.0;
        out.heat.payload[out.heat.index(ch, j, i)] = static_cast<uint8_t>(std::lround(255.0 * std::sqrt(r)));
      }

  out.desc.dims = {superpoint::kDescChannels, static_cast<uint32_t>(cols), static_cast<uint32_t>(rows)};
  out.desc.scale = 1.0 / 127.0;
  out.desc.payload.assign(std::size_t{superpoint::kDescChannels} * cols * rows, 0);
  constexpr int kHalf = 8;
  std::vector<double> patch((2 * kHalf) * (2 * kHalf));
  std::vector<double> proj(superpoint::kDescChannels);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int cx = kCell * j + kCell / 2, cy = kCell * i + kCell / 2;
      double mean = 0;
      for (int dy = 0; dy < 2 * kHalf; ++dy)
        for (int dx = 0; dx < 2 * kHalf; ++dx) {
          const int x = std::clamp(cx - kHalf + dx, 0, img.width() - 1);
          const int y = std::clamp(cy - kHalf + dy, 0, img.height() - 1);
          patch[dy * 2 * kHalf + dx] = blurred(x, y);
          mean += blurred(x, y);
        }
      mean /= static_cast<double>(patch.size());
      double amax = 0;
      for (int ch = 0; ch < superpoint::kDescChannels; ++ch) {
        double acc = 0;
        for (std::size_t k = 0; k < patch.size(); ++k)
          acc += (patch[k] - mean) * ((mix(ch * 4096 + k) & 1) ? 1.0 : -1.0);
        proj[ch] = acc;
        amax = std::max(amax, std::abs(acc));
      }
      for (int ch = 0; ch < superpoint::kDescChannels; ++ch) {
        const long q = amax > 0 ? std::lround(127.0 * proj[ch] / amax) : 0;
        out.desc.payload[out.desc.index(ch, j, i)] = static_cast<uint8_t>(static_cast<int8_t>(q));
      }
    }
  }
  return out;
}

dataset::Sequence synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const double duration = cfg.duration > 0 ? cfg.duration : cfg.path.duration();

  dataset::Sequence seq;
  seq.intrinsics = cfg.intrinsics;

  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto n_frames = static_cast<std::size_t>(std::floor(duration * cfg.frame_rate + 1e-9)) + 1;
  seq.frames.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double t = static_cast<double>(i) / cfg.frame_rate;
    const PathSample p = cfg.path.at(t);
    seq.frame_times.push_back(t);
    seq.frames[i] = render(cfg.texture, cfg.intrinsics, p.pos, p.psi);
    seq.ground_truth.push_back({t, p.pos, yaw_quaternion(p.psi)});
    if (cfg.superpoint) seq.spout.push_back(pseudo_superpoint(seq.frames[i]));
  }

  const auto n_imu = static_cast<std::size_t>(std::floor(duration * cfg.imu_rate + 1e-9)) + 1;
  seq.imu.reserve(n_imu);
  for (std::size_t k = 0; k < n_imu; ++k) {
    const double t = static_cast<double>(k) / cfg.imu_rate;
    const PathSample p = cfg.path.at(t);
    const double c = std::cos(p.psi), s = std::sin(p.psi);
    fusion::ImuSample imu;
    imu.t = t;
    imu.accel = {c * p.acc.x() + s * p.acc.y(), -s * p.acc.x() + c * p.acc.y(), p.acc.z() + fusion::kGravity};
    imu.gyro = {0.0, 0.0, p.psi_rate};
    if (cfg.accel_noise_std > 0)
      for (int a = 0; a < 3; ++a) imu.accel[a] += cfg.accel_noise_std * gauss(rng);
    if (cfg.gyro_noise_std > 0)
      for (int a = 0; a < 3; ++a) imu.gyro[a] += cfg.gyro_noise_std * gauss(rng);
    seq.imu.push_back(imu);
  }

  const auto n_tof = static_cast<std::size_t>(std::floor(duration * cfg.tof_rate + 1e-9)) + 1;
  for (std::size_t k = 0; k < n_tof; ++k) {
    const double t = static_cast<double>(k) / cfg.tof_rate;
    const double z = cfg.path.at(t).pos.z();
    const double noise = cfg.tof_noise_rel > 0 ? cfg.tof_noise_rel * z * gauss(rng) : 0.0;
    seq.tof.push_back({t, z + noise});
  }
  return seq;
}

}  // namespace dvio::synth
