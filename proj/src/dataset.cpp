#include "dvio/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dvio/config.hpp"
#include "dvio/errors.hpp"

namespace dvio::dataset {
namespace fs = std::filesystem;
namespace {

// Numeric CSV rows; a non-numeric first line is treated as a header.
std::vector<std::vector<double>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;
      throw ParseError(path.string(), lineno, "non-numeric field");
    }
    if (row.size() != columns)
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(columns) + " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T, typename Key>
void require_increasing(const std::vector<T>& v, Key key, const std::string& what) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(key(v[i]) > key(v[i - 1])))
      throw TimestampError(what + ": timestamps not strictly increasing at entry " + std::to_string(i));
}

fusion::Mat4 matrix_from(const KeyValueConfig& cfg, const std::string& key) {
  if (!cfg.has(key)) return fusion::Mat4::Identity();
  const auto v = cfg.get_doubles(key);
  if (v.size() != 16) throw ConfigError(key + " needs 16 values, row-major");
  fusion::Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  return m;
}

std::string matrix_text(const fusion::Mat4& m) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) ss << (r || c ? " " : "") << m(r, c);
  return ss.str();
}

}  // namespace

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%010zu", index);
  return buf;
}

Image8 read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (in) {
      int c = in.get();
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(c) && c != EOF) {
        t.push_back(static_cast<char>(c));
        while (in && !std::isspace(in.peek()) && in.peek() != EOF) t.push_back(static_cast<char>(in.get()));
        return t;
      }
    }
    return t;
  };
  if (token() != "P5") throw ParseError(path.string(), 0, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, "bad PGM header");
  }
  if (maxval != 255 || w <= 0 || h <= 0) throw ParseError(path.string(), 0, "only 8-bit PGM is supported");
  in.get();
  std::vector<uint8_t> data(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) throw ParseError(path.string(), 0, "truncated PGM");
  return Image8(w, h, std::move(data));
}

void write_pgm(const fs::path& path, const Image8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingInputError("sequence directory not found: " + dir.string());
  Sequence seq;

  const auto calib = KeyValueConfig::parse_file(dir / "calib.cfg");
  auto& in = seq.intrinsics;
  in.fx = calib.require_double("fx");
  in.fy = calib.require_double("fy");
  in.cx = calib.require_double("cx");
  in.cy = calib.require_double("cy");
  in.width = calib.get_int("width", 0);
  in.height = calib.get_int("height", 0);
  in.validate();
  seq.extrinsics.cam_from_imu = matrix_from(calib, "cam_from_imu");
  seq.extrinsics.cam_from_tof = matrix_from(calib, "cam_from_tof");
  seq.extrinsics.validate();

  for (const auto& row : read_csv(dir / "frames.csv", 2)) {
    const auto index = static_cast<std::size_t>(row[0]);
    Image8 img = read_pgm(dir / "frames" / (frame_name(index) + ".pgm"));
    if (img.width() != in.width || img.height() != in.height)
      throw DimensionError("frame " + frame_name(index) + " does not match calibrated image size");
    seq.frame_times.push_back(row[1]);
    seq.frames.push_back(std::move(img));
  }
  for (std::size_t i = 1; i < seq.frame_times.size(); ++i)
    if (!(seq.frame_times[i] > seq.frame_times[i - 1]))
      throw TimestampError("frames.csv: timestamps not strictly increasing at entry " + std::to_string(i));

  for (const auto& r : read_csv(dir / "imu.csv", 7)) seq.imu.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}});
  require_increasing(seq.imu, [](const fusion::ImuSample& s) { return s.t; }, "imu.csv");

  if (fs::exists(dir / "tof.csv")) {
    for (const auto& r : read_csv(dir / "tof.csv", 2)) seq.tof.push_back({r[0], r[1]});
    require_increasing(seq.tof, [](const RangeSample& s) { return s.t; }, "tof.csv");
  }

  if (fs::exists(dir / "groundtruth.txt")) {
    seq.ground_truth = read_tum(dir / "groundtruth.txt");
    require_increasing(seq.ground_truth, [](const StampedPose& p) { return p.t; }, "groundtruth.txt");
  }
  if (fs::is_directory(dir / "spout")) seq.spout_dir = dir / "spout";
  return seq;
}

void save_sequence(const fs::path& dir, const Sequence& seq) {
  fs::create_directories(dir / "frames");

  std::ofstream frames(dir / "frames.csv");
  frames << "index,timestamp_s\n" << std::setprecision(17);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    write_pgm(dir / "frames" / (frame_name(i) + ".pgm"), seq.frames[i]);
    frames << i << ',' << seq.frame_times[i] << '\n';
  }

  std::ofstream imu(dir / "imu.csv");
  imu << "timestamp_s,ax,ay,az,gx,gy,gz\n" << std::setprecision(17);
  for (const auto& s : seq.imu)
    imu << s.t << ',' << s.accel.x() << ',' << s.accel.y() << ',' << s.accel.z() << ',' << s.gyro.x() << ','
        << s.gyro.y() << ',' << s.gyro.z() << '\n';

  std::ofstream tof(dir / "tof.csv");
  tof << "timestamp_s,range_m\n" << std::setprecision(17);
  for (const auto& s : seq.tof) tof << s.t << ',' << s.range << '\n';

  if (!seq.spout.empty()) {
    fs::create_directories(dir / "spout");
    for (std::size_t i = 0; i < seq.spout.size(); ++i) {
      superpoint::write_tensor(dir / "spout" / (frame_name(i) + ".heat.spt"), seq.spout[i].heat);
      superpoint::write_tensor(dir / "spout" / (frame_name(i) + ".desc.spt"), seq.spout[i].desc);
    }
  }

  if (!seq.ground_truth.empty()) write_tum(dir / "groundtruth.txt", seq.ground_truth);

  KeyValueConfig calib;
  auto num = [](double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
  };
  const auto& in = seq.intrinsics;
  calib.set("fx", num(in.fx));
  calib.set("fy", num(in.fy));
  calib.set("cx", num(in.cx));
  calib.set("cy", num(in.cy));
  calib.set("width", std::to_string(in.width));
  calib.set("height", std::to_string(in.height));
  calib.set("cam_from_imu", matrix_text(seq.extrinsics.cam_from_imu));
  calib.set("cam_from_tof", matrix_text(seq.extrinsics.cam_from_tof));
  std::ofstream(dir / "calib.cfg") << calib.to_string();
}

}  // namespace dvio::dataset
