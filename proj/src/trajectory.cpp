#include "dvio/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dvio/errors.hpp"

namespace dvio {

Eigen::Quaterniond yaw_quaternion(double psi) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()));
}

double yaw_of(const Eigen::Quaterniond& q) {
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()), 1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open trajectory " + path.string());

  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path.string(), lineno, "not a number: '" + tok + "'");
      }
    }
    if (v.empty()) continue;
    if (v.size() != 8)
      throw ParseError(path.string(), lineno, "expected 8 fields, found " + std::to_string(v.size()));

    StampedPose p;
    p.t = v[0];
    p.position = {v[1], v[2], v[3]};
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double n = q.norm();
    if (!(std::abs(n - 1.0) < 1e-3)) throw ParseError(path.string(), lineno, "quaternion is not unit length");
    p.orientation = q.normalized();
    traj.push_back(p);
  }
  return traj;
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trajectory " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  out << std::setprecision(17);
  for (const auto& p : traj) {
    const auto& q = p.orientation;
    out << p.t << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << q.x() << ' '
        << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

}  // namespace dvio
