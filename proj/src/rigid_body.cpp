#include "dvio/rigid_body.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dvio::rigid {
namespace {

Mat2 rotation(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, -s}, {s, c}}};
}

// Baseline displacement: centre of the fullest 1 px bin.
double modal_bin_center(std::span<const double> values) {
  std::map<long, int> hist;
  for (double v : values) ++hist[std::lround(std::floor(v + 0.5))];
  auto mode = hist.begin();
  for (auto it = hist.begin(); it != hist.end(); ++it) {
    if (it->second > mode->second ||
        (it->second == mode->second && std::labs(it->first) < std::labs(mode->first)))
      mode = it;
  }
  return static_cast<double>(mode->first);
}

}  // namespace

Svd2 svd2(const Mat2& h) {
  // Split H into a similarity part [e -f; f e] and a reflection part
  // [g h; h -g]; the singular values and angles follow in closed form.
  const double a = h[0][0], b = h[0][1], c = h[1][0], d = h[1][1];
  const double e = 0.5 * (a + d), f = 0.5 * (c - b);
  const double g = 0.5 * (a - d), k = 0.5 * (c + b);
  const double q = std::hypot(e, f), r = std::hypot(g, k);
  const double a1 = std::atan2(k, g), a2 = std::atan2(f, e);
  const double theta = 0.5 * (a2 - a1);
  const double phi = 0.5 * (a2 + a1);

  Svd2 out;
  out.s0 = q + r;
  out.s1 = q - r;
  out.u = rotation(phi);
  out.v = rotation(-theta);
  // V^T = rotation(theta); keep s1 non-negative by flipping one column of V.
  if (out.s1 < 0) {
    out.s1 = -out.s1;
    out.v[0][1] = -out.v[0][1];
    out.v[1][1] = -out.v[1][1];
  }
  return out;
}

std::vector<TrackedMatch> histogram_prefilter(std::span<const TrackedMatch> matches) {
  if (matches.empty()) return {};
  std::vector<double> du, dv;
  du.reserve(matches.size());
  dv.reserve(matches.size());
  for (const auto& m : matches) {
    du.push_back(m.cx - m.px);
    dv.push_back(m.cy - m.py);
  }
  const double bu = modal_bin_center(du);
  const double bv = modal_bin_center(dv);

  std::vector<TrackedMatch> out;
  for (std::size_t i = 0; i < matches.size(); ++i)
    if (std::abs(du[i] - bu) <= kPrefilterBand && std::abs(dv[i] - bv) <= kPrefilterBand) out.push_back(matches[i]);
  return out;
}

RigidMotion2D solve_rigid_2d(std::span<const TrackedMatch> matches) {
  RigidMotion2D out;
  out.inlier_count = static_cast<int>(matches.size());
  if (matches.size() < static_cast<std::size_t>(kMinInliers)) return out;

  const double n = static_cast<double>(matches.size());
  double pcx = 0, pcy = 0, qcx = 0, qcy = 0;
  for (const auto& m : matches) {
    pcx += m.px;
    pcy += m.py;
    qcx += m.cx;
    qcy += m.cy;
  }
  pcx /= n;
  pcy /= n;
  qcx /= n;
  qcy /= n;

  // Cross-covariance H = sum (p - pbar)(q - qbar)^T.
  Mat2 h{};
  double spread = 0;
  for (const auto& m : matches) {
    const double ax = m.px - pcx, ay = m.py - pcy;
    const double bx = m.cx - qcx, by = m.cy - qcy;
    h[0][0] += ax * bx;
    h[0][1] += ax * by;
    h[1][0] += ay * bx;
    h[1][1] += ay * by;
    spread += ax * ax + ay * ay;
  }
  if (spread <= 1e-18) return out;

  // R = V diag(1, det(V U^T)) U^T.
  const Svd2 s = svd2(h);
  const auto& u = s.u;
  const auto& v = s.v;
  const double det_vu = (v[0][0] * v[1][1] - v[0][1] * v[1][0]) * (u[0][0] * u[1][1] - u[0][1] * u[1][0]);
  const double sgn = det_vu < 0 ? -1.0 : 1.0;
  Mat2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = v[i][0] * u[j][0] + sgn * v[i][1] * u[j][1];

  out.dpsi = std::atan2(r[1][0], r[0][0]);
  out.du = qcx - (r[0][0] * pcx + r[0][1] * pcy);
  out.dv = qcy - (r[1][0] * pcx + r[1][1] * pcy);
  out.valid = true;
  return out;
}

double reprojection_error(const RigidMotion2D& m, const TrackedMatch& t) noexcept {
  const double c = std::cos(m.dpsi), s = std::sin(m.dpsi);
  const double x = c * t.px - s * t.py + m.du;
  const double y = s * t.px + c * t.py + m.dv;
  return std::hypot(x - t.cx, y - t.cy);
}

RigidMotion2D estimate_motion(std::span<const TrackedMatch> matches) {
  const auto pre = histogram_prefilter(matches);
  const RigidMotion2D first = solve_rigid_2d(pre);
  if (!first.valid) return first;

  std::vector<TrackedMatch> inliers;
  for (const auto& m : matches)
    if (reprojection_error(first, m) <= kInlierGate) inliers.push_back(m);
  return solve_rigid_2d(inliers);
}

}  // namespace dvio::rigid
