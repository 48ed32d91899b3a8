#include "dvio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dvio/errors.hpp"

namespace dvio::eval {
namespace {

// Second over first principal standard deviation of the alignment window.
constexpr double kMinSpreadRatio = 0.1;

}  // namespace

std::vector<PosePair> associate(const Trajectory& traj, const Trajectory& gt, double max_dt) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const double t = gt[g].t;
    auto it = std::lower_bound(traj.begin(), traj.end(), t, [](const StampedPose& p, double v) { return p.t < v; });
    for (auto k : {it - traj.begin() - 1, it - traj.begin()}) {
      if (k < 0 || k >= static_cast<std::ptrdiff_t>(traj.size())) continue;
      const double dt = std::abs(traj[k].t - t);
      if (dt <= max_dt) cand.emplace_back(dt, g, static_cast<std::size_t>(k));
    }
  }
  std::sort(cand.begin(), cand.end());

  std::vector<char> used_gt(gt.size(), 0), used_est(traj.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const auto& [dt, g, e] : cand) {
    if (used_gt[g] || used_est[e]) continue;
    used_gt[g] = used_est[e] = 1;
    chosen.emplace_back(g, e);
  }
  if (chosen.empty()) throw DegenerateError("no timestamps could be associated");
  std::sort(chosen.begin(), chosen.end());

  std::vector<PosePair> out;
  out.reserve(chosen.size());
  for (const auto& [g, e] : chosen) out.push_back({traj[e], gt[g]});
  return out;
}

Sim3 align_sim3(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size()) throw DegenerateError("alignment inputs differ in length");
  if (src.size() < 3) throw DegenerateError("alignment needs at least three pairs");

  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d a = src[i] - mu_s;
    cov += (dst[i] - mu_d) * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (var_s <= 0.0 || d(1) <= 1e-12 * std::max(d(0), 1e-300))
    throw DegenerateError("alignment points are collinear or coincident");

  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2, 2) = -1.0;

  Sim3 out;
  out.rotation = svd.matrixU() * S * svd.matrixV().transpose();
  out.scale = (d.asDiagonal() * S).trace() / var_s;
  out.translation = mu_d - out.scale * out.rotation * mu_s;
  return out;
}

double alignment_residual(const Sim3& s, std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  double r = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) r += (s.apply(src[i]) - dst[i]).squaredNorm();
  return r;
}

RmseReport rmse(const Trajectory& traj, const Trajectory& gt, double align_window_s, double max_dt) {
  const auto pairs = associate(traj, gt, max_dt);
  return rmse(pairs, align_window_s);
}

RmseReport rmse(std::span<const PosePair> pairs, double align_window_s) {
  if (pairs.empty()) throw DegenerateError("no pose pairs to evaluate");
  const double t0 = pairs.front().gt.t;
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& p : pairs) {
    if (p.gt.t - t0 > align_window_s) break;
    src.push_back(p.est.position);
    dst.push_back(p.gt.position);
  }

  RmseReport rep;
  // A straight-line prefix leaves the rotation about that line undetermined
  // (or decided by noise alone); grow the window until the ground-truth
  // spread is clearly two-dimensional.
  Eigen::Vector3d sum1 = Eigen::Vector3d::Zero();
  Eigen::Matrix3d sum2 = Eigen::Matrix3d::Zero();
  for (const auto& d : dst) {
    sum1 += d;
    sum2 += d * d.transpose();
  }
  auto spread_ok = [&] {
    const double n = static_cast<double>(dst.size());
    const Eigen::Matrix3d cov = sum2 / n - (sum1 / n) * (sum1 / n).transpose();
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov).eigenvalues();
    return ev(2) > 0.0 && ev(1) >= kMinSpreadRatio * kMinSpreadRatio * ev(2);
  };
  while (dst.size() < pairs.size() && !spread_ok()) {
    const auto& next = pairs[dst.size()];
    src.push_back(next.est.position);
    dst.push_back(next.gt.position);
    sum1 += next.gt.position;
    sum2 += next.gt.position * next.gt.position.transpose();
    rep.window_extended = true;
  }
  rep.alignment = align_sim3(src, dst);
  rep.align_pairs = src.size();
  rep.pairs = pairs.size();

  double sq = 0.0, sum = 0.0;
  std::vector<double> err;
  err.reserve(pairs.size());
  for (const auto& p : pairs) {
    const double e = (rep.alignment.apply(p.est.position) - p.gt.position).norm();
    err.push_back(e);
    sq += e * e;
    sum += e;
  }
  const double n = static_cast<double>(pairs.size());
  rep.rmse = std::sqrt(sq / n);
  rep.mean_error = sum / n;
  double var = 0.0;
  for (double e : err) var += (e - rep.mean_error) * (e - rep.mean_error);
  rep.error_std = std::sqrt(var / n);
  return rep;
}

std::vector<RelativeError> relative_translation_error(std::span<const PosePair> pairs,
                                                      std::span<const double> lengths_m) {
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t i = 1; i < pairs.size(); ++i)
    arc[i] = arc[i - 1] + (pairs[i].gt.position - pairs[i - 1].gt.position).norm();

  std::vector<RelativeError> out;
  for (double length : lengths_m) {
    RelativeError r;
    r.length_m = length;
    double sum = 0.0;
    std::size_t end = 0;
    for (std::size_t start = 0; start < pairs.size(); ++start) {
      end = std::max(end, start + 1);
      while (end < pairs.size() && arc[end] - arc[start] < length) ++end;
      if (end >= pairs.size()) break;

      const auto& s = pairs[start];
      const auto& e = pairs[end];
      const double dyaw = yaw_of(s.gt.orientation) - yaw_of(s.est.orientation);
      const double c = std::cos(dyaw), sn = std::sin(dyaw);
      const Eigen::Vector3d d = e.est.position - s.est.position;
      const Eigen::Vector3d anchored(s.gt.position.x() + c * d.x() - sn * d.y(),
                                     s.gt.position.y() + sn * d.x() + c * d.y(), s.gt.position.z() + d.z());
      sum += 100.0 * (anchored - e.gt.position).norm() / length;
      ++r.samples;
    }
    r.available = r.samples > 0;
    r.mean_error_pct = r.available ? sum / static_cast<double>(r.samples) : 0.0;
    out.push_back(r);
  }
  return out;
}

std::vector<RelativeError> relative_translation_error(const Trajectory& traj, const Trajectory& gt,
                                                      std::span<const double> lengths_m, double max_dt) {
  const auto pairs = associate(traj, gt, max_dt);
  return relative_translation_error(pairs, lengths_m);
}

}  // namespace dvio::eval
