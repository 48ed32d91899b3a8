#pragma once

#include <array>
#include <span>
#include <vector>

#include "dvio/image.hpp"

namespace dvio::rigid {

inline constexpr double kPrefilterBand = 5.0;
inline constexpr double kInlierGate = 1.5;
inline constexpr int kMinInliers = 3;

// Planar motion of the image content between two frames: q = R(dpsi) p + (du, dv).
struct RigidMotion2D {
  double du = 0.0;
  double dv = 0.0;
  double dpsi = 0.0;
  int inlier_count = 0;
  bool valid = false;
};

using Mat2 = std::array<std::array<double, 2>, 2>;

// H = U diag(s0, s1) V^T with U, V orthonormal and s0 >= s1 >= 0.
struct Svd2 {
  Mat2 u{};
  double s0 = 0.0;
  double s1 = 0.0;
  Mat2 v{};
};

Svd2 svd2(const Mat2& h);

// Per-axis histogram of displacements with 1 px bins. Baseline is the centre
// of the fullest bin (ties go to the smaller displacement); matches within
// 5 px of the baseline on both axes are kept.
std::vector<TrackedMatch> histogram_prefilter(std::span<const TrackedMatch> matches);

// Least-squares rotation and translation; invalid with fewer than three
// matches or when all points coincide.
RigidMotion2D solve_rigid_2d(std::span<const TrackedMatch> matches);

// Histogram prefilter, first solve, re-classification of every match with a
// 1.5 px reprojection gate, second solve on the new inliers.
RigidMotion2D estimate_motion(std::span<const TrackedMatch> matches);

double reprojection_error(const RigidMotion2D& m, const TrackedMatch& t) noexcept;

}  // namespace dvio::rigid
