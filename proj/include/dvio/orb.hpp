#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dvio/image.hpp"

namespace dvio::orb {

// Corners closer than this to the border are never reported so the 31x31
// orientation patch always fits.
inline constexpr int kBorder = 16;
inline constexpr int kPatchRadius = 15;
inline constexpr int kHarrisRadius = 3;
inline constexpr int kFastArc = 9;
inline constexpr int kMaxMatchDistance = 20;

struct Corner {
  int x = 0;
  int y = 0;
  uint16_t fast_score = 0;
  int32_t harris_score = 0;

  bool operator==(const Corner&) const = default;
};

using Descriptor = std::array<uint64_t, 4>;

struct OrbFeature {
  int x = 0;
  int y = 0;
  double angle = 0.0;
  Descriptor descriptor{};
};

// Hysteresis state that holds the per-frame feature count inside
// [target_min, target_max].
struct DetectorThresholds {
  int fast_threshold = 20;
  int32_t harris_threshold = 1 << 12;

  int target_min = 150;
  int target_max = 200;
  int hard_cap = 512;

  int fast_min = 10;
  int fast_max = 60;
  int fast_step = 5;
  int32_t harris_min = 1 << 10;
  int32_t harris_max = 1 << 20;
  int32_t harris_factor = 2;

  // Throws ConfigError when the band or the bounds are inconsistent.
  void validate() const;
};

struct Selection {
  std::vector<Corner> corners;
  DetectorThresholds thresholds;
  // Number of corners above the Harris threshold, before the hard cap.
  int survivors = 0;
};

struct Orientation {
  double angle = 0.0;
  // Set when both intensity moments vanish and the angle defaults to 0.
  bool degenerate = false;
};

// FAST-9 on the 16-pixel radius-3 Bresenham circle. fast_score is the sum of
// |ring - center| over the longest qualifying contiguous arc. With `nms` set,
// only 3x3 score maxima survive (ties go to the earlier pixel in raster order).
std::vector<Corner> fast_detect(const Image8& img, int threshold, bool nms = true, int workers = 1);

// Integer Harris response over a 7x7 window of 3x3 Sobel gradients. Structure
// tensor sums are rounded down by 2^11 into 16 bits, then
// R = det(M) - (41 * trace(M)^2) / 1024.
std::vector<Corner> harris_refine(const Image8& img, std::span<const Corner> corners, int workers = 1);
std::vector<Corner> harris_refine(const GradientPair& grad, std::span<const Corner> corners, int workers = 1);

// Drops corners below the Harris threshold, orders the rest by
// (score desc, y asc, x asc), caps at hard_cap and steps the thresholds.
Selection select_features(std::vector<Corner> corners, const DetectorThresholds& thresholds);

// Direction of the intensity centroid inside the radius-15 disc.
Orientation orientation(const Image8& blurred, int x, int y);

// rBRIEF descriptor with the pattern rotated using Q7.8 sine and cosine.
// Rotated samples that fall outside the frame are clamped to the border.
Descriptor describe(const Image8& blurred, int x, int y, double angle);

int hamming(const Descriptor& a, const Descriptor& b) noexcept;

// For every current feature, the closest previous feature by Hamming distance;
// emitted when the distance is at most `max_distance`.
std::vector<TrackedMatch> match_hamming(std::span<const OrbFeature> prev, std::span<const OrbFeature> cur,
                                        int width, int height, int max_distance = kMaxMatchDistance);

struct TrackerConfig {
  DetectorThresholds thresholds;
  int max_distance = kMaxMatchDistance;
  int workers = 1;
};

// Frame-to-frame ORB tracking with threshold hysteresis.
class OrbTracker {
 public:
  explicit OrbTracker(TrackerConfig cfg = {});

  // Extracts features from `frame` and matches them against the previous
  // frame's features. The first frame yields no matches.
  std::vector<TrackedMatch> track(const Image8& frame);

  std::vector<OrbFeature> extract(const Image8& frame);

  const DetectorThresholds& thresholds() const noexcept { return cfg_.thresholds; }
  const std::vector<OrbFeature>& features() const noexcept { return prev_; }

 private:
  TrackerConfig cfg_;
  std::vector<OrbFeature> prev_;
  bool has_prev_ = false;
};

}  // namespace dvio::orb
