#include "dvio/orb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "dvio/imgproc.hpp"
#include "dvio/orb_pattern.hpp"
#include "dvio/parallel.hpp"

namespace dvio::orb {
namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

// Longest circular run of set flags, with the sum of `diff` over that run.
// Returns 0 when the run is shorter than kFastArc.
uint16_t arc_score(const std::array<bool, 16>& flag, const std::array<int, 16>& diff) {
  int best_len = 0;
  int best_sum = 0;
  int start = -1;
  for (int i = 0; i < 16; ++i) {
    if (!flag[i]) {
      start = i;
      break;
    }
  }
  if (start < 0) {
    int sum = 0;
    for (int d : diff) sum += d;
    return static_cast<uint16_t>(sum);
  }
  // Walk once around the circle starting just after a cleared flag, so no
  // run wraps past the end of the scan.
  int len = 0;
  int sum = 0;
  for (int k = 1; k <= 16; ++k) {
    const int i = (start + k) & 15;
    if (flag[i]) {
      ++len;
      sum += diff[i];
      if (len > best_len || (len == best_len && sum > best_sum)) {
        best_len = len;
        best_sum = sum;
      }
    } else {
      len = 0;
      sum = 0;
    }
  }
  return best_len >= kFastArc ? static_cast<uint16_t>(best_sum) : 0;
}

uint16_t fast_score_at(const Image8& img, int x, int y, int threshold) {
  const int c = img(x, y);
  const int hi = c + threshold;
  const int lo = c - threshold;

  // Any 9-arc covers at least two of the four compass points.
  int bright = 0;
  int dark = 0;
  for (int k = 0; k < 16; k += 4) {
    const int v = img(x + kCircle[k][0], y + kCircle[k][1]);
    bright += v > hi;
    dark += v < lo;
  }
  if (bright < 2 && dark < 2) return 0;

  std::array<int, 16> ring{};
  for (int k = 0; k < 16; ++k) ring[k] = img(x + kCircle[k][0], y + kCircle[k][1]);

  std::array<bool, 16> flag{};
  std::array<int, 16> diff{};
  if (bright >= 2) {
    for (int k = 0; k < 16; ++k) {
      flag[k] = ring[k] > hi;
      diff[k] = ring[k] - c;
    }
    if (const uint16_t s = arc_score(flag, diff)) return s;
  }
  if (dark >= 2) {
    for (int k = 0; k < 16; ++k) {
      flag[k] = ring[k] < lo;
      diff[k] = c - ring[k];
    }
    if (const uint16_t s = arc_score(flag, diff)) return s;
  }
  return 0;
}

inline int round_q8(int v) { return v >= 0 ? (v + 128) >> 8 : -((-v + 128) >> 8); }

inline int quantize_q8(double v) { return static_cast<int>(std::lround(v * 256.0)); }

}  // namespace

void DetectorThresholds::validate() const {
  if (!(target_min < target_max && target_max <= hard_cap))
    throw ConfigError("detector thresholds require target_min < target_max <= hard_cap");
  if (fast_min > fast_max || fast_step <= 0 || fast_min < 0 || fast_max > 255)
    throw ConfigError("invalid FAST threshold bounds");
  if (harris_min > harris_max || harris_factor < 2 || harris_min <= 0)
    throw ConfigError("invalid Harris threshold bounds");
}

std::vector<Corner> fast_detect(const Image8& img, int threshold, bool nms, int workers) {
  const int w = img.width();
  const int h = img.height();
  if (w < 2 * kBorder || h < 2 * kBorder) throw DimensionError("fast_detect requires at least a 32x32 image");

  const int rows = h - 2 * kBorder;
  const int cols = w - 2 * kBorder;
  std::vector<uint16_t> score(static_cast<std::size_t>(rows) * cols, 0);
  parallel_for(rows, workers, [&](int begin, int end) {
    for (int r = begin; r < end; ++r)
      for (int c = 0; c < cols; ++c)
        score[static_cast<std::size_t>(r) * cols + c] = fast_score_at(img, c + kBorder, r + kBorder, threshold);
  });

  auto at = [&](int r, int c) -> int {
    if (r < 0 || c < 0 || r >= rows || c >= cols) return 0;
    return score[static_cast<std::size_t>(r) * cols + c];
  };

  std::vector<Corner> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int s = at(r, c);
      if (s == 0) continue;
      if (nms) {
        const bool beaten = at(r - 1, c - 1) >= s || at(r - 1, c) >= s || at(r - 1, c + 1) >= s ||
                            at(r, c - 1) >= s || at(r, c + 1) > s || at(r + 1, c - 1) > s ||
                            at(r + 1, c) > s || at(r + 1, c + 1) > s;
        if (beaten) continue;
      }
      out.push_back({c + kBorder, r + kBorder, static_cast<uint16_t>(s), 0});
    }
  }
  return out;
}

std::vector<Corner> harris_refine(const Image8& img, std::span<const Corner> corners, int workers) {
  return harris_refine(imgproc::sobel3(img, workers), corners, workers);
}

std::vector<Corner> harris_refine(const GradientPair& grad, std::span<const Corner> corners, int workers) {
  const int w = grad.ix.width;
  const int h = grad.ix.height;
  const int margin = kHarrisRadius + 1;
  for (const auto& c : corners) {
    if (c.x < margin || c.y < margin || c.x >= w - margin || c.y >= h - margin)
      throw DimensionError("corner too close to the border for the 7x7 Harris window");
  }

  std::vector<Corner> out(corners.begin(), corners.end());
  parallel_for(static_cast<int>(out.size()), workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      auto& c = out[i];
      int32_t sxx = 0, syy = 0, sxy = 0;
      for (int dy = -kHarrisRadius; dy <= kHarrisRadius; ++dy) {
        for (int dx = -kHarrisRadius; dx <= kHarrisRadius; ++dx) {
          const int32_t gx = grad.ix(c.x + dx, c.y + dy);
          const int32_t gy = grad.iy(c.x + dx, c.y + dy);
          sxx += gx * gx;
          syy += gy * gy;
          sxy += gx * gy;
        }
      }
      const int16_t a = static_cast<int16_t>((sxx + 1024) >> 11);
      const int16_t d = static_cast<int16_t>((syy + 1024) >> 11);
      const int16_t b = static_cast<int16_t>((sxy + 1024) >> 11);
      const int64_t det = int64_t{a} * d - int64_t{b} * b;
      const int64_t tr = int64_t{a} + d;
      const int64_t k_tr2 = (41 * tr * tr + 512) >> 10;
      c.harris_score = static_cast<int32_t>(det - k_tr2);
    }
  });
  return out;
}

Selection select_features(std::vector<Corner> corners, const DetectorThresholds& thresholds) {
  Selection sel;
  sel.thresholds = thresholds;

  std::erase_if(corners, [&](const Corner& c) { return c.harris_score < thresholds.harris_threshold; });
  std::stable_sort(corners.begin(), corners.end(), [](const Corner& a, const Corner& b) {
    if (a.harris_score != b.harris_score) return a.harris_score > b.harris_score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  sel.survivors = static_cast<int>(corners.size());
  if (static_cast<int>(corners.size()) > thresholds.hard_cap) corners.resize(thresholds.hard_cap);
  sel.corners = std::move(corners);

  auto& t = sel.thresholds;
  if (sel.survivors > t.target_max) {
    t.fast_threshold = std::min(t.fast_max, t.fast_threshold + t.fast_step);
    t.harris_threshold = static_cast<int32_t>(
        std::min<int64_t>(t.harris_max, int64_t{t.harris_threshold} * t.harris_factor));
  } else if (sel.survivors < t.target_min) {
    t.fast_threshold = std::max(t.fast_min, t.fast_threshold - t.fast_step);
    t.harris_threshold = std::max(t.harris_min, t.harris_threshold / t.harris_factor);
  }
  return sel;
}

Orientation orientation(const Image8& blurred, int x, int y) {
  if (x < kPatchRadius || y < kPatchRadius || x >= blurred.width() - kPatchRadius ||
      y >= blurred.height() - kPatchRadius)
    throw DimensionError("orientation patch exceeds the image");

  int32_t m10 = 0;
  int32_t m01 = 0;
  for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
    for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
      if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
      const int32_t v = blurred(x + dx, y + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  if (m10 == 0 && m01 == 0) return {0.0, true};
  return {std::atan2(static_cast<double>(m01), static_cast<double>(m10)), false};
}

Descriptor describe(const Image8& blurred, int x, int y, double angle) {
  const int cq = quantize_q8(std::cos(angle));
  const int sq = quantize_q8(std::sin(angle));
  const int w = blurred.width();
  const int h = blurred.height();

  auto sample = [&](int px, int py) -> int {
    const int u = std::clamp(x + round_q8(px * cq - py * sq), 0, w - 1);
    const int v = std::clamp(y + round_q8(px * sq + py * cq), 0, h - 1);
    return blurred(u, v);
  };

  Descriptor d{};
  for (std::size_t k = 0; k < kBitPattern.size(); ++k) {
    const auto& p = kBitPattern[k];
    if (sample(p.x1, p.y1) < sample(p.x2, p.y2)) d[k >> 6] |= uint64_t{1} << (k & 63);
  }
  return d;
}

int hamming(const Descriptor& a, const Descriptor& b) noexcept {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] ^ b[i]);
  return n;
}

std::vector<TrackedMatch> match_hamming(std::span<const OrbFeature> prev, std::span<const OrbFeature> cur,
                                        int width, int height, int max_distance) {
  // Ties are broken by position and descriptor so the match set does not
  // depend on the order of `prev`.
  auto earlier = [](const OrbFeature& a, const OrbFeature& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.descriptor < b.descriptor;
  };

  std::vector<TrackedMatch> out;
  for (const auto& c : cur) {
    const OrbFeature* best = nullptr;
    int best_d = std::numeric_limits<int>::max();
    for (const auto& p : prev) {
      const int d = hamming(c.descriptor, p.descriptor);
      if (d < best_d || (d == best_d && earlier(p, *best))) {
        best_d = d;
        best = &p;
      }
    }
    if (best && best_d <= max_distance) {
      out.push_back({center_x(best->x, width), center_y(best->y, height), center_x(c.x, width),
                     center_y(c.y, height)});
    }
  }
  return out;
}

OrbTracker::OrbTracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.thresholds.validate(); }

std::vector<OrbFeature> OrbTracker::extract(const Image8& frame) {
  auto corners = fast_detect(frame, cfg_.thresholds.fast_threshold, true, cfg_.workers);
  corners = harris_refine(frame, corners, cfg_.workers);
  auto sel = select_features(std::move(corners), cfg_.thresholds);
  cfg_.thresholds = sel.thresholds;

  const Image8 blurred = imgproc::gaussian_blur5(frame, cfg_.workers);
  std::vector<OrbFeature> feats(sel.corners.size());
  parallel_for(static_cast<int>(feats.size()), cfg_.workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const auto& c = sel.corners[i];
      const double angle = orientation(blurred, c.x, c.y).angle;
      feats[i] = {c.x, c.y, angle, describe(blurred, c.x, c.y, angle)};
    }
  });
  return feats;
}

std::vector<TrackedMatch> OrbTracker::track(const Image8& frame) {
  auto feats = extract(frame);
  std::vector<TrackedMatch> matches;
  if (has_prev_) matches = match_hamming(prev_, feats, frame.width(), frame.height(), cfg_.max_distance);
  prev_ = std::move(feats);
  has_prev_ = true;
  return matches;
}

}  // namespace dvio::orb
