#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dvio/image.hpp"

namespace dvio::superpoint {

inline constexpr int kCell = 8;
inline constexpr int kHeatChannels = 64;
inline constexpr int kDescChannels = 256;

// Quantized 3-D tensor as stored in an SPT1 file. dims = (channels, grid
// columns, grid rows); element (c, j, i) lives at ((c * dims[1]) + j) * dims[2] + i.
struct Tensor {
  std::array<uint32_t, 3> dims{};
  double scale = 1.0;
  int32_t zero_point = 0;
  std::vector<uint8_t> payload;

  std::size_t index(int c, int j, int i) const noexcept {
    return (static_cast<std::size_t>(c) * dims[1] + j) * dims[2] + i;
  }
};

// Little-endian: "SPT1", 3 x u32 dims, f64 scale, i32 zero point, u8 payload.
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

// Network output for one frame. The heatmap holds unsigned 8-bit scores,
// the descriptor tensor signed 8-bit values. A 65th (dustbin) heatmap channel
// is accepted and ignored.
struct Output {
  Tensor heat;
  Tensor desc;

  int grid_cols() const noexcept { return static_cast<int>(heat.dims[1]); }
  int grid_rows() const noexcept { return static_cast<int>(heat.dims[2]); }
  int image_width() const noexcept { return grid_cols() * kCell; }
  int image_height() const noexcept { return grid_rows() * kCell; }

  // Throws DimensionError on unexpected channel counts or grid mismatch.
  void validate() const;
  double heat_score(int c, int j, int i) const noexcept;
  int desc_value(int c, int j, int i) const noexcept;
};

Output load_output(const std::filesystem::path& heat_file, const std::filesystem::path& desc_file);

struct Keypoint {
  int x = 0;
  int y = 0;
  double score = 0.0;
};

using SpDescriptor = std::array<int8_t, kDescChannels>;

struct SpFeature {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  SpDescriptor descriptor{};
};

// Cell (i, j), channel c maps to pixel (8j + c % 8, 8i + c / 8). Scores below
// the threshold are dropped, then greedy suppression within `nms_radius`
// pixels keeps the stronger point. Sorted by score, at most `max_keypoints`.
std::vector<Keypoint> decode_keypoints(const Output& out, double score_threshold, double nms_radius = 4.0,
                                       std::size_t max_keypoints = 512);

// Bilinear interpolation of the coarse descriptor grid at (x/8 - 0.5, y/8 - 0.5),
// clamped at the grid edges, rounded back to signed 8-bit.
std::vector<SpFeature> sample_descriptors(const Output& out, std::span<const Keypoint> keypoints);

// Cosine similarity of two integer descriptors; 0 when either has zero norm.
double cosine_similarity(const SpDescriptor& a, const SpDescriptor& b) noexcept;

// Mutual nearest neighbours under cosine similarity, kept when the
// similarity is at least `min_similarity`.
std::vector<TrackedMatch> match_cosine(std::span<const SpFeature> prev, std::span<const SpFeature> cur,
                                       int width, int height, double min_similarity = 0.75);

struct TrackerConfig {
  double score_threshold = 0.015;
  double nms_radius = 4.0;
  std::size_t max_keypoints = 512;
  double min_similarity = 0.75;
};

class SuperPointTracker {
 public:
  explicit SuperPointTracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

  std::vector<TrackedMatch> track(const Output& out);
  const TrackerConfig& config() const noexcept { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<SpFeature> prev_;
  bool has_prev_ = false;
};

}  // namespace dvio::superpoint
