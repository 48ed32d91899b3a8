#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvio/image.hpp"

namespace dvio::px4flow {

struct FlowConfig {
  int grid_rows = 8;
  int grid_cols = 10;
  int patch_size = 8;
  int search_radius = 4;
  bool enable_halfpixel = true;
  // A vector is valid when the runner-up SAD outside the winner's 3x3
  // neighbourhood exceeds the best SAD by at least this much.
  // Negative selects patch_size^2.
  int min_sad_margin = -1;
  int workers = 1;

  int sad_margin() const noexcept { return min_sad_margin < 0 ? patch_size * patch_size : min_sad_margin; }

  // Throws ConfigError when the search window cannot fit inside the frame.
  void validate(int width, int height) const;
};

struct FlowVector {
  // Interest point, center-origin pixel coordinates.
  double x = 0.0;
  double y = 0.0;
  // Flow in half-pixel units.
  int du2 = 0;
  int dv2 = 0;
  uint32_t sad = 0;
  bool valid = false;

  double du() const noexcept { return du2 * 0.5; }
  double dv() const noexcept { return dv2 * 0.5; }
};

struct Flow2 {
  double du = 0.0;
  double dv = 0.0;
};

// Exhaustive SAD block matching of a regular grid of patches from `prev` into
// `cur`, followed by half-pixel refinement on bilinear-interpolated patches.
std::vector<FlowVector> block_flow(const Image8& prev, const Image8& cur, const FlowConfig& cfg);

// Per-axis histogram of valid flows (0.5 px bins); mean of the modal bin and
// its two neighbours.
Flow2 dominant_flow(std::span<const FlowVector> flows);

std::vector<TrackedMatch> to_matches(std::span<const FlowVector> flows);

// Stateful wrapper holding the previous frame.
class FlowTracker {
 public:
  explicit FlowTracker(FlowConfig cfg = {}) : cfg_(cfg) {}

  std::vector<FlowVector> track(const Image8& frame);
  const FlowConfig& config() const noexcept { return cfg_; }

 private:
  FlowConfig cfg_;
  Image8 prev_;
};

}  // namespace dvio::px4flow
