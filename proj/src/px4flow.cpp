#include "dvio/px4flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include "dvio/parallel.hpp"

namespace dvio::px4flow {
namespace {

std::vector<int> grid_positions(int extent, int count, int patch, int margin) {
  std::vector<int> pos(count);
  const int span = extent - 2 * margin - patch;
  for (int i = 0; i < count; ++i)
    pos[i] = count == 1 ? margin + span / 2 : margin + (i * span + (count - 1) / 2) / (count - 1);
  return pos;
}

uint32_t sad_integer(const Image8& prev, const Image8& cur, int x0, int y0, int dx, int dy, int n) {
  uint32_t s = 0;
  for (int j = 0; j < n; ++j) {
    const auto a = prev.row(y0 + j).subspan(x0, n);
    const auto b = cur.row(y0 + j + dy).subspan(x0 + dx, n);
    for (int i = 0; i < n; ++i) s += static_cast<uint32_t>(std::abs(int{a[i]} - int{b[i]}));
  }
  return s;
}

// SAD against `cur` sampled at (x + hx/2, y + hy/2) with hx, hy in {-1, 0, 1}.
uint32_t sad_half(const Image8& prev, const Image8& cur, int x0, int y0, int dx, int dy, int hx, int hy, int n) {
  uint32_t s = 0;
  for (int j = 0; j < n; ++j) {
    const int y = y0 + j + dy;
    for (int i = 0; i < n; ++i) {
      const int x = x0 + i + dx;
      int v;
      if (hx != 0 && hy != 0) {
        v = (cur(x, y) + cur(x + hx, y) + cur(x, y + hy) + cur(x + hx, y + hy) + 2) >> 2;
      } else if (hx != 0) {
        v = (cur(x, y) + cur(x + hx, y) + 1) >> 1;
      } else {
        v = (cur(x, y) + cur(x, y + hy) + 1) >> 1;
      }
      s += static_cast<uint32_t>(std::abs(int{prev(x0 + i, y0 + j)} - v));
    }
  }
  return s;
}

}  // namespace

void FlowConfig::validate(int width, int height) const {
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("flow grid needs at least one row and column");
  if (patch_size < 2) throw ConfigError("flow patch_size must be at least 2");
  if (search_radius < 1) throw ConfigError("flow search_radius must be at least 1");
  const int need = patch_size + 2 * (search_radius + 1);
  if (need > width || need > height)
    throw ConfigError("flow patch plus search window does not fit inside the frame");
}

std::vector<FlowVector> block_flow(const Image8& prev, const Image8& cur, const FlowConfig& cfg) {
  if (prev.width() != cur.width() || prev.height() != cur.height())
    throw DimensionError("block_flow frames differ in size");
  cfg.validate(prev.width(), prev.height());

  const int n = cfg.patch_size;
  const int r = cfg.search_radius;
  const auto xs = grid_positions(prev.width(), cfg.grid_cols, n, r + 1);
  const auto ys = grid_positions(prev.height(), cfg.grid_rows, n, r + 1);
  const int side = 2 * r + 1;
  const uint32_t margin = static_cast<uint32_t>(cfg.sad_margin());

  std::vector<FlowVector> out(static_cast<std::size_t>(cfg.grid_rows) * cfg.grid_cols);
  parallel_for(static_cast<int>(out.size()), cfg.workers, [&](int begin, int end) {
    std::vector<uint32_t> sad(static_cast<std::size_t>(side) * side);
    for (int k = begin; k < end; ++k) {
      const int x0 = xs[k % cfg.grid_cols];
      const int y0 = ys[k / cfg.grid_cols];

      int best_dx = 0, best_dy = 0;
      uint32_t best = std::numeric_limits<uint32_t>::max();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const uint32_t s = sad_integer(prev, cur, x0, y0, dx, dy, n);
          sad[(dy + r) * side + (dx + r)] = s;
          const bool closer = dx * dx + dy * dy < best_dx * best_dx + best_dy * best_dy;
          if (s < best || (s == best && closer)) {
            best = s;
            best_dx = dx;
            best_dy = dy;
          }
        }
      }

      uint32_t runner_up = std::numeric_limits<uint32_t>::max();
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (std::abs(dx - best_dx) > 1 || std::abs(dy - best_dy) > 1)
            runner_up = std::min(runner_up, sad[(dy + r) * side + (dx + r)]);

      FlowVector& f = out[k];
      f.x = x0 + (n - 1) / 2.0 - prev.width() / 2.0;
      f.y = y0 + (n - 1) / 2.0 - prev.height() / 2.0;
      f.du2 = 2 * best_dx;
      f.dv2 = 2 * best_dy;
      f.sad = best;
      f.valid = runner_up == std::numeric_limits<uint32_t>::max() || runner_up - best >= margin;

      if (cfg.enable_halfpixel) {
        int hx_best = 0, hy_best = 0;
        for (int hy = -1; hy <= 1; ++hy) {
          for (int hx = -1; hx <= 1; ++hx) {
            if (hx == 0 && hy == 0) continue;
            const uint32_t s = sad_half(prev, cur, x0, y0, best_dx, best_dy, hx, hy, n);
            if (s < f.sad) {
              f.sad = s;
              hx_best = hx;
              hy_best = hy;
            }
          }
        }
        f.du2 += hx_best;
        f.dv2 += hy_best;
      }
    }
  });
  return out;
}

Flow2 dominant_flow(std::span<const FlowVector> flows) {
  std::map<int, int> hist_u, hist_v;
  for (const auto& f : flows) {
    if (!f.valid) continue;
    ++hist_u[f.du2];
    ++hist_v[f.dv2];
  }
  if (hist_u.empty()) return {};

  auto axis = [](const std::map<int, int>& hist) {
    auto mode = hist.begin();
    for (auto it = hist.begin(); it != hist.end(); ++it) {
      const bool more = it->second > mode->second;
      const bool tie_smaller = it->second == mode->second && std::abs(it->first) < std::abs(mode->first);
      if (more || tie_smaller) mode = it;
    }
    long sum = 0;
    int count = 0;
    for (int b = mode->first - 1; b <= mode->first + 1; ++b) {
      if (auto it = hist.find(b); it != hist.end()) {
        sum += static_cast<long>(b) * it->second;
        count += it->second;
      }
    }
    return 0.5 * static_cast<double>(sum) / count;
  };
  return {axis(hist_u), axis(hist_v)};
}

std::vector<TrackedMatch> to_matches(std::span<const FlowVector> flows) {
  std::vector<TrackedMatch> out;
  out.reserve(flows.size());
  for (const auto& f : flows)
    if (f.valid) out.push_back({f.x, f.y, f.x + f.du(), f.y + f.dv()});
  return out;
}

std::vector<FlowVector> FlowTracker::track(const Image8& frame) {
  std::vector<FlowVector> flows;
  if (!prev_.empty()) flows = block_flow(prev_, frame, cfg_);
  prev_ = frame;
  return flows;
}

}  // namespace dvio::px4flow
