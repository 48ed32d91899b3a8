#include "dvio/superpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dvio::superpoint {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'T', '1'};
constexpr std::size_t kHeaderSize = 4 + 3 * 4 + 8 + 4;

template <typename T>
void put_le(std::vector<uint8_t>& buf, T v) {
  using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, int64_t, T>>;
  U bits;
  static_assert(sizeof(U) == sizeof(T));
  std::memcpy(&bits, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const uint8_t* p) {
  using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, int64_t, T>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

int round_away(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open tensor file " + path.string());
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderSize) throw ParseError(path.string(), 0, "truncated tensor header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw ParseError(path.string(), 0, "bad tensor magic");

  Tensor t;
  for (int k = 0; k < 3; ++k) t.dims[k] = get_le<uint32_t>(buf.data() + 4 + 4 * k);
  t.scale = get_le<double>(buf.data() + 16);
  t.zero_point = get_le<int32_t>(buf.data() + 24);
  const std::size_t n = std::size_t{t.dims[0]} * t.dims[1] * t.dims[2];
  if (buf.size() - kHeaderSize != n) throw ParseError(path.string(), 0, "tensor payload size does not match dims");
  t.payload.assign(buf.begin() + kHeaderSize, buf.end());
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::vector<uint8_t> buf(std::begin(kMagic), std::end(kMagic));
  for (uint32_t d : t.dims) put_le(buf, d);
  put_le(buf, t.scale);
  put_le(buf, t.zero_point);
  buf.insert(buf.end(), t.payload.begin(), t.payload.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write tensor file " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void Output::validate() const {
  if (heat.dims[0] != kHeatChannels && heat.dims[0] != kHeatChannels + 1)
    throw DimensionError("heatmap must have 64 or 65 channels");
  if (desc.dims[0] != kDescChannels) throw DimensionError("descriptor tensor must have 256 channels");
  if (heat.dims[1] != desc.dims[1] || heat.dims[2] != desc.dims[2])
    throw DimensionError("heatmap and descriptor grids differ");
  if (heat.dims[1] == 0 || heat.dims[2] == 0) throw DimensionError("empty tensor grid");
  const auto size = [](const Tensor& t) { return std::size_t{t.dims[0]} * t.dims[1] * t.dims[2]; };
  if (heat.payload.size() != size(heat) || desc.payload.size() != size(desc))
    throw DimensionError("tensor payload size does not match dims");
}

double Output::heat_score(int c, int j, int i) const noexcept {
  return heat.scale * (static_cast<int>(heat.payload[heat.index(c, j, i)]) - heat.zero_point);
}

int Output::desc_value(int c, int j, int i) const noexcept {
  const int q = static_cast<int8_t>(desc.payload[desc.index(c, j, i)]);
  return std::clamp(q - desc.zero_point, -128, 127);
}

Output load_output(const std::filesystem::path& heat_file, const std::filesystem::path& desc_file) {
  Output out{read_tensor(heat_file), read_tensor(desc_file)};
  out.validate();
  return out;
}

std::vector<Keypoint> decode_keypoints(const Output& out, double score_threshold, double nms_radius,
                                       std::size_t max_keypoints) {
  out.validate();
  std::vector<Keypoint> cand;
  for (int c = 0; c < kHeatChannels; ++c) {
    for (int j = 0; j < out.grid_cols(); ++j) {
      for (int i = 0; i < out.grid_rows(); ++i) {
        const double s = out.heat_score(c, j, i);
        if (s >= score_threshold) cand.push_back({kCell * j + c % kCell, kCell * i + c / kCell, s});
      }
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  const double r2 = nms_radius * nms_radius;
  std::vector<Keypoint> kept;
  for (const auto& k : cand) {
    if (kept.size() >= max_keypoints) break;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Keypoint& o) {
      const double dx = k.x - o.x, dy = k.y - o.y;
      return dx * dx + dy * dy <= r2;
    });
    if (!suppressed) kept.push_back(k);
  }
  return kept;
}

std::vector<SpFeature> sample_descriptors(const Output& out, std::span<const Keypoint> keypoints) {
  out.validate();
  const int cols = out.grid_cols();
  const int rows = out.grid_rows();
  std::vector<SpFeature> feats;
  feats.reserve(keypoints.size());
  for (const auto& k : keypoints) {
    const double gx = std::clamp(k.x / double{kCell} - 0.5, 0.0, cols - 1.0);
    const double gy = std::clamp(k.y / double{kCell} - 0.5, 0.0, rows - 1.0);
    const int j0 = static_cast<int>(gx), i0 = static_cast<int>(gy);
    const int j1 = std::min(j0 + 1, cols - 1), i1 = std::min(i0 + 1, rows - 1);
    const double wx = gx - j0, wy = gy - i0;

    SpFeature f{static_cast<double>(k.x), static_cast<double>(k.y), k.score, {}};
    for (int c = 0; c < kDescChannels; ++c) {
      const double v = (1 - wy) * ((1 - wx) * out.desc_value(c, j0, i0) + wx * out.desc_value(c, j1, i0)) +
                       wy * ((1 - wx) * out.desc_value(c, j0, i1) + wx * out.desc_value(c, j1, i1));
      f.descriptor[c] = static_cast<int8_t>(std::clamp(round_away(v), -128, 127));
    }
    feats.push_back(f);
  }
  return feats;
}

double cosine_similarity(const SpDescriptor& a, const SpDescriptor& b) noexcept {
  int64_t dot = 0, na = 0, nb = 0;
  for (int c = 0; c < kDescChannels; ++c) {
    dot += int{a[c]} * int{b[c]};
    na += int{a[c]} * int{a[c]};
    nb += int{b[c]} * int{b[c]};
  }
  if (na == 0 || nb == 0) return 0.0;
  return static_cast<double>(dot) / (std::sqrt(static_cast<double>(na)) * std::sqrt(static_cast<double>(nb)));
}

std::vector<TrackedMatch> match_cosine(std::span<const SpFeature> prev, std::span<const SpFeature> cur,
                                       int width, int height, double min_similarity) {
  const std::size_t np = prev.size(), nc = cur.size();
  std::vector<double> sim(np * nc);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t p = 0; p < np; ++p) sim[c * np + p] = cosine_similarity(cur[c].descriptor, prev[p].descriptor);

  auto best_prev = [&](std::size_t c) {
    std::size_t best = np;
    for (std::size_t p = 0; p < np; ++p)
      if (best == np || sim[c * np + p] > sim[c * np + best]) best = p;
    return best;
  };
  auto best_cur = [&](std::size_t p) {
    std::size_t best = nc;
    for (std::size_t c = 0; c < nc; ++c)
      if (best == nc || sim[c * np + p] > sim[best * np + p]) best = c;
    return best;
  };

  std::vector<TrackedMatch> out;
  for (std::size_t c = 0; c < nc; ++c) {
    const std::size_t p = best_prev(c);
    if (p == np || best_cur(p) != c) continue;
    if (sim[c * np + p] < min_similarity || sim[c * np + p] <= 0.0) continue;
    out.push_back({prev[p].x - width / 2.0, prev[p].y - height / 2.0, cur[c].x - width / 2.0,
                   cur[c].y - height / 2.0});
  }
  return out;
}

std::vector<TrackedMatch> SuperPointTracker::track(const Output& out) {
  const auto kps = decode_keypoints(out, cfg_.score_threshold, cfg_.nms_radius, cfg_.max_keypoints);
  auto feats = sample_descriptors(out, kps);
  std::vector<TrackedMatch> matches;
  if (has_prev_)
    matches = match_cosine(prev_, feats, out.image_width(), out.image_height(), cfg_.min_similarity);
  prev_ = std::move(feats);
  has_prev_ = true;
  return matches;
}

}  // namespace dvio::superpoint
