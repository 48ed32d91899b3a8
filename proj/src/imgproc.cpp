#include "dvio/imgproc.hpp"

#include "dvio/parallel.hpp"

namespace dvio::imgproc {

GradientPair sobel3(const Image8& img, int workers) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) throw DimensionError("sobel3 requires an image of at least 3x3");

  GradientPair g;
  g.ix = {w, h, std::vector<int16_t>(static_cast<std::size_t>(w) * h, 0)};
  g.iy = {w, h, std::vector<int16_t>(static_cast<std::size_t>(w) * h, 0)};

  parallel_for(h - 2, workers, [&](int begin, int end) {
    for (int y = begin + 1; y < end + 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        const int tl = img(x - 1, y - 1), tc = img(x, y - 1), tr = img(x + 1, y - 1);
        const int ml = img(x - 1, y), mr = img(x + 1, y);
        const int bl = img(x - 1, y + 1), bc = img(x, y + 1), br = img(x + 1, y + 1);
        g.ix(x, y) = static_cast<int16_t>((tr + 2 * mr + br) - (tl + 2 * ml + bl));
        g.iy(x, y) = static_cast<int16_t>((bl + 2 * bc + br) - (tl + 2 * tc + tr));
      }
    }
  });
  return g;
}

Image8 gaussian_blur5(const Image8& img, int workers) {
  const int w = img.width();
  const int h = img.height();
  if (w < 5 || h < 5) throw DimensionError("gaussian_blur5 requires an image of at least 5x5");

  Image8 out = img;
  parallel_for(h - 4, workers, [&](int begin, int end) {
    for (int y = begin + 2; y < end + 2; ++y) {
      for (int x = 2; x < w - 2; ++x) {
        // max 256 * 255 + 128 = 65408
        uint16_t acc = 128;
        for (int ky = 0; ky < 5; ++ky) {
          for (int kx = 0; kx < 5; ++kx) {
            acc = static_cast<uint16_t>(acc + kGauss5[ky][kx] * img(x + kx - 2, y + ky - 2));
          }
        }
        out(x, y) = static_cast<uint8_t>(acc >> 8);
      }
    }
  });
  return out;
}

}  // namespace dvio::imgproc
