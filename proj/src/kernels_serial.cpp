#include <cmath>

#include "ebench/error.hpp"
#include "ebench/kernels.hpp"

namespace ebench::kernels {

std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(window));
  const double centre = (window - 1) / 2.0;
  double total = 0;
  for (int i = 0; i < window; ++i) {
    const double d = i - centre;
    taps[i] = std::exp(-(d * d) / (2 * sigma * sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

namespace serial {

// Direct 2-D windowed moments at every position; no separable shortcut so it
// stays an independent check on the parallel path.
SsimResult ssim(std::span<const double> a, std::span<const double> b, int width, int height,
                std::span<const std::uint8_t> mask, const SsimParams& params) {
  const int win = params.window;
  if (width < win || height < win) {
    throw ValidationError("ssim: window " + std::to_string(win) + " larger than frame " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  const auto g = gaussian_taps(win, params.sigma);
  const double c1 = params.c1(), c2 = params.c2();
  double total = 0;
  std::size_t count = 0;
  for (int y = 0; y + win <= height; ++y) {
    for (int x = 0; x + win <= width; ++x) {
      bool usable = true;
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int j = 0; j < win && usable; ++j) {
        for (int i = 0; i < win; ++i) {
          const std::size_t idx = static_cast<std::size_t>(y + j) * width + (x + i);
          if (!mask.empty() && !mask[idx]) {
            usable = false;
            break;
          }
          const double w = g[i] * g[j];
          mx += w * a[idx];
          my += w * b[idx];
          sxx += w * a[idx] * a[idx];
          syy += w * b[idx] * b[idx];
          sxy += w * a[idx] * b[idx];
        }
      }
      if (!usable) continue;
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return {count ? total / count : 0.0, count};
}

WarpedFrame warp_bilinear(const Frame& from, const FlowField& flow) {
  if (flow.width != from.width || flow.height != from.height) {
    throw ValidationError("warp_bilinear: flow field size does not match frame");
  }
  WarpedFrame out;
  out.width = from.width;
  out.height = from.height;
  out.rgb.assign(from.rgb.size(), 0.0);
  out.valid.assign(from.pixel_count(), 0);
  for (int y = 0; y < from.height; ++y) {
    for (int x = 0; x < from.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * from.width + x;
      const double sx = x + flow.dx[p];
      const double sy = y + flow.dy[p];
      if (sx < 0 || sy < 0 || sx > from.width - 1 || sy > from.height - 1) continue;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, from.width - 1);
      const int y1 = std::min(y0 + 1, from.height - 1);
      const double wx = sx - x0, wy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * from.at(x0, y0, c) + wx * from.at(x1, y0, c)) +
                         wy * ((1 - wx) * from.at(x0, y1, c) + wx * from.at(x1, y1, c));
        out.rgb[p * 3 + c] = v / 255.0;
      }
      out.valid[p] = 1;
    }
  }
  return out;
}

void gemm(const double* a, const double* b, double* c, const GemmShape& s) {
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.m; ++j) {
      double acc = s.accumulate ? c[i * s.m + j] : 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
        const double bv = s.trans_b ? b[j * s.k + p] : b[p * s.m + j];
        acc += av * bv;
      }
      c[i * s.m + j] = acc;
    }
  }
}

}  // namespace serial
}  // namespace ebench::kernels
