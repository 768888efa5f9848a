#include <omp.h>

#include <cmath>

#include "ebench/error.hpp"
#include "ebench/kernels.hpp"

namespace ebench::kernels::parallel {

namespace {

constexpr std::size_t kMinParallelWork = 1 << 15;

// Separable 'valid' filtering of one plane: out is (w-win+1) x (h-win+1).
void filter_valid(const std::vector<double>& in, int w, int h, const std::vector<double>& taps,
                  std::vector<double>& tmp, std::vector<double>& out) {
  const int win = static_cast<int>(taps.size());
  const int ow = w - win + 1, oh = h - win + 1;
  tmp.assign(static_cast<std::size_t>(ow) * h, 0.0);
  out.assign(static_cast<std::size_t>(ow) * oh, 0.0);
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(w) * h > kMinParallelWork)
  for (int y = 0; y < h; ++y) {
    const double* row = &in[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < win; ++i) acc += taps[i] * row[x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(w) * h > kMinParallelWork)
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int j = 0; j < win; ++j) acc += taps[j] * tmp[static_cast<std::size_t>(y + j) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
}

}  // namespace

SsimResult ssim(std::span<const double> a, std::span<const double> b, int width, int height,
                std::span<const std::uint8_t> mask, const SsimParams& params) {
  const int win = params.window;
  if (width < win || height < win) {
    throw ValidationError("ssim: window " + std::to_string(win) + " larger than frame " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  const auto taps = gaussian_taps(win, params.sigma);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  std::vector<double> tmp, mu_a, mu_b, e_aa, e_bb, e_ab;
  filter_valid(xa, width, height, taps, tmp, mu_a);
  filter_valid(xb, width, height, taps, tmp, mu_b);
  filter_valid(aa, width, height, taps, tmp, e_aa);
  filter_valid(bb, width, height, taps, tmp, e_bb);
  filter_valid(ab, width, height, taps, tmp, e_ab);

  // Window validity via a box count of the mask.
  std::vector<double> coverage;
  if (!mask.empty()) {
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = mask[i] ? 1.0 : 0.0;
    const std::vector<double> box(static_cast<std::size_t>(win), 1.0);
    filter_valid(m, width, height, box, tmp, coverage);
  }

  const int ow = width - win + 1, oh = height - win + 1;
  const double c1 = params.c1(), c2 = params.c2();
  const double full = static_cast<double>(win) * win;
  std::vector<double> row_sum(static_cast<std::size_t>(oh), 0.0);
  std::vector<std::size_t> row_count(static_cast<std::size_t>(oh), 0);
#pragma omp parallel for schedule(static) if (n > kMinParallelWork)
  for (int y = 0; y < oh; ++y) {
    double s = 0;
    std::size_t cnt = 0;
    for (int x = 0; x < ow; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * ow + x;
      if (!coverage.empty() && coverage[i] < full - 0.5) continue;
      const double mx = mu_a[i], my = mu_b[i];
      const double vx = e_aa[i] - mx * mx, vy = e_bb[i] - my * my, cxy = e_ab[i] - mx * my;
      s += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++cnt;
    }
    row_sum[y] = s;
    row_count[y] = cnt;
  }
  double total = 0;
  std::size_t count = 0;
  for (int y = 0; y < oh; ++y) {
    total += row_sum[y];
    count += row_count[y];
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
  const int w = from.width, h = from.height;
#pragma omp parallel for schedule(static) if (from.pixel_count() > kMinParallelWork)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const double sx = x + flow.dx[p];
      const double sy = y + flow.dy[p];
      if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double wx = sx - x0, wy = sy - y0;
      const double w00 = (1 - wx) * (1 - wy), w10 = wx * (1 - wy);
      const double w01 = (1 - wx) * wy, w11 = wx * wy;
      const std::uint8_t* r00 = &from.rgb[(static_cast<std::size_t>(y0) * w + x0) * 3];
      const std::uint8_t* r10 = &from.rgb[(static_cast<std::size_t>(y0) * w + x1) * 3];
      const std::uint8_t* r01 = &from.rgb[(static_cast<std::size_t>(y1) * w + x0) * 3];
      const std::uint8_t* r11 = &from.rgb[(static_cast<std::size_t>(y1) * w + x1) * 3];
      for (int c = 0; c < 3; ++c) {
        out.rgb[p * 3 + c] =
            (w00 * r00[c] + w10 * r10[c] + w01 * r01[c] + w11 * r11[c]) / 255.0;
      }
      out.valid[p] = 1;
    }
  }
  return out;
}

void gemm(const double* a, const double* b, double* c, const GemmShape& s) {
  const bool wide = s.n * s.k * s.m > kMinParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::size_t i = 0; i < s.n; ++i) {
    double* crow = c + i * s.m;
    if (!s.accumulate)
      for (std::size_t j = 0; j < s.m; ++j) crow[j] = 0.0;
    if (s.trans_b) {
      for (std::size_t j = 0; j < s.m; ++j) {
        const double* brow = b + j * s.k;
        double acc = crow[j];
        for (std::size_t p = 0; p < s.k; ++p) {
          const double av = s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
          acc += av * brow[p];
        }
        crow[j] = acc;
      }
    } else {
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
        const double* brow = b + p * s.m;
        for (std::size_t j = 0; j < s.m; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace ebench::kernels::parallel
