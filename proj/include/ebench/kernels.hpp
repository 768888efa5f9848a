#pragma once

// Data-parallel inner loops. Every kernel has a straightforward serial
// reference (kept for tests and benchmarks) and an OpenMP implementation
// that callers use by default. The parallel versions reduce per row and then
// sum rows in order, so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ebench/image.hpp"

namespace ebench {

// Per-pixel displacement: sampling position in the `from` frame for each
// pixel of the `to` frame, i.e. to(p) ~ from(p + d(p)).
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  FlowField() = default;
  FlowField(int w, int h, float fx = 0.f, float fy = 0.f)
      : width(w), height(h), dx(static_cast<std::size_t>(w) * h, fx),
        dy(static_cast<std::size_t>(w) * h, fy) {}
};

namespace kernels {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

struct SsimResult {
  double mean = 0;
  std::size_t positions = 0;  // window positions that contributed
};

// Output of warping a frame along a flow field: unit-scaled RGB plus a mask of
// pixels whose sampling position fell inside the source frame.
struct WarpedFrame {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;
  std::vector<std::uint8_t> valid;
};

// Normalized 1-D Gaussian taps of length `window`.
std::vector<double> gaussian_taps(int window, double sigma);

// Row-major GEMM: C = op(A) * op(B) (+ C when accumulate). op(A) is n x k,
// op(B) is k x m. With trans_a, A is stored k x n; with trans_b, B is stored m x k.
struct GemmShape {
  std::size_t n, k, m;
  bool trans_a = false;
  bool trans_b = false;
  bool accumulate = false;
};

namespace serial {

// Mean SSIM over all 'valid' window positions. When `mask` is non-empty only
// positions whose whole window is marked valid contribute.
SsimResult ssim(std::span<const double> a, std::span<const double> b, int width, int height,
                std::span<const std::uint8_t> mask, const SsimParams& params);

WarpedFrame warp_bilinear(const Frame& from, const FlowField& flow);

void gemm(const double* a, const double* b, double* c, const GemmShape& shape);

}  // namespace serial

namespace parallel {

SsimResult ssim(std::span<const double> a, std::span<const double> b, int width, int height,
                std::span<const std::uint8_t> mask, const SsimParams& params);

WarpedFrame warp_bilinear(const Frame& from, const FlowField& flow);

void gemm(const double* a, const double* b, double* c, const GemmShape& shape);

}  // namespace parallel

// Default dispatch.
using parallel::gemm;
using parallel::ssim;
using parallel::warp_bilinear;

}  // namespace kernels
}  // namespace ebench
