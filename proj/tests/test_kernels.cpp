#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ebench/kernels.hpp"
#include "support.hpp"

using namespace ebench;
using namespace ebench::kernels;

namespace {

std::vector<double> luma_of(std::mt19937_64& rng, int w, int h) {
  return luminance(testing::random_frame(rng, w, h));
}

// C = op(A) op(B) by the index definition.
std::vector<double> gemm_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                const GemmShape& s) {
  std::vector<double> c(s.n * s.m, 0.0);
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.m; ++j) {
      double sum = 0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
        const double bv = s.trans_b ? b[j * s.k + p] : b[p * s.m + j];
        sum += av * bv;
      }
      c[i * s.m + j] = sum;
    }
  }
  return c;
}

}  // namespace

TEST_CASE("gaussian taps") {
  const auto taps = gaussian_taps(11, 1.5);
  REQUIRE(taps.size() == 11);
  double s = 0;
  for (double t : taps) s += t;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(taps[5] > taps[4]);
  CHECK(taps[0] == doctest::Approx(taps[10]));
}

TEST_CASE("ssim serial and parallel agree") {
  std::mt19937_64 rng(7);
  const SsimParams p;
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 11 + static_cast<int>(rng() % 40), h = 11 + static_cast<int>(rng() % 30);
    const auto a = luma_of(rng, w, h);
    auto b = a;
    for (auto& v : b) v = std::clamp(v + static_cast<double>(rng() % 41) - 20, 0.0, 255.0);
    const auto s = serial::ssim(a, b, w, h, {}, p);
    const auto q = parallel::ssim(a, b, w, h, {}, p);
    CHECK(s.positions == q.positions);
    CHECK(std::abs(s.mean - q.mean) < 1e-12);

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 1);
    for (int x = 0; x < w; ++x) mask[x] = 0;
    const auto sm = serial::ssim(a, b, w, h, mask, p);
    const auto qm = parallel::ssim(a, b, w, h, mask, p);
    CHECK(sm.positions == qm.positions);
    CHECK(sm.positions < s.positions);
    CHECK(std::abs(sm.mean - qm.mean) < 1e-12);
  }
}

TEST_CASE("ssim closed forms") {
  const SsimParams p;
  const std::vector<double> zero(16 * 16, 0.0), white(16 * 16, 255.0);
  const double expected = p.c1() / (255.0 * 255.0 + p.c1());
  CHECK(std::abs(serial::ssim(zero, white, 16, 16, {}, p).mean - expected) < 1e-12);
  CHECK(std::abs(parallel::ssim(zero, white, 16, 16, {}, p).mean - expected) < 1e-12);
  std::mt19937_64 rng(1);
  const auto a = luma_of(rng, 20, 20);
  CHECK(parallel::ssim(a, a, 20, 20, {}, p).mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(serial::ssim(a, a, 20, 20, {}, p).positions == 100);
}

TEST_CASE("warp serial and parallel agree") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::random_frame(rng, 13 + trial, 9 + trial);
    FlowField flow(f.width, f.height);
    std::uniform_real_distribution<float> u(-3.f, 3.f);
    for (auto& v : flow.dx) v = u(rng);
    for (auto& v : flow.dy) v = u(rng);
    const auto s = serial::warp_bilinear(f, flow);
    const auto q = parallel::warp_bilinear(f, flow);
    CHECK(s.valid == q.valid);
    REQUIRE(s.rgb.size() == q.rgb.size());
    double diff = 0;
    for (std::size_t i = 0; i < s.rgb.size(); ++i) diff = std::max(diff, std::abs(s.rgb[i] - q.rgb[i]));
    CHECK(diff < 1e-14);
  }
}

TEST_CASE("warp conventions") {
  std::mt19937_64 rng(4);
  const auto f = testing::random_frame(rng, 8, 6);
  SUBCASE("zero flow is the identity") {
    const auto w = warp_bilinear(f, FlowField(8, 6));
    const auto unit = unit_rgb(f);
    for (std::size_t i = 0; i < unit.size(); ++i) CHECK(w.rgb[i] == doctest::Approx(unit[i]));
    for (auto v : w.valid) CHECK(v == 1);
  }
  SUBCASE("integer shift samples from p + d") {
    const auto w = warp_bilinear(f, FlowField(8, 6, 1.f, 0.f));
    for (int y = 0; y < 6; ++y) {
      CHECK(w.valid[y * 8 + 7] == 0);
      for (int x = 0; x < 7; ++x) {
        CHECK(w.valid[y * 8 + x] == 1);
        CHECK(w.rgb[(y * 8 + x) * 3] == doctest::Approx(f.at(x + 1, y, 0) / 255.0));
      }
    }
  }
}

TEST_CASE("gemm serial and parallel match the index oracle") {
  std::mt19937_64 rng(11);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      for (bool acc : {false, true}) {
        const GemmShape s{5 + rng() % 20, 1 + rng() % 17, 3 + rng() % 19, ta, tb, acc};
        const auto a = testing::random_vector(rng, s.n * s.k);
        const auto b = testing::random_vector(rng, s.k * s.m);
        const auto init = testing::random_vector(rng, s.n * s.m);
        auto expect = gemm_oracle(a, b, s);
        if (acc) {
          for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += init[i];
        }
        auto c1 = init, c2 = init;
        serial::gemm(a.data(), b.data(), c1.data(), s);
        parallel::gemm(a.data(), b.data(), c2.data(), s);
        for (std::size_t i = 0; i < expect.size(); ++i) {
          CHECK(std::abs(c1[i] - expect[i]) < 1e-10);
          CHECK(std::abs(c2[i] - expect[i]) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("parallel results do not depend on thread count") {
  std::mt19937_64 rng(12);
  const auto a = luma_of(rng, 64, 48);
  const auto b = luma_of(rng, 64, 48);
  const auto ref = parallel::ssim(a, b, 64, 48, {}, {});
#ifdef _OPENMP
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    CHECK(parallel::ssim(a, b, 64, 48, {}, {}).mean == ref.mean);
  }
#endif
  CHECK(ref.positions == 54u * 38u);
}
