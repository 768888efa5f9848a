#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ebench {

// 8-bit interleaved RGB image, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Frame() = default;
  Frame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width == 0 || height == 0; }

  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Frame&) const = default;
};

struct VideoClip {
  std::vector<Frame> frames;
  double fps = 30.0;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }

  bool operator==(const VideoClip&) const = default;
};

// BT.601 luma on the [0, 255] scale.
std::vector<double> luminance(const Frame& frame);

// Interleaved RGB as doubles on [0, 1].
std::vector<double> unit_rgb(const Frame& frame);

// Bilinear resize with pixel-centre alignment; output is rounded to 8 bits.
Frame resize_bilinear(const Frame& src, int width, int height);

// Area-average downsample so that max(width, height) <= long_side.
Frame downsample_to(const Frame& src, int long_side);

Frame read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Frame& frame);
Frame read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);

// Dispatches on extension (.ppm or .png).
Frame read_image(const std::filesystem::path& path);

}  // namespace ebench
