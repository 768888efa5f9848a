#include "ebench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "ebench/error.hpp"

namespace ebench {

std::vector<double> luminance(const Frame& frame) {
  std::vector<double> y(frame.pixel_count());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto* p = &frame.rgb[i * 3];
    y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return y;
}

std::vector<double> unit_rgb(const Frame& frame) {
  std::vector<double> out(frame.rgb.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = frame.rgb[i] / 255.0;
  return out;
}

Frame resize_bilinear(const Frame& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) {
    throw ValidationError("resize_bilinear: empty source or target size");
  }
  if (width == src.width && height == src.height) return src;
  Frame dst(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        const double bot = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        const double v = top * (1 - wy) + bot * wy;
        dst.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

Frame downsample_to(const Frame& src, int long_side) {
  const int longest = std::max(src.width, src.height);
  if (longest <= long_side) return src;
  const double scale = static_cast<double>(long_side) / longest;
  const int w = std::max(1, static_cast<int>(std::lround(src.width * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(src.height * scale)));
  Frame dst(w, h);
  for (int y = 0; y < h; ++y) {
    const int ya = y * src.height / h;
    const int yb = std::max(ya + 1, (y + 1) * src.height / h);
    for (int x = 0; x < w; ++x) {
      const int xa = x * src.width / w;
      const int xb = std::max(xa + 1, (x + 1) * src.width / w);
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int yy = ya; yy < yb; ++yy)
          for (int xx = xa; xx < xb; ++xx) acc += src.at(xx, yy, c);
        dst.at(x, y, c) =
            static_cast<std::uint8_t>(std::lround(acc / ((yb - ya) * (xb - xa))));
      }
    }
  }
  return dst;
}

namespace {

// Reads the next whitespace-delimited PPM header token, skipping comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image '" + path.string() + "'");
  if (ppm_token(in) != "P6") throw ValidationError("'" + path.string() + "' is not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw ValidationError("'" + path.string() + "': malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ValidationError("'" + path.string() + "': unsupported PPM geometry or depth");
  }
  Frame f(w, h);
  in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.rgb.size())) {
    throw ValidationError("'" + path.string() + "': truncated PPM data");
  }
  return f;
}

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
}

Frame read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ValidationError("'" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Frame f(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, f.rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError("'" + path.string() + "': " + msg);
  }
  return f;
}

void write_png(const std::filesystem::path& path, const Frame& frame) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, frame.rgb.data(), 0,
                               nullptr)) {
    throw Error("'" + path.string() + "': " + image.message);
  }
}

Frame read_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".png") return read_png(path);
  throw ValidationError("unsupported image format '" + path.string() + "'");
}

}  // namespace ebench
