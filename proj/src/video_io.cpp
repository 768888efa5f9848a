#include "ebench/video_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ebench/error.hpp"

namespace fs = std::filesystem;

namespace ebench {

VideoClip FrameDirectoryDecoder::decode(const fs::path& path) const {
  if (!fs::is_directory(path)) {
    throw BackendError("frame directory '" + path.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm" || ext == ".PNG" || ext == ".PPM") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw BackendError("no frames in '" + path.string() + "'");

  VideoClip clip;
  clip.frames.reserve(files.size());
  for (const auto& f : files) {
    clip.frames.push_back(read_image(f));
    const auto& fr = clip.frames.back();
    if (fr.width != clip.frames.front().width || fr.height != clip.frames.front().height) {
      throw BackendError("'" + f.string() + "': frame size differs from first frame");
    }
  }
  if (std::ifstream fps_in(path / "fps"); fps_in) {
    double fps = 0;
    if (fps_in >> fps && fps > 0) clip.fps = fps;
  }
  return clip;
}

void write_frame_directory(const fs::path& dir, const VideoClip& clip, FrameFormat format) {
  fs::create_directories(dir);
  for (int i = 0; i < clip.frame_count(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05d.%s", i, format == FrameFormat::png ? "png" : "ppm");
    if (format == FrameFormat::png) {
      write_png(dir / name, clip.frames[i]);
    } else {
      write_ppm(dir / name, clip.frames[i]);
    }
  }
  std::ofstream(dir / "fps") << clip.fps << '\n';
}

std::unique_ptr<VideoDecoder> default_decoder() {
  return std::make_unique<FrameDirectoryDecoder>();
}

}  // namespace ebench
