#pragma once

#include <filesystem>
#include <memory>

#include "ebench/image.hpp"

namespace ebench {

// Turns a file reference into decoded frames.
class VideoDecoder {
 public:
  virtual ~VideoDecoder() = default;
  virtual VideoClip decode(const std::filesystem::path& path) const = 0;
  // Whether one instance may decode from several threads at once.
  virtual bool thread_safe() const { return true; }
};

// Reads a directory of still frames (.png or .ppm), ordered by filename.
// An optional `fps` file holding a single number sets the frame rate.
class FrameDirectoryDecoder final : public VideoDecoder {
 public:
  VideoClip decode(const std::filesystem::path& path) const override;
};

// Writes frames as zero-padded PNG (or PPM) files plus an `fps` file.
enum class FrameFormat { png, ppm };
void write_frame_directory(const std::filesystem::path& dir, const VideoClip& clip,
                           FrameFormat format = FrameFormat::png);

std::unique_ptr<VideoDecoder> default_decoder();

}  // namespace ebench
