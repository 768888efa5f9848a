#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ebench/image.hpp"
#include "ebench/kernels.hpp"

namespace ebench {

using Embedding = std::vector<double>;

// Joint image/text embedding space (CLIP-style). Outputs are unit-norm.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed_image(const Frame& frame) const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;
  virtual bool thread_safe() const { return true; }
  virtual std::string name() const = 0;
};

// Perceptual distance between two frames (LPIPS-style). distance(x, x) == 0
// and distance is symmetric.
class PerceptualDistanceBackend {
 public:
  virtual ~PerceptualDistanceBackend() = default;
  virtual double distance(const Frame& a, const Frame& b) const = 0;
  virtual bool thread_safe() const { return true; }
  virtual std::string name() const = 0;
};

// Dense optical flow. See FlowField for the displacement convention.
class FlowBackend {
 public:
  virtual ~FlowBackend() = default;
  virtual FlowField flow(const Frame& from, const Frame& to) const = 0;
  virtual bool thread_safe() const { return true; }
  virtual std::string name() const = 0;
};

// Deterministic stand-in: hash-seeded Gaussian vectors, normalized.
class HashEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashEmbeddingBackend(std::size_t dim = 64, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  Embedding embed_image(const Frame& frame) const override;
  Embedding embed_text(std::string_view text) const override;
  std::string name() const override { return "hash"; }

 private:
  Embedding from_seed(std::uint64_t h) const;
  std::size_t dim_;
  std::uint64_t seed_;
};

// Root-mean-square difference of unit-scaled RGB.
class PixelDistanceBackend final : public PerceptualDistanceBackend {
 public:
  double distance(const Frame& a, const Frame& b) const override;
  std::string name() const override { return "pixel-rms"; }
};

class ZeroFlowBackend final : public FlowBackend {
 public:
  FlowField flow(const Frame& from, const Frame& to) const override;
  std::string name() const override { return "zero"; }
};

// Same displacement at every pixel; useful for synthetic translations.
class ConstantFlowBackend final : public FlowBackend {
 public:
  ConstantFlowBackend(float dx, float dy) : dx_(dx), dy_(dy) {}
  FlowField flow(const Frame& from, const Frame& to) const override;
  std::string name() const override { return "constant"; }

 private:
  float dx_, dy_;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull);

Embedding normalized(Embedding v);

}  // namespace ebench
