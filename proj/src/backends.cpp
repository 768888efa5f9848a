#include "ebench/backends.hpp"

#include <cmath>
#include <random>

#include "ebench/error.hpp"

namespace ebench {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) { return fnv1a(s.data(), s.size(), h); }

Embedding normalized(Embedding v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0) throw BackendError("cannot normalize a zero vector");
  for (double& x : v) x /= n;
  return v;
}

HashEmbeddingBackend::HashEmbeddingBackend(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim == 0) throw ValidationError("HashEmbeddingBackend: dim must be positive");
}

Embedding HashEmbeddingBackend::from_seed(std::uint64_t h) const {
  std::mt19937_64 rng(h ^ seed_);
  std::normal_distribution<double> nd(0.0, 1.0);
  Embedding v(dim_);
  for (auto& x : v) x = nd(rng);
  return normalized(std::move(v));
}

Embedding HashEmbeddingBackend::embed_image(const Frame& frame) const {
  std::uint64_t h = fnv1a(frame.rgb.data(), frame.rgb.size());
  const int dims[2] = {frame.width, frame.height};
  h = fnv1a(dims, sizeof dims, h);
  return from_seed(h);
}

Embedding HashEmbeddingBackend::embed_text(std::string_view text) const {
  return from_seed(fnv1a(text, fnv1a("text:")));
}

double PixelDistanceBackend::distance(const Frame& a, const Frame& b) const {
  if (a.width != b.width || a.height != b.height) {
    throw BackendError("pixel-rms: frame sizes differ");
  }
  double acc = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = (static_cast<double>(a.rgb[i]) - b.rgb[i]) / 255.0;
    acc += d * d;
  }
  return a.rgb.empty() ? 0.0 : std::sqrt(acc / a.rgb.size());
}

FlowField ZeroFlowBackend::flow(const Frame& from, const Frame&) const {
  return FlowField(from.width, from.height);
}

FlowField ConstantFlowBackend::flow(const Frame& from, const Frame&) const {
  return FlowField(from.width, from.height, dx_, dy_);
}

}  // namespace ebench
