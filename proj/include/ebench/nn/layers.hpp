#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ebench/image.hpp"
#include "ebench/nn/ops.hpp"

namespace ebench::nn {

struct Parameter {
  std::string name;
  std::string group;
  Tensor tensor;
};

// Owns every learnable tensor of a model, tagged with a group name used for
// stage-wise freezing and checksums.
class ParameterRegistry {
 public:
  Tensor add(const std::string& name, const std::string& group, Tensor t);

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  const Parameter& find(const std::string& name) const;
  std::vector<std::string> groups() const;

  void set_trainable(const std::string& group, bool on);
  void freeze_all();
  bool trainable(const std::string& group) const;
  void zero_grad();

  // FNV-1a over the raw bytes of every parameter in `group`.
  std::uint64_t checksum(const std::string& group) const;
  std::size_t parameter_count() const;

 private:
  std::vector<Parameter> params_;
};

// Builds parameters with a fixed prefix/group from a seeded generator.
class Init {
 public:
  Init(ParameterRegistry& registry, std::string prefix, std::string group, std::uint64_t seed)
      : registry_(registry), prefix_(std::move(prefix)), group_(std::move(group)), rng_(seed) {}

  Tensor normal(const std::string& name, Shape shape, double stddev);
  Tensor constant(const std::string& name, Shape shape, double value);
  Init child(const std::string& name) const;
  Init with_group(const std::string& group) const;

  const std::string& group() const { return group_; }

 private:
  Init(ParameterRegistry& registry, std::string prefix, std::string group, std::mt19937_64 rng)
      : registry_(registry), prefix_(std::move(prefix)), group_(std::move(group)), rng_(rng) {}

  ParameterRegistry& registry_;
  std::string prefix_;
  std::string group_;
  mutable std::mt19937_64 rng_;
};

class Linear {
 public:
  Linear() = default;
  Linear(Init init, int in, int out, bool zero = false);
  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, w_), b_); }
  int in() const { return w_.rows(); }
  int out() const { return w_.cols(); }

 private:
  Tensor w_, b_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(Init init, int width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma_, beta_); }

 private:
  Tensor gamma_, beta_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(Init init, int width, int heads, bool zero_init_output = false);
  // queries [n,d] attend over keys/values [m,d]; returns [n,d].
  Tensor operator()(const Tensor& queries, const Tensor& context) const;
  Tensor operator()(const Tensor& x) const { return (*this)(x, x); }

 private:
  int heads_ = 1;
  Linear q_, k_, v_, o_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(Init init, int in, int hidden, int out);
  Tensor operator()(const Tensor& x) const { return fc2_(gelu(fc1_(x))); }

 private:
  Linear fc1_, fc2_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Init init, int in_channels, int out_channels, int kernel, int stride, int padding);
  Tensor operator()(const Tensor& x) const {
    return conv2d(x, w_, b_, kernel_, stride_, padding_);
  }

 private:
  Tensor w_, b_;
  int kernel_ = 1, stride_ = 1, padding_ = 0;
};

// Two 3x3 conv layers (the second strided) followed by global average
// pooling and a projection: [3,H,W] -> [1,out].
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(Init init, int channels, int out);
  Tensor operator()(const Tensor& frame) const;
  // Applies the stack to every frame: [T, out].
  Tensor frames(const std::vector<Tensor>& frames) const;

 private:
  Conv2d c1_, c2_;
  Linear proj_;
};

// [3,H,W] tensor with per-channel normalization of unit RGB.
Tensor frame_tensor(const Frame& frame);

}  // namespace ebench::nn
