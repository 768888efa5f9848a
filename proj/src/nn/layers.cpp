#include "ebench/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ebench/backends.hpp"
#include "ebench/error.hpp"

namespace ebench::nn {

Tensor ParameterRegistry::add(const std::string& name, const std::string& group, Tensor t) {
  for (const auto& p : params_) {
    if (p.name == name) throw Error("duplicate parameter name: " + name);
  }
  t.set_requires_grad(true);
  params_.push_back({name, group, t});
  return t;
}

const Parameter& ParameterRegistry::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw NotFoundError("no parameter named " + name);
}

std::vector<std::string> ParameterRegistry::groups() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (std::find(out.begin(), out.end(), p.group) == out.end()) out.push_back(p.group);
  }
  return out;
}

void ParameterRegistry::set_trainable(const std::string& group, bool on) {
  for (auto& p : params_) {
    if (p.group == group) p.tensor.set_requires_grad(on);
  }
}

void ParameterRegistry::freeze_all() {
  for (auto& p : params_) p.tensor.set_requires_grad(false);
}

bool ParameterRegistry::trainable(const std::string& group) const {
  for (const auto& p : params_) {
    if (p.group == group && p.tensor.requires_grad()) return true;
  }
  return false;
}

void ParameterRegistry::zero_grad() {
  for (auto& p : params_) p.tensor.node()->grad.clear();
}

std::uint64_t ParameterRegistry::checksum(const std::string& group) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    if (p.group != group) continue;
    const auto v = p.tensor.data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::size_t ParameterRegistry::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor Init::normal(const std::string& name, Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(nn::numel(shape));
  for (auto& x : v) x = dist(rng_);
  return registry_.add(prefix_ + "." + name, group_, Tensor::from(std::move(shape), std::move(v)));
}

Tensor Init::constant(const std::string& name, Shape shape, double value) {
  std::vector<double> v(nn::numel(shape), value);
  return registry_.add(prefix_ + "." + name, group_, Tensor::from(std::move(shape), std::move(v)));
}

Init Init::child(const std::string& name) const {
  // Children draw from their own stream so adding a layer does not shift
  // the initialization of its siblings.
  std::mt19937_64 rng(rng_() ^ fnv1a(name));
  return Init(registry_, prefix_ + "." + name, group_, rng);
}

Init Init::with_group(const std::string& group) const {
  return Init(registry_, prefix_, group, rng_);
}

Linear::Linear(Init init, int in, int out, bool zero) {
  w_ = zero ? init.constant("w", {in, out}, 0.0)
            : init.normal("w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
  b_ = init.constant("b", {out}, 0.0);
}

LayerNorm::LayerNorm(Init init, int width) {
  gamma_ = init.constant("gamma", {width}, 1.0);
  beta_ = init.constant("beta", {width}, 0.0);
}

MultiHeadAttention::MultiHeadAttention(Init init, int width, int heads, bool zero_init_output)
    : heads_(heads) {
  if (heads <= 0 || width % heads != 0) {
    throw ValidationError("attention width " + std::to_string(width) +
                          " is not divisible by heads " + std::to_string(heads));
  }
  q_ = Linear(init.child("q"), width, width);
  k_ = Linear(init.child("k"), width, width);
  v_ = Linear(init.child("v"), width, width);
  o_ = Linear(init.child("o"), width, width, zero_init_output);
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& context) const {
  const Tensor q = q_(queries);
  const Tensor k = k_(context);
  const Tensor v = v_(context);
  const int width = q.cols();
  const int hd = width / heads_;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> outs;
  outs.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    const Tensor qh = slice_cols(q, h * hd, hd);
    const Tensor kh = slice_cols(k, h * hd, hd);
    const Tensor vh = slice_cols(v, h * hd, hd);
    const Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), inv));
    outs.push_back(matmul(attn, vh));
  }
  return o_(heads_ == 1 ? outs.front() : concat_cols(outs));
}

FeedForward::FeedForward(Init init, int in, int hidden, int out)
    : fc1_(init.child("fc1"), in, hidden), fc2_(init.child("fc2"), hidden, out) {}

Conv2d::Conv2d(Init init, int in_channels, int out_channels, int kernel, int stride, int padding)
    : kernel_(kernel), stride_(stride), padding_(padding) {
  const int fan_in = in_channels * kernel * kernel;
  w_ = init.normal("w", {out_channels, fan_in}, std::sqrt(2.0 / fan_in));
  b_ = init.constant("b", {out_channels}, 0.0);
}

ConvStack::ConvStack(Init init, int channels, int out)
    : c1_(init.child("conv1"), 3, channels, 3, 1, 1),
      c2_(init.child("conv2"), channels, channels, 3, 2, 1),
      proj_(init.child("proj"), channels, out) {}

Tensor ConvStack::operator()(const Tensor& frame) const {
  return proj_(global_avg_pool(gelu(c2_(gelu(c1_(frame))))));
}

Tensor ConvStack::frames(const std::vector<Tensor>& frames) const {
  std::vector<Tensor> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back((*this)(f));
  return concat_rows(rows);
}

Tensor frame_tensor(const Frame& frame) {
  const std::size_t hw = static_cast<std::size_t>(frame.width) * frame.height;
  std::vector<double> v(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) {
      v[c * hw + p] = (frame.rgb[p * 3 + c] / 255.0 - 0.5) / 0.25;
    }
  }
  return Tensor::from({3, frame.height, frame.width}, std::move(v));
}

}  // namespace ebench::nn
