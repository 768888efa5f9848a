#include "ebench/qa_encoders.hpp"

#include <cctype>

#include "ebench/backends.hpp"
#include "ebench/error.hpp"

namespace ebench::qa {

using nn::Tensor;

std::vector<int> tokenize(std::string_view prompt, int vocab, int max_tokens) {
  if (prompt.empty()) throw ValidationError("prompt must be non-empty");
  std::vector<int> ids{kClsToken};
  std::string word;
  auto flush = [&] {
    if (!word.empty() && static_cast<int>(ids.size()) < max_tokens) {
      ids.push_back(1 + static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(vocab - 1)));
    }
    word.clear();
  };
  for (char ch : prompt) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return ids;
}

TemporalAdapter::TemporalAdapter(nn::Init init, int width, const AdapterConfig& config)
    : max_frames_(config.max_frames) {
  positions_ = init.normal("positions", {config.max_frames, width}, 0.02);
  for (int l = 0; l < config.layers; ++l) {
    auto block = init.child("block" + std::to_string(l));
    blocks_.push_back({nn::LayerNorm(block.child("norm"), width),
                       nn::MultiHeadAttention(block.child("attn"), width, config.heads,
                                              config.zero_init_output)});
  }
}

Tensor TemporalAdapter::operator()(const Tensor& e_bv) const {
  const int frames = e_bv.rows();
  if (frames > max_frames_) {
    throw ValidationError("clip has " + std::to_string(frames) +
                          " frames but the temporal adapter holds " +
                          std::to_string(max_frames_) + " positions");
  }
  const Tensor pos = nn::slice_rows(positions_, 0, frames);
  Tensor x = e_bv;
  for (const auto& b : blocks_) {
    x = nn::add(x, b.attn(nn::add(b.norm(x), pos)));
  }
  return x;
}

TextTransformer::TextTransformer(nn::Init init, const ModelConfig& config, bool cross_attention)
    : cross_(cross_attention) {
  const int d = config.width;
  tokens_ = init.normal("tokens", {config.vocab, d}, 0.5);
  positions_ = init.normal("positions", {config.max_tokens, d}, 0.02);
  n1_ = nn::LayerNorm(init.child("norm1"), d);
  self_attn_ = nn::MultiHeadAttention(init.child("self_attn"), d, config.heads);
  if (cross_) {
    n2_ = nn::LayerNorm(init.child("norm2"), d);
    cross_attn_ = nn::MultiHeadAttention(init.child("cross_attn"), d, config.heads);
  }
  n3_ = nn::LayerNorm(init.child("norm3"), d);
  ffn_ = nn::FeedForward(init.child("ffn"), d, 2 * d, d);
  out_norm_ = nn::LayerNorm(init.child("out_norm"), d);
}

Tensor TextTransformer::operator()(const std::vector<int>& ids, const Tensor* context) const {
  if (cross_ && context == nullptr) throw Error("text encoder: cross-attention needs a context");
  const int n = static_cast<int>(ids.size());
  Tensor x = nn::add(nn::embedding(tokens_, ids), nn::slice_rows(positions_, 0, n));
  x = nn::add(x, self_attn_(n1_(x)));
  if (cross_) x = nn::add(x, cross_attn_(n2_(x), *context));
  x = nn::add(x, ffn_(n3_(x)));
  return out_norm_(x);
}

SpatiotemporalEncoder::SpatiotemporalEncoder(nn::Init init, const ModelConfig& config,
                                             Temporal kind)
    : kind_(kind), patch_(config.patch), max_frames_(config.adapter.max_frames) {
  if (kind == Temporal::none) throw Error("spatiotemporal encoder kind 'none' has no network");
  const int d = config.width;
  const int in_channels = kind == Temporal::mvd ? 6 : 3;
  embed_ = nn::Conv2d(init.child("embed"), in_channels, d, patch_, patch_, 0);
  if (kind == Temporal::uniformer) local_ = nn::Conv2d(init.child("local"), d, d, 3, 1, 1);
  frame_positions_ = init.normal("frame_positions", {max_frames_, d}, 0.02);
  n1_ = nn::LayerNorm(init.child("norm1"), d);
  attn_ = nn::MultiHeadAttention(init.child("attn"), d, config.heads);
  n2_ = nn::LayerNorm(init.child("norm2"), d);
  ffn_ = nn::FeedForward(init.child("ffn"), d, 2 * d, d);
}

Tensor SpatiotemporalEncoder::tokens_of(const Tensor& frame, const nn::Conv2d& embed) const {
  if (frame.dim(1) < patch_ || frame.dim(2) < patch_) {
    throw ValidationError("frame smaller than the " + std::to_string(patch_) + "px patch");
  }
  Tensor grid = embed(frame);  // [d,h,w]
  if (kind_ == Temporal::uniformer) grid = nn::add(grid, local_(nn::gelu(grid)));
  const int d = grid.dim(0);
  const int hw = grid.dim(1) * grid.dim(2);
  return nn::transpose(nn::reshape(grid, {d, hw}));  // [hw,d]
}

Tensor SpatiotemporalEncoder::global_block(const Tensor& x) const {
  Tensor y = nn::add(x, attn_(n1_(x)));
  return nn::add(y, ffn_(n2_(y)));
}

Tensor SpatiotemporalEncoder::operator()(const std::vector<Tensor>& frames) const {
  if (frames.empty()) throw ValidationError("spatiotemporal encoder: empty clip");
  if (static_cast<int>(frames.size()) > max_frames_) {
    throw ValidationError("spatiotemporal encoder: too many frames");
  }
  std::vector<Tensor> per_step;
  if (kind_ == Temporal::mvd) {
    // Tubelets of two consecutive frames stacked on the channel axis.
    const int h = frames[0].dim(1), w = frames[0].dim(2);
    for (std::size_t t = 0; t < frames.size(); t += 2) {
      const Tensor& a = frames[t];
      const Tensor& b = frames[std::min(t + 1, frames.size() - 1)];
      const Tensor stacked = nn::reshape(
          nn::concat_rows({nn::reshape(a, {3, h * w}), nn::reshape(b, {3, h * w})}), {6, h, w});
      per_step.push_back(tokens_of(stacked, embed_));
    }
  } else {
    for (const auto& f : frames) per_step.push_back(tokens_of(f, embed_));
  }

  // Add a learned per-step embedding to every token of that step.
  const int per = per_step.front().rows();
  std::vector<int> step_ids;
  for (std::size_t t = 0; t < per_step.size(); ++t) step_ids.insert(step_ids.end(), per, static_cast<int>(t));
  Tensor x = nn::add(nn::concat_rows(per_step), nn::gather_rows(frame_positions_, step_ids));

  if (kind_ != Temporal::vswin) return global_block(x);

  // Shifted-window-free variant: attention inside spatial windows spanning
  // all steps, then a shared feed-forward.
  const int gh = frames[0].dim(1) / patch_, gw = frames[0].dim(2) / patch_;
  const int steps = static_cast<int>(per_step.size());
  std::vector<Tensor> windows;
  for (int wy = 0; wy < gh; wy += window_) {
    for (int wx = 0; wx < gw; wx += window_) {
      std::vector<int> rows;
      for (int t = 0; t < steps; ++t)
        for (int y = wy; y < std::min(wy + window_, gh); ++y)
          for (int xx = wx; xx < std::min(wx + window_, gw); ++xx) rows.push_back(t * per + y * gw + xx);
      const Tensor xw = nn::gather_rows(x, rows);
      windows.push_back(nn::add(xw, attn_(n1_(xw))));
    }
  }
  const Tensor y = nn::concat_rows(windows);
  return nn::add(y, ffn_(n2_(y)));
}

}  // namespace ebench::qa
