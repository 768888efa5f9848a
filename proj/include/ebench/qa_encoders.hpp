#pragma once

// Toy-scale encoders used by the assessor's branches.

#include <string_view>
#include <vector>

#include "ebench/nn/layers.hpp"
#include "ebench/qa_config.hpp"

namespace ebench::qa {

inline constexpr int kClsToken = 0;

// Lower-cased alphanumeric words hashed into [1, vocab); id 0 is the
// sequence-start token. Truncates to max_tokens including the start token.
std::vector<int> tokenize(std::string_view prompt, int vocab, int max_tokens);

// Residual self-attention blocks over the frame axis. Learned positions are
// added to the attention input only, so with a zero-initialized output
// projection the adapter starts as the identity.
class TemporalAdapter {
 public:
  TemporalAdapter() = default;
  TemporalAdapter(nn::Init init, int width, const AdapterConfig& config);
  nn::Tensor operator()(const nn::Tensor& e_bv) const;  // [T,d] -> [T,d]
  int max_frames() const { return max_frames_; }

 private:
  struct Block {
    nn::LayerNorm norm;
    nn::MultiHeadAttention attn;
  };
  std::vector<Block> blocks_;
  nn::Tensor positions_;
  int max_frames_ = 0;
};

// Transformer text encoder. When built with cross-attention (BLIP-style)
// each token also attends over a visual context sequence.
class TextTransformer {
 public:
  TextTransformer() = default;
  TextTransformer(nn::Init init, const ModelConfig& config, bool cross_attention);
  // Returns the token states [L,d]; row 0 is the sequence-start state.
  nn::Tensor operator()(const std::vector<int>& ids, const nn::Tensor* context) const;
  bool has_cross_attention() const { return cross_; }

 private:
  nn::Tensor tokens_, positions_;
  nn::LayerNorm n1_, n2_, n3_, out_norm_;
  nn::MultiHeadAttention self_attn_, cross_attn_;
  nn::FeedForward ffn_;
  bool cross_ = false;
};

// Video encoder F / F* of the relevance branch. Produces a token sequence
// [N,d]; callers mean-pool it for the clip feature.
class SpatiotemporalEncoder {
 public:
  SpatiotemporalEncoder() = default;
  SpatiotemporalEncoder(nn::Init init, const ModelConfig& config, Temporal kind);
  nn::Tensor operator()(const std::vector<nn::Tensor>& frames) const;
  Temporal kind() const { return kind_; }

 private:
  nn::Tensor tokens_of(const nn::Tensor& frame, const nn::Conv2d& embed) const;
  nn::Tensor global_block(const nn::Tensor& x) const;

  Temporal kind_ = Temporal::none;
  int patch_ = 4;
  int window_ = 2;
  int max_frames_ = 32;
  nn::Conv2d embed_;
  nn::Conv2d local_;
  nn::Tensor frame_positions_;
  nn::LayerNorm n1_, n2_;
  nn::MultiHeadAttention attn_;
  nn::FeedForward ffn_;
};

}  // namespace ebench::qa
