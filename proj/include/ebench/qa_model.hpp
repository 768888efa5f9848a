#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ebench/dataset.hpp"
#include "ebench/image.hpp"
#include "ebench/nn/layers.hpp"
#include "ebench/qa_config.hpp"
#include "ebench/qa_encoders.hpp"

namespace ebench::qa {

struct QaScore {
  double alignment = 0;
  double relevance = 0;
  double aesthetic = 0;
  double technical = 0;
  double final = 0;

  double branch(Branch b) const;
  nlohmann::json to_json() const;
};

struct AlignmentOutput {
  nn::Tensor score;  // [1,1]
  nn::Tensor e_bv;   // [T,d] per-frame visual embeddings
  nn::Tensor t_bv;   // [T,d] after the temporal adapter
  nn::Tensor e_bt;   // [L,d] text states (row 0 pooled)
};

struct RelevanceOutput {
  nn::Tensor score;   // [1,1]
  nn::Tensor f;       // [1,d] pooled source feature
  nn::Tensor f_star;  // [1,d] pooled edited feature
  int head_input_width = 0;
};

struct BranchOutputs {
  std::array<nn::Tensor, 4> branch;  // undefined for inactive branches
  nn::Tensor final;                  // [1,1]
};

struct FragmentOrigin {
  int x = 0;
  int y = 0;
};

// One patch origin per grid cell, row-major. Cells larger than the patch get
// a seeded random offset; the same origins are reused for every frame.
std::vector<FragmentOrigin> fragment_origins(int width, int height, const FragmentConfig& cfg,
                                             std::uint64_t seed);
// Mosaic of (grid*size)^2 pixels built from the patches at `origins`.
Frame assemble_fragments(const Frame& frame, const std::vector<FragmentOrigin>& origins,
                         const FragmentConfig& cfg);

double fuse_scores(const std::array<double, 4>& scores, const std::array<double, 4>& weights);

class QaModel {
 public:
  explicit QaModel(ModelConfig config);
  QaModel(const QaModel&) = delete;
  QaModel& operator=(const QaModel&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParameterRegistry& params() { return params_; }
  const nn::ParameterRegistry& params() const { return params_; }

  AlignmentOutput alignment_forward(const VideoClip& edited, std::string_view prompt) const;
  // Throws when fusion is `none`; the bypass belongs to the caller.
  RelevanceOutput relevance_forward(const VideoClip& source, const VideoClip& edited) const;
  nn::Tensor aesthetic_forward(const VideoClip& edited) const;
  nn::Tensor technical_forward(const VideoClip& edited) const;

  // Graph-building forward over every active branch. Errors are rethrown
  // with the failing branch named.
  BranchOutputs forward(const VideoClip& source, const VideoClip& edited,
                        std::string_view prompt) const;
  // Inference without graph construction.
  QaScore score(const VideoClip& source, const VideoClip& edited, std::string_view prompt) const;

  // Parameter groups of the visual-language backbones, adapter, heads, and
  // the remaining encoders.
  static const std::vector<std::string>& backbone_groups();
  static const std::vector<std::string>& head_groups();

 private:
  std::vector<nn::Tensor> frame_tensors(const VideoClip& clip) const;

  ModelConfig config_;
  nn::ParameterRegistry params_;

  nn::ConvStack visual_;
  TemporalAdapter adapter_;
  TextTransformer text_;
  nn::Linear align_linear_;
  nn::FeedForward align_ffn_;

  SpatiotemporalEncoder source_enc_, edited_enc_;
  nn::MultiHeadAttention mca_;
  nn::FeedForward rel_head_;

  nn::ConvStack aesthetic_;
  nn::FeedForward aesthetic_head_;
  nn::ConvStack technical_;
  nn::FeedForward technical_head_;
};

// Supplies a standardized clip pair and prompt for a triplet.
struct TripletClips {
  VideoClip source;
  VideoClip edited;
  std::string prompt;
};
using ClipLoader = std::function<TripletClips(const EditTriplet&)>;

// Decodes through the default decoder and standardizes both clips.
ClipLoader manifest_loader(const Manifest& manifest);

QaScore qa_forward(const EditTriplet& triplet, const QaModel& model, const ClipLoader& loader);
// Order-preserving batch inference, parallel across triplets.
std::vector<QaScore> qa_forward_batch(const std::vector<EditTriplet>& triplets,
                                      const QaModel& model, const ClipLoader& loader);

}  // namespace ebench::qa
