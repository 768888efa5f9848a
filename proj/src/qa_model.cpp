#include "ebench/qa_model.hpp"

#include <cmath>
#include <exception>
#include <random>

#include "ebench/backends.hpp"
#include "ebench/error.hpp"
#include "ebench/video_io.hpp"

namespace ebench::qa {

using nn::Tensor;

double QaScore::branch(Branch b) const {
  switch (b) {
    case Branch::alignment: return alignment;
    case Branch::relevance: return relevance;
    case Branch::aesthetic: return aesthetic;
    case Branch::technical: return technical;
  }
  return 0;
}

nlohmann::json QaScore::to_json() const {
  return {{"alignment", alignment},
          {"relevance", relevance},
          {"aesthetic", aesthetic},
          {"technical", technical},
          {"final", final}};
}

std::vector<FragmentOrigin> fragment_origins(int width, int height, const FragmentConfig& cfg,
                                             std::uint64_t seed) {
  if (width < cfg.size || height < cfg.size) {
    throw ValidationError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                          " is smaller than one " + std::to_string(cfg.size) + "px fragment");
  }
  if (width < cfg.grid * cfg.size || height < cfg.grid * cfg.size) {
    throw ValidationError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                          " cannot hold a " + std::to_string(cfg.grid) + "x" +
                          std::to_string(cfg.grid) + " grid of " + std::to_string(cfg.size) +
                          "px fragments");
  }
  std::mt19937_64 rng(seed);
  std::vector<FragmentOrigin> out;
  out.reserve(static_cast<std::size_t>(cfg.grid) * cfg.grid);
  for (int gy = 0; gy < cfg.grid; ++gy) {
    const int y0 = gy * height / cfg.grid, y1 = (gy + 1) * height / cfg.grid;
    for (int gx = 0; gx < cfg.grid; ++gx) {
      const int x0 = gx * width / cfg.grid, x1 = (gx + 1) * width / cfg.grid;
      std::uniform_int_distribution<int> dx(0, std::max(0, x1 - x0 - cfg.size));
      std::uniform_int_distribution<int> dy(0, std::max(0, y1 - y0 - cfg.size));
      const int ox = dx(rng), oy = dy(rng);
      out.push_back({std::min(x0 + ox, width - cfg.size), std::min(y0 + oy, height - cfg.size)});
    }
  }
  return out;
}

Frame assemble_fragments(const Frame& frame, const std::vector<FragmentOrigin>& origins,
                         const FragmentConfig& cfg) {
  const int side = cfg.grid * cfg.size;
  Frame out(side, side);
  for (int cell = 0; cell < static_cast<int>(origins.size()); ++cell) {
    const int gx = cell % cfg.grid, gy = cell / cfg.grid;
    for (int y = 0; y < cfg.size; ++y)
      for (int x = 0; x < cfg.size; ++x)
        for (int c = 0; c < 3; ++c)
          out.at(gx * cfg.size + x, gy * cfg.size + y, c) =
              frame.at(origins[cell].x + x, origins[cell].y + y, c);
  }
  return out;
}

double fuse_scores(const std::array<double, 4>& scores, const std::array<double, 4>& weights) {
  double total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw ValidationError("fuse_scores: non-finite " +
                            std::string(to_string(kBranches[i])) + " score");
    }
    if (weights[i] != 0.0) total += weights[i] * scores[i];
  }
  return total;
}

namespace {

std::uint64_t branch_seed(std::uint64_t seed, std::string_view name) { return seed ^ fnv1a(name); }

nn::Init make_init(nn::ParameterRegistry& reg, std::uint64_t seed, const std::string& group,
                   std::string_view seed_name) {
  return nn::Init(reg, group, group, branch_seed(seed, seed_name));
}

template <typename Fn>
auto in_branch(Branch b, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string(to_string(b)) + " branch: ";
  try {
    return fn();
  } catch (const CheckpointError& e) {
    throw CheckpointError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const BackendError& e) {
    throw BackendError(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace

const std::vector<std::string>& QaModel::backbone_groups() {
  static const std::vector<std::string> g{"vl_visual", "vl_text",   "rel_source",
                                          "rel_edited", "aesthetic", "technical"};
  return g;
}

const std::vector<std::string>& QaModel::head_groups() {
  static const std::vector<std::string> g{"align_head", "rel_head", "aesthetic_head",
                                          "technical_head"};
  return g;
}

QaModel::QaModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.scale == Scale::reference) {
    throw ValidationError(
        "reference-scale backbones load external pretrained weights, which this build does not "
        "ship; use scale \"toy\"");
  }
  const auto seed = config_.seed;
  const int d = config_.width;

  visual_ = nn::ConvStack(make_init(params_, seed, "vl_visual", "vl_visual"), config_.conv_channels, d);
  adapter_ = TemporalAdapter(make_init(params_, seed, "adapter", "adapter"), d, config_.adapter);
  const bool blip = config_.text == TextEncoder::blip;
  text_ = TextTransformer(make_init(params_, seed, "vl_text", "vl_text"), config_, blip);
  auto align = make_init(params_, seed, "align_head", "align_head");
  if (blip) {
    align_linear_ = nn::Linear(align.child("linear"), d, 1);
  } else {
    align_ffn_ = nn::FeedForward(align.child("ffn"), d, d, 1);
  }

  if (config_.branch_active(Branch::relevance)) {
    // F and F* start from the same weights.
    source_enc_ = SpatiotemporalEncoder(make_init(params_, seed, "rel_source", "spatiotemporal"),
                                        config_, config_.temporal);
    if (!config_.share_relevance_encoders) {
      edited_enc_ = SpatiotemporalEncoder(make_init(params_, seed, "rel_edited", "spatiotemporal"),
                                          config_, config_.temporal);
    }
    auto head = make_init(params_, seed, "rel_head", "rel_head");
    if (config_.fusion == Fusion::mca) {
      mca_ = nn::MultiHeadAttention(head.child("mca"), d, config_.heads);
      rel_head_ = nn::FeedForward(head.child("ffn"), d, d, 1);
    } else {
      rel_head_ = nn::FeedForward(head.child("ffn"), 2 * d, d, 1);
    }
  }

  if (config_.branch_active(Branch::aesthetic)) {
    aesthetic_ = nn::ConvStack(make_init(params_, seed, "aesthetic", "aesthetic"),
                               config_.conv_channels, d);
    aesthetic_head_ =
        nn::FeedForward(make_init(params_, seed, "aesthetic_head", "aesthetic_head").child("ffn"), d, d, 1);
  }
  if (config_.branch_active(Branch::technical)) {
    technical_ = nn::ConvStack(make_init(params_, seed, "technical", "technical"),
                               config_.conv_channels, d);
    technical_head_ =
        nn::FeedForward(make_init(params_, seed, "technical_head", "technical_head").child("ffn"), d, d, 1);
  }
}

std::vector<Tensor> QaModel::frame_tensors(const VideoClip& clip) const {
  if (clip.frames.empty()) throw ValidationError("clip has no frames");
  std::vector<Tensor> out;
  out.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.push_back(nn::frame_tensor(f));
  return out;
}

AlignmentOutput QaModel::alignment_forward(const VideoClip& edited, std::string_view prompt) const {
  const auto ids = tokenize(prompt, config_.vocab, config_.max_tokens);
  AlignmentOutput out;
  out.e_bv = visual_.frames(frame_tensors(edited));
  out.t_bv = adapter_(out.e_bv);
  if (config_.text == TextEncoder::blip) {
    out.e_bt = text_(ids, &out.t_bv);
    out.score = align_linear_(nn::slice_rows(out.e_bt, 0, 1));
  } else {
    out.e_bt = text_(ids, nullptr);
    const Tensor v = nn::l2_normalize_rows(nn::mean_rows(out.t_bv));
    const Tensor t = nn::l2_normalize_rows(nn::slice_rows(out.e_bt, 0, 1));
    out.score = align_ffn_(nn::mul(v, t));
  }
  return out;
}

RelevanceOutput QaModel::relevance_forward(const VideoClip& source, const VideoClip& edited) const {
  if (config_.fusion == Fusion::none || config_.temporal == Temporal::none) {
    throw ValidationError("relevance_forward called with the relevance branch bypassed (fusion " +
                          std::string(to_string(config_.fusion)) + ", temporal " +
                          std::string(to_string(config_.temporal)) + ")");
  }
  if (!config_.enabled[static_cast<int>(Branch::relevance)]) {
    throw ValidationError("relevance branch is disabled in this config");
  }
  const auto& f_enc = source_enc_;
  const auto& f_star_enc = config_.share_relevance_encoders ? source_enc_ : edited_enc_;
  const Tensor fs = f_enc(frame_tensors(source));
  const Tensor fe = f_star_enc(frame_tensors(edited));
  RelevanceOutput out;
  out.f = nn::mean_rows(fs);
  out.f_star = nn::mean_rows(fe);
  Tensor fused;
  if (config_.fusion == Fusion::concat) {
    fused = nn::concat_cols({out.f, out.f_star});
  } else {
    fused = nn::mean_rows(nn::add(fe, mca_(fe, fs)));
  }
  out.head_input_width = fused.cols();
  out.score = rel_head_(fused);
  return out;
}

Tensor QaModel::aesthetic_forward(const VideoClip& edited) const {
  if (!config_.branch_active(Branch::aesthetic)) throw ValidationError("aesthetic branch is disabled");
  std::vector<Tensor> frames;
  for (const auto& f : edited.frames) {
    frames.push_back(nn::frame_tensor(downsample_to(f, config_.aesthetic_size)));
  }
  if (frames.empty()) throw ValidationError("clip has no frames");
  return aesthetic_head_(nn::mean_rows(aesthetic_.frames(frames)));
}

Tensor QaModel::technical_forward(const VideoClip& edited) const {
  if (!config_.branch_active(Branch::technical)) throw ValidationError("technical branch is disabled");
  if (edited.frames.empty()) throw ValidationError("clip has no frames");
  const auto origins = fragment_origins(edited.width(), edited.height(), config_.fragments,
                                        branch_seed(config_.seed, "fragments"));
  std::vector<Tensor> frames;
  for (const auto& f : edited.frames) {
    frames.push_back(nn::frame_tensor(assemble_fragments(f, origins, config_.fragments)));
  }
  return technical_head_(nn::mean_rows(technical_.frames(frames)));
}

BranchOutputs QaModel::forward(const VideoClip& source, const VideoClip& edited,
                               std::string_view prompt) const {
  BranchOutputs out;
  for (Branch b : kBranches) {
    if (!config_.branch_active(b)) continue;
    out.branch[static_cast<int>(b)] = in_branch(b, [&]() -> Tensor {
      switch (b) {
        case Branch::alignment: return alignment_forward(edited, prompt).score;
        case Branch::relevance: return relevance_forward(source, edited).score;
        case Branch::aesthetic: return aesthetic_forward(edited);
        case Branch::technical: return technical_forward(edited);
      }
      return {};
    });
  }
  // final = sum_i w_i * s_i over active branches.
  Tensor total;
  for (Branch b : kBranches) {
    const auto& s = out.branch[static_cast<int>(b)];
    if (!s.defined()) continue;
    const Tensor term = nn::scale(s, config_.effective_weight(b));
    total = total.defined() ? nn::add(total, term) : term;
  }
  out.final = total.defined() ? total : Tensor::scalar(0.0);
  return out;
}

QaScore QaModel::score(const VideoClip& source, const VideoClip& edited,
                       std::string_view prompt) const {
  nn::NoGradGuard guard;
  const auto out = forward(source, edited, prompt);
  std::array<double, 4> s{};
  for (Branch b : kBranches) {
    const auto& t = out.branch[static_cast<int>(b)];
    s[static_cast<int>(b)] = t.defined() ? t.item() : 0.0;
  }
  std::array<double, 4> w{};
  for (Branch b : kBranches) w[static_cast<int>(b)] = config_.effective_weight(b);
  QaScore score{s[0], s[1], s[2], s[3], fuse_scores(s, w)};
  return score;
}

ClipLoader manifest_loader(const Manifest& manifest) {
  std::shared_ptr<const VideoDecoder> decoder = default_decoder();
  return [&manifest, decoder](const EditTriplet& t) {
    TripletClips clips;
    clips.source = standardize_clip(decoder->decode(manifest.resolve(t.source_path)));
    clips.edited = standardize_clip(decoder->decode(manifest.resolve(t.edited_path)));
    clips.prompt = t.prompt;
    return clips;
  };
}

QaScore qa_forward(const EditTriplet& triplet, const QaModel& model, const ClipLoader& loader) {
  const auto clips = loader(triplet);
  return model.score(clips.source, clips.edited, clips.prompt);
}

std::vector<QaScore> qa_forward_batch(const std::vector<EditTriplet>& triplets,
                                      const QaModel& model, const ClipLoader& loader) {
  std::vector<QaScore> out(triplets.size());
  std::vector<std::exception_ptr> errors(triplets.size());
  const auto n = static_cast<std::ptrdiff_t>(triplets.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = qa_forward(triplets[i], model, loader);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace ebench::qa
