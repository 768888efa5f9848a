#include "ebench/metrics.hpp"

#include <cmath>
#include <numeric>

#include "ebench/error.hpp"

namespace ebench::metrics {

namespace {

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

MetricResult make(std::string name, std::vector<double> per_frame) {
  MetricResult r;
  r.metric_name = std::move(name);
  r.aggregate = mean(per_frame);
  r.per_frame = std::move(per_frame);
  return r;
}

template <typename Fn>
auto at_frame(const char* metric, int index, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(std::string(metric) + ": backend failed at frame " +
                       std::to_string(index) + ": " + e.what());
  }
}

std::vector<Embedding> embed_frames(const char* metric, const VideoClip& clip,
                                    const EmbeddingBackend& backend) {
  std::vector<Embedding> out;
  out.reserve(clip.frames.size());
  for (int t = 0; t < clip.frame_count(); ++t) {
    out.push_back(at_frame(metric, t, [&] { return backend.embed_image(clip.frames[t]); }));
  }
  return out;
}

void require_frames(const char* metric, std::size_t have, std::size_t need) {
  if (have < need) {
    throw ValidationError(std::string(metric) + ": needs at least " + std::to_string(need) +
                          " frame(s), got " + std::to_string(have));
  }
}

void require_same_size(const char* metric, const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ValidationError(std::string(metric) + ": frame dimensions differ (" +
                          std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                          std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  }
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw ValidationError("cosine: zero vector");
  return dot / std::sqrt(na * nb);
}

MetricResult clip_t(std::span<const Embedding> frames, const Embedding& prompt) {
  require_frames("clip_t", frames.size(), 1);
  std::vector<double> per;
  per.reserve(frames.size());
  for (const auto& f : frames) per.push_back(cosine(f, prompt));
  return make("clip_t", std::move(per));
}

MetricResult clip_t(const VideoClip& edited, std::string_view prompt,
                    const EmbeddingBackend& backend) {
  require_frames("clip_t", edited.frames.size(), 1);
  const auto text = at_frame("clip_t", -1, [&] { return backend.embed_text(prompt); });
  const auto frames = embed_frames("clip_t", edited, backend);
  return clip_t(frames, text);
}

MetricResult clip_f(std::span<const Embedding> frames) {
  require_frames("clip_f", frames.size(), 2);
  std::vector<double> per;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) per.push_back(cosine(frames[t], frames[t + 1]));
  return make("clip_f", std::move(per));
}

MetricResult clip_f(const VideoClip& edited, const EmbeddingBackend& backend) {
  require_frames("clip_f", edited.frames.size(), 2);
  return clip_f(embed_frames("clip_f", edited, backend));
}

MetricResult fram_acc(std::span<const Embedding> frames, const Embedding& target,
                      const Embedding& source) {
  require_frames("fram_acc", frames.size(), 1);
  std::vector<double> per;
  for (const auto& f : frames) per.push_back(cosine(f, target) > cosine(f, source) ? 1.0 : 0.0);
  return make("fram_acc", std::move(per));
}

MetricResult fram_acc(const VideoClip& edited, std::string_view target_prompt,
                      const std::optional<std::string>& source_prompt,
                      const EmbeddingBackend& backend) {
  if (!source_prompt || source_prompt->empty()) {
    throw ValidationError("fram_acc: triplet has no source_prompt");
  }
  if (target_prompt.empty()) throw ValidationError("fram_acc: empty target prompt");
  require_frames("fram_acc", edited.frames.size(), 1);
  const auto target = at_frame("fram_acc", -1, [&] { return backend.embed_text(target_prompt); });
  const auto source = at_frame("fram_acc", -1, [&] { return backend.embed_text(*source_prompt); });
  return fram_acc(embed_frames("fram_acc", edited, backend), target, source);
}

MetricResult lpips_p(const VideoClip& source, const VideoClip& edited,
                     const PerceptualDistanceBackend& backend) {
  require_frames("lpips_p", edited.frames.size(), 1);
  if (source.frame_count() != edited.frame_count()) {
    throw ValidationError("lpips_p: source has " + std::to_string(source.frame_count()) +
                          " frames, edited has " + std::to_string(edited.frame_count()));
  }
  std::vector<double> per;
  for (int t = 0; t < edited.frame_count(); ++t) {
    require_same_size("lpips_p", source.frames[t], edited.frames[t]);
    per.push_back(
        at_frame("lpips_p", t, [&] { return backend.distance(source.frames[t], edited.frames[t]); }));
  }
  return make("lpips_p", std::move(per));
}

MetricResult lpips_t(const VideoClip& edited, const PerceptualDistanceBackend& backend) {
  require_frames("lpips_t", edited.frames.size(), 2);
  std::vector<double> per;
  for (int t = 0; t + 1 < edited.frame_count(); ++t) {
    require_same_size("lpips_t", edited.frames[t], edited.frames[t + 1]);
    per.push_back(at_frame("lpips_t", t, [&] {
      return backend.distance(edited.frames[t], edited.frames[t + 1]);
    }));
  }
  return make("lpips_t", std::move(per));
}

double ssim(const Frame& a, const Frame& b, const kernels::SsimParams& params) {
  require_same_size("ssim", a, b);
  const auto la = luminance(a);
  const auto lb = luminance(b);
  return kernels::ssim(la, lb, a.width, a.height, {}, params).mean;
}

namespace {

struct WarpPair {
  kernels::WarpedFrame warped;
  const Frame* next;
};

WarpPair warp_step(const char* metric, const VideoClip& clip, int t, const FlowBackend& flow) {
  const auto& cur = clip.frames[t];
  const auto& next = clip.frames[t + 1];
  require_same_size(metric, cur, next);
  auto field = at_frame(metric, t, [&] { return flow.flow(cur, next); });
  if (field.width != cur.width || field.height != cur.height) {
    throw BackendError(std::string(metric) + ": flow field at frame " + std::to_string(t) +
                       " does not match frame size");
  }
  return {kernels::warp_bilinear(cur, field), &next};
}

}  // namespace

MetricResult warp_mse(const VideoClip& edited, const FlowBackend& flow) {
  require_frames("warp_mse", edited.frames.size(), 2);
  std::vector<double> per;
  for (int t = 0; t + 1 < edited.frame_count(); ++t) {
    const auto [warped, next] = warp_step("warp_mse", edited, t, flow);
    double acc = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < warped.valid.size(); ++p) {
      if (!warped.valid[p]) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = warped.rgb[p * 3 + c] - next->rgb[p * 3 + c] / 255.0;
        acc += d * d;
      }
      n += 3;
    }
    if (n == 0) {
      throw ValidationError("warp_mse: all pixels out of bounds at frame " + std::to_string(t));
    }
    per.push_back(acc / static_cast<double>(n));
  }
  return make("warp_mse", std::move(per));
}

MetricResult warp_ssim(const VideoClip& edited, const FlowBackend& flow,
                       const kernels::SsimParams& params) {
  require_frames("warp_ssim", edited.frames.size(), 2);
  std::vector<double> per;
  for (int t = 0; t + 1 < edited.frame_count(); ++t) {
    const auto [warped, next] = warp_step("warp_ssim", edited, t, flow);
    std::vector<double> lw(warped.valid.size());
    for (std::size_t p = 0; p < lw.size(); ++p) {
      lw[p] = 255.0 * (0.299 * warped.rgb[p * 3] + 0.587 * warped.rgb[p * 3 + 1] +
                       0.114 * warped.rgb[p * 3 + 2]);
    }
    const auto ln = luminance(*next);
    const auto r = kernels::ssim(lw, ln, next->width, next->height, warped.valid, params);
    if (r.positions == 0) {
      throw ValidationError("warp_ssim: no in-bounds SSIM window at frame " + std::to_string(t));
    }
    per.push_back(r.mean);
  }
  return make("warp_ssim", std::move(per));
}

double s_edit(double clip_t_value, double warp_mse_value) {
  if (!(warp_mse_value > 0)) {
    throw ValidationError("s_edit: warp_mse must be positive, got " + std::to_string(warp_mse_value));
  }
  return clip_t_value / warp_mse_value;
}

double q_edit(double warp_ssim_value, double clip_t_value) {
  if (!std::isfinite(warp_ssim_value) || !std::isfinite(clip_t_value)) {
    throw ValidationError("q_edit: inputs must be finite");
  }
  return warp_ssim_value * clip_t_value;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"clip_t",   "clip_f",    "fram_acc",
                                              "lpips_p",  "lpips_t",   "warp_mse",
                                              "warp_ssim", "s_edit",   "q_edit"};
  return names;
}

std::vector<std::string> dependencies(std::string_view name) {
  if (name == "s_edit") return {"clip_t", "warp_mse"};
  if (name == "q_edit") return {"warp_ssim", "clip_t"};
  return {};
}

}  // namespace ebench::metrics
