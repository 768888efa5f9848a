#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebench/backends.hpp"
#include "ebench/image.hpp"
#include "ebench/kernels.hpp"

namespace ebench::metrics {

struct MetricResult {
  std::string metric_name;
  // Per frame, or per adjacent pair for temporal metrics.
  std::vector<double> per_frame;
  double aggregate = 0;
};

double cosine(std::span<const double> a, std::span<const double> b);

// --- embedding-space metrics -----------------------------------------------

// Mean frame/prompt cosine.
MetricResult clip_t(std::span<const Embedding> frames, const Embedding& prompt);
MetricResult clip_t(const VideoClip& edited, std::string_view prompt,
                    const EmbeddingBackend& backend);

// Mean cosine over adjacent frame pairs.
MetricResult clip_f(std::span<const Embedding> frames);
MetricResult clip_f(const VideoClip& edited, const EmbeddingBackend& backend);

// Fraction of frames strictly closer to the target prompt than the source
// prompt; ties count as failures.
MetricResult fram_acc(std::span<const Embedding> frames, const Embedding& target,
                      const Embedding& source);
MetricResult fram_acc(const VideoClip& edited, std::string_view target_prompt,
                      const std::optional<std::string>& source_prompt,
                      const EmbeddingBackend& backend);

// --- perceptual distance metrics ------------------------------------------

MetricResult lpips_p(const VideoClip& source, const VideoClip& edited,
                     const PerceptualDistanceBackend& backend);
MetricResult lpips_t(const VideoClip& edited, const PerceptualDistanceBackend& backend);

// --- structural / warping metrics -----------------------------------------

// Gaussian-window SSIM on BT.601 luma, mean-pooled over the valid map.
double ssim(const Frame& a, const Frame& b, const kernels::SsimParams& params = {});

// Frame t warped to t+1 along flow(f_t, f_{t+1}) with bilinear sampling;
// pixels sampled from outside the frame are excluded.
MetricResult warp_mse(const VideoClip& edited, const FlowBackend& flow);
MetricResult warp_ssim(const VideoClip& edited, const FlowBackend& flow,
                       const kernels::SsimParams& params = {});

// --- composites -----------------------------------------------------------

double s_edit(double clip_t_value, double warp_mse_value);
double q_edit(double warp_ssim_value, double clip_t_value);

// Names accepted by the metric engine, in canonical order.
const std::vector<std::string>& metric_names();

// Metrics that must be computed before `name` (e.g. s_edit needs clip_t and
// warp_mse).
std::vector<std::string> dependencies(std::string_view name);

}  // namespace ebench::metrics
