#pragma once

// Runs a requested metric battery over every triplet of a manifest,
// resolving composite-metric dependencies and collecting per-triplet errors
// instead of aborting the run.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ebench/backends.hpp"
#include "ebench/dataset.hpp"
#include "ebench/features.hpp"
#include "ebench/video_io.hpp"

namespace ebench::metrics {

struct Backends {
  std::shared_ptr<const EmbeddingBackend> embedding;
  std::shared_ptr<const PerceptualDistanceBackend> perceptual;
  std::shared_ptr<const FlowBackend> flow;
  // When set, embedding metrics read precomputed vectors instead.
  std::shared_ptr<const FeatureStore> features;
};

// Parses backend specs such as "stub", "embedding=hash:64", "flow=zero",
// "flow=constant:1,0", "perceptual=pixel". Later specs override earlier ones.
Backends make_backends(const std::vector<std::string>& specs, std::uint64_t seed);

// Requested names plus their dependencies, in canonical order. Unknown
// names raise a ValidationError listing the valid ones.
std::vector<std::string> resolve_metrics(const std::vector<std::string>& requested);

struct MetricRow {
  std::string triplet_id;
  std::map<std::string, double> values;
  std::map<std::string, std::string> errors;
};

std::vector<MetricRow> run_metrics(const Manifest& manifest, const std::vector<std::string>& names,
                                   const Backends& backends, const VideoDecoder& decoder);

// metrics.csv: triplet_id,metric,aggregate; failed values are omitted.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                       const std::vector<MetricRow>& rows);
// metric_errors.csv: triplet_id,metric,error
void write_metric_errors_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace ebench::metrics
