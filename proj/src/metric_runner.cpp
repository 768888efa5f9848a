#include "ebench/metric_runner.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>

#include "ebench/csv.hpp"
#include "ebench/error.hpp"
#include "ebench/metrics.hpp"

namespace ebench::metrics {

namespace {

std::pair<std::string, std::string> split_once(const std::string& s, char sep) {
  const auto pos = s.find(sep);
  if (pos == std::string::npos) return {s, ""};
  return {s.substr(0, pos), s.substr(pos + 1)};
}

double parse_number(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("backend spec '" + spec + "': '" + s + "' is not a number");
  }
}

}  // namespace

Backends make_backends(const std::vector<std::string>& specs, std::uint64_t seed) {
  Backends b;
  b.embedding = std::make_shared<HashEmbeddingBackend>(64, seed);
  b.perceptual = std::make_shared<PixelDistanceBackend>();
  b.flow = std::make_shared<ZeroFlowBackend>();
  for (const auto& spec : specs) {
    if (spec == "stub") continue;
    const auto [role, rest] = split_once(spec, '=');
    const auto [kind, arg] = split_once(rest, ':');
    if (role == "embedding" && kind == "hash") {
      const auto dim = arg.empty() ? 64.0 : parse_number(arg, spec);
      if (dim < 1) throw ValidationError("backend spec '" + spec + "': dimension must be >= 1");
      b.embedding = std::make_shared<HashEmbeddingBackend>(static_cast<std::size_t>(dim), seed);
    } else if (role == "features") {
      b.features = std::make_shared<FeatureStore>(FeatureStore::load(rest));
    } else if (role == "perceptual" && kind == "pixel") {
      b.perceptual = std::make_shared<PixelDistanceBackend>();
    } else if (role == "flow" && kind == "zero") {
      b.flow = std::make_shared<ZeroFlowBackend>();
    } else if (role == "flow" && kind == "constant") {
      const auto [dx, dy] = split_once(arg, ',');
      b.flow = std::make_shared<ConstantFlowBackend>(static_cast<float>(parse_number(dx, spec)),
                                                     static_cast<float>(parse_number(dy, spec)));
    } else {
      throw ValidationError(
          "unknown backend spec '" + spec +
          "' (valid: stub, embedding=hash[:dim], features=<file.jsonl>, perceptual=pixel, "
          "flow=zero, flow=constant:dx,dy)");
    }
  }
  return b;
}

std::vector<std::string> resolve_metrics(const std::vector<std::string>& requested) {
  const auto& valid = metric_names();
  std::set<std::string> want;
  for (const auto& name : requested) {
    if (std::find(valid.begin(), valid.end(), name) == valid.end()) {
      std::string list;
      for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
      throw ValidationError("unknown metric '" + name + "' (valid: " + list + ")");
    }
    want.insert(name);
    for (const auto& d : dependencies(name)) want.insert(d);
  }
  if (want.empty()) throw ValidationError("no metrics requested");
  std::vector<std::string> out;
  for (const auto& v : valid) {
    if (want.count(v)) out.push_back(v);
  }
  return out;
}

namespace {

MetricRow run_one(const Manifest& manifest, const EditTriplet& t,
                  const std::vector<std::string>& names, const Backends& b,
                  const VideoDecoder& decoder) {
  MetricRow row;
  row.triplet_id = t.triplet_id;
  VideoClip edited, source;
  bool have_source = false;
  try {
    edited = standardize_clip(decoder.decode(manifest.resolve(t.edited_path)));
  } catch (const std::exception& e) {
    for (const auto& n : names) row.errors[n] = std::string("decode edited: ") + e.what();
    return row;
  }
  auto need_source = [&] {
    if (!have_source) {
      source = standardize_clip(decoder.decode(manifest.resolve(t.source_path)));
      have_source = true;
    }
  };
  const FeatureStore* fs = b.features && b.features->contains(t.triplet_id) ? b.features.get() : nullptr;
  for (const auto& n : names) {
    try {
      double v = 0;
      if (n == "clip_t") {
        v = fs ? clip_t(fs->frames(t.triplet_id), fs->prompt(t.triplet_id)).aggregate
               : clip_t(edited, t.prompt, *b.embedding).aggregate;
      } else if (n == "clip_f") {
        v = fs ? clip_f(fs->frames(t.triplet_id)).aggregate : clip_f(edited, *b.embedding).aggregate;
      } else if (n == "fram_acc") {
        if (fs) {
          const Embedding* src = fs->source_prompt(t.triplet_id);
          if (!src) throw ValidationError("fram_acc: triplet has no source_prompt");
          v = fram_acc(fs->frames(t.triplet_id), fs->prompt(t.triplet_id), *src).aggregate;
        } else {
          v = fram_acc(edited, t.prompt, t.source_prompt, *b.embedding).aggregate;
        }
      } else if (n == "lpips_p") {
        need_source();
        v = lpips_p(source, edited, *b.perceptual).aggregate;
      } else if (n == "lpips_t") {
        v = lpips_t(edited, *b.perceptual).aggregate;
      } else if (n == "warp_mse") {
        v = warp_mse(edited, *b.flow).aggregate;
      } else if (n == "warp_ssim") {
        v = warp_ssim(edited, *b.flow).aggregate;
      } else if (n == "s_edit" || n == "q_edit") {
        for (const auto& d : dependencies(n)) {
          if (!row.values.count(d)) {
            throw ValidationError(n + ": dependency " + d + " failed");
          }
        }
        v = n == "s_edit" ? s_edit(row.values.at("clip_t"), row.values.at("warp_mse"))
                          : q_edit(row.values.at("warp_ssim"), row.values.at("clip_t"));
      }
      row.values[n] = v;
    } catch (const std::exception& e) {
      row.errors[n] = e.what();
    }
  }
  return row;
}

}  // namespace

std::vector<MetricRow> run_metrics(const Manifest& manifest, const std::vector<std::string>& names,
                                   const Backends& b, const VideoDecoder& decoder) {
  const auto& triplets = manifest.triplets();
  std::vector<MetricRow> rows(triplets.size());
  const bool parallel = decoder.thread_safe() && b.embedding->thread_safe() &&
                        b.perceptual->thread_safe() && b.flow->thread_safe();
  const auto n = static_cast<std::ptrdiff_t>(triplets.size());
  std::vector<std::exception_ptr> errors(triplets.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      rows[i] = run_one(manifest, triplets[i], names, b, decoder);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  csv::write_row(out, {"triplet_id", "metric", "aggregate"});
  for (const auto& r : rows) {
    for (const auto& n : names) {
      auto it = r.values.find(n);
      if (it != r.values.end()) csv::write_row(out, {r.triplet_id, n, csv::format_double(it->second)});
    }
  }
}

void write_metric_errors_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  csv::write_row(out, {"triplet_id", "metric", "error"});
  for (const auto& r : rows) {
    for (const auto& [metric, err] : r.errors) csv::write_row(out, {r.triplet_id, metric, err});
  }
}

}  // namespace ebench::metrics
