#include "ebench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "ebench/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ebench {

std::string_view to_string(EditCategory c) {
  switch (c) {
    case EditCategory::style: return "style";
    case EditCategory::semantic: return "semantic";
    case EditCategory::structural: return "structural";
  }
  return "style";
}

std::optional<EditCategory> parse_category(std::string_view s) {
  if (s == "style") return EditCategory::style;
  if (s == "semantic") return EditCategory::semantic;
  if (s == "structural") return EditCategory::structural;
  return std::nullopt;
}

Manifest::Manifest(std::vector<EditTriplet> triplets, fs::path base_dir)
    : triplets_(std::move(triplets)), base_dir_(std::move(base_dir)) {
  for (std::size_t i = 0; i < triplets_.size(); ++i) {
    if (!index_.emplace(triplets_[i].triplet_id, i).second) {
      throw ValidationError("record " + std::to_string(i) + ": duplicate triplet_id '" +
                            triplets_[i].triplet_id + "'");
    }
  }
}

const EditTriplet& Manifest::at(std::string_view triplet_id) const {
  auto it = index_.find(triplet_id);
  if (it == index_.end()) throw NotFoundError("unknown triplet '" + std::string(triplet_id) + "'");
  return triplets_[it->second];
}

fs::path Manifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir_ / p;
}

std::vector<std::string> Manifest::source_ids() const {
  std::set<std::string> ids;
  for (const auto& t : triplets_) ids.insert(t.source_video_id);
  return {ids.begin(), ids.end()};
}

namespace {

const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys{"triplet_id", "source_video_id", "source_path",
                                          "edited_path", "prompt",         "source_prompt",
                                          "method",      "category",       "subcategory"};
  return keys;
}

std::string locus(std::size_t i, const json& rec) {
  std::string s = "record " + std::to_string(i);
  if (rec.is_object() && rec.contains("triplet_id") && rec["triplet_id"].is_string()) {
    s += " (triplet_id '" + rec["triplet_id"].get<std::string>() + "')";
  }
  return s;
}

std::string required_string(const json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end()) throw ValidationError(where + ": missing field '" + key + "'");
  if (!it->is_string()) throw ValidationError(where + ": field '" + key + "' must be a string");
  auto v = it->get<std::string>();
  if (v.empty()) throw ValidationError(where + ": field '" + key + "' is empty");
  return v;
}

}  // namespace

Manifest parse_manifest(const json& doc, fs::path base_dir) {
  if (!doc.is_array()) throw ValidationError("manifest must be a JSON array of records");
  std::vector<EditTriplet> out;
  out.reserve(doc.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const auto where = locus(i, rec);
    if (!rec.is_object()) throw ValidationError(where + ": not a JSON object");
    for (const auto& [key, _] : rec.items()) {
      if (!allowed_keys().count(key)) throw ValidationError(where + ": unknown field '" + key + "'");
    }
    EditTriplet t;
    t.triplet_id = required_string(rec, "triplet_id", where);
    t.source_video_id = required_string(rec, "source_video_id", where);
    t.source_path = required_string(rec, "source_path", where);
    t.edited_path = required_string(rec, "edited_path", where);
    t.prompt = required_string(rec, "prompt", where);
    t.method = required_string(rec, "method", where);
    const auto cat = required_string(rec, "category", where);
    auto parsed = parse_category(cat);
    if (!parsed) {
      throw ValidationError(where + ": unknown category '" + cat +
                            "' (expected style, semantic or structural)");
    }
    t.category = *parsed;
    if (auto it = rec.find("source_prompt"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError(where + ": field 'source_prompt' must be a string");
      t.source_prompt = it->get<std::string>();
    }
    if (auto it = rec.find("subcategory"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError(where + ": field 'subcategory' must be a string");
      t.subcategory = it->get<std::string>();
    }
    if (!seen.insert(t.triplet_id).second) {
      throw ValidationError(where + ": duplicate triplet_id '" + t.triplet_id + "'");
    }
    out.push_back(std::move(t));
  }
  return Manifest(std::move(out), std::move(base_dir));
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest '" + path.string() + "': parse failure at byte " +
                          std::to_string(e.byte) + ": " + e.what());
  }
  return parse_manifest(doc, fs::absolute(path).parent_path());
}

json manifest_to_json(const Manifest& manifest) {
  json doc = json::array();
  for (const auto& t : manifest.triplets()) {
    json rec{{"triplet_id", t.triplet_id},
             {"source_video_id", t.source_video_id},
             {"source_path", t.source_path.generic_string()},
             {"edited_path", t.edited_path.generic_string()},
             {"prompt", t.prompt},
             {"method", t.method},
             {"category", std::string(to_string(t.category))}};
    if (t.source_prompt) rec["source_prompt"] = *t.source_prompt;
    if (!t.subcategory.empty()) rec["subcategory"] = t.subcategory;
    doc.push_back(std::move(rec));
  }
  return doc;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(manifest).dump(2) << '\n';
}

VideoClip standardize_clip(const VideoClip& clip, ClipLimits limits) {
  if (clip.frame_count() < 2) {
    throw ValidationError("standardize_clip: clip needs at least 2 frames, has " +
                          std::to_string(clip.frame_count()));
  }
  VideoClip out;
  out.fps = clip.fps;
  const int keep = std::min(clip.frame_count(), limits.max_frames);
  out.frames.assign(clip.frames.begin(), clip.frames.begin() + keep);

  const int w = clip.width(), h = clip.height();
  const int long_side = std::max(w, h);
  if (long_side > limits.max_long_side) {
    int nw, nh;
    if (w >= h) {
      nw = limits.max_long_side;
      nh = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * nw / w)));
    } else {
      nh = limits.max_long_side;
      nw = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) * nh / h)));
    }
    for (auto& f : out.frames) f = resize_bilinear(f, nw, nh);
  }
  return out;
}

int FoldSplit::fold_of(const std::string& source_video_id) const {
  auto it = assignment.find(source_video_id);
  if (it == assignment.end()) {
    throw NotFoundError("source video '" + source_video_id + "' has no fold assignment");
  }
  return it->second;
}

std::vector<std::string> FoldSplit::sources_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [src, f] : assignment)
    if (f == fold) out.push_back(src);
  return out;
}

std::vector<std::string> FoldSplit::triplets_in(const Manifest& manifest, int fold,
                                                bool held_out) const {
  std::vector<std::string> out;
  for (const auto& t : manifest.triplets()) {
    if ((fold_of(t.source_video_id) == fold) == held_out) out.push_back(t.triplet_id);
  }
  return out;
}

FoldSplit make_folds(const Manifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("make_folds: k must be >= 2, got " + std::to_string(k));
  auto sources = manifest.source_ids();
  if (static_cast<int>(sources.size()) < k) {
    throw ValidationError("make_folds: " + std::to_string(sources.size()) +
                          " source videos cannot fill " + std::to_string(k) + " folds");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(sources.begin(), sources.end(), rng);
  FoldSplit split;
  split.k = k;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    split.assignment[sources[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return split;
}

json folds_to_json(const FoldSplit& split) {
  json doc = json::object();
  for (const auto& [src, f] : split.assignment) doc[src] = f;
  return doc;
}

FoldSplit folds_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("fold file must be a JSON object");
  FoldSplit split;
  int max_fold = -1;
  for (const auto& [src, f] : doc.items()) {
    if (!f.is_number_integer() || f.get<int>() < 0) {
      throw ValidationError("fold file: source '" + src + "' has a non-integer fold");
    }
    split.assignment[src] = f.get<int>();
    max_fold = std::max(max_fold, f.get<int>());
  }
  split.k = max_fold + 1;
  return split;
}

double DatasetStats::category_proportion(EditCategory c) const {
  if (total == 0) return 0.0;
  auto it = by_category.find(std::string(to_string(c)));
  return it == by_category.end() ? 0.0 : static_cast<double>(it->second) / total;
}

json DatasetStats::to_json() const {
  auto with_props = [this](const std::map<std::string, std::size_t>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) {
      j[k] = {{"count", v}, {"proportion", static_cast<double>(v) / total}};
    }
    return j;
  };
  return {{"triplets", total},
          {"source_videos", source_videos},
          {"category", with_props(by_category)},
          {"subcategory", with_props(by_subcategory)},
          {"method", with_props(by_method)}};
}

DatasetStats dataset_stats(const Manifest& manifest) {
  if (manifest.empty()) throw ValidationError("dataset_stats: empty manifest");
  DatasetStats s;
  s.total = manifest.size();
  s.source_videos = manifest.source_ids().size();
  for (const auto& t : manifest.triplets()) {
    ++s.by_category[std::string(to_string(t.category))];
    ++s.by_subcategory[t.subcategory.empty() ? "(none)" : t.subcategory];
    ++s.by_method[t.method];
  }
  return s;
}

}  // namespace ebench
