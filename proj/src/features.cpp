#include "ebench/features.hpp"

#include <fstream>
#include <istream>

#include <json.hpp>

#include "ebench/error.hpp"

using nlohmann::json;

namespace ebench {

FeatureStore FeatureStore::parse(std::istream& in) {
  FeatureStore store;
  std::map<std::string, std::map<int, Embedding>> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "features line " + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw ValidationError(where + ": not valid JSON");
    }
    if (!rec.is_object() || !rec.contains("triplet_id") || !rec.contains("frame_index") ||
        !rec.contains("vector")) {
      throw ValidationError(where + ": expected keys triplet_id, frame_index, vector");
    }
    const auto tid = rec["triplet_id"].get<std::string>();
    const int idx = rec["frame_index"].get<int>();
    Embedding v;
    try {
      v = rec["vector"].get<Embedding>();
    } catch (const json::exception&) {
      throw ValidationError(where + ": vector must be an array of numbers");
    }
    if (v.empty()) throw ValidationError(where + ": empty vector");
    if (store.dim_ == 0) store.dim_ = v.size();
    if (v.size() != store.dim_) {
      throw ValidationError(where + ": vector has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(store.dim_));
    }
    v = normalized(std::move(v));
    auto& e = store.entries_[tid];
    if (idx == kTargetPromptIndex) {
      e.prompt = std::move(v);
    } else if (idx == kSourcePromptIndex) {
      e.source_prompt = std::move(v);
    } else if (idx >= 0) {
      if (!frames[tid].emplace(idx, std::move(v)).second) {
        throw ValidationError(where + ": duplicate frame " + std::to_string(idx));
      }
    } else {
      throw ValidationError(where + ": invalid frame_index " + std::to_string(idx));
    }
  }
  for (auto& [tid, fm] : frames) {
    auto& e = store.entries_[tid];
    int expect = 0;
    for (auto& [idx, v] : fm) {
      if (idx != expect++) {
        throw ValidationError("features for '" + tid + "': frame indices are not contiguous");
      }
      e.frames.push_back(std::move(v));
    }
  }
  return store;
}

FeatureStore FeatureStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature file '" + path.string() + "'");
  return parse(in);
}

const FeatureStore::Entry& FeatureStore::entry(const std::string& triplet_id) const {
  auto it = entries_.find(triplet_id);
  if (it == entries_.end()) throw NotFoundError("no features for triplet '" + triplet_id + "'");
  return it->second;
}

const std::vector<Embedding>& FeatureStore::frames(const std::string& triplet_id) const {
  const auto& e = entry(triplet_id);
  if (e.frames.empty()) throw NotFoundError("no frame features for '" + triplet_id + "'");
  return e.frames;
}

const Embedding& FeatureStore::prompt(const std::string& triplet_id) const {
  const auto& e = entry(triplet_id);
  if (!e.prompt) throw NotFoundError("no prompt embedding for '" + triplet_id + "'");
  return *e.prompt;
}

const Embedding* FeatureStore::source_prompt(const std::string& triplet_id) const {
  const auto& e = entry(triplet_id);
  return e.source_prompt ? &*e.source_prompt : nullptr;
}

}  // namespace ebench
