#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ebench/backends.hpp"

namespace ebench {

// Precomputed embeddings read from JSON lines of the form
//   {"triplet_id": "...", "frame_index": 0, "vector": [...]}
// frame_index >= 0 are edited-video frames. Two reserved indices carry text
// embeddings: kTargetPromptIndex for the edit prompt and kSourcePromptIndex
// for the source description. Vectors are renormalized on load.
class FeatureStore {
 public:
  static constexpr int kTargetPromptIndex = -1;
  static constexpr int kSourcePromptIndex = -2;

  static FeatureStore parse(std::istream& in);
  static FeatureStore load(const std::filesystem::path& path);

  bool contains(const std::string& triplet_id) const { return entries_.count(triplet_id) > 0; }
  const std::vector<Embedding>& frames(const std::string& triplet_id) const;
  const Embedding& prompt(const std::string& triplet_id) const;
  const Embedding* source_prompt(const std::string& triplet_id) const;
  std::size_t dim() const { return dim_; }

 private:
  struct Entry {
    std::vector<Embedding> frames;
    std::optional<Embedding> prompt;
    std::optional<Embedding> source_prompt;
  };
  const Entry& entry(const std::string& triplet_id) const;

  std::map<std::string, Entry> entries_;
  std::size_t dim_ = 0;
};

}  // namespace ebench
