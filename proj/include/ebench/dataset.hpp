#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ebench/image.hpp"

namespace ebench {

enum class EditCategory { style, semantic, structural };

std::string_view to_string(EditCategory c);
std::optional<EditCategory> parse_category(std::string_view s);

struct EditTriplet {
  std::string triplet_id;
  std::string source_video_id;
  std::filesystem::path source_path;  // as written in the manifest
  std::filesystem::path edited_path;
  std::string prompt;
  std::optional<std::string> source_prompt;
  std::string method;
  EditCategory category = EditCategory::style;
  std::string subcategory;

  bool operator==(const EditTriplet&) const = default;
};

// An immutable inventory of triplets. Relative paths resolve against base_dir.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<EditTriplet> triplets, std::filesystem::path base_dir);

  const std::vector<EditTriplet>& triplets() const { return triplets_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::size_t size() const { return triplets_.size(); }
  bool empty() const { return triplets_.empty(); }

  const EditTriplet& at(std::string_view triplet_id) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  // Distinct source ids in sorted order.
  std::vector<std::string> source_ids() const;

 private:
  std::vector<EditTriplet> triplets_;
  std::filesystem::path base_dir_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

Manifest parse_manifest(const nlohmann::json& doc, std::filesystem::path base_dir);
Manifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct ClipLimits {
  int max_frames = 32;
  int max_long_side = 768;
};

// Keeps the first max_frames frames and bilinearly resizes so the long side
// fits max_long_side, preserving aspect ratio.
VideoClip standardize_clip(const VideoClip& clip, ClipLimits limits = {});

struct FoldSplit {
  int k = 0;
  std::map<std::string, int> assignment;  // source_video_id -> fold

  int fold_of(const std::string& source_video_id) const;
  std::vector<std::string> sources_in(int fold) const;
  // Triplet ids in `fold` (or not in it, when held_out is false), manifest order.
  std::vector<std::string> triplets_in(const Manifest& manifest, int fold,
                                       bool held_out = true) const;
};

FoldSplit make_folds(const Manifest& manifest, int k, std::uint64_t seed);
nlohmann::json folds_to_json(const FoldSplit& split);
FoldSplit folds_from_json(const nlohmann::json& doc);

struct DatasetStats {
  std::size_t total = 0;
  std::size_t source_videos = 0;
  std::map<std::string, std::size_t> by_category;
  std::map<std::string, std::size_t> by_subcategory;
  std::map<std::string, std::size_t> by_method;

  double category_proportion(EditCategory c) const;
  nlohmann::json to_json() const;
};

DatasetStats dataset_stats(const Manifest& manifest);

}  // namespace ebench
