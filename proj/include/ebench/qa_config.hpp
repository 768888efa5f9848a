#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ebench::qa {

enum class TextEncoder { clip, blip };
enum class Temporal { none, vswin, mvd, uniformer };
enum class Fusion { none, mca, concat };
enum class Scale { toy, reference };

std::string_view to_string(TextEncoder v);
std::string_view to_string(Temporal v);
std::string_view to_string(Fusion v);
std::string_view to_string(Scale v);

enum class Branch { alignment = 0, relevance = 1, aesthetic = 2, technical = 3 };
inline constexpr std::array<Branch, 4> kBranches{Branch::alignment, Branch::relevance,
                                                 Branch::aesthetic, Branch::technical};
std::string_view to_string(Branch b);

struct AdapterConfig {
  int layers = 1;
  int heads = 2;
  int max_frames = 32;  // size of the learned positional table
  bool zero_init_output = true;
};

struct FragmentConfig {
  int grid = 7;
  int size = 32;
};

// One document describing the whole assessor. Toy scale builds every backbone
// from `seed`; reference scale needs external weights, identified by
// `weights_id` and verified against `weights_sha256`.
struct ModelConfig {
  Scale scale = Scale::toy;
  std::uint64_t seed = 7;
  int width = 32;
  int heads = 2;
  int conv_channels = 8;
  int patch = 4;
  int vocab = 512;
  int max_tokens = 16;
  int aesthetic_size = 32;  // long side of downsampled frames

  TextEncoder text = TextEncoder::blip;
  Temporal temporal = Temporal::uniformer;
  Fusion fusion = Fusion::concat;
  bool share_relevance_encoders = false;

  AdapterConfig adapter;
  FragmentConfig fragments;

  // Fusion weights in branch order: alignment, relevance, aesthetic, technical.
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};
  std::array<bool, 4> enabled{true, true, true, true};

  std::optional<std::string> weights_id;
  std::optional<std::string> weights_sha256;

  // True when the branch runs; Temporal::none and Fusion::none bypass the
  // relevance branch.
  bool branch_active(Branch b) const;
  double effective_weight(Branch b) const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);
  // Stable hash of the canonical JSON form.
  std::uint64_t hash() const;
  void validate() const;

  // Small configuration used by tests and CPU smoke runs.
  static ModelConfig toy();
};

}  // namespace ebench::qa
