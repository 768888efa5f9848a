#pragma once

// Single-file checkpoint:
//   "EBENCHCK" | u32 version | u64 header length | JSON header | f64 blobs
// The header lists the model config and its hash, stage, epoch, every
// parameter's name and size, and optimizer slot metadata. Blobs follow in
// header order: parameters, then each slot's m and v.

#include <filesystem>

#include <json.hpp>

#include "ebench/optimizer.hpp"
#include "ebench/qa_model.hpp"

namespace ebench::ckpt {

inline constexpr std::uint32_t kVersion = 1;

struct CheckpointInfo {
  int stage = 0;
  int epoch = 0;
  std::uint64_t config_hash = 0;
  nlohmann::json config;
};

void save(const std::filesystem::path& path, const qa::QaModel& model,
          const optim::Adam* optimizer, int stage, int epoch);

// Reads only the header.
CheckpointInfo peek(const std::filesystem::path& path);

// Restores parameters (and optimizer state when given). Throws
// CheckpointError if the file's config hash differs from the model's or the
// parameter layout does not match.
CheckpointInfo load(const std::filesystem::path& path, qa::QaModel& model,
                    optim::Adam* optimizer);

}  // namespace ebench::ckpt
