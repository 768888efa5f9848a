#pragma once

// Synthetic benchmark data with a planted quality rule: each edited clip is
// its source plus Gaussian noise whose strength is the triplet's corruption
// level, and MOS falls linearly with that level.

#include <filesystem>
#include <vector>

#include "ebench/dataset.hpp"
#include "ebench/mos.hpp"
#include "ebench/qa_model.hpp"

namespace ebench::synth {

struct Options {
  int triplets = 32;
  int sources = 8;
  int frames = 4;
  int width = 16;
  int height = 16;
  double max_noise = 90.0;  // noise std at level 1, in 8-bit units
  std::uint64_t seed = 1;
};

struct Dataset {
  Manifest manifest;
  mos::MosTable mos;
  std::vector<double> levels;             // manifest order
  std::vector<qa::TripletClips> clips;    // manifest order
};

// MOS planted for a corruption level in [0, 1].
double planted_mos(double level);

Dataset make_dataset(const Options& options);

// Loader that serves the in-memory clips by triplet id.
qa::ClipLoader memory_loader(const Dataset& data);

// Ratings from `annotators` raters around the planted MOS, on the 1..10 scale.
std::vector<mos::RatingRecord> make_ratings(const Dataset& data, int annotators,
                                            std::uint64_t seed);

// Writes frame directories, manifest.json, mos.csv and ratings.csv under dir.
void write_dataset(const Dataset& data, const std::filesystem::path& dir, int annotators = 16);

}  // namespace ebench::synth
