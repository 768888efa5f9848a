#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ebench::mos {

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 10.0;
// ITU guidance on the minimum number of observers in a subjective study.
inline constexpr int kMinParticipants = 15;

struct RatingRecord {
  std::string annotator_id;
  std::string triplet_id;
  double raw_score = 0;
  std::optional<std::string> timestamp;
};

struct NormalizedRating {
  std::string annotator_id;
  std::string triplet_id;
  double z = 0;
};

struct MosEntry {
  double mos = 0;
  int rating_count = 0;
  double dispersion = 0;  // sample std of contributing z-scores, 0 for one rating
};

struct MosTable {
  std::map<std::string, MosEntry> entries;
  std::vector<std::string> rejected_annotators;
};

// Per-annotator z-scores keyed by triplet_id. Sample (N-1) std; an annotator
// whose ratings are all equal maps to all-zero scores.
std::map<std::string, double> zscore_normalize(std::span<const RatingRecord> ratings);

struct AnnotatorScreening {
  std::string annotator_id;
  int ratings = 0;
  int above = 0;  // P
  int below = 0;  // Q
  bool rejected = false;
};

struct ScreeningResult {
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
  std::vector<AnnotatorScreening> details;  // sorted by annotator_id
};

// ITU-R BT.500 observer screening on raw scores.
ScreeningResult bt500_screen(std::span<const RatingRecord> ratings);

MosTable aggregate_mos(std::span<const NormalizedRating> ratings,
                       std::vector<std::string> rejected_annotators = {});

// Affine map of [min mos, max mos] onto [lo, hi]. Dispersion scales too.
MosTable rescale_mos(const MosTable& table, double lo, double hi);

struct PipelineResult {
  MosTable table;
  ScreeningResult screening;
  std::vector<std::string> warnings;
};

// screen (raw) -> z-score survivors -> aggregate.
PipelineResult run_pipeline(std::span<const RatingRecord> ratings);

// Rejects duplicate (annotator, triplet) pairs and out-of-range scores.
void validate_ratings(std::span<const RatingRecord> ratings);

// Header `annotator_id,triplet_id,raw_score,timestamp`. Errors carry line numbers.
std::vector<RatingRecord> read_ratings_csv(std::istream& in);
std::vector<RatingRecord> read_ratings_csv(const std::filesystem::path& path);
void write_ratings_csv(std::ostream& out, std::span<const RatingRecord> ratings);

// Header `triplet_id,mos,rating_count,dispersion`.
void write_mos_csv(std::ostream& out, const MosTable& table);
void write_mos_csv(const std::filesystem::path& path, const MosTable& table);
MosTable read_mos_csv(const std::filesystem::path& path);

}  // namespace ebench::mos
