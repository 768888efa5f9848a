#pragma once

// Subjective-study state: studies, per-rater sessions and the rating log.
// Every mutation is appended to `log.jsonl` before it is applied; a snapshot
// of the full state (with the log offset it covers) is rewritten every
// kSnapshotInterval records, and startup replays snapshot + log tail.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebench/dataset.hpp"

namespace ebench::study {

inline constexpr const char* kSchema = "ebench.study/v1";
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;
inline constexpr std::size_t kSnapshotInterval = 256;

struct ItemPayload {
  std::string triplet_id;
  std::string source_url;
  std::string edited_url;
  std::string prompt;
};

struct StudyConfig {
  std::string study_id;  // generated when empty
  std::string manifest;  // path, recorded for audit
  std::uint64_t seed = 0;
  int min_participants = 15;
  std::string instructions =
      "Rate each edited video from 1 (worst) to 10 (best), considering text-video consistency, "
      "source-target fidelity, and overall visual quality.";
};

struct Study {
  StudyConfig config;
  std::filesystem::path media_root;  // manifest base directory
  std::vector<ItemPayload> items;    // manifest order
  std::map<std::string, std::size_t> item_index;
  std::vector<std::string> sessions;  // enrollment order
};

enum class SessionStatus { active, complete };

struct Session {
  std::string session_id;
  std::string study_id;
  std::string annotator_id;
  std::vector<std::string> items;  // permutation of the study's triplet ids
  std::size_t cursor = 0;
  std::map<std::string, int> scores;  // committed ratings
  SessionStatus status = SessionStatus::active;
};

struct RatingRecord {
  std::uint64_t seq = 0;
  std::string study_id;
  std::string session_id;
  std::string annotator_id;
  std::string triplet_id;
  int score = 0;
  std::string timestamp;
};

struct NextItem {
  bool done = false;
  std::size_t index = 0;
  std::size_t total = 0;
  std::optional<ItemPayload> item;
};

struct RatingAck {
  bool duplicate = false;
  std::size_t cursor = 0;
  SessionStatus status = SessionStatus::active;
  std::uint64_t seq = 0;
};

struct AnnotatorProgress {
  std::string annotator_id;
  std::string session_id;
  std::size_t rated = 0;
  std::size_t total = 0;
  bool complete = false;
};

struct Progress {
  std::string study_id;
  std::size_t enrolled = 0;
  std::size_t complete = 0;
  int min_participants = 15;
  bool participant_warning = false;  // fewer enrolled than min_participants
  std::vector<AnnotatorProgress> annotators;
};

std::string_view to_string(SessionStatus s);

// Session-specific permutation of `ids`, seeded by the study seed and the
// annotator id.
std::vector<std::string> rater_permutation(const std::vector<std::string>& ids,
                                           std::uint64_t seed, const std::string& annotator_id);

class StudyStore {
 public:
  // Opens (or creates) the store under data_dir and replays its state.
  explicit StudyStore(std::filesystem::path data_dir);

  std::string create_study(StudyConfig config, const Manifest& manifest);
  // Returns the existing session on re-enrollment.
  Session enroll(const std::string& study_id, const std::string& annotator_id);
  NextItem next_item(const std::string& session_id) const;
  RatingAck submit_rating(const std::string& session_id, const std::string& triplet_id, int score);
  // mos-pipeline ratings CSV of committed ratings, log order.
  std::string export_csv(const std::string& study_id) const;
  Progress progress(const std::string& study_id) const;

  Session session(const std::string& session_id) const;
  Study study(const std::string& study_id) const;
  std::vector<std::string> study_ids() const;
  std::size_t record_count() const;
  const std::filesystem::path& data_dir() const { return dir_; }

  // Forces a snapshot now.
  void snapshot();

 private:
  void apply(const nlohmann::json& record);
  void append(const nlohmann::json& record);
  void write_snapshot_locked();
  nlohmann::json state_json() const;
  void load_state(const nlohmann::json& doc);
  const Study& study_locked(const std::string& id) const;
  const Session& session_locked(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::ofstream log_;
  std::uint64_t log_offset_ = 0;
  std::size_t since_snapshot_ = 0;
  std::uint64_t next_seq_ = 1;
  std::uint64_t next_study_ = 1;
  std::map<std::string, Study> studies_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> session_by_rater_;  // study/annotator -> session
  std::vector<RatingRecord> ratings_;
};

}  // namespace ebench::study
