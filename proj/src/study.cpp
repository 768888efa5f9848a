#include "ebench/study.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <mutex>
#include <random>
#include <sstream>

#include "ebench/backends.hpp"
#include "ebench/error.hpp"
#include "ebench/mos.hpp"

namespace ebench::study {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string rater_key(const std::string& study_id, const std::string& annotator_id) {
  return study_id + '\n' + annotator_id;
}

bool valid_id(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

std::string media_url(const std::string& study_id, const fs::path& p) {
  return "/media/" + study_id + "/" + p.generic_string();
}

json item_json(const ItemPayload& i) {
  return {{"triplet_id", i.triplet_id},
          {"source_url", i.source_url},
          {"edited_url", i.edited_url},
          {"prompt", i.prompt}};
}

ItemPayload item_from(const json& j) {
  return {j.at("triplet_id"), j.at("source_url"), j.at("edited_url"), j.at("prompt")};
}

json config_json(const StudyConfig& c) {
  return {{"study_id", c.study_id},
          {"manifest", c.manifest},
          {"seed", c.seed},
          {"min_participants", c.min_participants},
          {"instructions", c.instructions},
          {"scale", {{"min", kMinScore}, {"max", kMaxScore}}}};
}

StudyConfig config_from(const json& j) {
  StudyConfig c;
  c.study_id = j.at("study_id");
  c.manifest = j.at("manifest");
  c.seed = j.at("seed");
  c.min_participants = j.at("min_participants");
  c.instructions = j.at("instructions");
  return c;
}

}  // namespace

std::string_view to_string(SessionStatus s) {
  return s == SessionStatus::active ? "active" : "complete";
}

std::vector<std::string> rater_permutation(const std::vector<std::string>& ids,
                                           std::uint64_t seed, const std::string& annotator_id) {
  std::vector<std::string> out = ids;
  std::mt19937_64 rng(seed ^ fnv1a(annotator_id));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

StudyStore::StudyStore(fs::path data_dir) : dir_(std::move(data_dir)) {
  fs::create_directories(dir_);
  const auto snap = dir_ / "snapshot.json";
  if (fs::exists(snap)) {
    std::ifstream in(snap);
    try {
      load_state(json::parse(in));
    } catch (const json::exception& e) {
      throw Error("study store: corrupt snapshot " + snap.string() + ": " + e.what());
    }
  }
  const auto log_path = dir_ / "log.jsonl";
  if (fs::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(log_offset_));
    std::string line;
    std::uint64_t good = log_offset_;
    while (true) {
      std::getline(in, line);
      if (in.eof()) break;  // no trailing newline: incomplete record
      if (!in) break;
      try {
        apply(json::parse(line));
      } catch (const std::exception& e) {
        throw Error("study store: corrupt log record at byte " + std::to_string(good) + ": " +
                    e.what());
      }
      good += line.size() + 1;
      ++since_snapshot_;
    }
    in.close();
    // Drop a torn final record left by a crash mid-append.
    if (fs::file_size(log_path) != good) fs::resize_file(log_path, good);
    log_offset_ = good;
  }
  log_.open(log_path, std::ios::binary | std::ios::app);
  if (!log_) throw Error("study store: cannot open " + log_path.string());
}

void StudyStore::append(const json& record) {
  const std::string line = record.dump() + "\n";
  log_.write(line.data(), static_cast<std::streamsize>(line.size()));
  log_.flush();
  if (!log_) throw Error("study store: failed to append to log");
  log_offset_ += line.size();
  apply(record);
  if (++since_snapshot_ >= kSnapshotInterval) write_snapshot_locked();
}

void StudyStore::apply(const json& r) {
  const std::string type = r.at("type");
  if (type == "study") {
    Study s;
    s.config = config_from(r.at("config"));
    s.media_root = r.at("media_root").get<std::string>();
    for (const auto& i : r.at("items")) {
      s.item_index[i.at("triplet_id")] = s.items.size();
      s.items.push_back(item_from(i));
    }
    next_study_ = std::max(next_study_, r.at("ordinal").get<std::uint64_t>() + 1);
    studies_[s.config.study_id] = std::move(s);
  } else if (type == "enroll") {
    Session s;
    s.session_id = r.at("session_id");
    s.study_id = r.at("study_id");
    s.annotator_id = r.at("annotator_id");
    s.items = r.at("items").get<std::vector<std::string>>();
    studies_.at(s.study_id).sessions.push_back(s.session_id);
    session_by_rater_[rater_key(s.study_id, s.annotator_id)] = s.session_id;
    if (s.items.empty()) s.status = SessionStatus::complete;
    sessions_[s.session_id] = std::move(s);
  } else if (type == "rating") {
    RatingRecord rec;
    rec.seq = r.at("seq");
    rec.study_id = r.at("study_id");
    rec.session_id = r.at("session_id");
    rec.annotator_id = r.at("annotator_id");
    rec.triplet_id = r.at("triplet_id");
    rec.score = r.at("score");
    rec.timestamp = r.at("timestamp");
    auto& s = sessions_.at(rec.session_id);
    s.scores[rec.triplet_id] = rec.score;
    s.cursor = std::min(s.cursor + 1, s.items.size());
    if (s.cursor == s.items.size()) s.status = SessionStatus::complete;
    next_seq_ = std::max(next_seq_, rec.seq + 1);
    ratings_.push_back(std::move(rec));
  } else {
    throw Error("unknown record type " + type);
  }
}

json StudyStore::state_json() const {
  json studies = json::array();
  for (const auto& [id, s] : studies_) {
    json items = json::array();
    for (const auto& i : s.items) items.push_back(item_json(i));
    studies.push_back({{"config", config_json(s.config)},
                       {"media_root", s.media_root.string()},
                       {"items", items},
                       {"sessions", s.sessions}});
  }
  json sessions = json::array();
  for (const auto& [id, s] : sessions_) {
    sessions.push_back({{"session_id", s.session_id},
                        {"study_id", s.study_id},
                        {"annotator_id", s.annotator_id},
                        {"items", s.items},
                        {"cursor", s.cursor},
                        {"scores", s.scores},
                        {"status", to_string(s.status)}});
  }
  json ratings = json::array();
  for (const auto& r : ratings_) {
    ratings.push_back({{"seq", r.seq},
                       {"study_id", r.study_id},
                       {"session_id", r.session_id},
                       {"annotator_id", r.annotator_id},
                       {"triplet_id", r.triplet_id},
                       {"score", r.score},
                       {"timestamp", r.timestamp}});
  }
  return {{"schema", kSchema},       {"log_offset", log_offset_}, {"next_seq", next_seq_},
          {"next_study", next_study_}, {"studies", studies},     {"sessions", sessions},
          {"ratings", ratings}};
}

void StudyStore::load_state(const json& doc) {
  log_offset_ = doc.at("log_offset");
  next_seq_ = doc.at("next_seq");
  next_study_ = doc.at("next_study");
  for (const auto& j : doc.at("studies")) {
    Study s;
    s.config = config_from(j.at("config"));
    s.media_root = j.at("media_root").get<std::string>();
    for (const auto& i : j.at("items")) {
      s.item_index[i.at("triplet_id")] = s.items.size();
      s.items.push_back(item_from(i));
    }
    s.sessions = j.at("sessions").get<std::vector<std::string>>();
    studies_[s.config.study_id] = std::move(s);
  }
  for (const auto& j : doc.at("sessions")) {
    Session s;
    s.session_id = j.at("session_id");
    s.study_id = j.at("study_id");
    s.annotator_id = j.at("annotator_id");
    s.items = j.at("items").get<std::vector<std::string>>();
    s.cursor = j.at("cursor");
    s.scores = j.at("scores").get<std::map<std::string, int>>();
    s.status = j.at("status") == "complete" ? SessionStatus::complete : SessionStatus::active;
    session_by_rater_[rater_key(s.study_id, s.annotator_id)] = s.session_id;
    sessions_[s.session_id] = std::move(s);
  }
  for (const auto& j : doc.at("ratings")) {
    ratings_.push_back({j.at("seq"), j.at("study_id"), j.at("session_id"), j.at("annotator_id"),
                        j.at("triplet_id"), j.at("score"), j.at("timestamp")});
  }
}

void StudyStore::write_snapshot_locked() {
  const auto path = dir_ / "snapshot.json";
  const auto tmp = dir_ / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << state_json().dump();
    if (!out) throw Error("study store: failed to write snapshot");
  }
  fs::rename(tmp, path);
  since_snapshot_ = 0;
}

void StudyStore::snapshot() {
  std::unique_lock lock(mutex_);
  write_snapshot_locked();
}

const Study& StudyStore::study_locked(const std::string& id) const {
  auto it = studies_.find(id);
  if (it == studies_.end()) throw NotFoundError("unknown study '" + id + "'");
  return it->second;
}

const Session& StudyStore::session_locked(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

std::string StudyStore::create_study(StudyConfig config, const Manifest& manifest) {
  if (manifest.empty()) throw ValidationError("study manifest has no triplets");
  if (config.min_participants < 1) throw ValidationError("min_participants must be at least 1");
  std::unique_lock lock(mutex_);
  if (config.study_id.empty()) {
    do {
      config.study_id = "study" + std::to_string(next_study_++);
    } while (studies_.count(config.study_id));
  } else if (!valid_id(config.study_id)) {
    throw ValidationError("study_id may only contain letters, digits, '-', '_' and '.'");
  } else if (studies_.count(config.study_id)) {
    throw ConflictError("study '" + config.study_id + "' already exists");
  }
  json items = json::array();
  for (const auto& t : manifest.triplets()) {
    items.push_back(item_json({t.triplet_id, media_url(config.study_id, t.source_path),
                               media_url(config.study_id, t.edited_path), t.prompt}));
  }
  append({{"type", "study"},
          {"ordinal", next_study_},
          {"config", config_json(config)},
          {"media_root", fs::absolute(manifest.base_dir()).string()},
          {"items", items}});
  return config.study_id;
}

Session StudyStore::enroll(const std::string& study_id, const std::string& annotator_id) {
  if (!valid_id(annotator_id)) {
    throw ValidationError("annotator_id may only contain letters, digits, '-', '_' and '.'");
  }
  std::unique_lock lock(mutex_);
  const Study& st = study_locked(study_id);
  if (auto it = session_by_rater_.find(rater_key(study_id, annotator_id));
      it != session_by_rater_.end()) {
    return sessions_.at(it->second);
  }
  std::vector<std::string> ids;
  for (const auto& i : st.items) ids.push_back(i.triplet_id);
  const std::string session_id =
      "s" + hex64(fnv1a(annotator_id, fnv1a(study_id + '\n')));
  append({{"type", "enroll"},
          {"session_id", session_id},
          {"study_id", study_id},
          {"annotator_id", annotator_id},
          {"items", rater_permutation(ids, st.config.seed, annotator_id)}});
  return sessions_.at(session_id);
}

NextItem StudyStore::next_item(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  const Session& s = session_locked(session_id);
  NextItem n;
  n.total = s.items.size();
  n.index = s.cursor;
  if (s.cursor >= s.items.size()) {
    n.done = true;
    return n;
  }
  const Study& st = study_locked(s.study_id);
  n.item = st.items.at(st.item_index.at(s.items[s.cursor]));
  return n;
}

RatingAck StudyStore::submit_rating(const std::string& session_id, const std::string& triplet_id,
                                    int score) {
  if (score < kMinScore || score > kMaxScore) {
    throw ValidationError("score " + std::to_string(score) + " is outside the " +
                          std::to_string(kMinScore) + ".." + std::to_string(kMaxScore) + " scale");
  }
  std::unique_lock lock(mutex_);
  const Session& s = session_locked(session_id);
  if (auto it = s.scores.find(triplet_id); it != s.scores.end()) {
    if (it->second == score) return {true, s.cursor, s.status, 0};
    throw ConflictError("triplet '" + triplet_id + "' was already rated " +
                        std::to_string(it->second) + " in this session");
  }
  if (s.status == SessionStatus::complete) {
    throw ConflictError("session '" + session_id + "' is complete");
  }
  if (s.items[s.cursor] != triplet_id) {
    throw ConflictError("out-of-order rating: expected '" + s.items[s.cursor] + "', got '" +
                        triplet_id + "'");
  }
  const std::uint64_t seq = next_seq_;
  append({{"type", "rating"},
          {"seq", seq},
          {"study_id", s.study_id},
          {"session_id", session_id},
          {"annotator_id", s.annotator_id},
          {"triplet_id", triplet_id},
          {"score", score},
          {"timestamp", utc_now()}});
  const Session& after = sessions_.at(session_id);
  return {false, after.cursor, after.status, seq};
}

std::string StudyStore::export_csv(const std::string& study_id) const {
  std::shared_lock lock(mutex_);
  study_locked(study_id);
  std::vector<mos::RatingRecord> rows;
  for (const auto& r : ratings_) {
    if (r.study_id == study_id) {
      rows.push_back({r.annotator_id, r.triplet_id, static_cast<double>(r.score), r.timestamp});
    }
  }
  std::ostringstream out;
  mos::write_ratings_csv(out, rows);
  return out.str();
}

Progress StudyStore::progress(const std::string& study_id) const {
  std::shared_lock lock(mutex_);
  const Study& st = study_locked(study_id);
  Progress p;
  p.study_id = study_id;
  p.min_participants = st.config.min_participants;
  for (const auto& sid : st.sessions) {
    const Session& s = sessions_.at(sid);
    AnnotatorProgress a{s.annotator_id, s.session_id, s.scores.size(), s.items.size(),
                        s.status == SessionStatus::complete};
    if (a.complete) ++p.complete;
    p.annotators.push_back(a);
  }
  p.enrolled = st.sessions.size();
  p.participant_warning = static_cast<int>(p.enrolled) < p.min_participants;
  return p;
}

Session StudyStore::session(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  return session_locked(session_id);
}

Study StudyStore::study(const std::string& study_id) const {
  std::shared_lock lock(mutex_);
  return study_locked(study_id);
}

std::vector<std::string> StudyStore::study_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : studies_) out.push_back(id);
  return out;
}

std::size_t StudyStore::record_count() const {
  std::shared_lock lock(mutex_);
  return ratings_.size();
}

}  // namespace ebench::study
