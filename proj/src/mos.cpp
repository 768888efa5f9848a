#include "ebench/mos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "ebench/csv.hpp"
#include "ebench/error.hpp"

namespace ebench::mos {

namespace {

struct Moments {
  double mean = 0;
  double sample_std = 0;
  double kurtosis = 0;  // m4 / m2^2, 0 when m2 == 0
};

// Sorting first makes the result independent of input order.
Moments moments(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  Moments m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double s2 = 0, s4 = 0;
  for (double x : xs) {
    const double d = x - m.mean;
    s2 += d * d;
    s4 += d * d * d * d;
  }
  m.sample_std = xs.size() > 1 ? std::sqrt(s2 / (n - 1)) : 0.0;
  const double m2 = s2 / n;
  const double m4 = s4 / n;
  m.kurtosis = m2 > 0 ? m4 / (m2 * m2) : 0.0;
  return m;
}

}  // namespace

void validate_ratings(std::span<const RatingRecord> ratings) {
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& r = ratings[i];
    if (!(r.raw_score >= kMinScore && r.raw_score <= kMaxScore)) {
      throw ValidationError("rating " + std::to_string(i) + " (" + r.annotator_id + ", " +
                            r.triplet_id + "): score " + csv::format_double(r.raw_score) +
                            " outside [1, 10]");
    }
    if (!seen.emplace(r.annotator_id, r.triplet_id).second) {
      throw ValidationError("duplicate rating by '" + r.annotator_id + "' for triplet '" +
                            r.triplet_id + "'");
    }
  }
}

std::map<std::string, double> zscore_normalize(std::span<const RatingRecord> ratings) {
  if (ratings.size() < 2) {
    throw ValidationError("zscore_normalize: annotator needs at least 2 ratings, has " +
                          std::to_string(ratings.size()));
  }
  std::vector<double> xs;
  xs.reserve(ratings.size());
  for (const auto& r : ratings) xs.push_back(r.raw_score);
  const auto m = moments(xs);
  std::map<std::string, double> out;
  for (const auto& r : ratings) {
    out[r.triplet_id] = m.sample_std > 0 ? (r.raw_score - m.mean) / m.sample_std : 0.0;
  }
  return out;
}

ScreeningResult bt500_screen(std::span<const RatingRecord> ratings) {
  validate_ratings(ratings);
  std::map<std::string, std::vector<const RatingRecord*>> by_annotator;
  std::map<std::string, std::vector<double>> by_triplet;
  for (const auto& r : ratings) {
    by_annotator[r.annotator_id].push_back(&r);
    by_triplet[r.triplet_id].push_back(r.raw_score);
  }
  if (by_annotator.size() < 2) {
    throw ValidationError("bt500_screen: degenerate study with " +
                          std::to_string(by_annotator.size()) + " annotator(s)");
  }
  for (const auto& [id, rs] : by_annotator) {
    if (rs.size() < 2) {
      throw ValidationError("bt500_screen: annotator '" + id + "' rated fewer than 2 triplets");
    }
  }

  struct Band {
    double lo, hi;
  };
  std::map<std::string, Band> bands;
  for (const auto& [tid, xs] : by_triplet) {
    if (xs.size() < 2) {
      throw ValidationError("bt500_screen: triplet '" + tid + "' was rated only once");
    }
    const auto m = moments(xs);
    const bool normal = m.kurtosis >= 2.0 && m.kurtosis <= 4.0;
    const double width = (normal ? 2.0 : std::sqrt(20.0)) * m.sample_std;
    bands[tid] = {m.mean - width, m.mean + width};
  }

  ScreeningResult result;
  for (const auto& [id, rs] : by_annotator) {
    AnnotatorScreening s;
    s.annotator_id = id;
    s.ratings = static_cast<int>(rs.size());
    for (const auto* r : rs) {
      const auto& band = bands.at(r->triplet_id);
      if (r->raw_score > band.hi) ++s.above;
      if (r->raw_score < band.lo) ++s.below;
    }
    const int pq = s.above + s.below;
    s.rejected = pq > 0 && static_cast<double>(pq) / s.ratings > 0.05 &&
                 std::abs(s.above - s.below) / static_cast<double>(pq) < 0.3;
    (s.rejected ? result.rejected : result.accepted).push_back(id);
    result.details.push_back(s);
  }
  return result;
}

MosTable aggregate_mos(std::span<const NormalizedRating> ratings,
                       std::vector<std::string> rejected_annotators) {
  const std::set<std::string> rejected(rejected_annotators.begin(), rejected_annotators.end());
  std::map<std::string, std::vector<double>> by_triplet;
  for (const auto& r : ratings) {
    if (rejected.count(r.annotator_id)) continue;
    by_triplet[r.triplet_id].push_back(r.z);
  }
  MosTable table;
  for (auto& [tid, zs] : by_triplet) {
    std::sort(zs.begin(), zs.end());
    const auto m = moments(zs);
    table.entries[tid] = MosEntry{m.mean, static_cast<int>(zs.size()), m.sample_std};
  }
  std::sort(rejected_annotators.begin(), rejected_annotators.end());
  table.rejected_annotators = std::move(rejected_annotators);
  return table;
}

MosTable rescale_mos(const MosTable& table, double lo, double hi) {
  if (table.entries.empty()) throw ValidationError("rescale_mos: empty table");
  if (!(lo < hi)) throw ValidationError("rescale_mos: requires lo < hi");
  double mn = table.entries.begin()->second.mos, mx = mn;
  for (const auto& [_, e] : table.entries) {
    mn = std::min(mn, e.mos);
    mx = std::max(mx, e.mos);
  }
  if (!(mx > mn)) throw ValidationError("rescale_mos: all MOS values are equal (zero range)");
  const double scale = (hi - lo) / (mx - mn);
  MosTable out = table;
  for (auto& [_, e] : out.entries) {
    e.mos = lo + (e.mos - mn) * scale;
    e.dispersion *= scale;
  }
  return out;
}

PipelineResult run_pipeline(std::span<const RatingRecord> ratings) {
  PipelineResult result;
  result.screening = bt500_screen(ratings);

  const std::set<std::string> accepted(result.screening.accepted.begin(),
                                       result.screening.accepted.end());
  if (accepted.size() + result.screening.rejected.size() <
      static_cast<std::size_t>(kMinParticipants)) {
    result.warnings.push_back("study has " +
                              std::to_string(accepted.size() + result.screening.rejected.size()) +
                              " annotators; ITU guidance asks for at least " +
                              std::to_string(kMinParticipants));
  }

  std::map<std::string, std::vector<RatingRecord>> by_annotator;
  std::set<std::string> all_triplets;
  for (const auto& r : ratings) {
    all_triplets.insert(r.triplet_id);
    if (accepted.count(r.annotator_id)) by_annotator[r.annotator_id].push_back(r);
  }
  std::vector<NormalizedRating> normalized;
  for (const auto& [id, rs] : by_annotator) {
    for (const auto& [tid, z] : zscore_normalize(rs)) normalized.push_back({id, tid, z});
  }
  result.table = aggregate_mos(normalized, result.screening.rejected);

  std::vector<std::string> missing;
  for (const auto& tid : all_triplets)
    if (!result.table.entries.count(tid)) missing.push_back(tid);
  if (!missing.empty()) {
    std::string msg = "triplets left with zero accepted ratings after screening:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  return result;
}

std::vector<RatingRecord> read_ratings_csv(std::istream& in) {
  const auto table = csv::parse(in);
  const auto c_ann = table.column("annotator_id");
  const auto c_tid = table.column("triplet_id");
  const auto c_score = table.column("raw_score");
  std::optional<std::size_t> c_ts;
  if (std::find(table.header.begin(), table.header.end(), "timestamp") != table.header.end()) {
    c_ts = table.column("timestamp");
  }
  std::vector<RatingRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : table.rows) {
    const auto where = "line " + std::to_string(row.line);
    RatingRecord r;
    r.annotator_id = row.fields[c_ann];
    r.triplet_id = row.fields[c_tid];
    if (r.annotator_id.empty() || r.triplet_id.empty()) {
      throw ValidationError(where + ": empty annotator_id or triplet_id");
    }
    try {
      std::size_t used = 0;
      r.raw_score = std::stod(row.fields[c_score], &used);
      if (used != row.fields[c_score].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(where + ": raw_score '" + row.fields[c_score] + "' is not a number");
    }
    if (!(r.raw_score >= kMinScore && r.raw_score <= kMaxScore)) {
      throw ValidationError(where + ": raw_score " + row.fields[c_score] + " outside [1, 10]");
    }
    if (c_ts && !row.fields[*c_ts].empty()) r.timestamp = row.fields[*c_ts];
    if (!seen.emplace(r.annotator_id, r.triplet_id).second) {
      throw ValidationError(where + ": duplicate rating by '" + r.annotator_id +
                            "' for triplet '" + r.triplet_id + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RatingRecord> read_ratings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ratings '" + path.string() + "'");
  return read_ratings_csv(in);
}

void write_ratings_csv(std::ostream& out, std::span<const RatingRecord> ratings) {
  csv::write_row(out, {"annotator_id", "triplet_id", "raw_score", "timestamp"});
  for (const auto& r : ratings) {
    csv::write_row(out, {r.annotator_id, r.triplet_id, csv::format_double(r.raw_score),
                         r.timestamp.value_or("")});
  }
}

void write_mos_csv(std::ostream& out, const MosTable& table) {
  csv::write_row(out, {"triplet_id", "mos", "rating_count", "dispersion"});
  for (const auto& [tid, e] : table.entries) {
    csv::write_row(out, {tid, csv::format_double(e.mos), std::to_string(e.rating_count),
                         csv::format_double(e.dispersion)});
  }
}

void write_mos_csv(const std::filesystem::path& path, const MosTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_mos_csv(out, table);
}

MosTable read_mos_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto c_tid = table.column("triplet_id");
  const auto c_mos = table.column("mos");
  const auto c_n = table.column("rating_count");
  const auto c_d = table.column("dispersion");
  MosTable out;
  for (const auto& row : table.rows) {
    const auto where = path.string() + " line " + std::to_string(row.line);
    MosEntry e;
    try {
      e.mos = std::stod(row.fields[c_mos]);
      e.rating_count = std::stoi(row.fields[c_n]);
      e.dispersion = std::stod(row.fields[c_d]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": malformed numeric field");
    }
    if (e.rating_count < 1) throw ValidationError(where + ": rating_count must be >= 1");
    if (!out.entries.emplace(row.fields[c_tid], e).second) {
      throw ValidationError(where + ": duplicate triplet_id '" + row.fields[c_tid] + "'");
    }
  }
  return out;
}

}  // namespace ebench::mos
