#pragma once

// Shared fixtures and independent reference implementations for the tests.
// The oracles here deliberately take the slow, textbook route so they do not
// share code paths with the library.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ebench/dataset.hpp"
#include "ebench/image.hpp"
#include "ebench/mos.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("ebench-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline ebench::Frame random_frame(std::mt19937_64& rng, int w, int h) {
  ebench::Frame f(w, h);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& v : f.rgb) v = static_cast<std::uint8_t>(u(rng));
  return f;
}

inline ebench::VideoClip random_clip(std::mt19937_64& rng, int frames, int w, int h) {
  ebench::VideoClip c;
  for (int i = 0; i < frames; ++i) c.frames.push_back(random_frame(rng, w, h));
  return c;
}

inline ebench::VideoClip constant_clip(int frames, int w, int h, std::uint8_t v) {
  ebench::VideoClip c;
  for (int i = 0; i < frames; ++i) c.frames.emplace_back(w, h, v);
  return c;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -5,
                                         double hi = 5) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// --- correlation oracles ---------------------------------------------------

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

// Average rank by counting: rank = #less + (#equal + 1) / 2.
inline std::vector<double> oracle_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

inline double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return oracle_pearson(oracle_ranks(x), oracle_ranks(y));
}

// Kendall tau-b by enumerating every pair.
inline double oracle_kendall(const std::vector<double>& x, const std::vector<double>& y) {
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
}

inline double oracle_rmse(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

// --- study-screening oracle ---------------------------------------------

// 20 triplets with ground truth spread over 1..10, 16 raters scoring the truth
// with small deterministic noise, and one rater (index 16) scoring 11 - truth.
inline std::vector<ebench::mos::RatingRecord> inverted_rater_fixture() {
  std::vector<ebench::mos::RatingRecord> out;
  char tid[16], aid[16];
  for (int a = 0; a < 17; ++a) {
    std::snprintf(aid, sizeof aid, "rater%02d", a);
    for (int m = 0; m < 20; ++m) {
      std::snprintf(tid, sizeof tid, "t%02d", m);
      const double gt = 1.0 + 9.0 * m / 19.0;
      double score;
      if (a == 16) {
        score = 11.0 - gt;
      } else {
        score = std::clamp(gt + ((a * 7 + m * 3) % 5 - 2) * 0.5, 1.0, 10.0);
      }
      out.push_back({aid, tid, score, std::nullopt});
    }
  }
  return out;
}

// Textbook screening: per-item mean, sample std and moment-ratio kurtosis;
// returns the rejected rater ids.
inline std::vector<std::string> oracle_bt500(const std::vector<ebench::mos::RatingRecord>& rs) {
  std::map<std::string, std::vector<double>> item;
  for (const auto& r : rs) item[r.triplet_id].push_back(r.raw_score);
  std::map<std::string, std::pair<double, double>> band;
  for (const auto& [id, xs] : item) {
    const double n = static_cast<double>(xs.size());
    double mean = 0;
    for (double x : xs) mean += x / n;
    double m2 = 0, m4 = 0;
    for (double x : xs) {
      m2 += std::pow(x - mean, 2) / n;
      m4 += std::pow(x - mean, 4) / n;
    }
    const double sd = std::sqrt(m2 * n / (n - 1));
    const double kurt = m2 > 0 ? m4 / (m2 * m2) : 0;
    const double w = (kurt >= 2 && kurt <= 4 ? 2.0 : std::sqrt(20.0)) * sd;
    band[id] = {mean - w, mean + w};
  }
  std::map<std::string, std::array<int, 3>> count;  // P, Q, N
  for (const auto& r : rs) {
    auto& c = count[r.annotator_id];
    const auto [lo, hi] = band[r.triplet_id];
    if (r.raw_score > hi) ++c[0];
    if (r.raw_score < lo) ++c[1];
    ++c[2];
  }
  std::vector<std::string> rejected;
  for (const auto& [id, c] : count) {
    const int pq = c[0] + c[1];
    if (pq > 0 && static_cast<double>(pq) / c[2] > 0.05 &&
        std::abs(c[0] - c[1]) / static_cast<double>(pq) < 0.3) {
      rejected.push_back(id);
    }
  }
  return rejected;
}

inline std::vector<ebench::mos::RatingRecord> random_ratings(std::mt19937_64& rng,
                                                             int annotators, int items) {
  std::uniform_int_distribution<int> u(1, 10);
  std::vector<ebench::mos::RatingRecord> rs;
  for (int a = 0; a < annotators; ++a) {
    for (int m = 0; m < items; ++m) {
      rs.push_back({"a" + std::to_string(a), "t" + std::to_string(m),
                    static_cast<double>(u(rng)), std::nullopt});
    }
  }
  return rs;
}

// --- metric oracle -------------------------------------------------------

// Plain adjacent-frame MSE on [0, 1]-scaled RGB.
inline double oracle_adjacent_mse(const ebench::VideoClip& c) {
  double total = 0;
  for (int t = 0; t + 1 < c.frame_count(); ++t) {
    const auto& a = c.frames[t].rgb;
    const auto& b = c.frames[t + 1].rgb;
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = (a[i] - b[i]) / 255.0;
      s += d * d;
    }
    total += s / static_cast<double>(a.size());
  }
  return total / (c.frame_count() - 1);
}

// --- manifests -----------------------------------------------------------

inline ebench::Manifest random_manifest(std::mt19937_64& rng, int sources, int per_source_max) {
  std::vector<ebench::EditTriplet> ts;
  std::uniform_int_distribution<int> per(1, per_source_max);
  int id = 0;
  for (int s = 0; s < sources; ++s) {
    const int n = per(rng);
    for (int j = 0; j < n; ++j) {
      ebench::EditTriplet t;
      t.triplet_id = "t" + std::to_string(id++);
      t.source_video_id = "src" + std::to_string(s);
      t.source_path = "sources/" + t.source_video_id;
      t.edited_path = "edited/" + t.triplet_id;
      t.prompt = "make it blue";
      t.method = "m" + std::to_string(j % 3);
      t.category = static_cast<ebench::EditCategory>(j % 3);
      ts.push_back(std::move(t));
    }
  }
  return ebench::Manifest(std::move(ts), ".");
}

}  // namespace testing
