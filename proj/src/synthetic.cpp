#include "ebench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "ebench/error.hpp"
#include "ebench/video_io.hpp"

namespace ebench::synth {

namespace {

std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

VideoClip make_source(int index, const Options& o, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base[3] = {60 + 140 * u(rng), 60 + 140 * u(rng), 60 + 140 * u(rng)};
  const double fx = 0.2 + 0.4 * u(rng), fy = 0.2 + 0.4 * u(rng);
  const double phase = 6.28 * u(rng);
  VideoClip clip;
  for (int t = 0; t < o.frames; ++t) {
    Frame f(o.width, o.height);
    for (int y = 0; y < o.height; ++y) {
      for (int x = 0; x < o.width; ++x) {
        // Smooth pattern drifting one pixel per frame.
        const double s = std::sin(fx * (x + t) + phase) * std::cos(fy * y + 0.3 * index);
        for (int c = 0; c < 3; ++c) f.at(x, y, c) = clamp8(base[c] + 50 * s * (c + 1) / 3.0);
      }
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

VideoClip corrupt(const VideoClip& src, double level, double max_noise, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  VideoClip out = src;
  for (auto& f : out.frames) {
    for (auto& v : f.rgb) v = clamp8(v + level * max_noise * noise(rng));
  }
  return out;
}

}  // namespace

double planted_mos(double level) { return 10.0 - 9.0 * level; }

Dataset make_dataset(const Options& o) {
  if (o.triplets < 2 || o.sources < 1 || o.frames < 2 || o.width < 1 || o.height < 1) {
    throw ValidationError("synthetic dataset: invalid options");
  }
  std::mt19937_64 rng(o.seed);
  std::vector<VideoClip> sources;
  for (int s = 0; s < o.sources; ++s) sources.push_back(make_source(s, o, rng));

  // Evenly spaced levels assigned in shuffled order.
  std::vector<double> levels(o.triplets);
  for (int i = 0; i < o.triplets; ++i) levels[i] = static_cast<double>(i) / (o.triplets - 1);
  std::shuffle(levels.begin(), levels.end(), rng);

  static const char* adjectives[] = {"snowy", "golden", "neon", "watercolor", "vintage", "stormy"};
  static const char* subjects[] = {"city street", "forest", "beach", "dog", "car", "mountain"};
  static const EditCategory categories[] = {EditCategory::style, EditCategory::semantic,
                                            EditCategory::structural};
  Dataset d;
  std::vector<EditTriplet> triplets;
  char buf[32];
  for (int i = 0; i < o.triplets; ++i) {
    const int s = i % o.sources;
    EditTriplet t;
    std::snprintf(buf, sizeof buf, "t%03d", i);
    t.triplet_id = buf;
    std::snprintf(buf, sizeof buf, "src%02d", s);
    t.source_video_id = buf;
    t.source_path = "sources/" + t.source_video_id;
    t.edited_path = "edited/" + t.triplet_id;
    t.prompt = std::string("a ") + adjectives[i % 6] + " " + subjects[s % 6];
    t.source_prompt = std::string("a ") + subjects[s % 6];
    t.method = "method" + std::to_string(i % 4);
    t.category = categories[i % 3];
    t.subcategory = std::string(to_string(t.category)) + "-" + std::to_string(i % 2);
    triplets.push_back(t);

    qa::TripletClips clips;
    clips.source = sources[s];
    clips.edited = corrupt(sources[s], levels[i], o.max_noise, rng);
    clips.prompt = t.prompt;
    d.clips.push_back(std::move(clips));
    d.mos.entries[t.triplet_id] = {planted_mos(levels[i]), 1, 0.0};
  }
  d.levels = levels;
  d.manifest = Manifest(std::move(triplets), std::filesystem::path("."));
  return d;
}

qa::ClipLoader memory_loader(const Dataset& data) {
  auto index = std::make_shared<std::map<std::string, const qa::TripletClips*>>();
  for (std::size_t i = 0; i < data.manifest.size(); ++i) {
    (*index)[data.manifest.triplets()[i].triplet_id] = &data.clips[i];
  }
  return [index](const EditTriplet& t) {
    auto it = index->find(t.triplet_id);
    if (it == index->end()) throw NotFoundError("no synthetic clips for " + t.triplet_id);
    return *it->second;
  };
}

std::vector<mos::RatingRecord> make_ratings(const Dataset& data, int annotators,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.7);
  std::vector<mos::RatingRecord> out;
  for (int a = 0; a < annotators; ++a) {
    const std::string id = "rater" + std::to_string(a);
    const double bias = (a % 5 - 2) * 0.3;
    for (const auto& t : data.manifest.triplets()) {
      const double m = data.mos.entries.at(t.triplet_id).mos;
      const double s = std::clamp(std::round(m + bias + noise(rng)), mos::kMinScore, mos::kMaxScore);
      out.push_back({id, t.triplet_id, s, std::nullopt});
    }
  }
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir, int annotators) {
  std::filesystem::create_directories(dir);
  std::map<std::string, bool> written;
  for (std::size_t i = 0; i < data.manifest.size(); ++i) {
    const auto& t = data.manifest.triplets()[i];
    if (!written[t.source_video_id]) {
      write_frame_directory(dir / t.source_path, data.clips[i].source);
      written[t.source_video_id] = true;
    }
    write_frame_directory(dir / t.edited_path, data.clips[i].edited);
  }
  write_manifest(data.manifest, dir / "manifest.json");
  mos::write_mos_csv(dir / "mos.csv", data.mos);
  if (annotators > 0) {
    std::ofstream out(dir / "ratings.csv");
    mos::write_ratings_csv(out, make_ratings(data, annotators, 17));
  }
}

}  // namespace ebench::synth
