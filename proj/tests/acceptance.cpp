// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each check also enforces its runtime budget.
#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "ebench/correlation.hpp"
#include "ebench/losses.hpp"
#include "ebench/metrics.hpp"
#include "ebench/mos.hpp"
#include "ebench/study_server.hpp"
#include "ebench/synthetic.hpp"
#include "ebench/training.hpp"
#include "ebench/video_io.hpp"
#include "support.hpp"

using namespace ebench;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.require(secs < budget_s, "over the " + std::to_string(budget_s) + " s budget");
  char line[512];
  std::snprintf(line, sizeof line, "%s %-22s %8.2fs  %s", c.ok ? "PASS" : "FAIL", name.c_str(),
                secs, c.detail.c_str());
  std::puts(line);
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

std::vector<mos::RatingRecord> one_rater(const std::vector<double>& xs) {
  std::vector<mos::RatingRecord> rs;
  for (std::size_t i = 0; i < xs.size(); ++i) rs.push_back({"a", "t" + std::to_string(i), xs[i], {}});
  return rs;
}

class IdenticalEmbedding final : public EmbeddingBackend {
 public:
  std::size_t dim() const override { return 3; }
  Embedding embed_image(const Frame&) const override { return {0.6, 0.0, 0.8}; }
  Embedding embed_text(std::string_view) const override { return {1.0, 0.0, 0.0}; }
  std::string name() const override { return "identical"; }
};

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

void correlation_oracles(Check& c) {
  std::mt19937_64 rng(101);
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 8;
    std::vector<double> x, y;
    do {
      x = testing::random_vector(rng, n);
      y = testing::random_vector(rng, n);
      if (trial % 4 == 0) {
        for (auto& v : x) v = std::round(v);
        for (auto& v : y) v = std::round(v);
      }
    } while (constant(x) || constant(y));
    worst = std::max({worst, std::abs(eval::plcc(x, y) - testing::oracle_pearson(x, y)),
                      std::abs(eval::srocc(x, y) - testing::oracle_spearman(x, y)),
                      std::abs(eval::krcc(x, y) - testing::oracle_kendall(x, y)),
                      std::abs(eval::rmse(x, y) - testing::oracle_rmse(x, y))});
  }
  c.require(worst < 1e-9, "oracle mismatch " + fmt("%.3g", worst));
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4}, p{1, 2, 3}, q{1, 3, 2};
  c.require(std::abs(eval::srocc(a, b) - 0.8) < 1e-15, "srocc worked example");
  c.require(std::abs(eval::krcc(p, q) - 1.0 / 3) < 1e-15, "krcc worked example");
  c.detail = c.ok ? "max |err| " + fmt("%.2g", worst) : c.detail;
}

void zscore_suite(Check& c) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> len(2, 40);
  std::uniform_real_distribution<double> u(1, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(len(rng));
    for (auto& x : xs) x = u(rng);
    const auto z = mos::zscore_normalize(one_rater(xs));
    double mean = 0;
    for (const auto& [_, v] : z) mean += v / z.size();
    double var = 0;
    for (const auto& [_, v] : z) var += (v - mean) * (v - mean) / (z.size() - 1);
    c.require(std::abs(mean) < 1e-9, "mean off zero");
    c.require(std::abs(std::sqrt(var) - 1.0) < 1e-9, "std off one");
  }
  const auto z = mos::zscore_normalize(one_rater({2, 4, 6}));
  c.require(std::abs(z.at("t0") + 1) < 1e-12 && std::abs(z.at("t1")) < 1e-12 &&
                std::abs(z.at("t2") - 1) < 1e-12,
            "{2,4,6} example");
}

void bt500_fixture(Check& c) {
  const auto r = mos::bt500_screen(testing::inverted_rater_fixture());
  c.require(r.rejected == std::vector<std::string>{"rater16"}, "rejected set differs");
  c.require(r.accepted.size() == 16, "accepted count");
  c.detail = c.ok ? "rejected rater16 only" : c.detail;
}

void metric_identities(Check& c) {
  IdenticalEmbedding stub;
  std::mt19937_64 rng(5);
  c.require(std::abs(metrics::clip_f(testing::random_clip(rng, 4, 16, 16), stub).aggregate - 1.0) <
                1e-12,
            "clip_f on identical embeddings");
  ZeroFlowBackend zero;
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const auto clip = testing::random_clip(rng, 4, 16, 16);
    worst = std::max(worst,
                     std::abs(metrics::warp_mse(clip, zero).aggregate - testing::oracle_adjacent_mse(clip)));
  }
  c.require(worst < 1e-9, "warp_mse vs oracle " + fmt("%.3g", worst));
  const auto f = testing::random_frame(rng, 32, 32);
  c.require(std::abs(metrics::ssim(f, f) - 1.0) < 1e-12, "ssim(x,x)");
  const double s = metrics::ssim(Frame(16, 16, 0), Frame(16, 16, 255));
  c.require(std::abs(s - 1.0e-4) < 1e-6, "constant ssim " + fmt("%.6g", s));
  c.require(std::abs(metrics::s_edit(0.3, 0.02) - 15.0) < 1e-12, "s_edit");
  c.require(std::abs(metrics::q_edit(0.9, 0.3) - 0.27) < 1e-12, "q_edit");
  if (c.ok) c.detail = "ssim(0,255) = " + fmt("%.7g", s);
}

void loss_suite(Check& c) {
  const std::vector<double> gt{1, 2, 3, 4, 5};
  std::vector<double> lin, anti;
  for (double g : gt) {
    lin.push_back(0.4 * g - 2);
    anti.push_back(-g);
  }
  c.require(std::abs(loss::total_loss(lin, gt, 0.3).value) < 1e-12, "total on perfect");
  c.require(std::abs(loss::plcc_loss(anti, gt).value - 1.0) < 1e-12, "plcc on anticorrelated");
  const std::vector<double> p01{0, 1}, p10{1, 0};
  c.require(std::abs(loss::rank_loss(p01, p10).value - 1.0) < 1e-12, "rank((0,1),(1,0))");

  std::mt19937_64 rng(13);
  int checked = 0;
  double worst = 0;
  while (checked < 50) {
    const auto p = testing::random_vector(rng, 8, -2, 2);
    const auto g = testing::random_vector(rng, 8, 0, 10);
    double gap = 1e9;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (g[i] > g[j]) gap = std::min(gap, std::abs(p[j] - p[i]));
    if (gap < 1e-3) continue;
    ++checked;
    const auto an = loss::total_loss(p, g, 0.3);
    for (int i = 0; i < 8; ++i) {
      auto hi = p, lo = p;
      hi[i] += 1e-6;
      lo[i] -= 1e-6;
      const double num =
          (loss::total_loss(hi, g, 0.3).value - loss::total_loss(lo, g, 0.3).value) / 2e-6;
      const double rel = std::abs(num - an.grad[i]) / std::max({std::abs(num), std::abs(an.grad[i]), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  c.require(worst < 1e-3, "gradient rel err " + fmt("%.3g", worst));
  if (c.ok) c.detail = "max grad rel err " + fmt("%.2g", worst);
}

std::map<std::string, std::uint64_t> checksums(const qa::QaModel& m) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& g : m.params().groups()) out[g] = m.params().checksum(g);
  return out;
}

void freezing(Check& c) {
  synth::Options o;
  o.triplets = 16;
  o.sources = 4;
  const auto data = synth::make_dataset(o);
  const auto samples = train::make_samples(data.manifest, data.mos, synth::memory_loader(data));
  qa::QaModel model(qa::ModelConfig::toy());
  train::TrainConfig tc;
  tc.stage1_epochs = 3;
  tc.stage2_epochs = 3;
  train::Trainer trainer(model, tc);
  const auto init = checksums(model);
  trainer.train_stage1(samples);
  const auto s1 = checksums(model);
  for (const auto& g : qa::QaModel::backbone_groups()) c.require(s1.at(g) == init.at(g), g + " moved in stage 1");
  for (const auto& g : qa::QaModel::head_groups()) c.require(s1.at(g) != init.at(g), g + " static in stage 1");
  trainer.train_stage2(samples);
  const auto s2 = checksums(model);
  for (const char* g : {"vl_visual", "vl_text"}) {
    c.require(s2.at(g) == init.at(g), std::string(g) + " moved in stage 2");
  }
  for (const char* g : {"aesthetic", "technical"}) {
    c.require(s2.at(g) != s1.at(g), std::string(g) + " static in stage 2");
  }
}

void overfit(Check& c) {
  const auto data = synth::make_dataset(synth::Options{});
  const auto samples = train::make_samples(data.manifest, data.mos, synth::memory_loader(data));
  mos::MosTable& table = const_cast<mos::MosTable&>(data.mos);

  // Held-in: train on all 32 and check the fit every few epochs.
  qa::QaModel model(qa::ModelConfig::toy());
  train::TrainConfig tc;
  tc.stage1_epochs = 100;
  tc.stage2_epochs = 100;
  train::Trainer trainer(model, tc);
  double held_in = -1;
  int reached = -1;
  int epoch = 0;
  for (int stage = 1; stage <= 2 && reached < 0; ++stage) {
    trainer.configure_stage(stage);
    const int n = stage == 1 ? tc.stage1_epochs : tc.stage2_epochs;
    for (int e = 0; e < n; ++e, ++epoch) {
      trainer.run_epoch(samples, stage, epoch);
      if ((epoch + 1) % 5 == 0) {
        held_in = eval::correlate_report(train::predict(model, samples), table).srocc;
        if (held_in >= 0.9) {
          reached = epoch + 1;
          break;
        }
      }
    }
  }
  c.require(reached > 0, "held-in SROCC " + fmt("%.3f", held_in) + " after 200 epochs");

  // Held-out: 2-fold cross-validation by source.
  const auto split = make_folds(data.manifest, 2, 1);
  train::TrainConfig cv;
  cv.stage1_epochs = 30;
  cv.stage2_epochs = 30;
  const auto result = train::run_kfold(data.manifest, table, split, qa::ModelConfig::toy(), cv, samples);
  double lowest = 1;
  std::string per_fold;
  for (const auto& f : result.folds) {
    lowest = std::min(lowest, f.report.srocc);
    per_fold += (per_fold.empty() ? "" : "/") + fmt("%.3f", f.report.srocc);
  }
  c.require(lowest >= 0.7, "held-out SROCC " + per_fold);
  if (c.ok) {
    c.detail = "held-in " + fmt("%.3f", held_in) + " at epoch " + std::to_string(reached) +
               "; held-out " + per_fold;
  }
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "resolved_config.json") continue;
    out[fs::relative(e.path(), root).generic_string()] = testing::read_text(e.path());
  }
  return out;
}

void protocol(Check& c) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto m = testing::random_manifest(rng, 10 + t % 15, 5);
    const int k = 2 + t % 9;
    const auto split = make_folds(m, k, t);
    std::set<std::string> seen;
    for (int f = 0; f < k; ++f) {
      const auto held = split.triplets_in(m, f, true);
      const auto train_ids = split.triplets_in(m, f, false);
      std::set<std::string> held_src;
      for (const auto& id : held) {
        held_src.insert(m.at(id).source_video_id);
        c.require(seen.insert(id).second, "triplet held out twice");
      }
      for (const auto& id : train_ids) {
        c.require(!held_src.count(m.at(id).source_video_id), "source leaks across folds");
      }
      c.require(held.size() + train_ids.size() == m.size(), "fold does not partition");
    }
    c.require(seen.size() == m.size(), "triplet never held out");
  }

  synth::Options o;
  o.triplets = 16;
  o.sources = 4;
  const auto data = synth::make_dataset(o);
  const auto samples = train::make_samples(data.manifest, data.mos, synth::memory_loader(data));
  train::TrainConfig tc;
  tc.stage1_epochs = 2;
  tc.stage2_epochs = 1;
  const auto split = make_folds(data.manifest, 4, 2);
  const auto kf = train::run_kfold(data.manifest, data.mos, split, qa::ModelConfig::toy(), tc, samples);
  for (const auto& f : kf.folds) {
    const auto held = split.triplets_in(data.manifest, f.fold, true);
    for (const auto& id : f.train_ids) {
      c.require(std::find(held.begin(), held.end(), id) == held.end(), "fold trained on held-out " + id);
    }
  }

  // Whole pipeline twice from the same seed.
  testing::TempDir dir("accept");
  testing::write_text(dir / "train.json", R"({"stage1_epochs": 2, "stage2_epochs": 1})");
  for (const char* run : {"a", "b"}) {
    const auto root = dir / run;
    const auto d = (root / "data").string();
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--out", d, "--triplets", "16", "--sources", "4", "--seed", "5"},
        {"mos", "--ratings", d + "/ratings.csv", "--out", (root / "mos").string()},
        {"metrics", "--manifest", d + "/manifest.json", "--metric", "s_edit", "--metric", "q_edit",
         "--out", (root / "metrics").string()},
        {"tenfold", "--manifest", d + "/manifest.json", "--mos", (root / "mos" / "mos.csv").string(),
         "--train-config", (dir / "train.json").string(), "--k", "4", "--seed", "5", "--out",
         (root / "cv").string()}};
    for (const auto& s : steps) {
      const int code = cli::run(s);
      c.require(code == cli::kExitOk, s[0] + " exited " + std::to_string(code));
    }
  }
  const auto a = read_tree(dir / "a"), b = read_tree(dir / "b");
  c.require(a.size() > 10, "pipeline produced too few files");
  c.require(a == b, "pipeline outputs differ between seeded runs");
  if (c.ok) c.detail = std::to_string(a.size()) + " output files byte-identical";
}

void ablation(Check& c) {
  std::mt19937_64 rng(9);
  const auto src = testing::random_clip(rng, 4, 16, 16);
  const auto ed = testing::random_clip(rng, 4, 16, 16);
  const auto src2 = testing::random_clip(rng, 4, 16, 16);
  const auto ed2 = testing::random_clip(rng, 4, 16, 16);
  const std::vector<double> gt{2.0, 7.0};
  int combos = 0;
  for (auto text : {qa::TextEncoder::clip, qa::TextEncoder::blip}) {
    for (auto temporal : {qa::Temporal::none, qa::Temporal::vswin, qa::Temporal::mvd,
                          qa::Temporal::uniformer}) {
      for (auto fusion : {qa::Fusion::none, qa::Fusion::mca, qa::Fusion::concat}) {
        auto cfg = qa::ModelConfig::toy();
        cfg.text = text;
        cfg.temporal = temporal;
        cfg.fusion = fusion;
        const std::string name = std::string(qa::to_string(text)) + "/" +
                                 std::string(qa::to_string(temporal)) + "/" +
                                 std::string(qa::to_string(fusion));
        qa::QaModel model(cfg);
        for (auto& p : model.params().all()) p.tensor.set_requires_grad(true);
        const auto o1 = model.forward(src, ed, "make it snow");
        const auto o2 = model.forward(src2, ed2, "make it snow");
        const auto l = loss::total_loss_node(nn::concat_rows({o1.final, o2.final}), gt, 0.3);
        nn::backward(l);
        bool grads_finite = true;
        for (const auto& p : model.params().all())
          for (double g : p.tensor.grad()) grads_finite = grads_finite && std::isfinite(g);
        c.require(std::isfinite(l.item()), name + " loss not finite");
        c.require(grads_finite, name + " gradient not finite");
        ++combos;
      }
    }
  }
  c.require(combos == 24, "expected 24 combinations");
  if (c.ok) c.detail = std::to_string(combos) + " configurations";
}

void study_round_trip(Check& c) {
  testing::TempDir dir("accept");
  std::mt19937_64 rng(3);
  std::vector<EditTriplet> ts;
  for (int i = 0; i < 5; ++i) {
    EditTriplet t;
    t.triplet_id = "t" + std::to_string(i);
    t.source_video_id = "s";
    t.source_path = "src";
    t.edited_path = "ed" + std::to_string(i);
    t.prompt = "p";
    t.method = "m";
    write_frame_directory(dir / t.edited_path.string(), testing::random_clip(rng, 2, 4, 4));
    ts.push_back(t);
  }
  write_frame_directory(dir / "src", testing::random_clip(rng, 2, 4, 4));
  write_manifest(Manifest(ts, dir.path()), dir / "manifest.json");

  study::StudyStore store(dir / "data");
  study::StudyServer server(store);
  httplib::Client cli("127.0.0.1", server.start());
  auto post = [&](const std::string& path, const nlohmann::json& body) {
    auto r = cli.Post(path, body.dump(), "application/json");
    if (!r) throw std::runtime_error("no response from " + path);
    return std::pair{r->status, r->body.empty() ? nlohmann::json{} : nlohmann::json::parse(r->body)};
  };
  c.require(post("/studies", {{"manifest", (dir / "manifest.json").string()}, {"study_id", "acc"}})
                    .first == 201,
            "create study");
  std::map<std::string, std::vector<double>> given;
  for (int r = 0; r < 2; ++r) {
    const auto [st, session] = post("/studies/acc/enroll", {{"annotator_id", "r" + std::to_string(r)}});
    const std::string sid = session.at("session_id");
    bool probed = false;
    while (true) {
      const auto next = nlohmann::json::parse(cli.Get("/sessions/" + sid + "/next")->body);
      if (next.at("done")) break;
      const std::string tid = next.at("item").at("triplet_id");
      if (!probed) {
        probed = true;
        c.require(post("/sessions/" + sid + "/ratings", {{"triplet_id", tid}, {"score", 0}}).first == 400,
                  "out-of-range accepted");
        const std::string other = tid == "t0" ? "t1" : "t0";
        c.require(post("/sessions/" + sid + "/ratings", {{"triplet_id", other}, {"score", 5}}).first == 409,
                  "out-of-order accepted");
      }
      const int score = 1 + (tid.back() - '0') * 2 + r;
      given[tid].push_back(score);
      c.require(post("/sessions/" + sid + "/ratings", {{"triplet_id", tid}, {"score", score}}).first == 200,
                "rating rejected");
    }
  }
  std::istringstream in(cli.Get("/studies/acc/export.csv")->body);
  const auto rows = mos::read_ratings_csv(in);
  mos::validate_ratings(rows);
  c.require(rows.size() == 10, "export row count");
  std::map<std::string, std::vector<double>> exported;
  for (const auto& r : rows) exported[r.triplet_id].push_back(r.raw_score);
  for (auto& [t, v] : exported) std::sort(v.begin(), v.end());
  for (auto& [t, v] : given) std::sort(v.begin(), v.end());
  c.require(exported == given, "exported scores differ from submitted");
  const auto table = mos::run_pipeline(rows).table;
  c.require(table.entries.size() == 5, "MOS table size");
  server.stop();
}

}  // namespace

int main() {
  criterion("correlation-oracles", 5, correlation_oracles);
  criterion("zscore-suite", 1, zscore_suite);
  criterion("bt500-fixture", 1, bt500_fixture);
  criterion("metric-identities", 30, metric_identities);
  criterion("loss-suite", 10, loss_suite);
  criterion("freezing-contracts", 120, freezing);
  criterion("overfit-check", 600, overfit);
  criterion("protocol-checks", 600, protocol);
  criterion("ablation-plumbing", 600, ablation);
  criterion("study-round-trip", 60, study_round_trip);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
