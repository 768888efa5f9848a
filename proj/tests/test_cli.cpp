#include <doctest.h>

#include <json.hpp>

#include "cli.hpp"
#include "ebench/correlation.hpp"
#include "ebench/dataset.hpp"
#include "ebench/mos.hpp"
#include "support.hpp"

using namespace ebench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) { return cli::run(args); }

json read_json(const fs::path& p) { return json::parse(testing::read_text(p)); }

// Synthetic dataset plus a two-epoch training config, shared by the cases below.
struct Workspace {
  testing::TempDir dir{"cli"};
  fs::path data, train_cfg;
  Workspace() {
    data = dir / "data";
    REQUIRE(run({"synth", "--out", data.string(), "--triplets", "12", "--sources", "4", "--seed",
                 "3"}) == cli::kExitOk);
    train_cfg = dir / "train.json";
    testing::write_text(train_cfg,
                        R"({"stage1_epochs": 1, "stage2_epochs": 1, "batch_size": 4})");
  }
  std::string manifest() const { return (data / "manifest.json").string(); }
  std::string mos() const { return (data / "mos.csv").string(); }
};

}  // namespace

TEST_CASE("argument and config handling") {
  testing::TempDir dir("cli");
  CHECK(run({"mos"}) == cli::kExitValidation);
  CHECK(run({"mos", "--ratings", "x.csv", "--bogus"}) == cli::kExitValidation);
  CHECK(run({"nosuchcommand"}) == cli::kExitValidation);
  CHECK(run({"mos", "--ratings", (dir / "missing.csv").string(), "--out", dir.path().string()}) ==
        cli::kExitValidation);
  CHECK(run({"--help"}) == cli::kExitOk);

  Workspace ws;
  testing::write_text(dir / "cfg.json",
                      json{{"ratings", (ws.data / "ratings.csv").string()},
                           {"rescale_lo", 1},
                           {"rescale-hi", 5}}
                          .dump());
  const auto out = dir / "mos_cfg";
  CHECK(run({"mos", "--config", (dir / "cfg.json").string(), "--out", out.string()}) ==
        cli::kExitOk);
  const auto resolved = read_json(out / "resolved_config.json");
  CHECK(resolved.at("command") == "mos");
  CHECK(resolved.at("options").contains("ratings"));
  CHECK_FALSE(resolved.at("options").contains("help"));
  const auto table = mos::read_mos_csv(out / "mos.csv");
  for (const auto& [id, e] : table.entries) {
    CHECK(e.mos >= 1.0 - 1e-9);
    CHECK(e.mos <= 5.0 + 1e-9);
  }
  testing::write_text(dir / "bad.json", R"({"ratingz": "x"})");
  CHECK(run({"mos", "--config", (dir / "bad.json").string(), "--ratings", "x"}) ==
        cli::kExitValidation);
  CHECK(run({"mos", "--ratings", (ws.data / "ratings.csv").string(), "--rescale-lo", "1", "--out",
             (dir / "half").string()}) == cli::kExitValidation);
}

TEST_CASE("mos command") {
  testing::TempDir dir("cli");
  Workspace ws;
  const auto out = dir / "mos";
  REQUIRE(run({"mos", "--ratings", (ws.data / "ratings.csv").string(), "--out", out.string()}) ==
          cli::kExitOk);
  CHECK(mos::read_mos_csv(out / "mos.csv").entries.size() == 12);
  const auto rejected = read_json(out / "rejected.json");
  CHECK(rejected.contains("rejected"));
  CHECK(rejected.at("warnings").empty());

  // Rating off the scale: the error names the offending line.
  testing::write_text(dir / "bad.csv", "annotator_id,triplet_id,raw_score\na,t,5\nb,t,11\n");
  CHECK(run({"mos", "--ratings", (dir / "bad.csv").string(), "--out", (dir / "b").string()}) ==
        cli::kExitValidation);

  // Three raters: allowed, but flagged.
  std::string few = "annotator_id,triplet_id,raw_score\n";
  for (int r = 0; r < 3; ++r) {
    for (int t = 0; t < 4; ++t) {
      few += "r" + std::to_string(r) + ",t" + std::to_string(t) + "," + std::to_string(2 + t + r) +
             "\n";
    }
  }
  testing::write_text(dir / "few.csv", few);
  REQUIRE(run({"mos", "--ratings", (dir / "few.csv").string(), "--out", (dir / "few").string()}) ==
          cli::kExitOk);
  CHECK_FALSE(read_json(dir / "few" / "rejected.json").at("warnings").empty());
}

TEST_CASE("metrics command") {
  testing::TempDir dir("cli");
  Workspace ws;
  const auto out = dir / "m";
  REQUIRE(run({"metrics", "--manifest", ws.manifest(), "--metric", "clip_t", "--metric", "q_edit",
               "--out", out.string()}) == cli::kExitOk);
  const auto csv = testing::read_text(out / "metrics.csv");
  CHECK(csv.rfind("triplet_id,metric,aggregate\n", 0) == 0);
  CHECK(csv.find(",warp_ssim,") != std::string::npos);
  CHECK(csv.find(",q_edit,") != std::string::npos);
  CHECK(run({"metrics", "--manifest", ws.manifest(), "--metric", "bogus", "--out",
             (dir / "x").string()}) == cli::kExitValidation);
  CHECK(run({"metrics", "--manifest", ws.manifest(), "--metric", "clip_t", "--backend",
             "flow=warp", "--out", (dir / "y").string()}) == cli::kExitValidation);

  // One triplet without a source prompt: partial results, exit 3.
  auto doc = read_json(ws.data / "manifest.json");
  auto& list = doc.is_array() ? doc : doc.at("triplets");
  list[0].erase("source_prompt");
  testing::write_text(ws.data / "partial.json", doc.dump());
  const auto p = dir / "p";
  CHECK(run({"metrics", "--manifest", (ws.data / "partial.json").string(), "--metric", "fram_acc",
             "--out", p.string()}) == cli::kExitPartial);
  CHECK(testing::read_text(p / "metric_errors.csv").find("fram_acc") != std::string::npos);
  CHECK(testing::read_text(p / "metrics.csv").find("fram_acc") != std::string::npos);
}

TEST_CASE("train, resume, score and eval") {
  testing::TempDir dir("cli");
  Workspace ws;
  const auto out = dir / "train";
  REQUIRE(run({"train", "--manifest", ws.manifest(), "--mos", ws.mos(), "--train-config",
               ws.train_cfg.string(), "--out", out.string()}) == cli::kExitOk);
  for (const char* f : {"model_config.json", "train_config.json", "stage1.ckpt", "stage2.ckpt",
                        "train_log.jsonl", "train_predictions.csv"}) {
    CHECK(fs::exists(out / f));
  }
  const auto log_lines = [&] {
    const auto t = testing::read_text(out / "train_log.jsonl");
    return std::count(t.begin(), t.end(), '\n');
  };
  CHECK(log_lines() == 2);

  // Resuming from the stage-1 checkpoint runs only stage 2.
  REQUIRE(run({"train", "--manifest", ws.manifest(), "--mos", ws.mos(), "--train-config",
               ws.train_cfg.string(), "--resume", (out / "stage1.ckpt").string(), "--out",
               out.string()}) == cli::kExitOk);
  CHECK(log_lines() == 3);

  testing::write_text(dir / "wide.json", R"({"width": 16})");
  CHECK(run({"train", "--manifest", ws.manifest(), "--mos", ws.mos(), "--train-config",
             ws.train_cfg.string(), "--model-config", (dir / "wide.json").string(), "--resume",
             (out / "stage1.ckpt").string(), "--out", (dir / "t2").string()}) ==
        cli::kExitValidation);
  testing::write_text(dir / "typo.json", R"({"widht": 16})");
  CHECK(run({"train", "--manifest", ws.manifest(), "--mos", ws.mos(), "--model-config",
             (dir / "typo.json").string(), "--out", (dir / "t3").string()}) ==
        cli::kExitValidation);

  const auto sc = dir / "score";
  REQUIRE(run({"score", "--manifest", ws.manifest(), "--checkpoint", (out / "stage2.ckpt").string(),
               "--out", sc.string()}) == cli::kExitOk);
  CHECK(testing::read_text(sc / "scores.csv")
            .rfind("triplet_id,alignment,relevance,aesthetic,technical,final", 0) == 0);

  const auto ev = dir / "eval";
  REQUIRE(run({"eval", "--predictions", (sc / "predictions.csv").string(), "--mos", ws.mos(),
               "--out", ev.string()}) == cli::kExitOk);
  const auto report = read_json(ev / "report.json");
  for (const char* k : {"srocc", "plcc", "krcc", "rmse"}) CHECK(report.contains(k));
  CHECK(fs::exists(ev / "scatter.csv"));

  auto preds = eval::read_predictions_csv(sc / "predictions.csv");
  preds.erase(preds.begin());
  eval::write_predictions_csv(dir / "short.csv", preds);
  CHECK(run({"eval", "--predictions", (dir / "short.csv").string(), "--mos", ws.mos(), "--out",
             (dir / "e2").string()}) == cli::kExitValidation);
}

TEST_CASE("tenfold is reproducible") {
  testing::TempDir dir("cli");
  Workspace ws;
  const auto go = [&](const std::string& name) {
    return run({"tenfold", "--manifest", ws.manifest(), "--mos", ws.mos(), "--train-config",
                ws.train_cfg.string(), "--k", "2", "--seed", "4", "--out", (dir / name).string()});
  };
  REQUIRE(go("a") == cli::kExitOk);
  REQUIRE(go("b") == cli::kExitOk);
  for (const char* f : {"folds.json", "fold_00.json", "fold_01.json", "summary.json",
                        "summary.csv", "predictions.csv"}) {
    INFO(f);
    CHECK(testing::read_text(dir / "a" / f) == testing::read_text(dir / "b" / f));
  }
  const auto summary = read_json(dir / "a" / "summary.json");
  CHECK(summary.contains("mean"));
  CHECK(summary.contains("median"));
  CHECK(eval::read_predictions_csv(dir / "a" / "predictions.csv").size() == 12);

  // Precomputed folds are honoured.
  REQUIRE(run({"folds", "--manifest", ws.manifest(), "--k", "2", "--seed", "9", "--out",
               (dir / "f").string()}) == cli::kExitOk);
  REQUIRE(run({"tenfold", "--manifest", ws.manifest(), "--mos", ws.mos(), "--train-config",
               ws.train_cfg.string(), "--folds", (dir / "f" / "folds.json").string(), "--out",
               (dir / "c").string()}) == cli::kExitOk);
  CHECK(testing::read_text(dir / "c" / "folds.json") == testing::read_text(dir / "f" / "folds.json"));

  REQUIRE(run({"stats", "--manifest", ws.manifest(), "--out", (dir / "s").string()}) ==
          cli::kExitOk);
  CHECK(read_json(dir / "s" / "stats.json").at("triplets") == 12);
}
