#include <doctest.h>

#include "ebench/error.hpp"
#include "ebench/losses.hpp"
#include "ebench/qa_model.hpp"
#include "support.hpp"

using namespace ebench;
using namespace ebench::qa;

namespace {

struct Pair {
  VideoClip source, edited;
};

Pair random_pair(std::uint64_t seed, int frames = 4, int w = 32, int h = 32) {
  std::mt19937_64 rng(seed);
  return {testing::random_clip(rng, frames, w, h), testing::random_clip(rng, frames, w, h)};
}

bool same_values(const nn::Tensor& a, const nn::Tensor& b, double tol = 0) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (std::abs(a.at(i) - b.at(i)) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("branch shapes") {
  auto cfg = ModelConfig::toy();
  cfg.width = 64;
  const QaModel model(cfg);
  const auto p = random_pair(1);
  const auto a = model.alignment_forward(p.edited, "turn the car red");
  CHECK(a.e_bv.shape() == nn::Shape{4, 64});
  CHECK(a.t_bv.shape() == nn::Shape{4, 64});
  CHECK(a.e_bt.cols() == 64);
  CHECK(a.score.shape() == nn::Shape{1, 1});
  const auto r = model.relevance_forward(p.source, p.edited);
  CHECK(r.f.shape() == nn::Shape{1, 64});
  CHECK(r.f_star.shape() == nn::Shape{1, 64});
  CHECK(r.head_input_width == 128);
  CHECK(model.aesthetic_forward(p.edited).shape() == nn::Shape{1, 1});
  CHECK(model.technical_forward(p.edited).shape() == nn::Shape{1, 1});
}

TEST_CASE("temporal adapter starts as the identity") {
  const QaModel model(ModelConfig::toy());
  const auto p = random_pair(2);
  const auto a = model.alignment_forward(p.edited, "snow");
  CHECK(same_values(a.e_bv, a.t_bv, 1e-12));

  // Once the output projection is nonzero, frame order matters.
  QaModel trained(ModelConfig::toy());
  for (auto& param : trained.params().all()) {
    if (param.group != "adapter") continue;
    auto d = param.tensor.mutable_data();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 0.3);
    for (auto& v : d) v += n(rng);
  }
  const auto t = trained.alignment_forward(p.edited, "snow");
  CHECK_FALSE(same_values(t.e_bv, t.t_bv, 1e-9));
  VideoClip reversed = p.edited;
  std::reverse(reversed.frames.begin(), reversed.frames.end());
  const auto tr = trained.alignment_forward(reversed, "snow");
  // Row i of the reversed run matches row T-1-i of e_bv but not of t_bv.
  nn::Tensor e_rev = nn::gather_rows(t.e_bv, std::vector<int>{3, 2, 1, 0});
  nn::Tensor t_rev = nn::gather_rows(t.t_bv, std::vector<int>{3, 2, 1, 0});
  CHECK(same_values(tr.e_bv, e_rev, 1e-12));
  CHECK_FALSE(same_values(tr.t_bv, t_rev, 1e-9));
}

TEST_CASE("relevance fusion") {
  const auto p = random_pair(4);
  auto cfg = ModelConfig::toy();
  SUBCASE("identical clips give identical pooled features") {
    const QaModel model(cfg);
    const auto r = model.relevance_forward(p.edited, p.edited);
    CHECK(same_values(r.f, r.f_star, 0));
  }
  SUBCASE("mca and concat differ") {
    const QaModel concat(cfg);
    cfg.fusion = Fusion::mca;
    const QaModel mca(cfg);
    const auto rc = concat.relevance_forward(p.source, p.edited);
    const auto rm = mca.relevance_forward(p.source, p.edited);
    CHECK(rm.head_input_width == cfg.width);
    CHECK(rc.head_input_width == 2 * cfg.width);
    CHECK(rm.score.item() != rc.score.item());
  }
  SUBCASE("bypass") {
    cfg.fusion = Fusion::none;
    const QaModel model(cfg);
    CHECK_FALSE(cfg.branch_active(Branch::relevance));
    CHECK_THROWS_AS(model.relevance_forward(p.source, p.edited), ValidationError);
    const auto out = model.forward(p.source, p.edited, "x");
    CHECK_FALSE(out.branch[1].defined());
    CHECK(model.score(p.source, p.edited, "x").relevance == 0.0);
  }
}

TEST_CASE("fragments") {
  const FragmentConfig cfg{7, 32};
  const auto origins = fragment_origins(224, 224, cfg, 5);
  REQUIRE(origins.size() == 49);
  for (int i = 0; i < 49; ++i) {
    CHECK(origins[i].x == (i % 7) * 32);
    CHECK(origins[i].y == (i / 7) * 32);
  }
  std::mt19937_64 rng(6);
  const auto f = testing::random_frame(rng, 224, 224);
  CHECK(assemble_fragments(f, origins, cfg) == f);

  const auto big = fragment_origins(500, 400, cfg, 5);
  const auto again = fragment_origins(500, 400, cfg, 5);
  for (int i = 0; i < 49; ++i) CHECK((big[i].x == again[i].x && big[i].y == again[i].y));
  for (int i = 0; i < 49; ++i) {
    const int gx = i % 7, gy = i / 7;
    CHECK(big[i].x >= gx * 500 / 7);
    CHECK(big[i].x + 32 <= (gx + 1) * 500 / 7);
    CHECK(big[i].y >= gy * 400 / 7);
    CHECK(big[i].y + 32 <= (gy + 1) * 400 / 7);
  }
  const auto mosaic = assemble_fragments(testing::random_frame(rng, 500, 400), big, cfg);
  CHECK(mosaic.width == 224);
  CHECK(mosaic.height == 224);
  CHECK_THROWS_AS(fragment_origins(16, 224, cfg, 0), ValidationError);
  CHECK_THROWS_AS(fragment_origins(100, 224, cfg, 0), ValidationError);
}

TEST_CASE("fuse scores") {
  CHECK(fuse_scores({1, 2, 3, 4}, {1, 1, 1, 1}) == 10.0);
  CHECK(fuse_scores({1, 2, 3, 4}, {0.5, 0, 2, 0}) == 6.5);
  CHECK(fuse_scores({1, 2, 3, 4}, {0, 0, 0, 0}) == 0.0);
  CHECK_THROWS_AS(fuse_scores({1, std::nan(""), 3, 4}, {1, 1, 1, 1}), ValidationError);
}

TEST_CASE("scores are deterministic and fuse the branches") {
  const auto p = random_pair(7);
  auto cfg = ModelConfig::toy();
  cfg.weights = {0.5, 2.0, 1.0, 0.25};
  const QaModel a(cfg), b(cfg);
  const auto sa = a.score(p.source, p.edited, "a red car");
  const auto sb = b.score(p.source, p.edited, "a red car");
  CHECK(sa.final == sb.final);
  CHECK(sa.alignment == sb.alignment);
  CHECK(sa.final == doctest::Approx(0.5 * sa.alignment + 2.0 * sa.relevance + sa.aesthetic +
                                    0.25 * sa.technical));
  const auto graph = a.forward(p.source, p.edited, "a red car");
  CHECK(graph.final.item() == doctest::Approx(sa.final));
  CHECK(a.params().checksum("vl_visual") == b.params().checksum("vl_visual"));

  cfg.seed = 99;
  const QaModel c(cfg);
  CHECK(c.params().checksum("vl_visual") != a.params().checksum("vl_visual"));

  cfg.seed = 7;
  cfg.weights[1] = 0.0;
  const QaModel zero_rel(cfg);
  const auto sz = zero_rel.score(p.source, p.edited, "a red car");
  CHECK(sz.final == doctest::Approx(0.5 * sz.alignment + sz.aesthetic + 0.25 * sz.technical));

  auto clip_cfg = ModelConfig::toy();
  clip_cfg.text = TextEncoder::clip;
  const QaModel clip_model(clip_cfg);
  CHECK(std::isfinite(clip_model.score(p.source, p.edited, "a red car").alignment));
}

TEST_CASE("config validation") {
  auto cfg = ModelConfig::toy();
  cfg.scale = Scale::reference;
  CHECK_THROWS_AS(QaModel{cfg}, ValidationError);

  const auto doc = ModelConfig::toy().to_json();
  const auto back = ModelConfig::from_json(doc);
  CHECK(back.to_json() == doc);
  CHECK(back.hash() == ModelConfig::toy().hash());
  auto other = ModelConfig::toy();
  other.fusion = Fusion::mca;
  CHECK(other.hash() != back.hash());

  auto bad = doc;
  bad["fusoin"] = "mca";
  CHECK_THROWS_AS(ModelConfig::from_json(bad), ValidationError);
  bad = doc;
  bad["temporal"] = "lstm";
  CHECK_THROWS_AS(ModelConfig::from_json(bad), ValidationError);
  bad = doc;
  bad["width"] = "wide";
  CHECK_THROWS_AS(ModelConfig::from_json(bad), ValidationError);
  bad = doc;
  bad["width"] = 31;
  CHECK_THROWS_AS(ModelConfig::from_json(bad).validate(), ValidationError);
  CHECK_THROWS_AS(ModelConfig::from_json(nlohmann::json::array()), ValidationError);
}

TEST_CASE("tokenizer") {
  const auto ids = tokenize("Make it SNOW, please!", 512, 16);
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == kClsToken);
  CHECK(ids == tokenize("make it snow please", 512, 16));
  for (std::size_t i = 1; i < ids.size(); ++i) {
    CHECK(ids[i] >= 1);
    CHECK(ids[i] < 512);
  }
  CHECK(tokenize("a b c d e f g h", 512, 4).size() == 4);
  CHECK_THROWS_AS(tokenize("", 512, 4), ValidationError);
}

TEST_CASE("gradients reach every parameter group") {
  const auto p = random_pair(8);
  auto cfg = ModelConfig::toy();
  cfg.fusion = Fusion::mca;
  QaModel model(cfg);
  const auto p2 = random_pair(9);
  const std::vector<double> gt{1.0, 3.0};
  auto run = [&] {
    model.params().zero_grad();
    const auto o1 = model.forward(p.source, p.edited, "snowy street");
    const auto o2 = model.forward(p2.source, p2.edited, "snowy street");
    const auto pred = nn::concat_rows({o1.final, o2.final});
    nn::backward(loss::total_loss_node(pred, gt, 0.3));
  };
  // Zero-initialized output projections stop gradient into the layers behind
  // them until one update has been applied.
  run();
  for (auto& param : model.params().all()) {
    auto d = param.tensor.mutable_data();
    const auto g = param.tensor.grad();
    if (g.size() != d.size()) continue;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= 0.05 * (g[i] >= 0 ? 1 : -1) * (g[i] != 0);
  }
  run();
  std::map<std::string, bool> reached;
  for (const auto& param : model.params().all()) {
    bool any = false;
    for (double g : param.tensor.grad()) any = any || g != 0.0;
    reached[param.group] = reached[param.group] || any;
  }
  for (const auto& [group, ok] : reached) {
    INFO(group);
    CHECK(ok);
  }
  CHECK(reached.size() >= 8);
}

TEST_CASE("batch inference preserves order") {
  std::vector<EditTriplet> triplets;
  std::map<std::string, Pair> clips;
  for (int i = 0; i < 6; ++i) {
    EditTriplet t;
    t.triplet_id = "t" + std::to_string(i);
    t.prompt = "prompt " + std::to_string(i);
    triplets.push_back(t);
    clips[t.triplet_id] = random_pair(20 + i);
  }
  const ClipLoader loader = [&](const EditTriplet& t) {
    const auto& c = clips.at(t.triplet_id);
    return TripletClips{c.source, c.edited, t.prompt};
  };
  const QaModel model(ModelConfig::toy());
  const auto batch = qa_forward_batch(triplets, model, loader);
  REQUIRE(batch.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(batch[i].final == qa_forward(triplets[i], model, loader).final);

  const ClipLoader failing = [&](const EditTriplet& t) -> TripletClips {
    if (t.triplet_id == "t3") throw ValidationError("cannot decode t3");
    return loader(t);
  };
  CHECK_THROWS_WITH_AS(qa_forward_batch(triplets, model, failing), "cannot decode t3",
                       ValidationError);
}
