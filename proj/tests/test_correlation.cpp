#include <doctest.h>

#include "ebench/correlation.hpp"
#include "ebench/error.hpp"
#include "support.hpp"

using namespace ebench;

TEST_CASE("worked examples") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  CHECK(eval::srocc(a, b) == doctest::Approx(0.8).epsilon(1e-15));
  const std::vector<double> c{1, 2, 3}, d{1, 3, 2};
  CHECK(eval::krcc(c, d) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(eval::srocc(a, a) == 1.0);
  const std::vector<double> rev{4, 3, 2, 1};
  CHECK(eval::srocc(a, rev) == doctest::Approx(-1.0));
  CHECK(eval::krcc(a, rev) == doctest::Approx(-1.0));
  std::vector<double> lin;
  for (double x : a) lin.push_back(3 * x - 1);
  CHECK(eval::plcc(lin, a) == doctest::Approx(1.0));
  const std::vector<double> e{1, 2}, f{3, 4};
  CHECK(eval::rmse(e, f) == doctest::Approx(2.0));
  CHECK(eval::rmse(a, a) == 0.0);
}

TEST_CASE("random vectors match the brute-force oracles") {
  std::mt19937_64 rng(101);
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 8;
    std::vector<double> x, y;
    do {
      x = testing::random_vector(rng, n);
      y = testing::random_vector(rng, n);
      if (trial % 4 == 0) {
        // rounded values introduce ties
        for (auto& v : x) v = std::round(v);
        for (auto& v : y) v = std::round(v);
      }
    } while (constant(x) || constant(y));
    CHECK(std::abs(eval::plcc(x, y) - testing::oracle_pearson(x, y)) < 1e-9);
    CHECK(std::abs(eval::srocc(x, y) - testing::oracle_spearman(x, y)) < 1e-9);
    CHECK(std::abs(eval::krcc(x, y) - testing::oracle_kendall(x, y)) < 1e-9);
    CHECK(std::abs(eval::rmse(x, y) - testing::oracle_rmse(x, y)) < 1e-9);
  }
}

TEST_CASE("Kendall on longer vectors with ties") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = testing::random_vector(rng, 200, 0, 20);
    auto y = testing::random_vector(rng, 200, 0, 20);
    for (auto& v : x) v = std::floor(v);
    CHECK(std::abs(eval::krcc(x, y) - testing::oracle_kendall(x, y)) < 1e-12);
  }
}

TEST_CASE("invariances") {
  std::mt19937_64 rng(9);
  const auto x = testing::random_vector(rng, 9);
  const auto y = testing::random_vector(rng, 9);
  std::vector<double> mono, affine;
  for (double v : x) {
    mono.push_back(std::exp(v) + v * v * v);
    affine.push_back(2.5 * v + 7);
  }
  CHECK(eval::srocc(mono, y) == doctest::Approx(eval::srocc(x, y)));
  CHECK(eval::krcc(mono, y) == doctest::Approx(eval::krcc(x, y)));
  CHECK(eval::plcc(affine, y) == doctest::Approx(eval::plcc(x, y)));
  CHECK(eval::plcc(y, x) == doctest::Approx(eval::plcc(x, y)));
  CHECK(eval::rmse(y, x) == eval::rmse(x, y));
}

TEST_CASE("undefined inputs") {
  const std::vector<double> flat{1, 1, 1}, x{1, 2, 3};
  CHECK_THROWS_AS(eval::srocc(flat, x), ValidationError);
  CHECK_THROWS_AS(eval::plcc(x, flat), ValidationError);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(eval::plcc(one, one), ValidationError);
  const std::vector<double> two{1, 2};
  CHECK_THROWS_AS(eval::rmse(two, x), ValidationError);
}

TEST_CASE("poly4 fit") {
  SUBCASE("recovers a quartic") {
    const std::array<double, 5> c{0.5, -1.0, 0.25, 0.1, -0.02};
    std::vector<double> x{-2, -1, 0, 1.5, 3}, y;
    for (double v : x) {
      double p = 0;
      for (int i = 4; i >= 0; --i) p = p * v + c[i];
      y.push_back(p);
    }
    const auto fit = eval::poly4_fit(x, y);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(fit.coefficients[i] - c[i]) < 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(fit.fitted[i] - y[i]) < 1e-9);
      CHECK(std::abs(fit.evaluate(x[i]) - y[i]) < 1e-9);
    }
  }
  SUBCASE("identity") {
    std::mt19937_64 rng(2);
    const auto x = testing::random_vector(rng, 12);
    const auto fit = eval::poly4_fit(x, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(fit.fitted[i] - x[i]) < 1e-9);
  }
  SUBCASE("fitted rmse never exceeds raw") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      const auto x = testing::random_vector(rng, 15);
      std::vector<double> y;
      for (double v : x) y.push_back(v + testing::random_vector(rng, 1, -2, 2)[0]);
      const auto r = eval::correlate(x, y);
      REQUIRE(r.fitted_rmse.has_value());
      CHECK(*r.fitted_rmse <= r.rmse + 1e-12);
    }
  }
  SUBCASE("preconditions") {
    const std::vector<double> four{1, 2, 3, 4};
    CHECK_THROWS_AS(eval::poly4_fit(four, four), ValidationError);
    const std::vector<double> flat{2, 2, 2, 2, 2}, y{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(eval::poly4_fit(flat, y), ValidationError);
  }
}

TEST_CASE("report from predictions and MOS") {
  mos::MosTable t;
  std::map<std::string, double> preds;
  for (int i = 0; i < 8; ++i) {
    t.entries["t" + std::to_string(i)] = {static_cast<double>(i), 1, 0};
    preds["t" + std::to_string(i)] = i;
  }
  const auto r = eval::correlate_report(preds, t);
  CHECK(r.srocc == doctest::Approx(1.0));
  CHECK(r.plcc == doctest::Approx(1.0));
  CHECK(r.krcc == doctest::Approx(1.0));
  CHECK(r.rmse == doctest::Approx(0.0));
  CHECK(r.n == 8);
  const auto doc = r.to_json();
  for (const char* key : {"srocc", "plcc", "krcc", "rmse", "fitted_plcc", "fitted_rmse", "n"}) {
    CHECK(doc.contains(key));
  }

  preds.erase("t3");
  preds["zz"] = 1;
  try {
    eval::correlate_report(preds, t);
    FAIL("expected mismatch");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t3") != std::string::npos);
    CHECK(msg.find("zz") != std::string::npos);
  }
}

TEST_CASE("prediction and scatter files are reproducible") {
  testing::TempDir dir("corr");
  std::map<std::string, double> preds{{"a", 0.1}, {"b", -2.5}, {"c", 3}, {"d", 4}, {"e", 1e-7}};
  eval::write_predictions_csv(dir / "p.csv", preds);
  CHECK(eval::read_predictions_csv(dir / "p.csv") == preds);
  mos::MosTable t;
  for (const auto& [k, v] : preds) t.entries[k] = {v * v, 1, 0};
  const auto aligned = eval::align(preds, t);
  const auto fit = eval::poly4_fit(aligned.pred, aligned.gt);
  eval::write_scatter_csv(dir / "s1.csv", aligned, fit);
  eval::write_scatter_csv(dir / "s2.csv", eval::align(eval::read_predictions_csv(dir / "p.csv"), t),
                          eval::poly4_fit(aligned.pred, aligned.gt));
  CHECK(testing::read_text(dir / "s1.csv") == testing::read_text(dir / "s2.csv"));
  CHECK(testing::read_text(dir / "s1.csv").rfind("triplet_id,pred,gt,fitted", 0) == 0);
}
