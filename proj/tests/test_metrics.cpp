#include <json.hpp>
#include <numeric>

#include "birdsong/error.hpp"
#include "birdsong/metrics.hpp"
#include "test_helpers.hpp"

using namespace birdsong;

namespace {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

Pairs random_pairs(std::mt19937_64& rng, std::size_t n_classes, std::size_t count) {
  Pairs p(count);
  for (auto& [t, q] : p) {
    t = rng() % n_classes;
    // Bias towards the diagonal so scores are not all near 1/n.
    q = rng() % 3 ? t : rng() % n_classes;
  }
  return p;
}

// Per-class scores computed straight from the pair list.
struct Tally {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Tally tally(const Pairs& pairs, std::size_t c) {
  Tally t;
  for (auto [truth, pred] : pairs) {
    if (truth == c && pred == c) ++t.tp;
    else if (pred == c) ++t.fp;
    else if (truth == c) ++t.fn;
    else ++t.tn;
  }
  return t;
}

}  // namespace

TEST_CASE("confusion matrix orientation: rows predicted, columns true") {
  auto cm = confusion_from_predictions({{0, 0}, {1, 1}}, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) == 0);

  auto off = confusion_from_predictions({{0, 1}}, 2);
  CHECK(off.at(1, 0) == 1);
  CHECK(off.at(0, 0) == 0);
  CHECK(off.at(1, 1) == 0);
  CHECK(off.fp(1) == 1);
  CHECK(off.fn(0) == 1);

  CHECK_THROWS_CODE(confusion_from_predictions({{0, 2}}, 2), ErrorCode::IndexOutOfRange);
  CHECK_THROWS_CODE(confusion_from_predictions({{5, 0}}, 2), ErrorCode::IndexOutOfRange);
  CHECK(cm.class_names() == std::vector<std::string>{"class_0", "class_1"});
}

TEST_CASE("class metrics from counts") {
  ClassMetrics m = metrics_from_counts(3, 0, 1);
  CHECK(m.recall == 0.75);
  CHECK(m.precision == 1.0);
  CHECK(m.f1 == doctest::Approx(6.0 / 7.0));
  CHECK_FALSE(m.any_undefined());

  // P = 171/950 = 0.18, R = 171/180 = 0.95.
  ClassMetrics weak = metrics_from_counts(171, 779, 9);
  CHECK(weak.precision == doctest::Approx(0.18).epsilon(1e-12));
  CHECK(weak.recall == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(weak.f1 == doctest::Approx(2 * 0.18 * 0.95 / 1.13).epsilon(1e-12));
  CHECK(std::abs(weak.f1 - 0.30) <= 0.005);

  ClassMetrics empty = metrics_from_counts(0, 0, 0, 10);
  CHECK(empty.recall == 0.0);
  CHECK(empty.precision == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK(empty.recall_undefined);
  CHECK(empty.precision_undefined);
  CHECK(empty.f1_undefined);

  ClassMetrics missed = metrics_from_counts(0, 2, 3);
  CHECK(missed.f1 == 0.0);
  CHECK(missed.f1_undefined);
  CHECK_FALSE(missed.recall_undefined);
}

TEST_CASE("macro averaging") {
  // Class F1 0.4 and 0.8 -> 0.6.
  ConfusionMatrix cm(2);
  // class 0: tp 2, fp 3, fn 3 -> P = R = 0.4; class 1: tp 12, fp 3, fn 3 -> P = R = 0.8
  cm.add(0, 0, 2);
  cm.add(1, 1, 12);
  cm.add(1, 0, 3);
  cm.add(0, 1, 3);
  CHECK(class_metrics(cm, 0).f1 == doctest::Approx(0.4));
  CHECK(class_metrics(cm, 1).f1 == doctest::Approx(0.8));
  CHECK(macro_metrics(cm).f1 == doctest::Approx(0.6));

  std::mt19937_64 rng(1);
  auto pairs = random_pairs(rng, 6, 300);
  for (auto& [t, p] : pairs) p = t;
  MacroMetrics perfect = macro_metrics(confusion_from_predictions(pairs, 6));
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.f1 == 1.0);

  ConfusionMatrix sparse(3);
  sparse.add(0, 0, 4);
  MacroMetrics s = macro_metrics(sparse);
  CHECK(s.undefined_classes == std::vector<std::size_t>{1, 2});
  CHECK(s.f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("1000 random matrices agree exactly with a direct tally") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    auto pairs = random_pairs(rng, n, 1 + rng() % 400);
    ConfusionMatrix cm = confusion_from_predictions(pairs, n);
    REQUIRE(cm.total() == static_cast<std::int64_t>(pairs.size()));

    double r = 0, p = 0, f = 0;
    std::int64_t diag = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const Tally t = tally(pairs, c);
      const ClassMetrics m = class_metrics(cm, c);
      REQUIRE(m.tp == t.tp);
      REQUIRE(m.fp == t.fp);
      REQUIRE(m.fn == t.fn);
      REQUIRE(m.tn == t.tn);
      REQUIRE(m.tp + m.fp + m.fn + m.tn == cm.total());
      REQUIRE(m.support == t.tp + t.fn);
      REQUIRE(cm.column_sum(c) == t.tp + t.fn);
      const double rr = t.tp + t.fn ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn) : 0.0;
      const double pp = t.tp + t.fp ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp) : 0.0;
      const double ff = pp + rr > 0 ? 2 * pp * rr / (pp + rr) : 0.0;
      REQUIRE(m.recall == rr);
      REQUIRE(m.precision == pp);
      REQUIRE(m.f1 == ff);
      REQUIRE((m.recall >= 0 && m.recall <= 1 && m.precision >= 0 && m.precision <= 1 && m.f1 >= 0 && m.f1 <= 1));
      r += rr;
      p += pp;
      f += ff;
      diag += t.tp;
    }
    MacroMetrics mm = macro_metrics(cm);
    REQUIRE(mm.recall == doctest::Approx(r / n).epsilon(1e-15));
    REQUIRE(mm.precision == doctest::Approx(p / n).epsilon(1e-15));
    REQUIRE(mm.f1 == doctest::Approx(f / n).epsilon(1e-15));
    REQUIRE(cm.accuracy() == static_cast<double>(diag) / static_cast<double>(pairs.size()));
  }
}

TEST_CASE("relabelling classes permutes per-class metrics and keeps macro") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    auto pairs = random_pairs(rng, n, 200);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Pairs relabelled = pairs;
    for (auto& [t, p] : relabelled) {
      t = perm[t];
      p = perm[p];
    }
    ConfusionMatrix a = confusion_from_predictions(pairs, n), b = confusion_from_predictions(relabelled, n);
    for (std::size_t c = 0; c < n; ++c) {
      REQUIRE(class_metrics(a, c).f1 == class_metrics(b, perm[c]).f1);
      REQUIRE(class_metrics(a, c).recall == class_metrics(b, perm[c]).recall);
    }
    REQUIRE(macro_metrics(a).f1 == doctest::Approx(macro_metrics(b).f1).epsilon(1e-14));
  }
}

TEST_CASE("sharded accumulation merges exactly") {
  std::mt19937_64 rng(5);
  auto pairs = random_pairs(rng, 7, 1000);
  ConfusionMatrix whole = confusion_from_predictions(pairs, 7);
  ConfusionMatrix a(7), b(7);
  for (std::size_t i = 0; i < pairs.size(); ++i) (i % 3 ? a : b).add(pairs[i].first, pairs[i].second);
  a += b;
  CHECK(a == whole);
  ConfusionMatrix other(3);
  CHECK_THROWS_CODE(a += other, ErrorCode::ShapeMismatch);
}

TEST_CASE("column-normalized view") {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 3);
  cm.add(0, 1, 1);
  cm.add(1, 1, 2);
  auto norm = cm.column_normalized();
  CHECK(norm[0][0] == 0.75);
  CHECK(norm[1][0] == 0.25);
  CHECK(norm[1][1] == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(norm[i][2] == 0.0);
}

TEST_CASE("F1 histogram binning") {
  auto h = f1_histogram({0.5}, 0.1);
  REQUIRE(h.counts.size() == 10);
  CHECK(h.counts[5] == 1);
  CHECK(f1_histogram({1.0}, 0.1).counts[9] == 1);
  CHECK(f1_histogram({0.0}, 0.1).counts[0] == 1);
  CHECK(f1_histogram({0.3}, 0.1).counts[3] == 1);
  CHECK(f1_histogram({0.7}, 0.1).counts[7] == 1);
  CHECK(f1_histogram({0.2999}, 0.1).counts[2] == 1);
  CHECK(f1_histogram({0.25, 0.75}, 0.25).counts == std::vector<std::int64_t>{0, 1, 0, 1});

  std::mt19937_64 rng(3);
  std::vector<double> v(20);
  for (auto& x : v) x = testing::uniform(rng, 0, 1);
  auto r = f1_histogram(v, 0.05);
  CHECK(std::accumulate(r.counts.begin(), r.counts.end(), std::int64_t{0}) == 20);
  CHECK(r.macro_f1 == doctest::Approx(std::accumulate(v.begin(), v.end(), 0.0) / 20));

  CHECK_THROWS_CODE(f1_histogram({0.5}, 0.3), ErrorCode::BadConfig);
  CHECK_THROWS_CODE(f1_histogram({0.5}, 0.0), ErrorCode::BadConfig);
  CHECK_THROWS_CODE(f1_histogram({1.5}, 0.1), ErrorCode::BadConfig);
}

TEST_CASE("reports carry per-class blocks, macro scores and the raw matrix") {
  ConfusionMatrix cm(3, {"Ardea", "Botaurus", "Ixobrychus, minutus"});
  cm.add(0, 0, 5);
  cm.add(1, 0, 2);
  cm.add(1, 1, 4);
  auto j = nlohmann::json::parse(metrics_report_json(cm));
  REQUIRE(j["classes"].size() == 3);
  CHECK(j["classes"][0]["name"] == "Ardea");
  CHECK(j["classes"][0]["fp"] == 2);
  CHECK(j["classes"][1]["fn"] == 2);
  CHECK(j["classes"][2]["undefined_flags"].size() == 3);
  CHECK(j["macro"]["undefined_classes"][0] == "Ixobrychus, minutus");
  CHECK(j["macro"]["f1"].get<double>() == doctest::Approx(macro_metrics(cm).f1));
  CHECK(j["matrix"][0][1] == 2);
  CHECK(j["total"] == 11);

  const std::string csv = metrics_report_csv(cm);
  CHECK(csv.starts_with("class,support,tp,fp,fn,tn,recall,precision,f1,undefined\n"));
  CHECK(csv.find("\"Ixobrychus, minutus\",0,0,0,0,11,0.000000,0.000000,0.000000,recall;precision;f1\n") !=
        std::string::npos);
  CHECK(csv.find("\nmacro,11,") != std::string::npos);

  const std::string norm = normalized_matrix_csv(cm);
  CHECK(norm.find("Ardea,1.000000,0.333333,0.000000") != std::string::npos);

  const std::string hist = histogram_csv(f1_histogram({0.5, 1.0}, 0.5));
  CHECK(hist.starts_with("bin_low,bin_high,count\n0.0000,0.5000,0\n0.5000,1.0000,2\n"));
}

TEST_CASE("reference macro scores are shipped as constants") {
  REQUIRE(std::size(kReferenceMacroScores) == 3);
  CHECK(kReferenceMacroScores[0].arch == "vgg16");
  CHECK(kReferenceMacroScores[0].f1 == 0.768);
  CHECK(kReferenceMacroScores[1].recall == 0.856);
  CHECK(kReferenceMacroScores[2].precision == 0.785);
}
