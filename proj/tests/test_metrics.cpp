#include <doctest.h>

#include <cmath>

#include "graindeck/error.hpp"
#include "graindeck/metrics.hpp"
#include "support.hpp"

using namespace graindeck;
using namespace graindeck::metrics;

namespace {

// The published confusion matrix and per-class table, typed in separately
// from the library copy.
constexpr std::int64_t kMatrix[7][7] = {
    {36, 3, 5, 4, 11, 0, 0},  {5, 56, 0, 5, 0, 0, 2},   {6, 0, 34, 2, 12, 1, 6},
    {7, 6, 6, 37, 5, 0, 8},   {10, 0, 2, 5, 44, 1, 4},  {9, 4, 9, 1, 27, 5, 4},
    {10, 2, 3, 5, 11, 0, 33},
};
constexpr double kTable[7][3] = {
    {0.43, 0.61, 0.51}, {0.79, 0.82, 0.81}, {0.58, 0.56, 0.57}, {0.63, 0.54, 0.58},
    {0.40, 0.67, 0.50}, {0.71, 0.08, 0.15}, {0.58, 0.52, 0.55},
};

struct Oracle {
  double p[7], r[7], f[7];
};

Oracle oracle() {
  Oracle o{};
  for (int c = 0; c < 7; ++c) {
    double col = 0, row = 0;
    for (int k = 0; k < 7; ++k) {
      col += static_cast<double>(kMatrix[k][c]);
      row += static_cast<double>(kMatrix[c][k]);
    }
    o.p[c] = kMatrix[c][c] / col;
    o.r[c] = kMatrix[c][c] / row;
    o.f[c] = 2 * o.p[c] * o.r[c] / (o.p[c] + o.r[c]);
  }
  return o;
}

ConfusionMatrix random_matrix(Rng& rng) {
  ConfusionMatrix::Grid g{};
  for (auto& row : g) {
    for (auto& v : row) v = rng.bernoulli(0.3) ? 0 : static_cast<std::int64_t>(rng.index(20));
  }
  g[0][0] += 1;
  return ConfusionMatrix(g);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("library copy of the reference matrix matches the table") {
  const auto cm = reference_confusion();
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 7; ++c) CHECK(cm.at(r, c) == kMatrix[r][c]);
  }
  const auto table = reference_class_table();
  for (std::size_t c = 0; c < 7; ++c) {
    CHECK(table[c].precision == kTable[c][0]);
    CHECK(table[c].recall == kTable[c][1]);
    CHECK(table[c].f1 == kTable[c][2]);
  }
}

TEST_CASE("per-class metrics regenerate the published table") {
  const auto per = class_metrics(reference_confusion());
  const Oracle o = oracle();
  for (std::size_t c = 0; c < 7; ++c) {
    INFO(name_of(kAllVarieties[c]));
    CHECK(per[c].precision == doctest::Approx(o.p[c]).epsilon(1e-12));
    CHECK(per[c].recall == doctest::Approx(o.r[c]).epsilon(1e-12));
    CHECK(per[c].f1 == doctest::Approx(o.f[c]).epsilon(1e-12));
    CHECK(round_to(per[c].precision, 2) == doctest::Approx(kTable[c][0]).epsilon(1e-12));
    CHECK(round_to(per[c].recall, 2) == doctest::Approx(kTable[c][1]).epsilon(1e-12));
    CHECK(round_to(per[c].f1, 2) == doctest::Approx(kTable[c][2]).epsilon(1e-12));
  }
}

TEST_CASE("overall accuracy is 245 of 446") {
  const auto cm = reference_confusion();
  CHECK(cm.total() == 446);
  CHECK(cm.trace() == 245);
  CHECK(accuracy(cm) == doctest::Approx(245.0 / 446.0).epsilon(1e-15));
  CHECK(round_to(accuracy(cm), 2) == doctest::Approx(0.55));
}

TEST_CASE("macro and weighted averages") {
  const auto cm = reference_confusion();
  const auto s = summary(cm);
  const Oracle o = oracle();
  double mp = 0, mr = 0, mf = 0, wp = 0, wr = 0, wf = 0;
  for (int c = 0; c < 7; ++c) {
    double row = 0;
    for (int k = 0; k < 7; ++k) row += static_cast<double>(kMatrix[c][k]);
    mp += o.p[c] / 7;
    mr += o.r[c] / 7;
    mf += o.f[c] / 7;
    wp += o.p[c] * row / 446;
    wr += o.r[c] * row / 446;
    wf += o.f[c] * row / 446;
  }
  CHECK(s.macro_precision == doctest::Approx(mp).epsilon(1e-12));
  CHECK(s.macro_recall == doctest::Approx(mr).epsilon(1e-12));
  CHECK(s.macro_f1 == doctest::Approx(mf).epsilon(1e-12));
  CHECK(s.weighted_precision == doctest::Approx(wp).epsilon(1e-12));
  CHECK(s.weighted_recall == doctest::Approx(wr).epsilon(1e-12));
  CHECK(s.weighted_f1 == doctest::Approx(wf).epsilon(1e-12));
  CHECK(std::abs(s.macro_precision - 0.589) < 0.001);
  CHECK(s.macro_f1 < s.macro_precision);
  CHECK(s.weighted_recall == doctest::Approx(s.accuracy).epsilon(1e-12));
}

TEST_CASE("zero denominators give zero") {
  ConfusionMatrix::Grid g{};
  g[0][0] = 3;
  g[1][0] = 2;
  const auto per = class_metrics(ConfusionMatrix(g));
  CHECK(per[1].precision == 0.0);
  CHECK(per[1].recall == 0.0);
  CHECK(per[1].f1 == 0.0);
  CHECK(per[2].precision == 0.0);
  CHECK(per[2].f1 == 0.0);
  CHECK(per[0].precision == doctest::Approx(0.6));
  CHECK(per[0].recall == 1.0);
  CHECK_THROWS_AS(class_metrics(ConfusionMatrix()), DataError);
  CHECK_THROWS_AS(accuracy(ConfusionMatrix()), DataError);
}

TEST_CASE("negative entries and empty prediction lists are rejected") {
  ConfusionMatrix::Grid g{};
  g[3][4] = -1;
  CHECK_THROWS_AS(ConfusionMatrix{g}, DataError);
  ConfusionMatrix cm;
  CHECK_THROWS_AS(cm.add(RiceVariety::Khazar, RiceVariety::Khazar, -1), DataError);
  CHECK_THROWS_AS(confusion_from_predictions({}), DataError);
}

TEST_CASE("confusion from predictions and csv layout") {
  const std::vector<std::pair<RiceVariety, RiceVariety>> pairs{
      {RiceVariety::Hashemi, RiceVariety::Hashemi},
      {RiceVariety::Hashemi, RiceVariety::Khazar},
      {RiceVariety::Shirodi, RiceVariety::Hashemi}};
  const auto cm = confusion_from_predictions(pairs);
  CHECK(cm.at(RiceVariety::Hashemi, RiceVariety::Khazar) == 1);
  CHECK(cm.total() == 3);
  const std::string csv = cm.to_csv();
  CHECK(csv.rfind("true\\predicted,AliKazemi,AnbarBoo,Hashemi,Khazar,SadreeDomSiahe,SadreeDomZard,Shirodi\n", 0) == 0);
  CHECK(csv.find("\nHashemi,0,0,1,1,0,0,0\n") != std::string::npos);
}

TEST_CASE("property: per-class counts partition the total") {
  Rng rng(1);
  for (int i = 0; i < 250; ++i) {
    const auto cm = random_matrix(rng);
    const auto per = class_metrics(cm);
    const auto s = summary(cm);
    for (const auto& c : per) {
      REQUIRE(c.tp + c.fp + c.fn + c.tn == cm.total());
      REQUIRE(c.f1 <= std::max(c.precision, c.recall) + 1e-12);
      REQUIRE(c.f1 >= std::min(c.precision, c.recall) - 1e-12);
    }
    REQUIRE(s.weighted_recall == doctest::Approx(s.accuracy).epsilon(1e-12));
    REQUIRE(s.accuracy >= 0.0);
    REQUIRE(s.accuracy <= 1.0);
  }
}

TEST_CASE("iou hand cases") {
  Mask a(2, 2);
  Mask b(2, 2);
  CHECK(iou(a, b) == 1.0);
  a.at(0, 0) = 1;
  CHECK(iou(a, b) == 0.0);
  b.at(0, 0) = 1;
  b.at(0, 1) = 1;
  CHECK(iou(a, b) == doctest::Approx(0.5));
  CHECK_THROWS_AS(iou(a, Mask(2, 3)), ShapeError);
}

TEST_CASE("property: iou is symmetric, bounded and 1 on identical masks") {
  Rng rng(2);
  for (int i = 0; i < 250; ++i) {
    const int h = 1 + static_cast<int>(rng.index(20));
    const int w = 1 + static_cast<int>(rng.index(20));
    const Mask a = testing::random_mask(rng, h, w, rng.uniform());
    const Mask b = testing::random_mask(rng, h, w, rng.uniform());
    const double x = iou(a, b);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 1.0);
    REQUIRE(x == iou(b, a));
    REQUIRE(iou(a, a) == 1.0);
    Mask both = a;
    for (std::size_t k = 0; k < both.data().size(); ++k) both.data()[k] = a.data()[k] | b.data()[k];
    REQUIRE(iou(a, both) >= x - 1e-12);
  }
}

TEST_CASE("dataset iou pools intersections and unions") {
  Mask p1(1, 4), t1(1, 4), p2(1, 4), t2(1, 4);
  p1.data()[0] = t1.data()[0] = 1;
  p2.data()[0] = 1;
  t2.data()[1] = t2.data()[2] = t2.data()[3] = 1;
  const std::vector<std::pair<Mask, Mask>> pairs{{p1, t1}, {p2, t2}};
  const auto d = dataset_iou(pairs);
  CHECK(d.mean_per_image == doctest::Approx(0.5));
  CHECK(d.aggregate == doctest::Approx(1.0 / 5.0));
  CHECK_THROWS_AS(dataset_iou({}), DataError);
}

TEST_CASE("json summary rounds to six significant digits") {
  const auto cm = reference_confusion();
  const auto j = to_json(class_metrics(cm), summary(cm));
  CHECK(j["accuracy"] == 0.549327);
  CHECK(j["classes"]["Hashemi"]["tp"] == 34);
}

}
