#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fakeseg/error.hpp"
#include "fakeseg/injection.hpp"
#include "fakeseg/metrics.hpp"
#include "fakeseg/rng.hpp"
#include "oracles.hpp"

using namespace fakeseg;

namespace {
SegmentationMap m(const char* s) { return SegmentationMap::from_string(s); }
}  // namespace

TEST_CASE("iou on hand cases") {
  CHECK(iou(m("RRFFR"), m("RRFFR")) == 1.0);
  CHECK(iou(m("RRRRRRRRRR"), m("RRRRRRRRFF")) == doctest::Approx(8.0 / 12.0).epsilon(1e-15));
  CHECK(iou(m("RRRR"), m("FFFF")) == 0.0);
  CHECK(frame_accuracy(m("RRRRRRRRRR"), m("RRRRRRRRFF")) == doctest::Approx(0.8));
  CHECK(frame_accuracy(m("RF"), m("FR")) == 0.0);
}

TEST_CASE("iou errors") {
  CHECK_THROWS_AS(iou(m("RR"), m("RRR")), ShapeError);
  CHECK_THROWS_AS(frame_accuracy(m("RR"), m("R")), ShapeError);
  CHECK_THROWS_AS(iou(SegmentationMap{}, SegmentationMap{}), DomainError);
}

TEST_CASE("iou matches the set definition and accuracy identity") {
  Pcg32 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t t = 1 + rng.below(60);
    const auto gt = oracle::random_map(rng, t, rng.uniform());
    const auto pred = oracle::random_map(rng, t, rng.uniform());
    const double i = iou(gt, pred);
    const double a = frame_accuracy(gt, pred);
    CHECK(i == doctest::Approx(oracle::set_iou(gt, pred)).epsilon(1e-12));
    CHECK(std::abs(i - a / (2.0 - a)) < 1e-12);
    CHECK(i == iou(pred, gt));
  }
}

TEST_CASE("baseline closed form") {
  for (int k = 0; k <= 10; ++k) {
    CHECK(expected_iou_baseline({k / 10.0, 0.5}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  CHECK(expected_iou_baseline({1.0, 1.0}) == 1.0);
  CHECK(expected_iou_baseline({0.0, 1.0}) == 0.0);
  CHECK_THROWS_AS(expected_iou_baseline({1.2, 0.5}), DomainError);
  CHECK_THROWS_AS(expected_iou_baseline({0.5, -0.1}), DomainError);
}

TEST_CASE("baseline agrees with simulation of the ratio of expectations") {
  // f = 0.757 Real frames, guesser emits Real with p = 0.5 and p = 0.8
  Pcg32 rng(7);
  const std::size_t t = 10000;
  for (double p : {0.5, 0.8}) {
    double c_sum = 0.0, union_sum = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto gt = oracle::random_map(rng, t, 1.0 - 0.757);
      const auto pred = oracle::random_map(rng, t, 1.0 - p);
      const double c = static_cast<double>(count_agreement(gt, pred));
      c_sum += c;
      union_sum += c + 2.0 * (static_cast<double>(t) - c);
    }
    CHECK(std::abs(c_sum / union_sum - expected_iou_baseline({0.757, p})) < 0.005);
  }
}

TEST_CASE("auc hand cases") {
  CHECK(frame_auc(m("RRFF"), ScoreMap({0.1, 0.2, 0.8, 0.9})) == 1.0);
  CHECK(frame_auc(m("RRFF"), ScoreMap({0.9, 0.8, 0.2, 0.1})) == 0.0);
  CHECK(frame_auc(m("RFRF"), ScoreMap({0.4, 0.4, 0.4, 0.4})) == 0.5);
  // six frames, one tie between a Fake and a Real frame
  const auto gt = m("RFRFFR");
  const std::vector<double> s{0.2, 0.6, 0.6, 0.9, 0.1, 0.3};
  // pairs (F,R): 0.6>{0.2,0.3} tie 0.6; 0.9 beats 3; 0.1 beats none -> 2.5+3+0 = 5.5 of 9
  CHECK(frame_auc(gt, ScoreMap(s)) == doctest::Approx(5.5 / 9.0).epsilon(1e-15));
  CHECK(frame_auc(gt, ScoreMap(s)) == oracle::pairwise_auc(gt, s));
}

TEST_CASE("auc equals the pairwise oracle exactly") {
  Pcg32 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + rng.below(199);
    auto gt = oracle::random_map(rng, t, 0.3);
    gt[0] = FrameLabel::Real;
    gt[1] = FrameLabel::Fake;
    std::vector<double> s(t);
    // coarse grid forces ties
    for (auto& x : s) x = static_cast<double>(rng.below(8)) / 7.0;
    CHECK(frame_auc(gt, ScoreMap(s)) == oracle::pairwise_auc(gt, s));
  }
}

TEST_CASE("auc errors") {
  CHECK_THROWS_AS(frame_auc(m("RRR"), ScoreMap({0.1, 0.2, 0.3})), DomainError);
  CHECK_THROWS_AS(frame_auc(m("RF"), ScoreMap({0.1, 0.2, 0.3})), ShapeError);
}

TEST_CASE("score maps") {
  CHECK_THROWS_AS(ScoreMap({0.1, 1.5}), DomainError);
  CHECK_THROWS_AS(ScoreMap({std::nan("")}), DomainError);
  CHECK(ScoreMap({0.2, 0.5, 0.7}).threshold(0.5) == m("RFF"));
}

TEST_CASE("video label and score") {
  CHECK(video_label(ScoreMap({0.9, 0.9, 0.9})) == FrameLabel::Fake);
  CHECK(video_label(ScoreMap({0.1, 0.1})) == FrameLabel::Real);
  CHECK(video_score(ScoreMap({0.1, 0.5, 0.66})) == doctest::Approx(0.42));
  CHECK(video_label(ScoreMap({0.1, 0.5, 0.66}), 0.5) == FrameLabel::Real);
  CHECK_THROWS(video_score(ScoreMap{}));
}

TEST_CASE("segments_of") {
  CHECK(segments_of(m("RRRR")).empty());
  CHECK(segments_of(m("RRFFFRR")) == std::vector<Segment>{{2, 3}});
  CHECK(segments_of(m("FFRRFF")) == std::vector<Segment>{{0, 2}, {4, 2}});
  Pcg32 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto map = oracle::random_map(rng, 1 + rng.below(40), rng.uniform());
    const SegmentPlan plan{"v", segments_of(map)};
    CHECK(render_map(plan, map.size()) == map);
  }
}

TEST_CASE("segmap text and json io") {
  const auto a = m("RRFFR");
  const auto b = m("F");
  std::stringstream ss;
  write_segmap_text(ss, a);
  write_segmap_text(ss, b);
  CHECK(ss.str() == "RRFFR\nF\n");
  const auto all = read_segmap_text_all(ss);
  REQUIRE(all.size() == 2);
  CHECK(all[0] == a);
  CHECK(all[1] == b);
  CHECK(segmap_to_json(a) == R"({"labels":[0,0,1,1,0]})");
  CHECK(segmap_from_json(segmap_to_json(a)) == a);
  CHECK_THROWS_AS(SegmentationMap::from_string("RXF"), FormatError);
  CHECK_THROWS_AS(segmap_from_json(R"({"labels":[0,2]})"), FormatError);
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(midranks(std::vector<double>{3, 1, 3}) == std::vector<double>{2.5, 1.0, 2.5});
}
