#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pseco/error.hpp"
#include "pseco/pseudo_labeling.hpp"

using namespace pseco;

namespace {

std::vector<Detection> random_dets(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> cat(0, 2);
  std::uniform_int_distribution<int> level(0, 20);
  std::vector<Detection> dets;
  for (const BBox& b : oracle::random_grid_boxes(rng, n, 12)) dets.push_back({b, cat(rng), level(rng) / 20.0});
  return dets;
}

}  // namespace

TEST_CASE("generate_pseudo_labels hand cases") {
  CHECK(generate_pseudo_labels({}, 0.5).empty());

  const std::vector<Detection> one{{{0, 0, 4, 4}, 1, 0.6}};
  const auto kept = generate_pseudo_labels(one);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.6);
  CHECK_FALSE(kept[0].sigma.has_value());
  CHECK(kDefaultScoreThreshold == 0.5);

  // [0,0,10,10] vs [0,0,10,8]: IoU 0.8.
  const std::vector<Detection> overlap{{{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 8}, 0, 0.7}};
  const auto nms_out = generate_pseudo_labels(overlap, 0.5, 0.5);
  REQUIRE(nms_out.size() == 1);
  CHECK(nms_out[0].score == 0.9);

  // Same boxes on different categories do not suppress each other.
  const std::vector<Detection> split{{{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 8}, 1, 0.7}};
  CHECK(generate_pseudo_labels(split, 0.5, 0.5).size() == 2);
}

TEST_CASE("generate_pseudo_labels matches category-wise NMS then threshold") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> count(0, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto dets = random_dets(rng, count(rng));
    const double tau = 0.4;
    std::vector<std::size_t> expected;
    for (int c = 0; c <= 2; ++c) {
      std::vector<std::size_t> members;
      std::vector<BBox> boxes;
      std::vector<double> scores;
      for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].category_id != c) continue;
        members.push_back(i);
        boxes.push_back(dets[i].box);
        scores.push_back(dets[i].score);
      }
      for (std::size_t k : oracle::nms(boxes, scores, 0.5)) {
        if (dets[members[k]].score >= tau) expected.push_back(members[k]);
      }
    }
    std::sort(expected.begin(), expected.end(), [&](std::size_t l, std::size_t r) {
      return dets[l].score > dets[r].score || (dets[l].score == dets[r].score && l < r);
    });
    const auto got = generate_pseudo_labels(dets, tau, 0.5);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].box == dets[expected[i]].box);
      CHECK(got[i].category_id == dets[expected[i]].category_id);
      CHECK(got[i].score >= tau);
    }
  }
}

TEST_CASE("dropping low scores before NMS changes nothing when suppressors outscore") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> count(1, 10);
  const double tau = 0.5;
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    auto dets = random_dets(rng, count(rng));
    for (Detection& d : dets) d.category_id = 0;
    std::vector<BBox> boxes;
    std::vector<double> scores;
    for (const Detection& d : dets) {
      boxes.push_back(d.box);
      scores.push_back(d.score);
    }
    std::vector<bool> kept(dets.size(), false);
    for (std::size_t k : nms(boxes, scores, 0.5)) kept[k] = true;
    bool suppressed_are_low = true;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!kept[i] && dets[i].score >= tau) suppressed_are_low = false;
    }
    if (!suppressed_are_low) continue;
    std::vector<Detection> filtered;
    for (const Detection& d : dets) {
      if (d.score >= tau) filtered.push_back(d);
    }
    const auto after = generate_pseudo_labels(dets, tau, 0.5);
    const auto before = generate_pseudo_labels(filtered, tau, 0.5);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].box == before[i].box);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("pseudo_precision_curve fixtures") {
  const std::vector<double> thresholds{0.3, 0.9};
  const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 0}, {{20, 20, 30, 30}, 1}};
  std::vector<PseudoLabel> exact;
  for (const GroundTruth& g : gts) exact.push_back({g.box, g.category_id, 0.9, std::nullopt});
  for (const PrecisionPoint& p : pseudo_precision_curve(exact, gts, thresholds).points) CHECK(p.precision == 1.0);

  // [0,0,10,6] inside [0,0,10,10]: IoU 0.6.
  const std::vector<PseudoLabel> coarse{{{0, 0, 10, 6}, 0, 0.9, std::nullopt}};
  const std::vector<GroundTruth> one{{{0, 0, 10, 10}, 0}};
  const PrecisionCurve c = pseudo_precision_curve(coarse, one, thresholds);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].threshold == 0.3);
  CHECK(c.points[0].precision == 1.0);
  CHECK(c.points[1].precision == 0.0);

  const PrecisionCurve empty = pseudo_precision_curve({}, one, thresholds);
  CHECK(empty.empty_input);
  CHECK(empty.points[0].precision == 0.0);

  const std::vector<double> bad{0.5, 0.5};
  CHECK_THROWS_AS(pseudo_precision_curve(coarse, one, bad), InvalidInput);
}

TEST_CASE("pseudo_precision_curve is non-increasing in the threshold") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> count(0, 8);
  std::uniform_int_distribution<int> cat(0, 1);
  std::vector<double> thresholds;
  for (int i = 1; i < 20; ++i) thresholds.push_back(i * 0.05);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<PseudoLabel> pseudo;
    std::vector<GroundTruth> gts;
    for (const BBox& b : oracle::random_grid_boxes(rng, count(rng), 12)) pseudo.push_back({b, cat(rng), 0.9, {}});
    for (const BBox& b : oracle::random_grid_boxes(rng, count(rng), 12)) gts.push_back({b, cat(rng)});
    const PrecisionCurve c = pseudo_precision_curve(pseudo, gts, thresholds);
    for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].precision <= c.points[i - 1].precision);
  }
}
