#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pseco/error.hpp"
#include "pseco/geometry.hpp"

using namespace pseco;

TEST_CASE("iou hand cases") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
}

TEST_CASE("iou rejects degenerate boxes") {
  CHECK_THROWS_AS(iou({0, 0, 0, 1}, {0, 0, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(iou({0, 0, 1, 1}, {2, 0, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(iou({0, 0, NAN, 1}, {0, 0, 1, 1}), InvalidInput);
}

TEST_CASE("iou matches the cell-counting oracle and its invariants") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const BBox a = oracle::random_grid_box(rng);
    const BBox b = oracle::random_grid_box(rng);
    const double v = iou(a, b);
    CHECK(v == oracle::cell_iou(a, b));
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == 1.0);
    const double s = scale(rng);
    const double scaled = iou(transform_box(a, s), transform_box(b, s));
    CHECK(std::abs(scaled - v) <= 1e-12 * std::max(1.0, v));
  }
}

TEST_CASE("iou_matrix entries") {
  const std::vector<BBox> a{{0, 0, 2, 2}};
  const std::vector<BBox> b{{1, 1, 3, 3}, {0, 0, 2, 2}};
  const IouMatrix m = iou_matrix(a, b);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == doctest::Approx(1.0 / 7.0));
  CHECK(m(0, 1) == 1.0);

  const std::vector<BBox> d{{0, 0, 1, 1}, {5, 5, 6, 6}};
  const IouMatrix id = iou_matrix(d, d);
  CHECK(id(0, 0) == 1.0);
  CHECK(id(0, 1) == 0.0);
  CHECK(id(1, 0) == 0.0);
  CHECK(id(1, 1) == 1.0);
  CHECK(iou_matrix(std::vector<BBox>{}, d).empty());
}

TEST_CASE("nms hand cases") {
  const std::vector<BBox> one{{0, 0, 1, 1}};
  const std::vector<double> s1{0.3};
  CHECK(nms(one, s1) == std::vector<std::size_t>{0});

  const std::vector<BBox> same{{0, 0, 4, 4}, {0, 0, 4, 4}};
  const std::vector<double> s2{0.9, 0.8};
  CHECK(nms(same, s2, 0.5) == std::vector<std::size_t>{0});

  const std::vector<BBox> apart{{0, 0, 1, 1}, {5, 5, 6, 6}};
  const std::vector<double> s3{0.2, 0.7};
  CHECK(nms(apart, s3) == std::vector<std::size_t>{1, 0});

  const std::vector<double> wrong{0.1};
  CHECK_THROWS_AS(nms(apart, wrong), InvalidInput);
}

TEST_CASE("nms matches the exhaustive fixed-point oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> count(0, 10);
  std::uniform_int_distribution<int> level(0, 9);
  std::uniform_real_distribution<double> thr(0.1, 0.9);
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<BBox> boxes = oracle::random_grid_boxes(rng, count(rng), 12);
    std::vector<double> scores;
    // Coarse score levels make ties common.
    for (std::size_t i = 0; i < boxes.size(); ++i) scores.push_back(level(rng) / 10.0);
    const double t = thr(rng);
    CHECK(nms(boxes, scores, t) == oracle::nms(boxes, scores, t));
  }
}

TEST_CASE("transform_box") {
  const BBox b{1, 2, 5, 7};
  CHECK(transform_box(b, 1.0) == b);
  CHECK(transform_box({0, 0, 10, 10}, 0.5) == BBox{0, 0, 5, 5});
  CHECK(transform_box({2, 0, 4, 4}, 1.0, true, 10.0) == BBox{6, 0, 8, 4});
  CHECK(transform_box(transform_box(b, 1.0, true, 10.0), 1.0, true, 10.0) == b);
  CHECK_THROWS_AS(transform_box(b, 0.0), InvalidInput);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < 500; ++i) {
    const BBox a = oracle::random_grid_box(rng, 50);
    const double s = scale(rng);
    const BBox back = transform_box(transform_box(a, s), 1.0 / s);
    CHECK(std::abs(back.x1 - a.x1) <= 1e-9);
    CHECK(std::abs(back.y1 - a.y1) <= 1e-9);
    CHECK(std::abs(back.x2 - a.x2) <= 1e-9);
    CHECK(std::abs(back.y2 - a.y2) <= 1e-9);
  }
}
