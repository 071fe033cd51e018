#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pseco/error.hpp"
#include "pseco/pcv.hpp"

using namespace pseco;

TEST_CASE("consistency_vote fixtures") {
  const BBox pseudo{0, 0, 10, 10};
  const std::vector<BBox> same{pseudo, pseudo};
  CHECK(consistency_vote(same, pseudo) == 1.0);
  const std::vector<BBox> mixed{{0, 0, 10, 5}, {0, 0, 10, 7}, {0, 0, 10, 9}};
  CHECK(std::abs(consistency_vote(mixed, pseudo) - 0.7) <= 1e-12);
  const std::vector<BBox> apart{{20, 20, 30, 30}, {40, 0, 41, 1}};
  CHECK(consistency_vote(apart, pseudo) == 0.0);
  CHECK_THROWS_AS(consistency_vote(std::vector<BBox>{}, pseudo), InvalidInput);
}

TEST_CASE("consistency_vote is bounded and order-free") {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<std::size_t> count(1, 8);
  for (int trial = 0; trial < 500; ++trial) {
    const BBox pseudo = oracle::random_grid_box(rng, 12);
    std::vector<BBox> votes = oracle::random_grid_boxes(rng, count(rng), 12);
    const double sigma = consistency_vote(votes, pseudo);
    CHECK(sigma >= 0.0);
    CHECK(sigma <= 1.0);
    const bool all_equal = std::all_of(votes.begin(), votes.end(), [&](const BBox& b) { return b == pseudo; });
    CHECK((sigma == 1.0) == all_equal);
    std::vector<BBox> reversed(votes.rbegin(), votes.rend());
    CHECK(consistency_vote(reversed, pseudo) == doctest::Approx(sigma).epsilon(1e-15));
  }
}

TEST_CASE("attach_sigma") {
  const std::vector<PseudoLabel> pseudo{
      {{0, 0, 10, 10}, 0, 0.9, {}}, {{20, 0, 30, 10}, 0, 0.9, {}}, {{50, 50, 60, 60}, 1, 0.9, {}}};
  // Box 0 gets regressed boxes at IoU 0.8 and 0.6, box 1 one at 0.4, box 2 none.
  const std::vector<Prediction> preds{
      {{0.9, 0.1}, {0, 0, 10, 8}}, {{0.9, 0.1}, {0, 0, 10, 6}}, {{0.9, 0.1}, {20, 0, 30, 4}}, {{0.1, 0.1}, {0, 0, 1, 1}}};
  AssignmentResult a;
  a.labels = {ProposalLabel::positive(0), ProposalLabel::positive(0), ProposalLabel::positive(1),
              ProposalLabel::negative()};
  a.positives_per_gt = {2, 1, 0};
  const auto out = attach_sigma(pseudo, a, preds);
  REQUIRE(out.size() == 3);
  CHECK(*out[0].sigma == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(*out[1].sigma == doctest::Approx(0.4).epsilon(1e-14));
  CHECK_FALSE(out[2].sigma.has_value());

  const auto scores = consistency_scores(pseudo, a, preds);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].n_positives == 2);
  CHECK(scores[1].gt_index == 1);

  AssignmentResult bad = a;
  bad.labels[3] = ProposalLabel::positive(7);
  CHECK_THROWS_AS(attach_sigma(pseudo, bad, preds), InvalidInput);
}
