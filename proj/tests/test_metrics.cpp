#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "commrec/metrics.hpp"
#include "commrec/rng.hpp"
#include "oracles.hpp"

using namespace commrec;

TEST_CASE("ndcg hand case") {
  const std::vector<int> g{0, 2, 1};
  // DCG = 2/log2(3) + 1/2, IDCG = 2 + 1/log2(3)
  CHECK(std::abs(dcg_at_k(g, 3) - 1.76186) < 5e-6);
  const std::vector<int> ideal{2, 1, 0};
  CHECK(std::abs(dcg_at_k(ideal, 3) - 2.63093) < 5e-6);
  CHECK(std::abs(*ndcg_at_k(g, 3) - 0.669672) < 5e-7);
}

TEST_CASE("perfect order scores one, all-zero list is skipped") {
  const std::vector<int> ideal{2, 2, 1, 0};
  CHECK(*ndcg_at_k(ideal, 3) == 1.0);
  CHECK(*ndcg_at_k(ideal, kAllRanks) == 1.0);
  const std::vector<int> zeros{0, 0, 0};
  CHECK_FALSE(ndcg_at_k(zeros, 3).has_value());
  CHECK_FALSE(evaluate_ranking(zeros).has_value());
}

TEST_CASE("average precision and reciprocal rank") {
  const std::vector<int> rnr{1, 0, 2};
  CHECK(average_precision_at_k(rnr, 3) == doctest::Approx(0.833333333333));
  const std::vector<int> second{0, 1, 0};
  CHECK(reciprocal_rank(second) == 0.5);
  const std::vector<int> none{0, 0};
  CHECK(average_precision_at_k(none, 3) == 0.0);
  CHECK(reciprocal_rank(none) == 0.0);
}

TEST_CASE("metrics match straight-line oracles on random lists") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<int> g(n);
    for (auto& x : g) x = static_cast<int>(rng.below(3));
    for (std::size_t k : {std::size_t{3}, std::size_t{5}, kAllRanks}) {
      const double o = oracle::ndcg(g, k);
      const auto v = ndcg_at_k(g, k);
      if (o < 0) {
        CHECK_FALSE(v.has_value());
      } else {
        REQUIRE(v.has_value());
        CHECK(std::abs(*v - o) <= 1e-12);
      }
      CHECK(std::abs(average_precision_at_k(g, k) - oracle::average_precision(g, k)) <= 1e-12);
    }
    CHECK(std::abs(reciprocal_rank(g) - oracle::reciprocal_rank(g)) <= 1e-12);
  }
}

TEST_CASE("metric vector lies in [0,1] and the ideal permutation scores one") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> g(1 + rng.below(10));
    for (auto& x : g) x = static_cast<int>(rng.below(3));
    auto m = evaluate_ranking(g);
    if (!m) continue;
    for (double v : *m) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    std::sort(g.begin(), g.end(), std::greater<>());
    auto ideal = evaluate_ranking(g);
    CHECK((*ideal)[kNdcg3Index] == 1.0);
    CHECK((*ideal)[5] == 1.0);
  }
}
