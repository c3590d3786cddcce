#include "commrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace commrec {

double dcg_at_k(std::span<const int> ranked_gains, std::size_t k) {
  const std::size_t n = std::min(k, ranked_gains.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dcg += ranked_gains[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg;
}

std::optional<double> ndcg_at_k(std::span<const int> ranked_gains, std::size_t k) {
  std::vector<int> ideal(ranked_gains.begin(), ranked_gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at_k(ideal, k);
  if (idcg <= 0.0) return std::nullopt;
  return dcg_at_k(ranked_gains, k) / idcg;
}

double average_precision_at_k(std::span<const int> ranked_gains, std::size_t k) {
  const auto total_relevant = static_cast<std::size_t>(std::count_if(
      ranked_gains.begin(), ranked_gains.end(), [](int g) { return g >= kRelevantGain; }));
  if (total_relevant == 0) return 0.0;
  const std::size_t n = std::min(k, ranked_gains.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_gains[i] >= kRelevantGain) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(std::min(total_relevant, k));
}

double reciprocal_rank(std::span<const int> ranked_gains) {
  for (std::size_t i = 0; i < ranked_gains.size(); ++i) {
    if (ranked_gains[i] >= kRelevantGain) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

std::optional<MetricVector> evaluate_ranking(std::span<const int> ranked_gains) {
  auto ndcg3 = ndcg_at_k(ranked_gains, 3);
  if (!ndcg3) return std::nullopt;
  return MetricVector{average_precision_at_k(ranked_gains, 3),
                      average_precision_at_k(ranked_gains, 5),
                      average_precision_at_k(ranked_gains, kAllRanks),
                      *ndcg3,
                      *ndcg_at_k(ranked_gains, 5),
                      *ndcg_at_k(ranked_gains, kAllRanks),
                      reciprocal_rank(ranked_gains)};
}

}  // namespace commrec
