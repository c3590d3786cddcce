#ifndef COMMREC_METRICS_HPP
#define COMMREC_METRICS_HPP

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>

namespace commrec {

/// Rank cutoff meaning "the whole list".
inline constexpr std::size_t kAllRanks = std::numeric_limits<std::size_t>::max();

/// Items with gain >= this count as relevant for MAP and MRR.
inline constexpr int kRelevantGain = 1;

/// Linear-gain DCG over the first k positions: sum gain_i / log2(i + 1).
double dcg_at_k(std::span<const int> ranked_gains, std::size_t k);

/// DCG normalized by the DCG of the same gains sorted descending. nullopt
/// when that ideal DCG is zero (the query cannot be scored).
std::optional<double> ndcg_at_k(std::span<const int> ranked_gains, std::size_t k);

/// Mean precision at each relevant rank <= k, divided by min(#relevant, k).
double average_precision_at_k(std::span<const int> ranked_gains, std::size_t k);

/// 1 / rank of the first relevant item, 0 if there is none.
double reciprocal_rank(std::span<const int> ranked_gains);

inline constexpr std::array<std::string_view, 7> kMetricNames{
    "map@3", "map@5", "map@all", "ndcg@3", "ndcg@5", "ndcg@all", "mrr"};
inline constexpr std::size_t kNdcg3Index = 3;  // position of "ndcg@3"

using MetricVector = std::array<double, kMetricNames.size()>;

/// All seven metrics for one ranked list, or nullopt if it is unscorable.
std::optional<MetricVector> evaluate_ranking(std::span<const int> ranked_gains);

}  // namespace commrec

#endif  // COMMREC_METRICS_HPP
