#ifndef COMMREC_EVAL_HPP
#define COMMREC_EVAL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrec/community.hpp"
#include "commrec/features.hpp"
#include "commrec/metrics.hpp"
#include "commrec/ranker.hpp"

namespace commrec {

/// Fold index of each item. Items are grouped by stratum (ascending), each
/// group is shuffled with the seed, and groups are dealt round-robin with
/// the offset carried from one stratum to the next.
std::vector<std::size_t> assign_folds(std::span<const int> strata, std::size_t folds,
                                      std::uint64_t seed);

/// Outcome of one test query under both systems. The metric vectors are
/// empty when the query has no positive gain.
struct QueryOutcome {
  std::string query_id;
  std::string reader_id;
  std::size_t fold = 0;
  int community = 0;
  bool used_global_fallback = false;
  std::optional<MetricVector> communitized;
  std::optional<MetricVector> baseline;
};

struct SystemSummary {
  MetricVector means{};
  /// Per-fold means over that fold's evaluated queries; nullopt if none.
  std::vector<std::optional<MetricVector>> fold_means;
};

struct SignTest {
  std::size_t wins = 0;    // communitized strictly better
  std::size_t losses = 0;  // baseline strictly better
  std::size_t ties = 0;
  double p_value = 1.0;  // two-sided exact binomial over wins + losses
};

/// Two-sided exact sign test on paired values (ties dropped).
SignTest paired_sign_test(std::span<const double> a, std::span<const double> b);

struct PredictionSummary {
  std::size_t predicted = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// confusion[truth][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t intercept_only = 0;  // held-out readers with an all-zero RBF vector
};

struct MetricReport {
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::size_t total_queries = 0;
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;
  SystemSummary communitized;
  SystemSummary baseline;
  SignTest ndcg3_sign_test;
  std::vector<QueryOutcome> queries;
  std::optional<PredictionSummary> prediction;
  std::vector<std::string> log;
};

/// Builds the summaries and the sign test from per-query outcomes.
MetricReport summarize_outcomes(std::vector<QueryOutcome> outcomes, std::size_t folds,
                                std::uint64_t seed);

struct CrossValidationOptions {
  std::size_t folds = 10;
  RankerParams ranker;
};

/// Stratified k-fold evaluation of communitized rankers against the global
/// baseline. Every judged reader needs a community. Test queries of a
/// community without its own model use the global one.
MetricReport cross_validate_ranking(const RankingDataset& dataset,
                                    const std::map<std::string, int>& communities,
                                    const CrossValidationOptions& options, std::uint64_t seed);

struct SimulationOptions {
  double fraction = 0.25;
  std::size_t folds = 4;
  TwoStepOptions two_step;
  CrossValidationOptions ranking;
  /// Give held-out readers their RPF community instead of the prediction.
  bool oracle_heldout = false;
};

/// Hides the profiles of a rotating fraction of readers, clusters the rest
/// on RPF, predicts the hidden readers' communities with MaxEnt on RBF and
/// cross-validates ranking with the mixed assignment. Held-out queries are
/// pooled across reader folds. The true community of a held-out reader is
/// its nearest RPF medoid. Requires RPF for every reader.
MetricReport simulate_missing_rpf(const FeatureMatrix& features, const RankingDataset& dataset,
                                  const SimulationOptions& options, std::uint64_t seed);

nlohmann::json report_to_json(const MetricReport& report);

}  // namespace commrec

#endif  // COMMREC_EVAL_HPP
