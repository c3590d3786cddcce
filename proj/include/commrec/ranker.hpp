#ifndef COMMREC_RANKER_HPP
#define COMMREC_RANKER_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/rankfeatures.hpp"

namespace commrec {

/// One judged query: candidates sorted by OER id, with raw features and
/// linear gains (NotSure judgments already removed).
struct QueryList {
  std::string query_id;
  std::string reader_id;
  std::string paper_id;
  std::vector<std::string> oer_ids;
  Eigen::MatrixXd features;  // candidates x features
  std::vector<int> gains;
};

struct RankingDataset {
  std::vector<std::string> feature_names;
  std::vector<QueryList> queries;

  RankingDataset subset(std::span<const std::size_t> indices) const;
};

/// Feature vectors for every judged query of the corpus.
RankingDataset build_ranking_dataset(const Corpus& corpus, const RankFeatureExtractor& extractor);

nlohmann::json dataset_to_json(const RankingDataset& dataset);
RankingDataset dataset_from_json(const nlohmann::json& doc);

/// Per-feature min/max recorded on training data; maps into [0,1] with
/// clamping, constant features map to 0.
struct FeatureNormalization {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static FeatureNormalization fit(const RankingDataset& dataset);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

struct CoordinateAscentOptions {
  std::size_t restarts = 5;
  std::size_t metric_k = 3;  // nDCG@k is the training objective
  double tolerance = 1e-5;
  std::size_t max_sweeps = 100;
};

struct RankingModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd weights;  // L1-normalized unless all zero
  std::string metric_name;
  double metric_value = 0.0;
  std::string community_tag = "global";
  FeatureNormalization normalization;
  std::size_t restart = 0;
  /// Training metric at the start and after each accepted coordinate step
  /// of the winning restart.
  std::vector<double> accepted_trace;
};

/// Linear ranker trained by coordinate ascent on mean training nDCG@k.
/// Each coordinate tries the multiplicative step grid plus the exact best
/// value along that coordinate. Throws Untrainable when no query has a positive ideal gain.
RankingModel coordinate_ascent_train(const RankingDataset& dataset,
                                     const CoordinateAscentOptions& options, std::uint64_t seed);

/// Mean nDCG@k of a weight vector over the scorable queries of already
/// normalized data (scores w.x, ties by candidate order).
double mean_training_ndcg(const RankingDataset& normalized, const Eigen::VectorXd& weights,
                          std::size_t k);

struct ScoredCandidate {
  std::string oer_id;
  double score = 0.0;
};

/// Scores w.x on normalized features, descending, ties by ascending OER id.
std::vector<ScoredCandidate> rank(const RankingModel& model,
                                  std::span<const std::string> feature_names,
                                  std::span<const RankFeatureVector> candidates);

/// Gains of a query in the order the model ranks its candidates.
std::vector<int> ranked_gains(const RankingModel& model, const QueryList& query);

struct RankerParams {
  CoordinateAscentOptions ascent;
  std::size_t min_judged_queries = 10;
};

struct CommunityRankerSet {
  std::map<int, RankingModel> community_models;
  std::optional<RankingModel> global;
  std::size_t min_judged_queries = 10;

  /// The community's own model, else the global one; throws NoModel.
  const RankingModel& resolve(int community) const;
};

/// A model per community with at least `min_judged_queries` queries plus
/// a global model on all queries.
CommunityRankerSet train_communitized(const RankingDataset& dataset,
                                      const std::map<std::string, int>& communities,
                                      const RankerParams& params, std::uint64_t seed);

nlohmann::json model_to_json(const RankingModel& model);
RankingModel model_from_json(const nlohmann::json& doc);

}  // namespace commrec

#endif  // COMMREC_RANKER_HPP
