#ifndef COMMREC_COMMUNITY_HPP
#define COMMREC_COMMUNITY_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/features.hpp"
#include "commrec/kmedoids.hpp"
#include "commrec/maxent.hpp"

namespace commrec {

struct CommunityModel {
  std::size_t k = 0;
  std::vector<std::string> medoid_ids;      // medoid_ids[c] is the medoid of community c
  std::map<std::string, int> assignment;    // reader -> community in [0, k)
  std::string distance = "euclidean";
  std::vector<FeatureGroupId> source_groups;
  double cost = 0.0;
};

/// K-medoids over unified reader vectors. Readers are sorted by id before
/// the seeded initialization, so the result does not depend on input order.
CommunityModel cluster_readers(const UnifiedVectors& vectors, std::size_t k, std::uint64_t seed,
                               std::size_t restarts = kDefaultKMedoidsRestarts);

/// Nearest-medoid community for an arbitrary vector (ties to lower index).
int nearest_medoid(const CommunityModel& model, const UnifiedVectors& medoid_space,
                   const Eigen::Ref<const Eigen::RowVectorXd>& vector);

using ReaderPair = std::pair<std::string, std::string>;  // first < second

/// Unordered pairs of distinct readers that exchanged at least one reply.
std::set<ReaderPair> reply_pairs(const Corpus& corpus);

struct PairwiseScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t same_community_pairs = 0;
  std::size_t reply_pair_count = 0;
  std::size_t agreeing_pairs = 0;
};

/// Pairwise precision/recall of same-community pairs against reply pairs.
/// Empty denominators give 0. Throws if a pair names an unclustered reader.
PairwiseScores pairwise_cluster_eval(const std::map<std::string, int>& assignment,
                                     const std::set<ReaderPair>& pairs);

enum class CommunitySource { Clustered, Predicted };
std::string_view to_string(CommunitySource source);

struct TwoStepOptions {
  std::size_t k = 3;
  std::size_t kmedoids_restarts = kDefaultKMedoidsRestarts;
  std::vector<GroupWeight> rpf_groups = default_rpf_groups();
  std::vector<GroupWeight> rbf_groups = default_rbf_groups();
  MaxEntOptions maxent;
};

struct CommunityAssignment {
  std::map<std::string, int> community;
  std::map<std::string, CommunitySource> source;
  CommunityModel clustering;
  std::optional<MaxEntModel> classifier;
  /// True when no reader had RPF and clustering fell back to RBF groups.
  bool clustered_on_rbf = false;
};

/// Clusters readers with RPF on their RPF groups, trains a MaxEnt classifier
/// on those readers' RBF vectors with the cluster labels, and predicts the
/// community of every RBF-only reader.
CommunityAssignment two_step_communities(const FeatureMatrix& features, const TwoStepOptions& options,
                                         std::uint64_t seed);

/// Trains the classifier of the second step on labeled readers' RBF vectors.
MaxEntModel train_community_classifier(const UnifiedVectors& rbf,
                                       const std::map<std::string, int>& labels, std::size_t k,
                                       const MaxEntOptions& options);

/// communities.tsv: reader<TAB>community<TAB>source, sorted by reader.
void write_communities(std::ostream& out, const std::map<std::string, int>& community,
                       const std::map<std::string, CommunitySource>& source);
std::pair<std::map<std::string, int>, std::map<std::string, CommunitySource>> read_communities(
    std::istream& in, const std::string& stream_name);

nlohmann::json community_model_to_json(const CommunityModel& model);
CommunityModel community_model_from_json(const nlohmann::json& doc);

}  // namespace commrec

#endif  // COMMREC_COMMUNITY_HPP
