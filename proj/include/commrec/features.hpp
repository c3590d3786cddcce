#ifndef COMMREC_FEATURES_HPP
#define COMMREC_FEATURES_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/text.hpp"

namespace commrec {

enum class FeatureGroupId {
  RpfCourses,      // RPF-C: boolean course presence
  RpfSkills,       // RPF-TB: ordinal skills scaled to [0,1]
  QuoteLocation,   // quote/question counts per location cluster
  QuoteText,       // TF of quote text of quote events
  QuestionText,    // TF of question bodies
  OerRating,       // Good=2, OK=1, Bad=0 per rated OER
  CQLocation,      // comment/question counts per location cluster
  CQQuoteText,     // TF of the quoted passage of comments/questions
  CQContentText,   // TF of comment/question bodies
  ReplyRelation,   // reply exchanges per co-reader
};

inline constexpr std::array<FeatureGroupId, 10> kFeatureGroups{
    FeatureGroupId::RpfCourses,   FeatureGroupId::RpfSkills,   FeatureGroupId::QuoteLocation,
    FeatureGroupId::QuoteText,    FeatureGroupId::QuestionText, FeatureGroupId::OerRating,
    FeatureGroupId::CQLocation,   FeatureGroupId::CQQuoteText, FeatureGroupId::CQContentText,
    FeatureGroupId::ReplyRelation};

std::string_view to_string(FeatureGroupId group);
std::optional<FeatureGroupId> parse_feature_group(std::string_view name);
constexpr bool is_rpf(FeatureGroupId g) {
  return g == FeatureGroupId::RpfCourses || g == FeatureGroupId::RpfSkills;
}

/// A 2-D reading position: vertical flow (page index + y center) and x center.
Eigen::Vector2d location_point(std::int64_t page, const BBox& box);

struct LocationCenter {
  std::int64_t page = 0;
  double x_center = 0.0;
  double y_center = 0.0;
};

/// Per-paper K-medoids clusters of event locations. Columns of the location
/// feature groups enumerate (paper, cluster) pairs in paper-id order.
class LocationClusterModel {
 public:
  LocationClusterModel() = default;
  LocationClusterModel(std::size_t k_loc, std::map<std::string, std::vector<LocationCenter>> papers);

  std::size_t k_loc() const { return k_loc_; }
  bool empty() const { return papers_.empty(); }
  const std::map<std::string, std::vector<LocationCenter>>& papers() const { return papers_; }

  /// Total number of (paper, cluster) columns.
  std::size_t column_count() const { return column_count_; }
  std::vector<std::string> column_labels() const;

  /// Column of the nearest center of the event's paper; nullopt for an
  /// unknown paper. Ties go to the lower cluster index.
  std::optional<std::size_t> assign(const std::string& paper_id, std::int64_t page,
                                    const BBox& box) const;

 private:
  std::size_t k_loc_ = 0;
  std::map<std::string, std::vector<LocationCenter>> papers_;
  std::map<std::string, std::size_t> offsets_;
  std::size_t column_count_ = 0;
};

inline constexpr std::array<EventKind, 3> kLocatedKinds{EventKind::Quote, EventKind::Question,
                                                        EventKind::Comment};

/// Clusters the locations of events of the given kinds, separately per paper.
/// Papers with at most k_loc distinct locations get one cluster per location.
LocationClusterModel build_location_clusters(const Corpus& corpus, std::size_t k_loc,
                                             std::uint64_t seed,
                                             std::span<const EventKind> kinds = kLocatedKinds);

struct FeatureGroup {
  FeatureGroupId id = FeatureGroupId::QuoteText;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;     // readers x columns
  std::string normalization;  // how raw values were scaled before storage
};

struct FeatureSettings {
  std::size_t k_loc = 10;
  /// One location clustering for both query and comment/question groups.
  bool shared_location_clusters = true;
  TokenizerSettings tokenizer;
};

/// Per-reader feature groups; rows follow `reader_ids` (sorted).
struct FeatureMatrix {
  std::vector<std::string> reader_ids;
  std::vector<bool> has_rpf;
  std::vector<FeatureGroup> groups;
  nlohmann::json settings;  // echoed extraction settings

  bool has_group(FeatureGroupId id) const;
  const FeatureGroup& group(FeatureGroupId id) const;
  std::optional<std::size_t> row_of(const std::string& reader_id) const;
};

/// RPF-C and RPF-TB groups. Skills map (v - 1) / 3 into [0,1]; an unknown
/// skill is 0.
FeatureMatrix extract_rpf(const Corpus& corpus);

/// The eight RBF groups. `cq_locations` clusters comment/question events;
/// pass the query clustering again for the shared configuration.
FeatureMatrix extract_rbf(const Corpus& corpus, const LocationClusterModel& query_locations,
                          const LocationClusterModel& cq_locations,
                          const TokenizerSettings& tokenizer);
FeatureMatrix extract_rbf(const Corpus& corpus, const LocationClusterModel& locations,
                          const TokenizerSettings& tokenizer);

/// RPF and RBF groups together, fitting the location clustering(s) first.
FeatureMatrix featurize(const Corpus& corpus, const FeatureSettings& settings, std::uint64_t seed);

struct GroupWeight {
  FeatureGroupId group;
  double weight = 1.0;
};

struct UnifiedVectors {
  std::vector<std::string> reader_ids;
  Eigen::MatrixXd rows;
  std::vector<FeatureGroupId> group_order;
  std::vector<std::size_t> offsets;  // column offset of each group
  /// Readers lacking RPF while an RPF group was requested.
  std::vector<std::string> flagged_readers;
};

/// L2-normalizes each group per reader, scales by its weight and
/// concatenates the groups in the requested order.
UnifiedVectors combine_groups(const FeatureMatrix& features, std::span<const GroupWeight> groups);

/// Restricts unified vectors to the given readers (in the order given).
UnifiedVectors select_readers(const UnifiedVectors& vectors, std::span<const std::string> readers);

std::vector<GroupWeight> default_rpf_groups();
/// All RBF groups except ReplyRelation, which doubles as ground truth.
std::vector<GroupWeight> default_rbf_groups();

nlohmann::json features_to_json(const FeatureMatrix& features);
FeatureMatrix features_from_json(const nlohmann::json& doc);

}  // namespace commrec

#endif  // COMMREC_FEATURES_HPP
