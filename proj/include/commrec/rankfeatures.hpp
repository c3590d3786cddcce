#ifndef COMMREC_RANKFEATURES_HPP
#define COMMREC_RANKFEATURES_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "commrec/hetgraph.hpp"
#include "commrec/textrank.hpp"

namespace commrec {

struct TextParams {
  double mu = 2000.0;
  double k1 = 1.2;
  double b = 0.75;
};

struct QueryContext {
  std::string paper_id;
  std::string quote_text;
};

struct RankFeatureVector {
  std::string oer_id;
  Eigen::VectorXd values;
};

/// Stand-in for a -infinity language-model score so features stay finite.
inline constexpr double kDegenerateLmScore = -1e6;

/// Graph and text ranking features for (query, candidate OER) pairs:
/// one walk probability per meta-path, then lm, bm25 and four OER-type
/// indicators. Holds references to the graph and text index.
class RankFeatureExtractor {
 public:
  RankFeatureExtractor(const HetGraph& graph, const TextIndex& text, std::vector<MetaPath> metapaths,
                       TextParams params = {});

  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<MetaPath>& metapaths() const { return metapaths_; }

  /// The query's paper vertex followed by topics whose label shares a term
  /// with the quote. Throws for an unknown paper.
  std::vector<std::size_t> start_vertices(const QueryContext& query) const;

  /// Throws for an unknown paper or a candidate that is not an OER vertex.
  std::vector<RankFeatureVector> extract(const QueryContext& query,
                                         std::span<const std::string> candidates) const;

 private:
  const HetGraph& graph_;
  const TextIndex& text_;
  std::vector<MetaPath> metapaths_;
  TextParams params_;
  std::vector<std::string> names_;
  std::map<std::string, std::vector<std::size_t>> topics_by_term_;
};

}  // namespace commrec

#endif  // COMMREC_RANKFEATURES_HPP
