#include "commrec/rankfeatures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "commrec/error.hpp"

namespace commrec {

RankFeatureExtractor::RankFeatureExtractor(const HetGraph& graph, const TextIndex& text,
                                           std::vector<MetaPath> metapaths, TextParams params)
    : graph_(graph), text_(text), metapaths_(std::move(metapaths)), params_(params) {
  for (const auto& path : metapaths_) {
    validate_metapath(graph_, path);
    names_.push_back("walk:" + path.name);
  }
  names_.emplace_back("lm");
  names_.emplace_back("bm25");
  for (auto type : kOerTypes) names_.push_back("type:" + std::string(to_string(type)));

  for (std::size_t v = 0; v < graph_.vertex_count(); ++v) {
    const auto& vertex = graph_.vertex(v);
    if (vertex.kind != VertexKind::Topic) continue;
    for (const auto& term : tokenize(vertex.payload, text_.tokenizer())) {
      auto& list = topics_by_term_[term];
      if (list.empty() || list.back() != v) list.push_back(v);
    }
  }
}

std::vector<std::size_t> RankFeatureExtractor::start_vertices(const QueryContext& query) const {
  auto paper = graph_.find(query.paper_id);
  if (!paper || graph_.vertex(*paper).kind != VertexKind::Paper) {
    throw InvalidArgument("unknown paper '" + query.paper_id + "'");
  }
  std::vector<std::size_t> starts{*paper};
  std::set<std::string> seen_ids;
  std::vector<std::size_t> topics;
  for (const auto& term : tokenize(query.quote_text, text_.tokenizer())) {
    auto it = topics_by_term_.find(term);
    if (it == topics_by_term_.end()) continue;
    for (auto t : it->second) {
      if (seen_ids.insert(graph_.vertex(t).id).second) topics.push_back(t);
    }
  }
  std::sort(topics.begin(), topics.end(),
            [&](std::size_t a, std::size_t b) { return graph_.vertex(a).id < graph_.vertex(b).id; });
  starts.insert(starts.end(), topics.begin(), topics.end());
  return starts;
}

std::vector<RankFeatureVector> RankFeatureExtractor::extract(
    const QueryContext& query, std::span<const std::string> candidates) const {
  const auto starts = start_vertices(query);
  std::vector<std::size_t> candidate_vertices;
  for (const auto& id : candidates) {
    auto v = graph_.find(id);
    if (!v || graph_.vertex(*v).kind != VertexKind::Oer) {
      throw InvalidArgument("candidate '" + id + "' is not an OER vertex");
    }
    candidate_vertices.push_back(*v);
  }

  const auto width = static_cast<Eigen::Index>(names_.size());
  std::vector<RankFeatureVector> out;
  for (const auto& id : candidates) out.push_back({id, Eigen::VectorXd::Zero(width)});

  for (std::size_t p = 0; p < metapaths_.size(); ++p) {
    const auto kind = metapath_start_kind(graph_, metapaths_[p]);
    std::vector<std::size_t> typed_starts;
    for (auto s : starts) {
      if (!kind || graph_.vertex(s).kind == *kind) typed_starts.push_back(s);
    }
    if (typed_starts.empty()) continue;
    const WalkResult walk = metapath_score(graph_, typed_starts, metapaths_[p]);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto it = walk.scores.find(candidate_vertices[c]);
      if (it != walk.scores.end()) out[c].values(static_cast<Eigen::Index>(p)) = it->second;
    }
  }

  const auto query_terms = tokenize(query.quote_text, text_.tokenizer());
  const DocumentTerms empty;
  const auto lm_col = static_cast<Eigen::Index>(metapaths_.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const DocumentTerms* doc = text_.document(candidates[c]);
    if (doc == nullptr) doc = &empty;
    const LmScore lm = lm_score(query_terms, *doc, params_.mu, text_.stats());
    out[c].values(lm_col) = std::isfinite(lm.value) ? lm.value : kDegenerateLmScore;
    out[c].values(lm_col + 1) = bm25_score(query_terms, *doc, params_.k1, params_.b, text_.stats());
    const auto type = *graph_.vertex(candidate_vertices[c]).oer_type;
    out[c].values(lm_col + 2 + static_cast<Eigen::Index>(type)) = 1.0;
  }
  return out;
}

}  // namespace commrec
