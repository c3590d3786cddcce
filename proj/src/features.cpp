#include "commrec/features.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include "commrec/error.hpp"
#include "commrec/kmedoids.hpp"
#include "commrec/linalg.hpp"
#include "commrec/rng.hpp"

namespace commrec {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kGroupNames{
    "rpf_c",       "rpf_tb",     "quote_location",   "quote_text",       "question_text",
    "oer_rating",  "cq_location", "cq_quote_text", "cq_content_text", "reply_relation"};

bool kind_in(EventKind kind, std::span<const EventKind> kinds) {
  return std::find(kinds.begin(), kinds.end(), kind) != kinds.end();
}

/// Term-frequency group over one text field of a subset of events.
template <typename Select, typename Field>
FeatureGroup text_group(FeatureGroupId id, const Corpus& corpus,
                        const std::map<std::string, std::size_t>& rows,
                        const TokenizerSettings& tokenizer, Select select, Field field) {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::size_t> doc_rows;
  for (const auto& e : corpus.events()) {
    if (!select(e)) continue;
    auto row = rows.find(e.reader_id);
    if (row == rows.end()) continue;
    docs.push_back(tokenize(field(e), tokenizer));
    doc_rows.push_back(row->second);
  }
  const Vocabulary vocab = Vocabulary::build(docs, tokenizer.min_document_frequency);
  FeatureGroup group{id, vocab.terms(),
                     Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                           static_cast<Eigen::Index>(vocab.size())),
                     "term_frequency"};
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& token : docs[d]) {
      if (auto col = vocab.index_of(token)) {
        group.values(static_cast<Eigen::Index>(doc_rows[d]), static_cast<Eigen::Index>(*col)) += 1.0;
      }
    }
  }
  return group;
}

FeatureGroup location_group(FeatureGroupId id, const Corpus& corpus,
                            const std::map<std::string, std::size_t>& rows,
                            const LocationClusterModel& model, std::span<const EventKind> kinds) {
  FeatureGroup group{id, model.column_labels(),
                     Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                           static_cast<Eigen::Index>(model.column_count())),
                     "count"};
  for (const auto& e : corpus.events()) {
    if (!kind_in(e.kind, kinds)) continue;
    auto row = rows.find(e.reader_id);
    if (row == rows.end()) continue;
    if (auto col = model.assign(e.paper_id, e.page, e.bbox)) {
      group.values(static_cast<Eigen::Index>(row->second), static_cast<Eigen::Index>(*col)) += 1.0;
    }
  }
  return group;
}

std::map<std::string, std::size_t> row_index(const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) rows.emplace(ids[i], i);
  return rows;
}

std::vector<bool> rpf_flags(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<bool> flags;
  flags.reserve(ids.size());
  for (const auto& id : ids) flags.push_back(corpus.find_reader(id)->has_rpf);
  return flags;
}

}  // namespace

std::string_view to_string(FeatureGroupId group) {
  return kGroupNames[static_cast<std::size_t>(group)];
}

std::optional<FeatureGroupId> parse_feature_group(std::string_view name) {
  for (auto g : kFeatureGroups) {
    if (to_string(g) == name) return g;
  }
  return std::nullopt;
}

Eigen::Vector2d location_point(std::int64_t page, const BBox& box) {
  return {static_cast<double>(page) + box.y_center(), box.x_center()};
}

LocationClusterModel::LocationClusterModel(std::size_t k_loc,
                                           std::map<std::string, std::vector<LocationCenter>> papers)
    : k_loc_(k_loc), papers_(std::move(papers)) {
  for (const auto& [paper, centers] : papers_) {
    offsets_.emplace(paper, column_count_);
    column_count_ += centers.size();
  }
}

std::vector<std::string> LocationClusterModel::column_labels() const {
  std::vector<std::string> labels;
  labels.reserve(column_count_);
  for (const auto& [paper, centers] : papers_) {
    for (std::size_t c = 0; c < centers.size(); ++c) labels.push_back(paper + "#" + std::to_string(c));
  }
  return labels;
}

std::optional<std::size_t> LocationClusterModel::assign(const std::string& paper_id,
                                                        std::int64_t page, const BBox& box) const {
  auto it = papers_.find(paper_id);
  if (it == papers_.end() || it->second.empty()) return std::nullopt;
  const Eigen::Vector2d point = location_point(page, box);
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < it->second.size(); ++c) {
    const auto& center = it->second[c];
    const Eigen::Vector2d cp{static_cast<double>(center.page) + center.y_center, center.x_center};
    const double d = (point - cp).norm();
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  return offsets_.at(paper_id) + best;
}

LocationClusterModel build_location_clusters(const Corpus& corpus, std::size_t k_loc,
                                             std::uint64_t seed, std::span<const EventKind> kinds) {
  if (k_loc == 0) throw InvalidArgument("k_loc must be at least 1");
  // paper -> distinct location (flow, x) -> (representative center, multiplicity)
  std::map<std::string, std::map<std::pair<double, double>, std::pair<LocationCenter, double>>> by_paper;
  for (const auto& e : corpus.events()) {
    if (!kind_in(e.kind, kinds)) continue;
    const Eigen::Vector2d p = location_point(e.page, e.bbox);
    auto& slot = by_paper[e.paper_id][{p.x(), p.y()}];
    if (slot.second == 0.0) slot.first = LocationCenter{e.page, e.bbox.x_center(), e.bbox.y_center()};
    slot.second += 1.0;
  }

  std::map<std::string, std::vector<LocationCenter>> papers;
  for (const auto& [paper, locations] : by_paper) {
    std::vector<LocationCenter> distinct;
    std::vector<double> weights;
    Eigen::MatrixXd points(static_cast<Eigen::Index>(locations.size()), 2);
    for (const auto& [key, entry] : locations) {
      points.row(static_cast<Eigen::Index>(distinct.size())) << key.first, key.second;
      distinct.push_back(entry.first);
      weights.push_back(entry.second);
    }
    if (distinct.size() <= k_loc) {
      papers.emplace(paper, std::move(distinct));
      continue;
    }
    const KMedoidsResult fit =
        kmedoids(pairwise_euclidean(points), k_loc, fork_seed(seed, paper), weights);
    std::vector<LocationCenter> centers;
    for (auto m : fit.medoids) centers.push_back(distinct[m]);
    papers.emplace(paper, std::move(centers));
  }
  return LocationClusterModel(k_loc, std::move(papers));
}

bool FeatureMatrix::has_group(FeatureGroupId id) const {
  return std::any_of(groups.begin(), groups.end(), [id](const FeatureGroup& g) { return g.id == id; });
}

const FeatureGroup& FeatureMatrix::group(FeatureGroupId id) const {
  for (const auto& g : groups) {
    if (g.id == id) return g;
  }
  throw InvalidArgument("feature group '" + std::string(to_string(id)) + "' not present");
}

std::optional<std::size_t> FeatureMatrix::row_of(const std::string& reader_id) const {
  auto it = std::lower_bound(reader_ids.begin(), reader_ids.end(), reader_id);
  if (it == reader_ids.end() || *it != reader_id) return std::nullopt;
  return static_cast<std::size_t>(it - reader_ids.begin());
}

FeatureMatrix extract_rpf(const Corpus& corpus) {
  FeatureMatrix fm;
  fm.reader_ids = corpus.reader_ids();
  fm.has_rpf = rpf_flags(corpus, fm.reader_ids);
  std::set<std::string> courses;
  std::set<std::string> skills;
  for (const auto& r : corpus.readers()) {
    courses.insert(r.courses.begin(), r.courses.end());
    for (const auto& [name, _] : r.skills) skills.insert(name);
  }
  const auto n = static_cast<Eigen::Index>(fm.reader_ids.size());
  FeatureGroup c{FeatureGroupId::RpfCourses, {courses.begin(), courses.end()},
                 Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(courses.size())), "boolean"};
  FeatureGroup s{FeatureGroupId::RpfSkills, {skills.begin(), skills.end()},
                 Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(skills.size())),
                 "ordinal_1_4_to_unit"};
  for (Eigen::Index i = 0; i < n; ++i) {
    const ReaderProfile& r = *corpus.find_reader(fm.reader_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < c.values.cols(); ++j) {
      if (r.courses.contains(c.columns[static_cast<std::size_t>(j)])) c.values(i, j) = 1.0;
    }
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) {
      auto it = r.skills.find(s.columns[static_cast<std::size_t>(j)]);
      if (it != r.skills.end()) s.values(i, j) = (it->second - 1) / 3.0;
    }
  }
  fm.groups.push_back(std::move(c));
  fm.groups.push_back(std::move(s));
  return fm;
}

FeatureMatrix extract_rbf(const Corpus& corpus, const LocationClusterModel& query_locations,
                          const LocationClusterModel& cq_locations,
                          const TokenizerSettings& tokenizer) {
  FeatureMatrix fm;
  fm.reader_ids = corpus.reader_ids();
  fm.has_rpf = rpf_flags(corpus, fm.reader_ids);
  const auto rows = row_index(fm.reader_ids);
  const auto n = static_cast<Eigen::Index>(fm.reader_ids.size());

  static constexpr std::array<EventKind, 2> kQueryKinds{EventKind::Quote, EventKind::Question};
  static constexpr std::array<EventKind, 2> kCQKinds{EventKind::Comment, EventKind::Question};
  auto is = [](EventKind k) { return [k](const ReadingEvent& e) { return e.kind == k; }; };
  auto is_cq = [](const ReadingEvent& e) {
    return e.kind == EventKind::Comment || e.kind == EventKind::Question;
  };
  auto quote = [](const ReadingEvent& e) -> const std::string& { return e.quote_text; };
  auto content = [](const ReadingEvent& e) -> const std::string& { return e.content_text; };

  fm.groups.push_back(
      location_group(FeatureGroupId::QuoteLocation, corpus, rows, query_locations, kQueryKinds));
  fm.groups.push_back(
      text_group(FeatureGroupId::QuoteText, corpus, rows, tokenizer, is(EventKind::Quote), quote));
  fm.groups.push_back(text_group(FeatureGroupId::QuestionText, corpus, rows, tokenizer,
                                 is(EventKind::Question), content));

  // Latest graded rating per (reader, oer); NotSure ratings are ignored.
  std::set<std::string> oer_ids;
  for (const auto& o : corpus.oers()) oer_ids.insert(o.oer_id);
  std::map<std::pair<std::size_t, std::string>, std::pair<std::int64_t, int>> latest;
  for (const auto& e : corpus.events()) {
    if (e.kind != EventKind::Rating || !e.grade || !e.oer_id) continue;
    const auto g = gain(*e.grade);
    auto row = rows.find(e.reader_id);
    if (!g || row == rows.end()) continue;
    oer_ids.insert(*e.oer_id);
    auto [it, inserted] = latest.try_emplace({row->second, *e.oer_id}, e.timestamp, *g);
    if (!inserted && e.timestamp >= it->second.first) it->second = {e.timestamp, *g};
  }
  FeatureGroup rating{FeatureGroupId::OerRating, {oer_ids.begin(), oer_ids.end()},
                      Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(oer_ids.size())),
                      "grade_gain"};
  for (const auto& [key, value] : latest) {
    const auto col = std::distance(oer_ids.begin(), oer_ids.find(key.second));
    rating.values(static_cast<Eigen::Index>(key.first), col) = value.second;
  }
  fm.groups.push_back(std::move(rating));

  fm.groups.push_back(
      location_group(FeatureGroupId::CQLocation, corpus, rows, cq_locations, kCQKinds));
  fm.groups.push_back(
      text_group(FeatureGroupId::CQQuoteText, corpus, rows, tokenizer, is_cq, quote));
  fm.groups.push_back(
      text_group(FeatureGroupId::CQContentText, corpus, rows, tokenizer, is_cq, content));

  FeatureGroup reply{FeatureGroupId::ReplyRelation, fm.reader_ids, Eigen::MatrixXd::Zero(n, n),
                     "undirected_count"};
  for (const auto& e : corpus.events()) {
    if (e.kind != EventKind::Reply || !e.target_event_id) continue;
    const ReadingEvent* target = corpus.find_event(*e.target_event_id);
    if (target == nullptr || target->reader_id == e.reader_id) continue;
    auto a = rows.find(e.reader_id);
    auto b = rows.find(target->reader_id);
    if (a == rows.end() || b == rows.end()) continue;
    const auto ia = static_cast<Eigen::Index>(a->second);
    const auto ib = static_cast<Eigen::Index>(b->second);
    reply.values(ia, ib) += 1.0;
    reply.values(ib, ia) += 1.0;
  }
  fm.groups.push_back(std::move(reply));
  return fm;
}

FeatureMatrix extract_rbf(const Corpus& corpus, const LocationClusterModel& locations,
                          const TokenizerSettings& tokenizer) {
  return extract_rbf(corpus, locations, locations, tokenizer);
}

FeatureMatrix featurize(const Corpus& corpus, const FeatureSettings& settings, std::uint64_t seed) {
  FeatureMatrix fm = extract_rpf(corpus);
  FeatureMatrix rbf;
  if (settings.shared_location_clusters) {
    const auto locations = build_location_clusters(corpus, settings.k_loc, seed);
    rbf = extract_rbf(corpus, locations, settings.tokenizer);
  } else {
    static constexpr std::array<EventKind, 2> kQueryKinds{EventKind::Quote, EventKind::Question};
    static constexpr std::array<EventKind, 2> kCQKinds{EventKind::Comment, EventKind::Question};
    const auto queries = build_location_clusters(corpus, settings.k_loc,
                                                 fork_seed(seed, "query-locations"), kQueryKinds);
    const auto cq =
        build_location_clusters(corpus, settings.k_loc, fork_seed(seed, "cq-locations"), kCQKinds);
    rbf = extract_rbf(corpus, queries, cq, settings.tokenizer);
  }
  for (auto& g : rbf.groups) fm.groups.push_back(std::move(g));
  fm.settings = json{{"k_loc", settings.k_loc},
                     {"shared_location_clusters", settings.shared_location_clusters},
                     {"tokenizer", settings.tokenizer},
                     {"seed", seed}};
  return fm;
}

UnifiedVectors combine_groups(const FeatureMatrix& features, std::span<const GroupWeight> groups) {
  if (groups.empty()) throw InvalidArgument("combine_groups needs at least one group");
  UnifiedVectors out;
  out.reader_ids = features.reader_ids;
  const auto n = static_cast<Eigen::Index>(features.reader_ids.size());
  Eigen::Index width = 0;
  bool wants_rpf = false;
  for (const auto& gw : groups) {
    if (!(gw.weight > 0.0)) {
      throw InvalidArgument("group weight for '" + std::string(to_string(gw.group)) +
                            "' must be positive");
    }
    out.group_order.push_back(gw.group);
    out.offsets.push_back(static_cast<std::size_t>(width));
    width += features.group(gw.group).values.cols();
    wants_rpf = wants_rpf || is_rpf(gw.group);
  }
  out.rows = Eigen::MatrixXd::Zero(n, width);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& values = features.group(groups[g].group).values;
    out.rows.middleCols(static_cast<Eigen::Index>(out.offsets[g]), values.cols()) =
        groups[g].weight * normalize_rows(values);
  }
  if (wants_rpf) {
    for (std::size_t i = 0; i < features.reader_ids.size(); ++i) {
      if (!features.has_rpf[i]) out.flagged_readers.push_back(features.reader_ids[i]);
    }
  }
  return out;
}

UnifiedVectors select_readers(const UnifiedVectors& vectors, std::span<const std::string> readers) {
  UnifiedVectors out;
  out.group_order = vectors.group_order;
  out.offsets = vectors.offsets;
  out.rows.resize(static_cast<Eigen::Index>(readers.size()), vectors.rows.cols());
  const auto rows = row_index(vectors.reader_ids);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    auto it = rows.find(readers[i]);
    if (it == rows.end()) throw InvalidArgument("reader '" + readers[i] + "' has no feature row");
    out.rows.row(static_cast<Eigen::Index>(i)) = vectors.rows.row(static_cast<Eigen::Index>(it->second));
    out.reader_ids.push_back(readers[i]);
    if (std::find(vectors.flagged_readers.begin(), vectors.flagged_readers.end(), readers[i]) !=
        vectors.flagged_readers.end()) {
      out.flagged_readers.push_back(readers[i]);
    }
  }
  return out;
}

std::vector<GroupWeight> default_rpf_groups() {
  return {{FeatureGroupId::RpfCourses, 1.0}, {FeatureGroupId::RpfSkills, 1.0}};
}

std::vector<GroupWeight> default_rbf_groups() {
  return {{FeatureGroupId::QuoteLocation, 1.0}, {FeatureGroupId::QuoteText, 1.0},
          {FeatureGroupId::QuestionText, 1.0},  {FeatureGroupId::OerRating, 1.0},
          {FeatureGroupId::CQLocation, 1.0},    {FeatureGroupId::CQQuoteText, 1.0},
          {FeatureGroupId::CQContentText, 1.0}};
}

json features_to_json(const FeatureMatrix& features) {
  json groups = json::array();
  for (const auto& g : features.groups) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < g.values.rows(); ++i) {
      json entries = json::array();
      for (Eigen::Index j = 0; j < g.values.cols(); ++j) {
        if (g.values(i, j) != 0.0) entries.push_back({j, g.values(i, j)});
      }
      rows.push_back(std::move(entries));
    }
    groups.push_back({{"name", to_string(g.id)},
                      {"dimension", g.values.cols()},
                      {"normalization", g.normalization},
                      {"columns", g.columns},
                      {"rows", std::move(rows)}});
  }
  return json{{"readers", features.reader_ids},
              {"has_rpf", features.has_rpf},
              {"settings", features.settings},
              {"groups", std::move(groups)}};
}

FeatureMatrix features_from_json(const json& doc) {
  FeatureMatrix fm;
  fm.reader_ids = doc.at("readers").get<std::vector<std::string>>();
  fm.has_rpf = doc.at("has_rpf").get<std::vector<bool>>();
  fm.settings = doc.value("settings", json::object());
  if (fm.has_rpf.size() != fm.reader_ids.size()) throw InvalidArgument("has_rpf length mismatch");
  const auto n = static_cast<Eigen::Index>(fm.reader_ids.size());
  for (const auto& g : doc.at("groups")) {
    const std::string name = g.at("name").get<std::string>();
    auto id = parse_feature_group(name);
    if (!id) throw InvalidArgument("unknown feature group '" + name + "'");
    FeatureGroup group;
    group.id = *id;
    group.columns = g.at("columns").get<std::vector<std::string>>();
    group.normalization = g.value("normalization", "");
    const auto dim = g.at("dimension").get<Eigen::Index>();
    if (static_cast<std::size_t>(dim) != group.columns.size()) {
      throw InvalidArgument("group '" + name + "' dimension does not match its columns");
    }
    group.values = Eigen::MatrixXd::Zero(n, dim);
    const auto& rows = g.at("rows");
    if (static_cast<Eigen::Index>(rows.size()) != n) {
      throw InvalidArgument("group '" + name + "' row count mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (const auto& entry : rows[static_cast<std::size_t>(i)]) {
        const auto j = entry.at(0).get<Eigen::Index>();
        if (j < 0 || j >= dim) throw InvalidArgument("group '" + name + "' column out of range");
        group.values(i, j) = entry.at(1).get<double>();
      }
    }
    fm.groups.push_back(std::move(group));
  }
  return fm;
}

}  // namespace commrec
