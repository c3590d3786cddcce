#include <doctest.h>

#include "commrec/features.hpp"
#include "commrec/simgen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace commrec;
using fixture::event;
using fixture::reader;

namespace {

double column(const FeatureGroup& g, std::size_t row, const std::string& name) {
  for (std::size_t c = 0; c < g.columns.size(); ++c) {
    if (g.columns[c] == name) return g.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c));
  }
  return 0.0;
}

}  // namespace

TEST_CASE("identical locations give one cluster per paper") {
  std::vector<ReadingEvent> events;
  for (int i = 0; i < 6; ++i) events.push_back(event("e" + std::to_string(i), EventKind::Quote, "r1"));
  events.push_back(event("x", EventKind::Quote, "r1", "p2"));
  const Corpus c = Corpus::assemble({reader("r1")}, events, {}, {});
  for (std::size_t k : {1, 3, 10}) {
    auto m = build_location_clusters(c, k, 7);
    CHECK(m.papers().at("p1").size() == 1);
    CHECK(m.papers().at("p2").size() == 1);
    CHECK(m.column_count() == 2);
  }
}

TEST_CASE("zero events give an empty location model") {
  const Corpus c = Corpus::assemble({reader("r1")}, {}, {}, {});
  CHECK(build_location_clusters(c, 4, 1).empty());
}

TEST_CASE("two tight location groups match the best medoid pair") {
  std::vector<ReadingEvent> events;
  const BBox top1{0.1, 0.05, 0.3, 0.07}, top2{0.12, 0.06, 0.32, 0.08}, top3{0.11, 0.04, 0.3, 0.06};
  const BBox bottom1{0.5, 0.9, 0.7, 0.92}, bottom2{0.52, 0.91, 0.71, 0.93};
  const std::vector<std::pair<int, BBox>> spots{{1, top1}, {1, top2}, {1, top3}, {3, bottom1}, {3, bottom2}};
  for (std::size_t i = 0; i < spots.size(); ++i) {
    events.push_back(event("e" + std::to_string(i), EventKind::Question, "r1", "p1", spots[i].first, spots[i].second));
  }
  const Corpus c = Corpus::assemble({reader("r1")}, events, {}, {});
  const auto model = build_location_clusters(c, 2, 11);
  REQUIRE(model.papers().at("p1").size() == 2);

  Eigen::MatrixXd pts(5, 2);
  for (Eigen::Index i = 0; i < 5; ++i) pts.row(i) = location_point(spots[i].first, spots[i].second).transpose();
  const Eigen::MatrixXd d = pairwise_euclidean(pts);
  double fitted = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i) {
    double best = 1e9;
    for (const auto& ctr : model.papers().at("p1")) {
      best = std::min(best, (pts.row(i).transpose() -
                             Eigen::Vector2d(static_cast<double>(ctr.page) + ctr.y_center, ctr.x_center)).norm());
    }
    fitted += best;
  }
  CHECK(fitted == doctest::Approx(oracle::optimal_medoid_cost(d, 2)).epsilon(1e-12));
  std::set<std::size_t> top, bottom;
  for (std::size_t i = 0; i < 3; ++i) top.insert(*model.assign("p1", spots[i].first, spots[i].second));
  for (std::size_t i = 3; i < 5; ++i) bottom.insert(*model.assign("p1", spots[i].first, spots[i].second));
  CHECK(top.size() == 1);
  CHECK(bottom.size() == 1);
  CHECK(*top.begin() != *bottom.begin());
}

TEST_CASE("quote text term frequencies") {
  auto e = event("e1", EventKind::Quote, "r1");
  e.quote_text = "graph graph walk";
  const Corpus c = Corpus::assemble({reader("r1"), reader("r2")}, {e}, {}, {});
  const auto loc = build_location_clusters(c, 10, 1);
  const auto fm = extract_rbf(c, loc, TokenizerSettings{});
  const auto& g = fm.group(FeatureGroupId::QuoteText);
  CHECK(column(g, 0, "graph") == 2.0);
  CHECK(column(g, 0, "walk") == 1.0);
  for (const auto& group : fm.groups) CHECK(group.values.row(1).isZero());
}

TEST_CASE("three-reader toy log matches hand enumeration") {
  auto q1 = event("e1", EventKind::Quote, "a", "p1", 0, {0.1, 0.1, 0.2, 0.2});
  q1.quote_text = "walk graph";
  auto q2 = event("e2", EventKind::Question, "b", "p1", 5, {0.1, 0.1, 0.2, 0.2});
  q2.quote_text = "graph";
  q2.content_text = "why walk";
  auto c1 = event("e3", EventKind::Comment, "c", "p1", 0, {0.1, 0.1, 0.2, 0.2});
  c1.quote_text = "walk";
  c1.content_text = "nice graph graph";
  auto r1 = event("e4", EventKind::Reply, "a", "p1");
  r1.target_event_id = "e2";
  auto rt = event("e5", EventKind::Rating, "c", "p1");
  rt.oer_id = "o1";
  rt.grade = Grade::OK;
  rt.timestamp = 1;
  auto rt2 = event("e6", EventKind::Rating, "c", "p1");
  rt2.oer_id = "o1";
  rt2.grade = Grade::Good;
  rt2.timestamp = 2;
  auto rt3 = event("e7", EventKind::Rating, "b", "p1");
  rt3.oer_id = "o1";
  rt3.grade = Grade::NotSure;
  const Corpus c = Corpus::assemble({reader("a"), reader("b"), reader("c")}, {q1, q2, c1, r1, rt, rt2, rt3},
                                    {{"o1", OerType::Video, "t", "b"}}, {});
  // Located events sit at flow 0.15 (e1, e3) and 5.15 (e2); k_loc=2 gives one cluster each.
  const auto fm = featurize(c, FeatureSettings{2, true, {}}, 3);
  const auto& ql = fm.group(FeatureGroupId::QuoteLocation);
  CHECK(ql.values.cols() == 2);
  CHECK(ql.values.row(0).sum() == 1.0);  // a: one quote
  CHECK(ql.values.row(1).sum() == 1.0);  // b: one question
  CHECK(ql.values.row(2).sum() == 0.0);  // c: comments do not launch queries
  const auto& cq = fm.group(FeatureGroupId::CQLocation);
  CHECK(cq.values.row(0).sum() == 0.0);
  CHECK(cq.values.row(1).sum() == 1.0);
  CHECK(cq.values.row(2).sum() == 1.0);
  CHECK(ql.values.row(0).dot(cq.values.row(2)) == 1.0);  // a and c share a location cluster
  CHECK(ql.values.row(0).dot(ql.values.row(1)) == 0.0);

  const auto& qt = fm.group(FeatureGroupId::QuoteText);
  CHECK(qt.columns == std::vector<std::string>{"graph", "walk"});
  CHECK(qt.values(0, 0) == 1.0);
  CHECK(qt.values(0, 1) == 1.0);
  CHECK(qt.values.row(1).isZero());
  const auto& qs = fm.group(FeatureGroupId::QuestionText);
  CHECK(qs.columns == std::vector<std::string>{"walk", "why"});
  CHECK(qs.values(1, 0) == 1.0);
  CHECK(qs.values(1, 1) == 1.0);
  const auto& cqq = fm.group(FeatureGroupId::CQQuoteText);
  CHECK(cqq.columns == std::vector<std::string>{"graph", "walk"});
  CHECK(cqq.values(1, 0) == 1.0);
  CHECK(cqq.values(2, 1) == 1.0);
  const auto& cqc = fm.group(FeatureGroupId::CQContentText);
  CHECK(column(cqc, 2, "graph") == 2.0);
  CHECK(column(cqc, 2, "nice") == 1.0);
  CHECK(column(cqc, 1, "why") == 1.0);
  const auto& rating = fm.group(FeatureGroupId::OerRating);
  CHECK(rating.values(2, 0) == 2.0);  // latest rating wins
  CHECK(rating.values(1, 0) == 0.0);  // not sure is ignored
  const auto& reply = fm.group(FeatureGroupId::ReplyRelation);
  CHECK(reply.values(0, 1) == 1.0);
  CHECK(reply.values(1, 0) == 1.0);
  CHECK(reply.values.trace() == 0.0);
}

TEST_CASE("combine_groups normalizes each group then weights it") {
  FeatureMatrix fm;
  fm.reader_ids = {"r1", "r2"};
  fm.has_rpf = {true, false};
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 3, 3;
  b << 4, 4;
  fm.groups.push_back({FeatureGroupId::RpfSkills, {"s"}, a, "ordinal"});
  fm.groups.push_back({FeatureGroupId::QuoteText, {"t"}, b, "term_frequency"});
  const std::vector<GroupWeight> w{{FeatureGroupId::RpfSkills, 1.0}, {FeatureGroupId::QuoteText, 2.0}};
  const auto u = combine_groups(fm, w);
  CHECK(u.rows(0, 0) == 1.0);
  CHECK(u.rows(0, 1) == 2.0);
  CHECK(u.rows.row(0) == u.rows.row(1));
  CHECK(u.flagged_readers == std::vector<std::string>{"r2"});

  const std::vector<GroupWeight> single{{FeatureGroupId::QuoteText, 1.0}};
  Eigen::MatrixXd t(1, 2);
  t << 3, 4;
  FeatureMatrix one{{"r"}, {false}, {{FeatureGroupId::QuoteText, {"x", "y"}, t, ""}}, {}};
  const auto v = combine_groups(one, single);
  CHECK(v.rows(0, 0) == doctest::Approx(0.6));
  CHECK(v.rows(0, 1) == doctest::Approx(0.8));
  CHECK(v.flagged_readers.empty());
}

TEST_CASE("featurize is deterministic and structurally sound on a simulated corpus") {
  SimConfig cfg;
  cfg.readers = 20;
  cfg.seed = 13;
  const Corpus c = generate_corpus(cfg).corpus;
  const FeatureSettings settings{};
  const auto a = featurize(c, settings, 99);
  const auto b = featurize(c, settings, 99);
  CHECK(features_to_json(a).dump() == features_to_json(b).dump());
  for (const auto& g : a.groups) CHECK(g.values.rows() == static_cast<Eigen::Index>(a.reader_ids.size()));
  const auto& reply = a.group(FeatureGroupId::ReplyRelation).values;
  CHECK(reply == reply.transpose());
  // QuoteLocation rows count the reader's quote and question events.
  const auto& ql = a.group(FeatureGroupId::QuoteLocation).values;
  for (std::size_t i = 0; i < a.reader_ids.size(); ++i) {
    double n = 0;
    for (const auto& e : c.events()) {
      if (e.reader_id == a.reader_ids[i] && (e.kind == EventKind::Quote || e.kind == EventKind::Question)) n += 1;
    }
    CHECK(ql.row(static_cast<Eigen::Index>(i)).sum() == n);
  }
  const auto back = features_from_json(features_to_json(a));
  CHECK(features_to_json(back).dump() == features_to_json(a).dump());
}

TEST_CASE("rpf extraction scales skills") {
  const Corpus c = Corpus::assemble({reader("r1", {"ml"}, {{"R", 4}, {"SQL", 1}}), reader("r2")}, {}, {}, {});
  const auto fm = extract_rpf(c);
  const auto& s = fm.group(FeatureGroupId::RpfSkills);
  CHECK(column(s, 0, "R") == 1.0);
  CHECK(column(s, 0, "SQL") == 0.0);
  CHECK(column(fm.group(FeatureGroupId::RpfCourses), 0, "ml") == 1.0);
  CHECK(fm.has_rpf == std::vector<bool>{true, false});
}
