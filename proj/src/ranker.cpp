#include "commrec/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "commrec/error.hpp"
#include "commrec/metrics.hpp"
#include "commrec/rng.hpp"

namespace commrec {

using nlohmann::json;

namespace {

constexpr std::array<double, 9> kStepMultipliers{0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};

/// Training data flattened into one matrix with per-query row ranges.
struct PackedQueries {
  Eigen::MatrixXd x;
  std::vector<std::size_t> offsets;
  std::vector<int> gains;
  std::vector<double> ideal;         // IDCG@k per query
  std::vector<std::size_t> scorable;  // queries with positive ideal
  std::vector<double> discount;       // 1 / log2(i + 2)
  std::size_t k = 3;
};

PackedQueries pack(const RankingDataset& normalized, std::size_t k) {
  PackedQueries p;
  p.k = k;
  std::size_t rows = 0;
  std::size_t longest = 0;
  for (const auto& q : normalized.queries) {
    rows += q.gains.size();
    longest = std::max(longest, q.gains.size());
  }
  p.x.resize(static_cast<Eigen::Index>(rows),
             static_cast<Eigen::Index>(normalized.feature_names.size()));
  p.offsets.push_back(0);
  for (std::size_t i = 0; i < std::min(k, longest); ++i) {
    p.discount.push_back(1.0 / std::log2(static_cast<double>(i) + 2.0));
  }
  for (std::size_t qi = 0; qi < normalized.queries.size(); ++qi) {
    const auto& q = normalized.queries[qi];
    p.x.middleRows(static_cast<Eigen::Index>(p.offsets.back()), q.features.rows()) = q.features;
    p.gains.insert(p.gains.end(), q.gains.begin(), q.gains.end());
    p.offsets.push_back(p.offsets.back() + q.gains.size());
    std::vector<int> sorted = q.gains;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) idcg += sorted[i] * p.discount[i];
    p.ideal.push_back(idcg);
    if (idcg > 0.0) p.scorable.push_back(qi);
  }
  return p;
}

/// nDCG@k of query q given the scores of its candidates; ties keep candidate order.
double query_metric(const PackedQueries& p, std::size_t q, std::span<const double> scores,
                    std::vector<std::size_t>& scratch) {
  const std::size_t begin = p.offsets[q];
  const std::size_t m = scores.size();
  const std::size_t top = std::min(p.k, m);
  scratch.resize(m);
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(top), scratch.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  double dcg = 0.0;
  for (std::size_t i = 0; i < top; ++i) dcg += p.gains[begin + scratch[i]] * p.discount[i];
  return dcg / p.ideal[q];
}

double packed_metric(const PackedQueries& p, const Eigen::VectorXd& scores,
                     std::vector<std::size_t>& scratch) {
  double total = 0.0;
  for (auto q : p.scorable) {
    const std::size_t begin = p.offsets[q];
    const std::size_t m = p.offsets[q + 1] - begin;
    total += query_metric(p, q, std::span<const double>(scores.data() + begin, m), scratch);
  }
  return p.scorable.empty() ? 0.0 : total / static_cast<double>(p.scorable.size());
}

/// Value of w_j maximizing the summed metric with the other weights fixed, or
/// nullopt when the current value is already optimal. Each query's metric is
/// piecewise constant in w_j and changes only where two candidates swap
/// order, so scanning those breakpoints is exact.
std::optional<double> line_search(const PackedQueries& p, const Eigen::VectorXd& scores, Eigen::Index j,
                                  double wj, std::vector<std::size_t>& scratch) {
  auto outside = [](double t, double direction) { return t + direction * std::max(1.0, std::abs(t)); };
  std::vector<std::pair<double, double>> events;  // (breakpoint, metric change when crossing it)
  double total = 0.0;                              // summed metric left of every breakpoint
  std::vector<double> rest, slope, local, cuts;
  for (auto q : p.scorable) {
    const std::size_t begin = p.offsets[q];
    const std::size_t m = p.offsets[q + 1] - begin;
    rest.resize(m);
    slope.resize(m);
    local.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      slope[i] = p.x(static_cast<Eigen::Index>(begin + i), j);
      rest[i] = scores(static_cast<Eigen::Index>(begin + i)) - wj * slope[i];
    }
    auto value_at = [&](double t) {
      for (std::size_t i = 0; i < m; ++i) local[i] = rest[i] + t * slope[i];
      return query_metric(p, q, local, scratch);
    };
    cuts.clear();
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (slope[a] != slope[b]) cuts.push_back((rest[b] - rest[a]) / (slope[a] - slope[b]));
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (cuts.empty()) {
      total += value_at(wj);
      continue;
    }
    double previous = value_at(outside(cuts.front(), -1.0));
    total += previous;
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      const double probe = c + 1 < cuts.size() ? 0.5 * (cuts[c] + cuts[c + 1]) : outside(cuts[c], 1.0);
      const double v = value_at(probe);
      if (v != previous) events.emplace_back(cuts[c], v - previous);
      previous = v;
    }
  }
  std::sort(events.begin(), events.end());

  const double inf = std::numeric_limits<double>::infinity();
  auto distance = [&](double lo, double hi) { return wj < lo ? lo - wj : (wj > hi ? wj - hi : 0.0); };
  double best_total = total;
  double best_lo = -inf;
  double best_hi = events.empty() ? inf : events.front().first;
  for (std::size_t e = 0; e < events.size();) {
    const double t = events[e].first;
    for (; e < events.size() && events[e].first == t; ++e) total += events[e].second;
    const double hi = e < events.size() ? events[e].first : inf;
    if (total > best_total || (total == best_total && distance(t, hi) < distance(best_lo, best_hi))) {
      best_total = total;
      best_lo = t;
      best_hi = hi;
    }
  }
  if (distance(best_lo, best_hi) == 0.0) return std::nullopt;
  if (best_lo == -inf) return outside(best_hi, -1.0);
  if (best_hi == inf) return outside(best_lo, 1.0);
  return 0.5 * (best_lo + best_hi);
}

RankingDataset normalized_copy(const RankingDataset& dataset, const FeatureNormalization& norm) {
  RankingDataset out = dataset;
  for (auto& q : out.queries) q.features = norm.apply(q.features);
  return out;
}

struct RestartResult {
  Eigen::VectorXd weights;
  double metric = 0.0;
  std::vector<double> trace;
};

RestartResult ascend(const PackedQueries& p, Eigen::VectorXd w, const CoordinateAscentOptions& options) {
  const auto f = w.size();
  std::vector<std::size_t> scratch;
  Eigen::VectorXd scores = p.x * w;
  double current = packed_metric(p, scores, scratch);
  RestartResult r;
  r.trace.push_back(current);

  Eigen::VectorXd trial(scores.size());
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    bool improved = false;
    for (Eigen::Index j = 0; j < f; ++j) {
      const double wj = w(j);
      const double base = wj != 0.0 ? wj : 1.0 / static_cast<double>(f);
      std::vector<double> values;
      values.reserve(2 * kStepMultipliers.size() + 1);
      for (double m : kStepMultipliers) {
        values.push_back(base * m);
        values.push_back(-base * m);
      }
      values.push_back(0.0);
      if (auto exact = line_search(p, scores, j, wj, scratch)) values.push_back(*exact);

      double best_metric = current;
      double best_value = wj;
      for (double v : values) {
        if (v == wj) continue;
        trial = scores + (v - wj) * p.x.col(j);
        const double m = packed_metric(p, trial, scratch);
        if (m > best_metric) {
          best_metric = m;
          best_value = v;
        }
      }
      if (best_metric > current + options.tolerance) {
        scores += (best_value - wj) * p.x.col(j);
        w(j) = best_value;
        current = best_metric;
        r.trace.push_back(current);
        improved = true;
      }
    }
    if (!improved) break;
  }
  r.weights = std::move(w);
  r.metric = current;
  return r;
}

std::vector<std::size_t> order_by_score(const Eigen::VectorXd& scores,
                                        const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace

RankingDataset RankingDataset::subset(std::span<const std::size_t> indices) const {
  RankingDataset out;
  out.feature_names = feature_names;
  out.queries.reserve(indices.size());
  for (auto i : indices) out.queries.push_back(queries.at(i));
  return out;
}

RankingDataset build_ranking_dataset(const Corpus& corpus, const RankFeatureExtractor& extractor) {
  RankingDataset dataset;
  dataset.feature_names = extractor.feature_names();
  for (const auto& q : corpus.queries()) {
    std::vector<std::pair<std::string, int>> graded;
    for (const auto& j : q.judgments) {
      if (auto g = gain(j.grade)) graded.emplace_back(j.oer_id, *g);
    }
    if (graded.empty()) continue;
    std::sort(graded.begin(), graded.end());
    QueryList list;
    list.query_id = q.query_id;
    list.reader_id = q.reader_id;
    list.paper_id = q.paper_id;
    for (const auto& [id, g] : graded) {
      list.oer_ids.push_back(id);
      list.gains.push_back(g);
    }
    const auto vectors = extractor.extract({q.paper_id, q.quote_text}, list.oer_ids);
    list.features.resize(static_cast<Eigen::Index>(vectors.size()),
                         static_cast<Eigen::Index>(dataset.feature_names.size()));
    for (std::size_t c = 0; c < vectors.size(); ++c) {
      list.features.row(static_cast<Eigen::Index>(c)) = vectors[c].values.transpose();
    }
    dataset.queries.push_back(std::move(list));
  }
  return dataset;
}

json dataset_to_json(const RankingDataset& dataset) {
  json queries = json::array();
  for (const auto& q : dataset.queries) {
    json candidates = json::array();
    for (std::size_t c = 0; c < q.oer_ids.size(); ++c) {
      const auto row = q.features.row(static_cast<Eigen::Index>(c));
      candidates.push_back({{"oer", q.oer_ids[c]},
                            {"gain", q.gains[c]},
                            {"features", std::vector<double>(row.begin(), row.end())}});
    }
    queries.push_back({{"query", q.query_id},
                       {"reader", q.reader_id},
                       {"paper", q.paper_id},
                       {"candidates", std::move(candidates)}});
  }
  return json{{"feature_names", dataset.feature_names}, {"queries", std::move(queries)}};
}

RankingDataset dataset_from_json(const json& doc) {
  RankingDataset dataset;
  dataset.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  const auto width = static_cast<Eigen::Index>(dataset.feature_names.size());
  for (const auto& q : doc.at("queries")) {
    QueryList list;
    list.query_id = q.at("query").get<std::string>();
    list.reader_id = q.at("reader").get<std::string>();
    list.paper_id = q.value("paper", "");
    const auto& candidates = q.at("candidates");
    list.features.resize(static_cast<Eigen::Index>(candidates.size()), width);
    Eigen::Index row = 0;
    for (const auto& c : candidates) {
      list.oer_ids.push_back(c.at("oer").get<std::string>());
      list.gains.push_back(c.at("gain").get<int>());
      const auto values = c.at("features").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != width) {
        throw InvalidArgument("query '" + list.query_id + "' has a feature vector of the wrong width");
      }
      list.features.row(row++) = Eigen::Map<const Eigen::RowVectorXd>(values.data(), width);
    }
    dataset.queries.push_back(std::move(list));
  }
  return dataset;
}

FeatureNormalization FeatureNormalization::fit(const RankingDataset& dataset) {
  const auto f = static_cast<Eigen::Index>(dataset.feature_names.size());
  FeatureNormalization norm{Eigen::VectorXd::Constant(f, std::numeric_limits<double>::infinity()),
                            Eigen::VectorXd::Constant(f, -std::numeric_limits<double>::infinity())};
  for (const auto& q : dataset.queries) {
    if (q.features.rows() == 0) continue;
    norm.min = norm.min.cwiseMin(q.features.colwise().minCoeff().transpose());
    norm.max = norm.max.cwiseMax(q.features.colwise().maxCoeff().transpose());
  }
  for (Eigen::Index j = 0; j < f; ++j) {
    if (!std::isfinite(norm.min(j))) {
      norm.min(j) = 0.0;
      norm.max(j) = 0.0;
    }
  }
  return norm;
}

Eigen::MatrixXd FeatureNormalization::apply(const Eigen::MatrixXd& raw) const {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double range = max(j) - min(j);
    if (range > 0.0) {
      out.col(j) = ((raw.col(j).array() - min(j)) / range).cwiseMax(0.0).cwiseMin(1.0).matrix();
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

double mean_training_ndcg(const RankingDataset& normalized, const Eigen::VectorXd& weights,
                          std::size_t k) {
  const PackedQueries p = pack(normalized, k);
  std::vector<std::size_t> scratch;
  return packed_metric(p, p.x * weights, scratch);
}

RankingModel coordinate_ascent_train(const RankingDataset& dataset,
                                     const CoordinateAscentOptions& options, std::uint64_t seed) {
  const auto f = static_cast<Eigen::Index>(dataset.feature_names.size());
  if (f == 0) throw Untrainable("no ranking features");
  if (options.metric_k == 0) throw InvalidArgument("metric cutoff must be at least 1");

  RankingModel model;
  model.feature_names = dataset.feature_names;
  model.metric_name = "ndcg@" + std::to_string(options.metric_k);
  model.normalization = FeatureNormalization::fit(dataset);
  const PackedQueries packed = pack(normalized_copy(dataset, model.normalization), options.metric_k);
  if (packed.scorable.empty()) throw Untrainable("no query has a positive ideal gain");

  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  RestartResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Eigen::VectorXd init;
    if (r == 0) {
      init = Eigen::VectorXd::Constant(f, 1.0 / static_cast<double>(f));
    } else {
      Rng rng(fork_seed(seed, "ascent-restart-" + std::to_string(r)));
      init.resize(f);
      for (Eigen::Index j = 0; j < f; ++j) init(j) = rng.uniform(-1.0, 1.0);
      const double l1 = init.lpNorm<1>();
      if (l1 > 0.0) init /= l1;
    }
    RestartResult result = ascend(packed, std::move(init), options);
    if (r == 0 || result.metric > best.metric) {
      best = std::move(result);
      model.restart = r;
    }
  }

  const double l1 = best.weights.lpNorm<1>();
  if (l1 > 0.0) best.weights /= l1;
  std::vector<std::size_t> scratch;
  model.metric_value = packed_metric(packed, packed.x * best.weights, scratch);
  model.weights = std::move(best.weights);
  model.accepted_trace = std::move(best.trace);
  return model;
}

std::vector<ScoredCandidate> rank(const RankingModel& model,
                                  std::span<const std::string> feature_names,
                                  std::span<const RankFeatureVector> candidates) {
  if (!std::equal(feature_names.begin(), feature_names.end(), model.feature_names.begin(),
                  model.feature_names.end())) {
    throw InvalidArgument("feature names do not match the model's feature order");
  }
  const auto f = static_cast<Eigen::Index>(model.feature_names.size());
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(candidates.size()), f);
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].values.size() != f) {
      throw InvalidArgument("candidate '" + candidates[c].oer_id + "' has the wrong feature width");
    }
    raw.row(static_cast<Eigen::Index>(c)) = candidates[c].values.transpose();
    ids.push_back(candidates[c].oer_id);
  }
  const Eigen::VectorXd scores = model.normalization.apply(raw) * model.weights;
  std::vector<ScoredCandidate> out;
  for (auto i : order_by_score(scores, ids)) {
    out.push_back({ids[i], scores(static_cast<Eigen::Index>(i))});
  }
  return out;
}

std::vector<int> ranked_gains(const RankingModel& model, const QueryList& query) {
  const Eigen::VectorXd scores = model.normalization.apply(query.features) * model.weights;
  std::vector<int> gains;
  for (auto i : order_by_score(scores, query.oer_ids)) gains.push_back(query.gains[i]);
  return gains;
}

const RankingModel& CommunityRankerSet::resolve(int community) const {
  auto it = community_models.find(community);
  if (it != community_models.end()) return it->second;
  if (global) return *global;
  throw NoModel("community " + std::to_string(community) + " has no model and there is no global fallback");
}

CommunityRankerSet train_communitized(const RankingDataset& dataset,
                                      const std::map<std::string, int>& communities,
                                      const RankerParams& params, std::uint64_t seed) {
  if (dataset.queries.empty()) throw Untrainable("no judged queries");
  CommunityRankerSet set;
  set.min_judged_queries = params.min_judged_queries;
  std::map<int, std::vector<std::size_t>> by_community;
  for (std::size_t i = 0; i < dataset.queries.size(); ++i) {
    const auto& reader = dataset.queries[i].reader_id;
    auto it = communities.find(reader);
    if (it == communities.end()) {
      throw InvalidArgument("judged reader '" + reader + "' has no community assignment");
    }
    by_community[it->second].push_back(i);
  }
  set.global = coordinate_ascent_train(dataset, params.ascent, seed);
  for (const auto& [community, indices] : by_community) {
    if (indices.size() < params.min_judged_queries) continue;
    try {
      RankingModel model = coordinate_ascent_train(dataset.subset(indices), params.ascent, seed);
      model.community_tag = std::to_string(community);
      set.community_models.emplace(community, std::move(model));
    } catch (const Untrainable&) {
      // falls back to the global model
    }
  }
  return set;
}

json model_to_json(const RankingModel& model) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  return json{{"feature_names", model.feature_names},
              {"weights", vec(model.weights)},
              {"normalization", {{"min", vec(model.normalization.min)}, {"max", vec(model.normalization.max)}}},
              {"metric", model.metric_name},
              {"metric_value", model.metric_value},
              {"community", model.community_tag},
              {"restart", model.restart}};
}

RankingModel model_from_json(const json& doc) {
  auto vec = [](const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  RankingModel model;
  model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  model.weights = vec(doc.at("weights"));
  model.normalization.min = vec(doc.at("normalization").at("min"));
  model.normalization.max = vec(doc.at("normalization").at("max"));
  model.metric_name = doc.value("metric", "ndcg@3");
  model.metric_value = doc.value("metric_value", 0.0);
  model.community_tag = doc.value("community", "global");
  model.restart = doc.value("restart", std::size_t{0});
  const auto f = static_cast<Eigen::Index>(model.feature_names.size());
  if (model.weights.size() != f || model.normalization.min.size() != f ||
      model.normalization.max.size() != f) {
    throw InvalidArgument("model vectors do not match its feature count");
  }
  return model;
}

}  // namespace commrec
