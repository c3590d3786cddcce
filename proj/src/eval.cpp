#include "commrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "commrec/error.hpp"
#include "commrec/maxent.hpp"
#include "commrec/rng.hpp"

namespace commrec {

using nlohmann::json;

std::vector<std::size_t> assign_folds(std::span<const int> strata, std::size_t folds,
                                      std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("at least 2 folds are required");
  if (folds > strata.size()) {
    throw InvalidArgument("cannot split " + std::to_string(strata.size()) + " items into " +
                          std::to_string(folds) + " folds");
  }
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> fold_of(strata.size(), 0);
  std::size_t next = 0;
  for (auto& [stratum, members] : groups) {
    rng.shuffle(members);
    for (auto i : members) fold_of[i] = next++ % folds;
  }
  return fold_of;
}

SignTest paired_sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("sign test needs paired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++t.wins;
    } else if (a[i] < b[i]) {
      ++t.losses;
    } else {
      ++t.ties;
    }
  }
  const std::size_t n = t.wins + t.losses;
  if (n == 0) return t;
  const std::size_t tail = std::min(t.wins, t.losses);
  const double dn = static_cast<double>(n);
  double p = 0.0;
  for (std::size_t i = 0; i <= tail; ++i) {
    const double di = static_cast<double>(i);
    p += std::exp(std::lgamma(dn + 1) - std::lgamma(di + 1) - std::lgamma(dn - di + 1) -
                  dn * std::log(2.0));
  }
  t.p_value = std::min(1.0, 2.0 * p);
  return t;
}

namespace {

SystemSummary summarize_system(const std::vector<QueryOutcome>& outcomes, std::size_t folds,
                               std::optional<MetricVector> QueryOutcome::*member) {
  SystemSummary s;
  std::vector<MetricVector> fold_sum(folds, MetricVector{});
  std::vector<std::size_t> fold_count(folds, 0);
  std::size_t count = 0;
  for (const auto& o : outcomes) {
    const auto& m = o.*member;
    if (!m) continue;
    ++count;
    ++fold_count.at(o.fold);
    for (std::size_t i = 0; i < m->size(); ++i) {
      s.means[i] += (*m)[i];
      fold_sum[o.fold][i] += (*m)[i];
    }
  }
  if (count > 0) {
    for (auto& v : s.means) v /= static_cast<double>(count);
  }
  for (std::size_t f = 0; f < folds; ++f) {
    if (fold_count[f] == 0) {
      s.fold_means.emplace_back();
      continue;
    }
    for (auto& v : fold_sum[f]) v /= static_cast<double>(fold_count[f]);
    s.fold_means.emplace_back(fold_sum[f]);
  }
  return s;
}

}  // namespace

MetricReport summarize_outcomes(std::vector<QueryOutcome> outcomes, std::size_t folds,
                                std::uint64_t seed) {
  MetricReport r;
  r.folds = folds;
  r.seed = seed;
  r.total_queries = outcomes.size();
  std::vector<double> comm;
  std::vector<double> base;
  for (const auto& o : outcomes) {
    if (o.communitized && o.baseline) {
      ++r.evaluated_queries;
      comm.push_back((*o.communitized)[kNdcg3Index]);
      base.push_back((*o.baseline)[kNdcg3Index]);
    } else {
      ++r.skipped_queries;
    }
  }
  r.communitized = summarize_system(outcomes, folds, &QueryOutcome::communitized);
  r.baseline = summarize_system(outcomes, folds, &QueryOutcome::baseline);
  r.ndcg3_sign_test = paired_sign_test(comm, base);
  r.queries = std::move(outcomes);
  return r;
}

MetricReport cross_validate_ranking(const RankingDataset& dataset,
                                    const std::map<std::string, int>& communities,
                                    const CrossValidationOptions& options, std::uint64_t seed) {
  const std::size_t n = dataset.queries.size();
  std::vector<int> strata;
  for (const auto& q : dataset.queries) {
    auto it = communities.find(q.reader_id);
    if (it == communities.end()) {
      throw InvalidArgument("judged reader '" + q.reader_id + "' has no community assignment");
    }
    strata.push_back(it->second);
  }
  const auto fold_of = assign_folds(strata, options.folds, fork_seed(seed, "folds"));

  std::vector<QueryOutcome> outcomes;
  std::vector<std::string> log;
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
    const CommunityRankerSet models = train_communitized(
        dataset.subset(train), communities, options.ranker, fork_seed(seed, "fold-" + std::to_string(f)));

    std::set<int> reported;
    for (auto i : test) {
      const QueryList& q = dataset.queries[i];
      QueryOutcome o;
      o.query_id = q.query_id;
      o.reader_id = q.reader_id;
      o.fold = f;
      o.community = strata[i];
      o.used_global_fallback = !models.community_models.contains(o.community);
      if (o.used_global_fallback && reported.insert(o.community).second) {
        log.push_back("fold " + std::to_string(f) + ": community " + std::to_string(o.community) +
                      " has no model; its test queries use the global model");
      }
      o.communitized = evaluate_ranking(ranked_gains(models.resolve(o.community), q));
      o.baseline = evaluate_ranking(ranked_gains(*models.global, q));
      outcomes.push_back(std::move(o));
    }
  }
  MetricReport report = summarize_outcomes(std::move(outcomes), options.folds, seed);
  report.log = std::move(log);
  return report;
}

MetricReport simulate_missing_rpf(const FeatureMatrix& features, const RankingDataset& dataset,
                                  const SimulationOptions& options, std::uint64_t seed) {
  if (!(options.fraction >= 0.0 && options.fraction <= 1.0)) {
    throw InvalidArgument("held-out fraction must lie in [0,1]");
  }
  for (std::size_t i = 0; i < features.reader_ids.size(); ++i) {
    if (!features.has_rpf[i]) {
      throw InvalidArgument("reader '" + features.reader_ids[i] +
                            "' has no profile; the simulation needs RPF for every reader");
    }
  }
  const auto& readers = features.reader_ids;
  const std::size_t n = readers.size();
  const std::size_t k = options.two_step.k;
  const UnifiedVectors rpf = combine_groups(features, options.two_step.rpf_groups);
  const UnifiedVectors rbf = combine_groups(features, options.two_step.rbf_groups);
  const auto held_count = static_cast<std::size_t>(std::llround(options.fraction * static_cast<double>(n)));
  const std::uint64_t ranking_seed = fork_seed(seed, "ranking");

  if (held_count == 0) {
    const CommunityModel clustering =
        cluster_readers(rpf, k, fork_seed(seed, "cluster"), options.two_step.kmedoids_restarts);
    MetricReport report = cross_validate_ranking(dataset, clustering.assignment, options.ranking, ranking_seed);
    report.seed = seed;
    report.prediction = PredictionSummary{0, 0, 0.0, std::vector<std::vector<std::size_t>>(k, std::vector<std::size_t>(k, 0)), 0};
    report.log.insert(report.log.begin(), "no readers held out; communities come from RPF clustering only");
    return report;
  }
  if (options.folds == 0) throw InvalidArgument("at least one reader fold is required");

  std::vector<std::string> order = readers;
  Rng rng(fork_seed(seed, "reader-folds"));
  rng.shuffle(order);

  PredictionSummary prediction;
  prediction.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::vector<QueryOutcome> pooled;
  std::vector<std::string> log;
  for (std::size_t f = 0; f < options.folds; ++f) {
    const std::size_t start = f * n / options.folds;
    std::set<std::string> held;
    for (std::size_t i = 0; i < held_count; ++i) held.insert(order[(start + i) % n]);
    std::vector<std::string> kept;
    for (const auto& r : readers) {
      if (!held.contains(r)) kept.push_back(r);
    }
    if (kept.size() < k) throw Untrainable("fewer kept readers than communities");

    const std::string tag = "reader fold " + std::to_string(f);
    const CommunityModel clustering = cluster_readers(
        select_readers(rpf, kept), k, fork_seed(seed, "cluster-" + std::to_string(f)),
        options.two_step.kmedoids_restarts);
    const MaxEntModel classifier =
        train_community_classifier(rbf, clustering.assignment, k, options.two_step.maxent);

    std::map<std::string, int> mixed = clustering.assignment;
    const std::vector<std::string> held_ids(held.begin(), held.end());
    const UnifiedVectors held_rpf = select_readers(rpf, held_ids);
    const UnifiedVectors held_rbf = select_readers(rbf, held_ids);
    for (std::size_t i = 0; i < held_ids.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const int truth = nearest_medoid(clustering, rpf, held_rpf.rows.row(row));
      if (held_rbf.rows.row(row).isZero()) {
        ++prediction.intercept_only;
        log.push_back(tag + ": reader '" + held_ids[i] + "' has no behavior features; intercept-only prediction");
      }
      const int predicted = predict_community(classifier, held_rbf.rows.row(row).transpose()).label;
      ++prediction.predicted;
      if (predicted == truth) ++prediction.correct;
      ++prediction.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
      mixed[held_ids[i]] = options.oracle_heldout ? truth : predicted;
    }

    MetricReport fold_report = cross_validate_ranking(dataset, mixed, options.ranking, ranking_seed);
    for (auto& o : fold_report.queries) {
      if (!held.contains(o.reader_id)) continue;
      o.fold = f;
      pooled.push_back(std::move(o));
    }
    for (auto& line : fold_report.log) log.push_back(tag + ", " + line);
  }
  prediction.accuracy = static_cast<double>(prediction.correct) / static_cast<double>(prediction.predicted);

  MetricReport report = summarize_outcomes(std::move(pooled), options.folds, seed);
  report.prediction = std::move(prediction);
  report.log = std::move(log);
  return report;
}

namespace {

json metric_object(const MetricVector& m) {
  json out = json::object();
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) out[std::string(kMetricNames[i])] = m[i];
  return out;
}

json optional_metrics(const std::optional<MetricVector>& m) {
  return m ? metric_object(*m) : json(nullptr);
}

json system_json(const SystemSummary& s) {
  json folds = json::array();
  for (const auto& f : s.fold_means) folds.push_back(optional_metrics(f));
  return json{{"means", metric_object(s.means)}, {"folds", std::move(folds)}};
}

}  // namespace

json report_to_json(const MetricReport& report) {
  json queries = json::array();
  for (const auto& o : report.queries) {
    queries.push_back({{"query", o.query_id},
                       {"reader", o.reader_id},
                       {"fold", o.fold},
                       {"community", o.community},
                       {"global_fallback", o.used_global_fallback},
                       {"communitized", optional_metrics(o.communitized)},
                       {"baseline", optional_metrics(o.baseline)}});
  }
  json doc{{"folds", report.folds},
           {"seed", report.seed},
           {"total_queries", report.total_queries},
           {"evaluated_queries", report.evaluated_queries},
           {"skipped_queries", report.skipped_queries},
           {"conventions",
            {{"gain", "linear: good=2, ok=1, bad=0"},
             {"relevant", "grade >= 1"},
             {"average_precision_normalizer", "min(relevant count, k)"},
             {"skipped", "queries with zero ideal DCG are excluded from means"}}},
           {"systems", {{"communitized", system_json(report.communitized)},
                        {"baseline", system_json(report.baseline)}}},
           {"sign_test_ndcg@3",
            {{"wins", report.ndcg3_sign_test.wins},
             {"losses", report.ndcg3_sign_test.losses},
             {"ties", report.ndcg3_sign_test.ties},
             {"p_value", report.ndcg3_sign_test.p_value}}},
           {"queries", std::move(queries)},
           {"log", report.log}};
  if (report.prediction) {
    const auto& p = *report.prediction;
    doc["community_prediction"] = {{"predicted", p.predicted},
                                   {"correct", p.correct},
                                   {"accuracy", p.accuracy},
                                   {"confusion", p.confusion},
                                   {"intercept_only", p.intercept_only}};
  }
  return doc;
}

}  // namespace commrec
