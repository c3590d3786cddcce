#include "commrec/community.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "commrec/error.hpp"
#include "commrec/kmedoids.hpp"
#include "commrec/linalg.hpp"
#include "commrec/rng.hpp"

namespace commrec {

using nlohmann::json;

CommunityModel cluster_readers(const UnifiedVectors& vectors, std::size_t k, std::uint64_t seed,
                               std::size_t restarts) {
  const std::size_t n = vectors.reader_ids.size();
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (k > n) {
    throw InvalidArgument("k = " + std::to_string(k) + " exceeds the number of readers (" +
                          std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return vectors.reader_ids[a] < vectors.reader_ids[b]; });
  Eigen::MatrixXd sorted(static_cast<Eigen::Index>(n), vectors.rows.cols());
  for (std::size_t i = 0; i < n; ++i) {
    sorted.row(static_cast<Eigen::Index>(i)) = vectors.rows.row(static_cast<Eigen::Index>(order[i]));
  }
  const KMedoidsResult fit = kmedoids(pairwise_euclidean(sorted), k, seed, {}, restarts);

  CommunityModel model;
  model.k = k;
  model.cost = fit.cost;
  model.source_groups = vectors.group_order;
  for (auto m : fit.medoids) model.medoid_ids.push_back(vectors.reader_ids[order[m]]);
  for (std::size_t i = 0; i < n; ++i) {
    model.assignment.emplace(vectors.reader_ids[order[i]], static_cast<int>(fit.assignment[i]));
  }
  return model;
}

int nearest_medoid(const CommunityModel& model, const UnifiedVectors& medoid_space,
                   const Eigen::Ref<const Eigen::RowVectorXd>& vector) {
  int best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.medoid_ids.size(); ++c) {
    auto it = std::find(medoid_space.reader_ids.begin(), medoid_space.reader_ids.end(),
                        model.medoid_ids[c]);
    if (it == medoid_space.reader_ids.end()) {
      throw InvalidArgument("medoid '" + model.medoid_ids[c] + "' missing from vector space");
    }
    const auto row = static_cast<Eigen::Index>(it - medoid_space.reader_ids.begin());
    const double d = (medoid_space.rows.row(row) - vector).norm();
    if (d < best_distance) {
      best_distance = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::set<ReaderPair> reply_pairs(const Corpus& corpus) {
  std::set<ReaderPair> pairs;
  for (const auto& e : corpus.events()) {
    if (e.kind != EventKind::Reply || !e.target_event_id) continue;
    const ReadingEvent* target = corpus.find_event(*e.target_event_id);
    if (target == nullptr || target->reader_id == e.reader_id) continue;
    pairs.insert(std::minmax(e.reader_id, target->reader_id));
  }
  return pairs;
}

PairwiseScores pairwise_cluster_eval(const std::map<std::string, int>& assignment,
                                     const std::set<ReaderPair>& pairs) {
  PairwiseScores s;
  std::map<int, std::size_t> sizes;
  for (const auto& [reader, community] : assignment) ++sizes[community];
  for (const auto& [_, size] : sizes) s.same_community_pairs += size * (size - 1) / 2;

  for (const auto& [a, b] : pairs) {
    if (a == b) continue;
    auto ia = assignment.find(a);
    auto ib = assignment.find(b);
    if (ia == assignment.end()) throw InvalidArgument("reply pair names unclustered reader '" + a + "'");
    if (ib == assignment.end()) throw InvalidArgument("reply pair names unclustered reader '" + b + "'");
    ++s.reply_pair_count;
    if (ia->second == ib->second) ++s.agreeing_pairs;
  }
  const auto agree = static_cast<double>(s.agreeing_pairs);
  s.precision = s.same_community_pairs == 0 ? 0.0 : agree / static_cast<double>(s.same_community_pairs);
  s.recall = s.reply_pair_count == 0 ? 0.0 : agree / static_cast<double>(s.reply_pair_count);
  s.f1 = (s.precision + s.recall) == 0.0 ? 0.0
                                          : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

std::string_view to_string(CommunitySource source) {
  return source == CommunitySource::Clustered ? "clustered" : "predicted";
}

MaxEntModel train_community_classifier(const UnifiedVectors& rbf,
                                       const std::map<std::string, int>& labels, std::size_t k,
                                       const MaxEntOptions& options) {
  std::vector<std::string> readers;
  std::vector<int> y;
  for (const auto& [reader, label] : labels) {
    readers.push_back(reader);
    y.push_back(label);
  }
  const UnifiedVectors train = select_readers(rbf, readers);
  return train_maxent(train.rows, y, k, options);
}

CommunityAssignment two_step_communities(const FeatureMatrix& features, const TwoStepOptions& options,
                                         std::uint64_t seed) {
  CommunityAssignment out;
  std::vector<std::string> with_rpf;
  std::vector<std::string> without_rpf;
  for (std::size_t i = 0; i < features.reader_ids.size(); ++i) {
    (features.has_rpf[i] ? with_rpf : without_rpf).push_back(features.reader_ids[i]);
  }
  const UnifiedVectors rbf = combine_groups(features, options.rbf_groups);

  if (with_rpf.size() < options.k) {
    // Not enough profiles to seed the communities: cluster everyone on RBF.
    out.clustered_on_rbf = true;
    out.clustering = cluster_readers(rbf, options.k, fork_seed(seed, "cluster"), options.kmedoids_restarts);
    for (const auto& [reader, c] : out.clustering.assignment) {
      out.community[reader] = c;
      out.source[reader] = CommunitySource::Clustered;
    }
    return out;
  }

  const UnifiedVectors rpf = select_readers(combine_groups(features, options.rpf_groups), with_rpf);
  out.clustering = cluster_readers(rpf, options.k, fork_seed(seed, "cluster"), options.kmedoids_restarts);
  for (const auto& [reader, c] : out.clustering.assignment) {
    out.community[reader] = c;
    out.source[reader] = CommunitySource::Clustered;
  }
  if (without_rpf.empty()) return out;

  out.classifier = train_community_classifier(rbf, out.clustering.assignment, options.k, options.maxent);
  const UnifiedVectors targets = select_readers(rbf, without_rpf);
  for (std::size_t i = 0; i < without_rpf.size(); ++i) {
    const auto prediction =
        predict_community(*out.classifier, targets.rows.row(static_cast<Eigen::Index>(i)).transpose());
    out.community[without_rpf[i]] = prediction.label;
    out.source[without_rpf[i]] = CommunitySource::Predicted;
  }
  return out;
}

void write_communities(std::ostream& out, const std::map<std::string, int>& community,
                       const std::map<std::string, CommunitySource>& source) {
  for (const auto& [reader, c] : community) {
    auto it = source.find(reader);
    const auto src = it == source.end() ? CommunitySource::Clustered : it->second;
    out << escape_tsv(reader) << '\t' << c << '\t' << to_string(src) << '\n';
  }
}

std::pair<std::map<std::string, int>, std::map<std::string, CommunitySource>> read_communities(
    std::istream& in, const std::string& stream_name) {
  std::map<std::string, int> community;
  std::map<std::string, CommunitySource> source;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(stream_name, number, "expected reader<TAB>community<TAB>source");
    }
    const std::string reader = unescape_tsv(line.substr(0, t1));
    int c = 0;
    try {
      std::size_t used = 0;
      c = std::stoi(line.substr(t1 + 1, t2 - t1 - 1), &used);
      if (used != t2 - t1 - 1 || c < 0) throw std::invalid_argument("community");
    } catch (const std::exception&) {
      throw ParseError(stream_name, number, "community must be a nonnegative integer");
    }
    const std::string src = line.substr(t2 + 1);
    if (src != "clustered" && src != "predicted") {
      throw ParseError(stream_name, number, "source must be 'clustered' or 'predicted'");
    }
    if (!community.emplace(reader, c).second) throw DuplicateId(reader);
    source.emplace(reader, src == "clustered" ? CommunitySource::Clustered : CommunitySource::Predicted);
  }
  return {std::move(community), std::move(source)};
}

json community_model_to_json(const CommunityModel& model) {
  std::vector<std::string> groups;
  for (auto g : model.source_groups) groups.emplace_back(to_string(g));
  return json{{"k", model.k},
              {"medoids", model.medoid_ids},
              {"assignment", model.assignment},
              {"distance", model.distance},
              {"source_groups", groups},
              {"cost", model.cost}};
}

CommunityModel community_model_from_json(const json& doc) {
  CommunityModel model;
  model.k = doc.at("k").get<std::size_t>();
  model.medoid_ids = doc.at("medoids").get<std::vector<std::string>>();
  model.assignment = doc.at("assignment").get<std::map<std::string, int>>();
  model.distance = doc.value("distance", "euclidean");
  for (const auto& name : doc.value("source_groups", std::vector<std::string>{})) {
    if (auto g = parse_feature_group(name)) model.source_groups.push_back(*g);
  }
  model.cost = doc.value("cost", 0.0);
  return model;
}

}  // namespace commrec
