// Independent brute-force reference implementations used by the unit tests
// and the acceptance suite. Written as straight-line code on purpose: none of
// these reuse the library routine they check.
#ifndef COMMREC_TESTS_ORACLES_HPP
#define COMMREC_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "commrec/hetgraph.hpp"
#include "commrec/maxent.hpp"
#include "commrec/ranker.hpp"
#include "commrec/rng.hpp"

namespace oracle {

inline double dcg(const std::vector<int>& gains, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < gains.size() && i < k; ++i) {
    s += gains[i] / (std::log(static_cast<double>(i) + 2.0) / std::log(2.0));
  }
  return s;
}

/// IDCG from grade counts: all 2s first, then 1s, then 0s.
inline double ideal_dcg(const std::vector<int>& gains, std::size_t k) {
  std::map<int, std::size_t, std::greater<>> counts;
  for (int g : gains) ++counts[g];
  std::vector<int> ideal;
  for (const auto& [g, n] : counts) ideal.insert(ideal.end(), n, g);
  return dcg(ideal, k);
}

/// nDCG@k, or -1 when the ideal DCG is zero.
inline double ndcg(const std::vector<int>& gains, std::size_t k) {
  const double idcg = ideal_dcg(gains, k);
  return idcg > 0.0 ? dcg(gains, k) / idcg : -1.0;
}

inline double average_precision(const std::vector<int>& gains, std::size_t k) {
  std::size_t relevant = 0;
  for (int g : gains) relevant += g >= 1 ? 1 : 0;
  if (relevant == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t rank = 1; rank <= gains.size() && rank <= k; ++rank) {
    if (gains[rank - 1] < 1) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < rank; ++j) hits += gains[j] >= 1 ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return sum / static_cast<double>(std::min(relevant, k));
}

inline double reciprocal_rank(const std::vector<int>& gains) {
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains[i] >= 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

struct TourSums {
  std::map<std::size_t, double> scores;
  double absorbed = 0.0;
};

inline void walk_tours(const commrec::HetGraph& g, const commrec::MetaPath& path, std::size_t step,
                       std::size_t v, double p, TourSums& out) {
  if (step == path.steps.size()) {
    out.scores[v] += p;
    return;
  }
  const auto& s = path.steps[step];
  std::vector<std::size_t> next;
  if (auto t = g.edge_type(s.edge)) {
    for (auto h : g.out(v, *t)) {
      const auto& head = g.vertex(h);
      if (head.kind != s.to) continue;
      if (s.oer_type && head.oer_type != s.oer_type) continue;
      next.push_back(h);
    }
  }
  if (next.empty()) {
    out.absorbed += p;
    return;
  }
  for (auto h : next) walk_tours(g, path, step + 1, h, p / static_cast<double>(next.size()), out);
}

/// Sum of tour probabilities by explicit enumeration of every tour.
inline TourSums enumerate_tours(const commrec::HetGraph& g, const std::vector<std::size_t>& starts,
                                const commrec::MetaPath& path) {
  TourSums out;
  for (auto s : starts) walk_tours(g, path, 0, s, 1.0 / static_cast<double>(starts.size()), out);
  return out;
}

inline double subset_cost(const Eigen::MatrixXd& d, const std::vector<std::size_t>& medoids) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double best = d(i, static_cast<Eigen::Index>(medoids[0]));
    for (auto m : medoids) best = std::min(best, d(i, static_cast<Eigen::Index>(m)));
    cost += best;
  }
  return cost;
}

inline void best_subset(const Eigen::MatrixXd& d, std::size_t k, std::size_t first,
                        std::vector<std::size_t>& chosen, double& best) {
  if (chosen.size() == k) {
    best = std::min(best, subset_cost(d, chosen));
    return;
  }
  for (std::size_t i = first; i < static_cast<std::size_t>(d.rows()); ++i) {
    chosen.push_back(i);
    best_subset(d, k, i + 1, chosen, best);
    chosen.pop_back();
  }
}

/// Minimum K-medoids cost over all C(n, k) medoid sets.
inline double optimal_medoid_cost(const Eigen::MatrixXd& d, std::size_t k) {
  std::vector<std::size_t> chosen;
  double best = std::numeric_limits<double>::infinity();
  best_subset(d, k, 0, chosen, best);
  return best;
}

/// Central differences of the MaxEnt objective in long double.
inline commrec::MaxEntParams<long double> numeric_gradient(const commrec::MaxEntParams<long double>& p,
                                                           const commrec::Matrix<long double>& x,
                                                           const std::vector<int>& y, long double lambda,
                                                           long double h = 1e-6L) {
  commrec::MaxEntParams<long double> g{commrec::Matrix<long double>::Zero(p.weights.rows(), p.weights.cols()),
                                       commrec::Vector<long double>::Zero(p.intercepts.size())};
  auto objective = [&](const commrec::MaxEntParams<long double>& q) {
    return commrec::maxent_objective(q, x, y, lambda);
  };
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) {
      auto plus = p;
      auto minus = p;
      plus.weights(r, c) += h;
      minus.weights(r, c) -= h;
      g.weights(r, c) = (objective(plus) - objective(minus)) / (2 * h);
    }
    auto plus = p;
    auto minus = p;
    plus.intercepts(r) += h;
    minus.intercepts(r) -= h;
    g.intercepts(r) = (objective(plus) - objective(minus)) / (2 * h);
  }
  return g;
}

/// Mean nDCG@k of scores w.x on normalized features; ties keep candidate order.
inline double mean_ndcg(const commrec::RankingDataset& normalized, const Eigen::VectorXd& w, std::size_t k) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& q : normalized.queries) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (Eigen::Index i = 0; i < q.features.rows(); ++i) {
      scored.emplace_back(q.features.row(i).dot(w), static_cast<std::size_t>(i));
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<int> ranked;
    for (const auto& [s, i] : scored) ranked.push_back(q.gains[i]);
    const double v = ndcg(ranked, k);
    if (v < 0.0) continue;
    total += v;
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

/// Best mean nDCG@k over 721 directions (cos t, sin t), t = i * pi / 360.
inline double grid_search_2d(const commrec::RankingDataset& normalized, std::size_t k) {
  double best = 0.0;
  for (int i = 0; i <= 720; ++i) {
    const double t = i * std::numbers::pi / 360.0;
    Eigen::Vector2d w(std::cos(t), std::sin(t));
    best = std::max(best, mean_ndcg(normalized, w, k));
  }
  return best;
}

/// Random typed graph over the default edge types with `n` vertices.
inline commrec::HetGraph random_graph(commrec::Rng& rng, std::size_t n, double density) {
  using commrec::VertexKind;
  commrec::HetGraph::Builder b;
  std::vector<std::pair<std::string, VertexKind>> vs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = static_cast<VertexKind>(rng.below(3));
    const std::string id = "v" + std::to_string(i);
    std::optional<commrec::OerType> type;
    if (kind == VertexKind::Oer) type = commrec::kOerTypes[rng.below(4)];
    b.add_vertex({id, kind, type, type ? std::string(commrec::to_string(*type)) : id});
    vs.emplace_back(id, kind);
  }
  for (const auto& decl : commrec::default_edge_types()) {
    for (const auto& [src, sk] : vs) {
      if (sk != decl.from) continue;
      for (const auto& [dst, dk] : vs) {
        if (dk == decl.to && rng.bernoulli(density)) b.add_edge(src, decl.name, dst);
      }
    }
  }
  return std::move(b).build();
}

/// Random chainable meta-path of at most `max_length` steps from `start`.
inline commrec::MetaPath random_metapath(commrec::Rng& rng, commrec::VertexKind start, std::size_t max_length) {
  commrec::MetaPath path;
  const std::size_t length = rng.below(max_length + 1);
  auto kind = start;
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<commrec::EdgeTypeDecl> options;
    for (const auto& d : commrec::default_edge_types()) {
      if (d.from == kind) options.push_back(d);
    }
    if (options.empty()) break;
    const auto& d = options[rng.below(options.size())];
    commrec::MetaPathStep step{d.name, d.to, std::nullopt};
    if (d.to == commrec::VertexKind::Oer && rng.bernoulli(0.5)) step.oer_type = commrec::kOerTypes[rng.below(4)];
    path.steps.push_back(step);
    kind = d.to;
  }
  path.name = commrec::metapath_name(path.steps);
  return path;
}

/// Queries whose gains follow a hidden 2-feature direction plus noise.
inline commrec::RankingDataset random_2d_problem(commrec::Rng& rng, std::size_t queries) {
  commrec::RankingDataset d;
  d.feature_names = {"f0", "f1"};
  const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector2d hidden(std::cos(t), std::sin(t));
  for (std::size_t q = 0; q < queries; ++q) {
    commrec::QueryList list;
    list.query_id = "q" + std::to_string(q);
    list.reader_id = "r" + std::to_string(q % 7);
    const std::size_t m = 4 + rng.below(5);
    list.features.resize(static_cast<Eigen::Index>(m), 2);
    for (std::size_t c = 0; c < m; ++c) {
      const Eigen::Vector2d x(rng.uniform(), rng.uniform());
      list.features.row(static_cast<Eigen::Index>(c)) = x.transpose();
      const double signal = 1.0 + 1.5 * hidden.dot(x) + rng.uniform(-0.6, 0.6);
      list.gains.push_back(std::clamp(static_cast<int>(std::lround(signal)), 0, 2));
      list.oer_ids.push_back("o" + std::to_string(c));
    }
    d.queries.push_back(std::move(list));
  }
  return d;
}

}  // namespace oracle

#endif  // COMMREC_TESTS_ORACLES_HPP
