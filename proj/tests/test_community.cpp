#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "commrec/community.hpp"
#include "commrec/error.hpp"
#include "commrec/kmedoids.hpp"
#include "commrec/linalg.hpp"
#include "commrec/maxent.hpp"
#include "commrec/rng.hpp"
#include "commrec/simgen.hpp"
#include "oracles.hpp"

using namespace commrec;

namespace {

Eigen::MatrixXd line_distances(const std::vector<double>& xs) {
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = xs[i];
  return pairwise_euclidean(pts);
}

PairwiseScores brute_pairwise(const std::map<std::string, int>& assignment, const std::set<ReaderPair>& replies) {
  std::vector<std::string> ids;
  for (const auto& [id, c] : assignment) ids.push_back(id);
  double same = 0, reply = 0, both = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const bool s = assignment.at(ids[i]) == assignment.at(ids[j]);
      const bool r = replies.contains({ids[i], ids[j]});
      same += s;
      reply += r;
      both += s && r;
    }
  }
  PairwiseScores out;
  out.precision = same > 0 ? both / same : 0.0;
  out.recall = reply > 0 ? both / reply : 0.0;
  out.f1 = out.precision + out.recall > 0 ? 2 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  return out;
}

UnifiedVectors vectors_of(const std::vector<std::string>& ids, const Eigen::MatrixXd& rows) {
  UnifiedVectors v;
  v.reader_ids = ids;
  v.rows = rows;
  v.group_order = {FeatureGroupId::RpfSkills};
  v.offsets = {0};
  return v;
}

}  // namespace

TEST_CASE("k-medoids recovers the three triples") {
  const auto d = line_distances({0, .1, .2, 10, 10.1, 10.2, 20, 20.1, 20.2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = kmedoids(d, 3, seed);
    CHECK(r.medoids == std::vector<std::size_t>{1, 4, 7});
    CHECK(r.cost == doctest::Approx(oracle::optimal_medoid_cost(d, 3)).epsilon(1e-12));
    CHECK(r.assignment == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 2, 2, 2});
  }
}

TEST_CASE("k-medoids with k = 1 picks the exhaustive best medoid") {
  const auto d = line_distances({0, 1, 5, 6, 7, 30});
  const auto r = kmedoids(d, 1, 3);
  double best = 1e18;
  std::size_t arg = 0;
  for (Eigen::Index m = 0; m < d.rows(); ++m) {
    const double c = d.col(m).sum();
    if (c < best) {
      best = c;
      arg = static_cast<std::size_t>(m);
    }
  }
  CHECK(r.medoids == std::vector<std::size_t>{arg});
  CHECK(r.cost == doctest::Approx(best));
}

TEST_CASE("k-medoids with k = n is zero cost, k > n throws") {
  const auto d = line_distances({1, 2, 4});
  const auto r = kmedoids(d, 3, 1);
  CHECK(r.cost == 0.0);
  CHECK(r.medoids == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(kmedoids(d, 4, 1), InvalidArgument);
}

TEST_CASE("k-medoids cost trace is non-increasing and no swap improves the result") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng.below(15);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << rng.uniform(), rng.uniform();
    const auto d = pairwise_euclidean(pts);
    const std::size_t k = 1 + rng.below(4);
    const auto r = kmedoids(d, k, rng.next());
    for (std::size_t i = 1; i < r.cost_trace.size(); ++i) CHECK(r.cost_trace[i] <= r.cost_trace[i - 1]);
    CHECK(r.cost == doctest::Approx(medoid_cost(d, r.medoids)));
    for (std::size_t slot = 0; slot < k; ++slot) {
      for (std::size_t h = 0; h < n; ++h) {
        if (std::find(r.medoids.begin(), r.medoids.end(), h) != r.medoids.end()) continue;
        auto swapped = r.medoids;
        swapped[slot] = h;
        CHECK(medoid_cost(d, swapped) >= r.cost - 1e-12);
      }
    }
  }
}

TEST_CASE("cluster_readers is invariant to input order and medoids own their clusters") {
  Rng rng(21);
  std::vector<std::string> ids;
  Eigen::MatrixXd rows(15, 3);
  for (int i = 0; i < 15; ++i) {
    ids.push_back("r" + std::to_string(100 + i));
    rows.row(i) << rng.uniform(), rng.uniform(), rng.uniform();
  }
  const auto a = cluster_readers(vectors_of(ids, rows), 3, 5);
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<std::string> ids2;
  Eigen::MatrixXd rows2(15, 3);
  for (int i = 0; i < 15; ++i) {
    ids2.push_back(ids[perm[i]]);
    rows2.row(i) = rows.row(static_cast<Eigen::Index>(perm[i]));
  }
  const auto b = cluster_readers(vectors_of(ids2, rows2), 3, 5);
  CHECK(a.assignment == b.assignment);
  CHECK(a.medoid_ids == b.medoid_ids);
  for (std::size_t c = 0; c < a.medoid_ids.size(); ++c) CHECK(a.assignment.at(a.medoid_ids[c]) == static_cast<int>(c));
  CHECK(a.assignment.size() == 15);
}

TEST_CASE("pairwise evaluation hand cases") {
  const std::map<std::string, int> split{{"a", 0}, {"b", 0}, {"c", 1}, {"d", 1}};
  const auto s = pairwise_cluster_eval(split, {{"a", "b"}, {"a", "c"}});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);

  const auto exact = pairwise_cluster_eval(split, {{"a", "b"}, {"c", "d"}});
  CHECK(exact.precision == 1.0);
  CHECK(exact.recall == 1.0);

  const std::map<std::string, int> one{{"a", 0}, {"b", 0}, {"c", 0}, {"d", 0}};
  const auto all = pairwise_cluster_eval(one, {{"a", "b"}, {"a", "c"}});
  CHECK(all.recall == 1.0);
  CHECK(all.precision == doctest::Approx(2.0 / 6.0));

  CHECK_THROWS(pairwise_cluster_eval(split, {{"a", "zz"}}));
}

TEST_CASE("pairwise evaluation equals brute-force pair enumeration") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const int k = 1 + static_cast<int>(rng.below(5));
    std::map<std::string, int> assignment;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("r" + std::to_string(1000 + i));
      assignment[ids.back()] = static_cast<int>(rng.below(static_cast<std::size_t>(k)));
    }
    std::set<ReaderPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.bernoulli(0.1)) pairs.insert({ids[i], ids[j]});
      }
    }
    const auto got = pairwise_cluster_eval(assignment, pairs);
    const auto want = brute_pairwise(assignment, pairs);
    CHECK(got.precision == want.precision);
    CHECK(got.recall == want.recall);
    CHECK(got.f1 == want.f1);
  }
}

TEST_CASE("maxent analytic gradient matches finite differences") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(10));
    const Eigen::Index f = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(3));
    Matrix<long double> x(n, f);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < f; ++j) x(i, j) = rng.uniform(-2, 2);
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::size_t>(k)));
    }
    MaxEntParams<long double> p{Matrix<long double>(k, f), Vector<long double>(k)};
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index j = 0; j < f; ++j) p.weights(r, j) = rng.uniform(-1, 1);
      p.intercepts(r) = rng.uniform(-1, 1);
    }
    const long double lambda = rng.uniform(0, 2);
    const auto analytic = maxent_gradient(p, x, y, lambda);
    const auto numeric = oracle::numeric_gradient(p, x, y, lambda);
    auto rel = [](long double a, long double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0L});
    };
    long double worst = 0;
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index j = 0; j < f; ++j) worst = std::max(worst, rel(analytic.weights(r, j), numeric.weights(r, j)));
      worst = std::max(worst, rel(analytic.intercepts(r), numeric.intercepts(r)));
    }
    CHECK(static_cast<double>(worst) < 1e-6);
  }
}

TEST_CASE("identical features reproduce the class priors") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(10, 3, 0.5);
  std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  MaxEntOptions opts;
  opts.gradient_tolerance = 1e-10;
  const auto m = train_maxent(x, y, 2, opts);
  const Eigen::VectorXd p = m.probabilities(Eigen::Vector3d(0.5, 0.5, 0.5));
  CHECK(std::abs(p(0) - 0.7) < 1e-6);
  CHECK(std::abs(p(1) - 0.3) < 1e-6);
  const Eigen::VectorXd q = m.probabilities(Eigen::Vector3d(-4, 9, 0));
  CHECK(std::abs(q(0) - 0.7) < 1e-6);
}

TEST_CASE("separable toy reaches full training accuracy") {
  Eigen::MatrixXd x(8, 2);
  x << 0, 0, 0.2, 0.1, 0.1, 0.3, 0.3, 0.2, 1, 1, 0.9, 1.2, 1.1, 0.8, 1.3, 1.1;
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  // Independent check that some line separates the classes.
  bool separable = false;
  for (int a = 0; a < 360 && !separable; ++a) {
    const double t = a * std::numbers::pi / 180;
    std::vector<double> s0, s1;
    for (int i = 0; i < 8; ++i) (y[i] ? s1 : s0).push_back(std::cos(t) * x(i, 0) + std::sin(t) * x(i, 1));
    separable = *std::max_element(s0.begin(), s0.end()) < *std::min_element(s1.begin(), s1.end());
  }
  REQUIRE(separable);
  MaxEntOptions opts;
  opts.lambda = 1e-4;
  const auto m = train_maxent(x, y, 2, opts);
  for (int i = 0; i < 8; ++i) CHECK(predict_community(m, x.row(i).transpose()).label == y[i]);
  for (std::size_t i = 1; i < m.convergence.objective_trace.size(); ++i) {
    CHECK(m.convergence.objective_trace[i] >= m.convergence.objective_trace[i - 1]);
  }
}

TEST_CASE("maxent prediction follows the softmax formula") {
  MaxEntModel zero;
  zero.class_count = 3;
  zero.present_classes = {0, 1, 2};
  zero.params = {Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)};
  const auto u = predict_community(zero, Eigen::Vector2d(1, 2));
  CHECK(u.label == 0);
  for (int c = 0; c < 3; ++c) CHECK(u.distribution(c) == doctest::Approx(1.0 / 3));

  MaxEntModel m = zero;
  m.params.weights << 1, 0, 0, 2, -1, 1;
  m.params.intercepts << 0.5, 0, -0.5;
  const Eigen::Vector2d x(0.3, -0.7);
  const double s0 = 0.3 + 0.5, s1 = -1.4, s2 = -0.3 - 0.7 - 0.5;
  const double z = std::exp(s0) + std::exp(s1) + std::exp(s2);
  const auto p = predict_community(m, x);
  CHECK(p.distribution(0) == doctest::Approx(std::exp(s0) / z).epsilon(1e-12));
  CHECK(p.distribution(1) == doctest::Approx(std::exp(s1) / z).epsilon(1e-12));
  CHECK(p.distribution(2) == doctest::Approx(std::exp(s2) / z).epsilon(1e-12));
  CHECK(std::abs(p.distribution.sum() - 1.0) <= 1e-12);
  CHECK(p.label == 0);
  CHECK_THROWS_AS(predict_community(m, Eigen::Vector3d(1, 2, 3)), InvalidArgument);
}

TEST_CASE("maxent rejects non-finite features") {
  Eigen::MatrixXd x(2, 1);
  x << 1, std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(train_maxent(x, y, 2), InvalidArgument);
}

TEST_CASE("maxent json round trip") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 1, 1, 0, 1, 1, 0, 0;
  const std::vector<int> y{0, 1, 1, 0};
  const auto m = train_maxent(x, y, 3);
  const auto back = maxent_from_json(maxent_to_json(m));
  CHECK(back.present_classes == m.present_classes);
  CHECK(back.probabilities(Eigen::Vector2d(1, 0)).isApprox(m.probabilities(Eigen::Vector2d(1, 0))));
  CHECK(m.probabilities(Eigen::Vector2d(1, 0))(2) == 0.0);
}

TEST_CASE("two-step procedure labels every reader") {
  SimConfig cfg;
  cfg.readers = 30;
  cfg.seed = 2;
  const Corpus corpus = generate_corpus(cfg).corpus;
  const auto fm = featurize(corpus, FeatureSettings{}, 4);
  const auto all = two_step_communities(fm, TwoStepOptions{}, 6);
  CHECK(all.community.size() == 30);
  CHECK_FALSE(all.classifier.has_value());
  for (const auto& [id, src] : all.source) CHECK(src == CommunitySource::Clustered);
  CHECK_FALSE(all.clustered_on_rbf);
}

TEST_CASE("two-step procedure predicts readers without profiles") {
  SimConfig cfg;
  cfg.readers = 30;
  cfg.seed = 3;
  const Corpus full = generate_corpus(cfg).corpus;
  std::vector<ReaderProfile> readers = full.readers();
  for (std::size_t i = 0; i < readers.size(); i += 4) readers[i] = ReaderProfile{readers[i].reader_id, {}, {}, false};
  const Corpus partial = Corpus::assemble(readers, full.events(), full.oers(), full.queries());
  const auto fm = featurize(partial, FeatureSettings{}, 4);
  const auto out = two_step_communities(fm, TwoStepOptions{}, 6);
  REQUIRE(out.classifier.has_value());
  CHECK(out.community.size() == 30);
  std::size_t predicted = 0;
  for (const auto& [id, src] : out.source) predicted += src == CommunitySource::Predicted;
  CHECK(predicted == 8);
  CHECK(out.clustering.assignment.size() == 22);

  std::stringstream tsv;
  write_communities(tsv, out.community, out.source);
  const auto [community, source] = read_communities(tsv, "communities.tsv");
  CHECK(community == out.community);
  CHECK(source == out.source);
}
