// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "commrec/cli.hpp"
#include "commrec/community.hpp"
#include "commrec/eval.hpp"
#include "commrec/kmedoids.hpp"
#include "commrec/metrics.hpp"
#include "commrec/simgen.hpp"
#include "oracles.hpp"

using namespace commrec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && seconds >= budget_seconds) {
    o.pass = false;
    o.detail += " (over the " + std::to_string(static_cast<int>(budget_seconds)) + " s budget)";
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " ("
            << std::fixed << std::setprecision(2) << seconds << " s)" << std::endl;
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(1) << v;
  return s.str();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

Outcome metrics_oracle() {
  Rng rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> g(1 + rng.below(10));
    for (auto& x : g) x = static_cast<int>(rng.below(3));
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}, kAllRanks}) {
      const double o = oracle::ndcg(g, k);
      const auto v = ndcg_at_k(g, k);
      if ((o < 0) != !v.has_value()) return {false, "skip disagreement on trial " + std::to_string(trial)};
      if (v) worst = std::max(worst, std::abs(*v - o));
      worst = std::max(worst, std::abs(average_precision_at_k(g, k) - oracle::average_precision(g, k)));
    }
    worst = std::max(worst, std::abs(reciprocal_rank(g) - oracle::reciprocal_rank(g)));
  }
  const std::vector<int> hand{0, 2, 1}, ideal{2, 1, 0};
  const double dcg = dcg_at_k(hand, 3), idcg = dcg_at_k(ideal, 3), h = *ndcg_at_k(hand, 3);
  const bool ok = worst <= 1e-12 && std::abs(dcg - 1.76186) < 5e-6 && std::abs(idcg - 2.63093) < 5e-6 &&
                  std::abs(h - 0.669672) < 5e-7;
  return {ok, "1000 lists, max deviation " + sci(worst) + "; [0,2,1]@3: DCG " + fmt(dcg, 5) + ", IDCG " +
                  fmt(idcg, 5) + ", nDCG " + fmt(h, 6)};
}

Outcome walk_oracle() {
  Rng rng(2);
  double worst = 0.0, worst_mass = 0.0;
  int graphs = 0;
  while (graphs < 100) {
    const auto g = oracle::random_graph(rng, 2 + rng.below(49), rng.uniform(0.02, 0.3));
    const auto start = static_cast<VertexKind>(rng.below(3));
    const auto path = oracle::random_metapath(rng, start, 4);
    const auto kind = path.steps.empty() ? start : *metapath_start_kind(g, path);
    std::vector<std::size_t> starts;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      if (g.vertex(v).kind == kind && rng.bernoulli(0.3)) starts.push_back(v);
    }
    if (starts.empty()) continue;
    ++graphs;
    const auto r = metapath_score(g, starts, path);
    const auto o = oracle::enumerate_tours(g, starts, path);
    if (r.scores.size() != o.scores.size()) return {false, "support differs on graph " + std::to_string(graphs)};
    double sum = 0.0;
    for (const auto& [v, p] : r.scores) {
      auto it = o.scores.find(v);
      if (it == o.scores.end()) return {false, "unexpected terminal on graph " + std::to_string(graphs)};
      worst = std::max(worst, std::abs(p - it->second));
      sum += p;
    }
    worst = std::max(worst, std::abs(r.absorbed - o.absorbed));
    worst_mass = std::max(worst_mass, std::abs(sum + r.absorbed - 1.0));
  }
  return {worst <= 1e-12 && worst_mass <= 1e-12,
          "100 graphs, max deviation " + sci(worst) + ", max mass error " + sci(worst_mass)};
}

Outcome kmedoids_oracle() {
  Rng rng(3);
  int optimal = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t k = 1 + rng.below(3);
    const std::size_t n = k + rng.below(10 - k);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << rng.uniform(), rng.uniform();
    const auto d = pairwise_euclidean(pts);
    const auto r = kmedoids(d, k, rng.next());
    const double best = oracle::optimal_medoid_cost(d, k);
    if (std::abs(r.cost - best) <= 1e-12 * std::max(1.0, best)) ++optimal;
  }
  return {optimal == 50, std::to_string(optimal) + "/50 instances at the exhaustive optimum"};
}

Outcome maxent_checks() {
  Rng rng(4);
  long double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(20));
    const Eigen::Index f = 1 + static_cast<Eigen::Index>(rng.below(5));
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
    const auto a = maxent_gradient(p, x, y, lambda);
    const auto num = oracle::numeric_gradient(p, x, y, lambda);
    auto rel = [](long double u, long double v) { return std::abs(u - v) / std::max({std::abs(u), std::abs(v), 1.0L}); };
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index j = 0; j < f; ++j) worst = std::max(worst, rel(a.weights(r, j), num.weights(r, j)));
      worst = std::max(worst, rel(a.intercepts(r), num.intercepts(r)));
    }
  }
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(10, 4, 0.3);
  const std::vector<int> labels{0, 1, 0, 0, 1, 0, 0, 1, 0, 0};
  MaxEntOptions opts;
  opts.gradient_tolerance = 1e-10;
  const auto model = train_maxent(same, labels, 2, opts);
  const Eigen::VectorXd prior = model.probabilities(Eigen::VectorXd::Constant(4, 0.3));
  const double prior_error = std::max(std::abs(prior(0) - 0.7), std::abs(prior(1) - 0.3));
  return {worst < 1e-6L && prior_error < 1e-6,
          "max gradient relative error " + sci(static_cast<double>(worst)) + ", prior error " + sci(prior_error)};
}

Outcome ascent_oracle() {
  Rng rng(5);
  int within = 0;
  bool monotone = true;
  double worst_gap = -1;
  for (int problem = 0; problem < 20; ++problem) {
    const auto d = oracle::random_2d_problem(rng, 40);
    const auto m = coordinate_ascent_train(d, CoordinateAscentOptions{}, fork_seed(5, std::to_string(problem)));
    RankingDataset normalized = d;
    for (auto& q : normalized.queries) q.features = m.normalization.apply(q.features);
    const double best = oracle::grid_search_2d(normalized, 3);
    worst_gap = std::max(worst_gap, best - m.metric_value);
    if (m.metric_value >= best - 0.01) ++within;
    for (std::size_t i = 1; i < m.accepted_trace.size(); ++i) monotone = monotone && m.accepted_trace[i] >= m.accepted_trace[i - 1];
  }
  return {within == 20 && monotone, std::to_string(within) + "/20 within 0.01 of the grid optimum (largest shortfall " +
                                        fmt(worst_gap) + "), traces " + (monotone ? "non-decreasing" : "DECREASING")};
}

struct Experiment {
  SimOutput sim;
  FeatureMatrix features;
  RankingDataset dataset;
};

Experiment prepare(const SimConfig& cfg) {
  Experiment e{generate_corpus(cfg), {}, {}};
  e.features = featurize(e.sim.corpus, FeatureSettings{}, fork_seed(cfg.seed, "featurize"));
  const TextIndex text(e.sim.corpus, TokenizerSettings{});
  const RankFeatureExtractor fx(e.sim.graph, text, default_metapaths());
  e.dataset = build_ranking_dataset(e.sim.corpus, fx);
  return e;
}

SimConfig study_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.readers = 60;
  cfg.communities = 3;
  cfg.alpha = 0.9;
  cfg.grade_noise = 0.2;
  cfg.seed = seed;
  return cfg;
}

Outcome cv_replication() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = prepare(study_config(seed));
    if (e.dataset.queries.size() < 400) return {false, "only " + std::to_string(e.dataset.queries.size()) + " judged queries"};
    const auto comm = two_step_communities(e.features, TwoStepOptions{}, fork_seed(seed, "cluster"));
    const auto r = cross_validate_ranking(e.dataset, comm.community, CrossValidationOptions{}, fork_seed(seed, "evaluate"));
    const double c = r.communitized.means[kNdcg3Index];
    const double b = r.baseline.means[kNdcg3Index];
    const bool ok = c - b >= 0.03 && r.ndcg3_sign_test.p_value < 0.05;
    wins += ok;
    detail += " seed " + std::to_string(seed) + ": " + fmt(c, 3) + " vs " + fmt(b, 3) + " p=" + sci(r.ndcg3_sign_test.p_value) + (ok ? "" : " (miss)") + ";";
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds;" + detail};
}

Outcome simulation_replication() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = prepare(study_config(seed));
    SimulationOptions opts;
    opts.fraction = 0.25;
    opts.folds = 4;
    const auto r = simulate_missing_rpf(e.features, e.dataset, opts, fork_seed(seed, "evaluate"));
    const double acc = r.prediction->accuracy;
    const double c = r.communitized.means[kNdcg3Index];
    const double b = r.baseline.means[kNdcg3Index];
    const bool ok = acc >= 0.8 && c > b;
    wins += ok;
    detail += " seed " + std::to_string(seed) + ": accuracy " + fmt(acc, 3) + ", " + fmt(c, 3) + " vs " + fmt(b, 3) +
              (ok ? "" : " (miss)") + ";";
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds;" + detail};
}

double cluster_f1(const FeatureMatrix& fm, const Corpus& corpus, const std::vector<GroupWeight>& groups,
                  std::uint64_t seed) {
  const auto model = cluster_readers(combine_groups(fm, groups), 3, seed);
  return pairwise_cluster_eval(model.assignment, reply_pairs(corpus)).f1;
}

Outcome collaboration_replication() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = prepare(study_config(seed));
    const double rpf = cluster_f1(e.features, e.sim.corpus, default_rpf_groups(), fork_seed(seed, "cluster"));
    const double rbf = cluster_f1(e.features, e.sim.corpus, default_rbf_groups(), fork_seed(seed, "cluster"));
    wins += rpf > rbf;
    detail += " seed " + std::to_string(seed) + ": RPF " + fmt(rpf, 3) + " vs RBF " + fmt(rbf, 3) + ";";
  }
  int perfect = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = study_config(seed);
    cfg.alpha = 1.0;
    cfg.grade_noise = 0.0;
    const auto e = prepare(cfg);
    perfect += cluster_f1(e.features, e.sim.corpus, default_rpf_groups(), fork_seed(seed, "cluster")) == 1.0;
  }
  return {wins >= 4 && perfect == 5,
          std::to_string(wins) + "/5 seeds RPF > RBF;" + detail + " alpha=1 RPF F1 = 1 in " + std::to_string(perfect) + "/5"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome pipeline_determinism() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("commrec-acceptance-" + std::to_string(rd()));
  std::string reports[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = root / ("run" + std::to_string(run));
    std::ostringstream log, err;
    const int code = cli::run({"pipeline", "--seed", "2024", "--out", out.string()}, log, err);
    if (code != 0) {
      fs::remove_all(root);
      return {false, "pipeline exited " + std::to_string(code) + ": " + err.str()};
    }
    reports[run] = slurp(out / "report.json");
  }
  fs::remove_all(root);
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, std::to_string(reports[0].size()) + " byte report.json, runs " + (same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  criterion(1, "metric oracles", 5, metrics_oracle);
  criterion(2, "meta-path walk oracle", 10, walk_oracle);
  criterion(3, "k-medoids exhaustive optimum", 5, kmedoids_oracle);
  criterion(4, "MaxEnt gradient and priors", 0, maxent_checks);
  criterion(5, "coordinate ascent vs grid search", 0, ascent_oracle);
  criterion(6, "communitized beats global in cross-validation", 120, cv_replication);
  criterion(7, "two-step prediction with missing profiles", 0, simulation_replication);
  criterion(8, "profile clusters beat behavior clusters on replies", 0, collaboration_replication);
  criterion(9, "pipeline determinism", 0, pipeline_determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
