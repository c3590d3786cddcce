#include "commrec/kmedoids.hpp"

#include <algorithm>
#include <limits>

#include "commrec/error.hpp"
#include "commrec/rng.hpp"

namespace commrec {
namespace {

struct NearestCache {
  std::vector<std::size_t> nearest;  // slot
  std::vector<double> d1;
  std::vector<double> d2;
};

NearestCache nearest_two(const Eigen::MatrixXd& dist, const std::vector<std::size_t>& medoids) {
  const auto n = static_cast<std::size_t>(dist.rows());
  NearestCache cache{std::vector<std::size_t>(n, 0),
                     std::vector<double>(n, std::numeric_limits<double>::infinity()),
                     std::vector<double>(n, std::numeric_limits<double>::infinity())};
  for (std::size_t o = 0; o < n; ++o) {
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      const double d = dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(medoids[slot]));
      if (d < cache.d1[o]) {
        cache.d2[o] = cache.d1[o];
        cache.d1[o] = d;
        cache.nearest[o] = slot;
      } else if (d < cache.d2[o]) {
        cache.d2[o] = d;
      }
    }
  }
  return cache;
}

double weight_of(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

KMedoidsResult run_pam(const Eigen::MatrixXd& dist, std::vector<std::size_t> medoids,
                       std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(dist.rows());
  KMedoidsResult result;
  NearestCache cache = nearest_two(dist, medoids);
  double cost = 0.0;
  for (std::size_t o = 0; o < n; ++o) cost += weight_of(weights, o) * cache.d1[o];
  result.cost_trace.push_back(cost);

  std::vector<char> is_medoid(n, 0);
  for (auto m : medoids) is_medoid[m] = 1;

  while (true) {
    double best_delta = 0.0;
    std::size_t best_slot = 0;
    std::size_t best_candidate = n;
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        double delta = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
          const double dh = dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(h));
          const double replaced = cache.nearest[o] == slot ? std::min(cache.d2[o], dh)
                                                            : std::min(cache.d1[o], dh);
          delta += weight_of(weights, o) * (replaced - cache.d1[o]);
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_slot = slot;
          best_candidate = h;
        }
      }
    }
    const double threshold = -1e-12 * std::max(1.0, cost);
    if (best_candidate == n || best_delta >= threshold) break;

    is_medoid[medoids[best_slot]] = 0;
    is_medoid[best_candidate] = 1;
    medoids[best_slot] = best_candidate;
    cache = nearest_two(dist, medoids);
    cost = 0.0;
    for (std::size_t o = 0; o < n; ++o) cost += weight_of(weights, o) * cache.d1[o];
    result.cost_trace.push_back(cost);
    ++result.swaps;
  }

  std::sort(medoids.begin(), medoids.end());
  cache = nearest_two(dist, medoids);
  result.medoids = std::move(medoids);
  result.assignment = std::move(cache.nearest);
  result.cost = cost;
  return result;
}

}  // namespace

double medoid_cost(const Eigen::MatrixXd& distances, std::span<const std::size_t> medoids,
                   std::span<const double> weights) {
  double cost = 0.0;
  for (Eigen::Index o = 0; o < distances.rows(); ++o) {
    double best = std::numeric_limits<double>::infinity();
    for (auto m : medoids) best = std::min(best, distances(o, static_cast<Eigen::Index>(m)));
    cost += weight_of(weights, static_cast<std::size_t>(o)) * best;
  }
  return cost;
}

KMedoidsResult kmedoids(const Eigen::MatrixXd& distances, std::size_t k, std::uint64_t seed,
                        std::span<const double> weights, std::size_t restarts) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (distances.rows() != distances.cols()) throw InvalidArgument("distance matrix must be square");
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (k > n) {
    throw InvalidArgument("k = " + std::to_string(k) + " exceeds the number of points (" +
                          std::to_string(n) + ")");
  }
  if (!weights.empty() && weights.size() != n) throw InvalidArgument("weights length mismatch");
  if (restarts == 0) restarts = 1;

  KMedoidsResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(r == 0 ? seed : fork_seed(seed, "kmedoids-restart-" + std::to_string(r)));
    KMedoidsResult candidate = run_pam(distances, rng.sample_indices(n, k), weights);
    if (r == 0 || candidate.cost < best.cost) best = std::move(candidate);
  }
  return best;
}

}  // namespace commrec
