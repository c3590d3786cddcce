#ifndef COMMREC_KMEDOIDS_HPP
#define COMMREC_KMEDOIDS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace commrec {

struct KMedoidsResult {
  std::vector<std::size_t> medoids;     // point indices, ascending
  std::vector<std::size_t> assignment;  // point -> slot in `medoids`
  double cost = 0.0;
  std::size_t swaps = 0;
  /// Total cost after initialization and after each accepted swap.
  std::vector<double> cost_trace;
};

/// Seeded initializations tried unless the caller asks otherwise.
inline constexpr std::size_t kDefaultKMedoidsRestarts = 10;

/// PAM over a precomputed distance matrix.
///
/// Medoids are initialized by a seeded draw of `k` distinct indices, then
/// the single best cost-reducing (medoid, non-medoid) swap is applied until
/// none improves. Points are assigned to their nearest medoid with ties going
/// to the lower slot; slots are ordered by medoid index.
///
/// `weights` (optional) gives per-point multiplicities. `restarts` repeats
/// the search from further seeded initializations and keeps the cheapest
/// result, earliest restart winning ties.
KMedoidsResult kmedoids(const Eigen::MatrixXd& distances, std::size_t k, std::uint64_t seed,
                        std::span<const double> weights = {},
                        std::size_t restarts = kDefaultKMedoidsRestarts);

/// Weighted sum of nearest-medoid distances.
double medoid_cost(const Eigen::MatrixXd& distances, std::span<const std::size_t> medoids,
                   std::span<const double> weights = {});

}  // namespace commrec

#endif  // COMMREC_KMEDOIDS_HPP
