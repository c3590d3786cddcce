#ifndef COMMREC_SIMGEN_HPP
#define COMMREC_SIMGEN_HPP

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/hetgraph.hpp"

namespace commrec {

struct SimConfig {
  std::size_t readers = 60;
  std::size_t communities = 3;
  double alpha = 0.9;  // 1 = fully separated communities
  std::size_t papers = 6;
  std::size_t topics = 18;
  std::size_t oers_per_type = 30;
  double events_per_reader = 20.0;  // Poisson mean, plus one
  /// Preferred OER type of community c is preferred_types[c % size].
  std::vector<OerType> preferred_types{OerType::Video, OerType::Code, OerType::Slides, OerType::Wiki};
  /// How strongly reading behavior (topics, positions, comment words)
  /// follows the community, scaled by alpha.
  double behavior_signal = 0.4;
  double grade_noise = 0.2;
  std::size_t vocabulary = 400;
  std::size_t queries_per_reader = 7;
  std::size_t candidates_per_query = 5;
  double reply_base_rate = 0.3;
  double not_sure_rate = 0.05;
  double rating_rate = 0.3;  // chance a judgment is also logged as a rating event
  std::size_t courses = 9;
  std::size_t skills = 6;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument on a count or probability out of range.
void validate(const SimConfig& config);

nlohmann::json sim_config_to_json(const SimConfig& config);
/// Missing keys keep their defaults.
SimConfig sim_config_from_json(const nlohmann::json& doc, SimConfig base = {});

struct SimOutput {
  Corpus corpus;
  std::map<std::string, int> latent;  // reader -> planted community
  HetGraph graph;
};

/// Seeded synthetic corpus with planted communities.
///
/// Draw order, all from one generator seeded with `config.seed`:
/// community permutation of readers; topic and body of each OER (by type,
/// then index); per reader in id order its profile, then its events; reply
/// pairs in (i, j) order; per reader the judged queries with their
/// candidates, grades and rating events.
SimOutput generate_corpus(const SimConfig& config);

/// latent.tsv: reader<TAB>community, sorted by reader.
void write_latent(std::ostream& out, const std::map<std::string, int>& latent);

}  // namespace commrec

#endif  // COMMREC_SIMGEN_HPP
