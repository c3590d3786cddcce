#ifndef COMMREC_TEXTRANK_HPP
#define COMMREC_TEXTRANK_HPP

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "commrec/corpus.hpp"
#include "commrec/text.hpp"

namespace commrec {

struct DocumentTerms {
  std::unordered_map<std::string, std::size_t> tf;
  std::size_t length = 0;

  static DocumentTerms from_tokens(std::span<const std::string> tokens);
  std::size_t count(const std::string& term) const {
    auto it = tf.find(term);
    return it == tf.end() ? 0 : it->second;
  }
};

/// Term statistics over a document collection.
struct CollectionStats {
  std::unordered_map<std::string, std::size_t> collection_frequency;
  std::unordered_map<std::string, std::size_t> document_frequency;
  std::size_t total_terms = 0;
  std::size_t documents = 0;
  double average_length = 0.0;

  static CollectionStats from_documents(std::span<const DocumentTerms> docs);
  double probability(const std::string& term) const;
  std::size_t df(const std::string& term) const;
};

struct LmScore {
  double value = 0.0;
  std::size_t skipped_terms = 0;  // query terms absent from the collection
  bool degenerate = false;        // value is -infinity
};

/// Dirichlet-smoothed query log-likelihood:
/// sum_q log((tf(q,d) + mu p(q|C)) / (|d| + mu)).
LmScore lm_score(std::span<const std::string> query, const DocumentTerms& doc, double mu,
                 const CollectionStats& stats);

/// Okapi BM25 with idf = log((N - df + 0.5) / (df + 0.5) + 1).
double bm25_score(std::span<const std::string> query, const DocumentTerms& doc, double k1, double b,
                  const CollectionStats& stats);

/// Tokenized OER bodies with their collection statistics.
class TextIndex {
 public:
  TextIndex(const Corpus& corpus, TokenizerSettings tokenizer);

  const CollectionStats& stats() const { return stats_; }
  const TokenizerSettings& tokenizer() const { return tokenizer_; }
  /// nullptr for an unknown OER.
  const DocumentTerms* document(const std::string& oer_id) const;

 private:
  TokenizerSettings tokenizer_;
  std::map<std::string, DocumentTerms> docs_;
  CollectionStats stats_;
};

}  // namespace commrec

#endif  // COMMREC_TEXTRANK_HPP
