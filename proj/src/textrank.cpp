#include "commrec/textrank.hpp"

#include <cmath>
#include <set>

#include "commrec/error.hpp"

namespace commrec {

DocumentTerms DocumentTerms::from_tokens(std::span<const std::string> tokens) {
  DocumentTerms doc;
  for (const auto& t : tokens) ++doc.tf[t];
  doc.length = tokens.size();
  return doc;
}

CollectionStats CollectionStats::from_documents(std::span<const DocumentTerms> docs) {
  CollectionStats stats;
  for (const auto& doc : docs) {
    for (const auto& [term, count] : doc.tf) {
      stats.collection_frequency[term] += count;
      ++stats.document_frequency[term];
    }
    stats.total_terms += doc.length;
  }
  stats.documents = docs.size();
  stats.average_length =
      docs.empty() ? 0.0 : static_cast<double>(stats.total_terms) / static_cast<double>(docs.size());
  return stats;
}

double CollectionStats::probability(const std::string& term) const {
  auto it = collection_frequency.find(term);
  if (it == collection_frequency.end() || total_terms == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_terms);
}

std::size_t CollectionStats::df(const std::string& term) const {
  auto it = document_frequency.find(term);
  return it == document_frequency.end() ? 0 : it->second;
}

LmScore lm_score(std::span<const std::string> query, const DocumentTerms& doc, double mu,
                 const CollectionStats& stats) {
  if (mu < 0.0) throw InvalidArgument("Dirichlet mu must be nonnegative");
  LmScore score;
  const double denominator = static_cast<double>(doc.length) + mu;
  for (const auto& term : query) {
    const double p = stats.probability(term);
    if (p == 0.0) {
      ++score.skipped_terms;
      continue;
    }
    const double numerator = static_cast<double>(doc.count(term)) + mu * p;
    if (numerator == 0.0 || denominator == 0.0) {
      score.value = -std::numeric_limits<double>::infinity();
      score.degenerate = true;
      return score;
    }
    score.value += std::log(numerator / denominator);
  }
  return score;
}

double bm25_score(std::span<const std::string> query, const DocumentTerms& doc, double k1, double b,
                  const CollectionStats& stats) {
  if (!(k1 > 0.0)) throw InvalidArgument("BM25 k1 must be positive");
  if (b < 0.0 || b > 1.0) throw InvalidArgument("BM25 b must lie in [0,1]");
  const double n = static_cast<double>(stats.documents);
  const double length_ratio =
      stats.average_length > 0.0 ? static_cast<double>(doc.length) / stats.average_length : 0.0;
  double score = 0.0;
  for (const auto& term : query) {
    const double tf = static_cast<double>(doc.count(term));
    if (tf == 0.0) continue;
    const double df = static_cast<double>(stats.df(term));
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * length_ratio));
  }
  return score;
}

TextIndex::TextIndex(const Corpus& corpus, TokenizerSettings tokenizer)
    : tokenizer_(std::move(tokenizer)) {
  std::vector<DocumentTerms> all;
  all.reserve(corpus.oers().size());
  for (const auto& oer : corpus.oers()) {
    const auto tokens = tokenize(oer.body, tokenizer_);
    auto doc = DocumentTerms::from_tokens(tokens);
    all.push_back(doc);
    docs_.emplace(oer.oer_id, std::move(doc));
  }
  stats_ = CollectionStats::from_documents(all);
}

const DocumentTerms* TextIndex::document(const std::string& oer_id) const {
  auto it = docs_.find(oer_id);
  return it == docs_.end() ? nullptr : &it->second;
}

}  // namespace commrec
