#include "commrec/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace commrec {

std::vector<std::string> TokenizerSettings::default_stopwords() {
  return {"an",   "and",  "are",  "as",   "at",   "be",   "by",   "for",  "from",
          "has",  "in",   "is",   "it",   "its",  "of",   "on",   "or",   "that",
          "the",  "this", "to",   "was",  "we",   "were", "which", "with", "can",
          "not",  "but",  "if",   "into", "our",  "these", "those", "their", "they"};
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerSettings& settings) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= settings.min_token_length &&
        std::find(settings.stopwords.begin(), settings.stopwords.end(), current) ==
            settings.stopwords.end()) {
      tokens.push_back(current);
    }
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(settings.lowercase ? static_cast<char>(std::tolower(c)) : raw);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents,
                             std::size_t min_document_frequency) {
  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& doc : documents) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto term : seen) ++df[std::string(term)];
  }
  Vocabulary vocab;
  for (const auto& [term, count] : df) {
    if (count < min_document_frequency) continue;
    vocab.index_.emplace(term, vocab.terms_.size());
    vocab.terms_.push_back(term);
    vocab.document_frequency_.push_back(count);
  }
  return vocab;
}

std::optional<std::size_t> Vocabulary::index_of(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void to_json(nlohmann::json& j, const TokenizerSettings& s) {
  j = nlohmann::json{{"lowercase", s.lowercase},
                     {"min_token_length", s.min_token_length},
                     {"stopwords", s.stopwords},
                     {"min_document_frequency", s.min_document_frequency}};
}

void from_json(const nlohmann::json& j, TokenizerSettings& s) {
  s.lowercase = j.value("lowercase", s.lowercase);
  s.min_token_length = j.value("min_token_length", s.min_token_length);
  s.stopwords = j.value("stopwords", s.stopwords);
  s.min_document_frequency = j.value("min_document_frequency", s.min_document_frequency);
}

}  // namespace commrec
