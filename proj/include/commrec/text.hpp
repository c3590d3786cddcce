#ifndef COMMREC_TEXT_HPP
#define COMMREC_TEXT_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace commrec {

struct TokenizerSettings {
  bool lowercase = true;
  std::size_t min_token_length = 2;
  std::vector<std::string> stopwords = default_stopwords();
  std::size_t min_document_frequency = 1;

  static std::vector<std::string> default_stopwords();
};

/// Splits on non-alphanumerics, lowercases, drops short tokens and stopwords.
std::vector<std::string> tokenize(std::string_view text, const TokenizerSettings& settings);

/// Dense term index built from a document collection. Terms are ordered
/// lexicographically so the index is independent of document order.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(const std::vector<std::vector<std::string>>& documents,
                          std::size_t min_document_frequency);

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t document_frequency(std::size_t index) const { return document_frequency_[index]; }
  std::optional<std::size_t> index_of(const std::string& term) const;

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> document_frequency_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

void to_json(nlohmann::json& j, const TokenizerSettings& s);
void from_json(const nlohmann::json& j, TokenizerSettings& s);

}  // namespace commrec

#endif  // COMMREC_TEXT_HPP
