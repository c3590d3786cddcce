#ifndef COMMREC_CORPUS_HPP
#define COMMREC_CORPUS_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace commrec {

enum class EventKind { Quote, Question, Comment, Reply, Rating };
enum class Grade { Bad, OK, Good, NotSure };
enum class OerType { Video, Slides, Wiki, Code };

inline constexpr std::array<EventKind, 5> kEventKinds{EventKind::Quote, EventKind::Question,
                                                      EventKind::Comment, EventKind::Reply,
                                                      EventKind::Rating};
inline constexpr std::array<OerType, 4> kOerTypes{OerType::Video, OerType::Slides, OerType::Wiki,
                                                  OerType::Code};

std::string_view to_string(EventKind kind);
std::string_view to_string(Grade grade);
std::string_view to_string(OerType type);
std::optional<EventKind> parse_event_kind(std::string_view text);
/// Case-insensitive; accepts "notsure", "not_sure" and "not sure".
std::optional<Grade> parse_grade(std::string_view text);
std::optional<OerType> parse_oer_type(std::string_view text);

/// Linear gain of a graded judgment: Good=2, OK=1, Bad=0; NotSure has none.
constexpr std::optional<int> gain(Grade grade) {
  switch (grade) {
    case Grade::Good: return 2;
    case Grade::OK: return 1;
    case Grade::Bad: return 0;
    case Grade::NotSure: return std::nullopt;
  }
  return std::nullopt;
}

/// Normalized page coordinates, each in [0,1].
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double x_center() const { return 0.5 * (x0 + x1); }
  double y_center() const { return 0.5 * (y0 + y1); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Non-empty when the box violates an invariant.
std::optional<std::string> bbox_violation(const BBox& box);

struct ReaderProfile {
  std::string reader_id;
  std::set<std::string> courses;
  std::map<std::string, int> skills;  // ordinal 1..4
  bool has_rpf = false;
  friend bool operator==(const ReaderProfile&, const ReaderProfile&) = default;
};

struct ReadingEvent {
  std::string event_id;
  EventKind kind = EventKind::Quote;
  std::string reader_id;
  std::string paper_id;
  std::int64_t page = 0;
  BBox bbox;
  std::string quote_text;
  std::string content_text;
  std::optional<std::string> target_event_id;  // Reply only
  std::optional<std::string> oer_id;           // Rating only
  std::optional<Grade> grade;                  // Rating only
  std::int64_t timestamp = 0;
  friend bool operator==(const ReadingEvent&, const ReadingEvent&) = default;
};

struct OerItem {
  std::string oer_id;
  OerType type = OerType::Video;
  std::string title;
  std::string body;
  friend bool operator==(const OerItem&, const OerItem&) = default;
};

struct Judgment {
  std::string oer_id;
  Grade grade = Grade::Bad;
  friend bool operator==(const Judgment&, const Judgment&) = default;
};

struct JudgedQuery {
  std::string query_id;
  std::string reader_id;
  std::string paper_id;
  std::string quote_text;
  std::vector<Judgment> judgments;
  friend bool operator==(const JudgedQuery&, const JudgedQuery&) = default;
};

/// Immutable collection of the four record streams with id indexes.
class Corpus {
 public:
  Corpus() = default;

  /// Throws DuplicateId if any id repeats within its collection.
  static Corpus assemble(std::vector<ReaderProfile> readers, std::vector<ReadingEvent> events,
                         std::vector<OerItem> oers, std::vector<JudgedQuery> queries,
                         std::vector<std::string> warnings = {});

  const std::vector<ReaderProfile>& readers() const { return readers_; }
  const std::vector<ReadingEvent>& events() const { return events_; }
  const std::vector<OerItem>& oers() const { return oers_; }
  const std::vector<JudgedQuery>& queries() const { return queries_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const ReaderProfile* find_reader(const std::string& id) const;
  const ReadingEvent* find_event(const std::string& id) const;
  const OerItem* find_oer(const std::string& id) const;

  /// Sorted reader ids.
  std::vector<std::string> reader_ids() const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.readers_ == b.readers_ && a.events_ == b.events_ && a.oers_ == b.oers_ &&
           a.queries_ == b.queries_;
  }

 private:
  std::vector<ReaderProfile> readers_;
  std::vector<ReadingEvent> events_;
  std::vector<OerItem> oers_;
  std::vector<JudgedQuery> queries_;
  std::vector<std::string> warnings_;
  std::map<std::string, std::size_t, std::less<>> reader_index_;
  std::map<std::string, std::size_t, std::less<>> event_index_;
  std::map<std::string, std::size_t, std::less<>> oer_index_;
};

/// An input stream with the name reported in parse errors.
struct NamedStream {
  std::string name;
  std::istream* stream = nullptr;
};

/// Parses the line-delimited corpus formats. A missing reader stream means
/// every reader seen in events or judgments is RBF-only. Blank lines are
/// skipped; any other malformed line raises ParseError.
Corpus parse_corpus(std::optional<NamedStream> events, std::optional<NamedStream> readers,
                    std::optional<NamedStream> oers, std::optional<NamedStream> judgments);

void write_readers(std::ostream& out, const Corpus& corpus);
void write_events(std::ostream& out, const Corpus& corpus);
void write_oers(std::ostream& out, const Corpus& corpus);
void write_judgments(std::ostream& out, const Corpus& corpus);

struct ValidationIssue {
  std::string kind;  // dangling_reader, dangling_event, dangling_oer, self_reply
  std::string subject;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::map<EventKind, std::size_t> kind_counts;
  bool consistent() const { return issues.empty(); }
};

ValidationReport validate_corpus(const Corpus& corpus);

/// Escapes backslash, tab, CR and newline for a TSV field.
std::string escape_tsv(std::string_view field);
std::string unescape_tsv(std::string_view field);

}  // namespace commrec

#endif  // COMMREC_CORPUS_HPP
