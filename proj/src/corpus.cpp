#include "commrec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "commrec/error.hpp"

namespace commrec {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Fn>
void for_each_line(const NamedStream& input, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(*input.stream, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    fn(line, number);
  }
}

json parse_json_line(const NamedStream& input, const std::string& line, std::size_t number) {
  try {
    json parsed = json::parse(line);
    if (!parsed.is_object()) throw ParseError(input.name, number, "record is not a JSON object");
    return parsed;
  } catch (const json::parse_error& e) {
    throw ParseError(input.name, number, std::string("invalid JSON: ") + e.what());
  }
}

class RecordReader {
 public:
  RecordReader(const NamedStream& input, std::size_t line, const json& record,
               std::vector<std::string>& warnings)
      : input_(input), line_(line), record_(record), warnings_(warnings) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(input_.name, line_, what); }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = record_.find(key);
    if (it == record_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string required_string(const char* key) {
    const json* v = get(key);
    if (v == nullptr || !v->is_string()) fail(std::string("field '") + key + "' must be a string");
    return v->get<std::string>();
  }

  std::string optional_string(const char* key) {
    const json* v = get(key);
    if (v == nullptr) return {};
    if (!v->is_string()) fail(std::string("field '") + key + "' must be a string");
    return v->get<std::string>();
  }

  std::optional<std::string> nullable_string(const char* key) {
    const json* v = get(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) fail(std::string("field '") + key + "' must be a string or null");
    return v->get<std::string>();
  }

  std::int64_t required_integer(const char* key) {
    const json* v = get(key);
    if (v == nullptr || !v->is_number_integer()) {
      fail(std::string("field '") + key + "' must be an integer");
    }
    return v->get<std::int64_t>();
  }

  void warn_unknown() {
    for (const auto& [key, value] : record_.items()) {
      if (!seen_.contains(key)) {
        warnings_.push_back(input_.name + ":" + std::to_string(line_) + ": unknown field '" + key +
                            "' ignored");
      }
    }
  }

 private:
  const NamedStream& input_;
  std::size_t line_;
  const json& record_;
  std::vector<std::string>& warnings_;
  std::set<std::string> seen_;
};

ReaderProfile parse_reader(RecordReader& rec) {
  ReaderProfile reader;
  reader.reader_id = rec.required_string("reader");
  if (const json* courses = rec.get("courses")) {
    if (!courses->is_array()) rec.fail("field 'courses' must be an array");
    for (const auto& c : *courses) {
      if (!c.is_string()) rec.fail("course identifiers must be strings");
      reader.courses.insert(c.get<std::string>());
    }
  }
  if (const json* skills = rec.get("skills")) {
    if (!skills->is_object()) rec.fail("field 'skills' must be an object");
    for (const auto& [name, level] : skills->items()) {
      if (!level.is_number_integer()) rec.fail("skill '" + name + "' must be an integer");
      const int value = level.get<int>();
      if (value < 1 || value > 4) {
        rec.fail("skill '" + name + "' = " + std::to_string(value) + " outside 1..4");
      }
      reader.skills[name] = value;
    }
  }
  reader.has_rpf = !reader.courses.empty() || !reader.skills.empty();
  rec.warn_unknown();
  return reader;
}

ReadingEvent parse_event(RecordReader& rec) {
  ReadingEvent event;
  event.event_id = rec.required_string("event");
  const std::string kind_text = rec.required_string("kind");
  auto kind = parse_event_kind(kind_text);
  if (!kind) rec.fail("unknown event kind '" + kind_text + "'");
  event.kind = *kind;
  event.reader_id = rec.required_string("reader");
  event.paper_id = rec.required_string("paper");
  event.page = rec.required_integer("page");
  if (event.page < 0) rec.fail("page must be nonnegative");

  const json* bbox = rec.get("bbox");
  if (bbox == nullptr || !bbox->is_array() || bbox->size() != 4) {
    rec.fail("field 'bbox' must be an array of four numbers");
  }
  std::array<double, 4> coords{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(*bbox)[i].is_number()) rec.fail("bbox entries must be numbers");
    coords[i] = (*bbox)[i].get<double>();
  }
  event.bbox = BBox{coords[0], coords[1], coords[2], coords[3]};
  if (auto violation = bbox_violation(event.bbox)) rec.fail("bbox invariant violated: " + *violation);

  event.quote_text = rec.optional_string("quote_text");
  event.content_text = rec.optional_string("content_text");
  event.target_event_id = rec.nullable_string("target");
  event.oer_id = rec.nullable_string("oer");
  if (auto grade_text = rec.nullable_string("grade")) {
    auto grade = parse_grade(*grade_text);
    if (!grade) rec.fail("unknown grade '" + *grade_text + "'");
    event.grade = grade;
  }
  event.timestamp = rec.required_integer("ts");

  const bool is_reply = event.kind == EventKind::Reply;
  const bool is_rating = event.kind == EventKind::Rating;
  if (is_reply != event.target_event_id.has_value()) {
    rec.fail("field 'target' must be present iff kind is reply");
  }
  if (is_rating != event.oer_id.has_value() || is_rating != event.grade.has_value()) {
    rec.fail("fields 'oer' and 'grade' must be present iff kind is rating");
  }
  rec.warn_unknown();
  return event;
}

OerItem parse_oer(RecordReader& rec) {
  OerItem item;
  item.oer_id = rec.required_string("oer");
  const std::string type_text = rec.required_string("type");
  auto type = parse_oer_type(type_text);
  if (!type) rec.fail("unknown OER type '" + type_text + "'");
  item.type = *type;
  item.title = rec.optional_string("title");
  item.body = rec.optional_string("body");
  rec.warn_unknown();
  return item;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::vector<JudgedQuery> parse_judgments(const NamedStream& input) {
  std::vector<JudgedQuery> queries;
  std::map<std::string, std::size_t> index;
  for_each_line(input, [&](const std::string& line, std::size_t number) {
    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      throw ParseError(input.name, number,
                       "expected 6 tab-separated fields, found " + std::to_string(fields.size()));
    }
    const std::string query_id = unescape_tsv(fields[0]);
    const std::string reader_id = unescape_tsv(fields[1]);
    const std::string paper_id = unescape_tsv(fields[2]);
    const std::string quote = unescape_tsv(fields[3]);
    const std::string oer_id = unescape_tsv(fields[4]);
    auto grade = parse_grade(fields[5]);
    if (query_id.empty() || reader_id.empty() || oer_id.empty()) {
      throw ParseError(input.name, number, "query, reader and oer ids must be non-empty");
    }
    if (!grade) throw ParseError(input.name, number, "unknown grade '" + std::string(fields[5]) + "'");

    auto [it, inserted] = index.emplace(query_id, queries.size());
    if (inserted) {
      queries.push_back(JudgedQuery{query_id, reader_id, paper_id, quote, {}});
    }
    JudgedQuery& query = queries[it->second];
    if (query.reader_id != reader_id || query.paper_id != paper_id || query.quote_text != quote) {
      throw ParseError(input.name, number,
                       "query '" + query_id + "' repeats with a different reader, paper or quote");
    }
    const bool already = std::any_of(query.judgments.begin(), query.judgments.end(),
                                     [&](const Judgment& j) { return j.oer_id == oer_id; });
    if (already) {
      throw ParseError(input.name, number,
                       "oer '" + oer_id + "' judged twice in query '" + query_id + "'");
    }
    query.judgments.push_back(Judgment{oer_id, *grade});
  });
  return queries;
}

template <typename T, typename IdFn>
std::map<std::string, std::size_t, std::less<>> build_index(const std::vector<T>& items, IdFn id) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!index.emplace(id(items[i]), i).second) throw DuplicateId(id(items[i]));
  }
  return index;
}

template <typename Map>
const auto* lookup(const Map& index, const std::string& id, const auto& items) {
  auto it = index.find(id);
  return it == index.end() ? nullptr : &items[it->second];
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Quote: return "quote";
    case EventKind::Question: return "question";
    case EventKind::Comment: return "comment";
    case EventKind::Reply: return "reply";
    case EventKind::Rating: return "rating";
  }
  return "unknown";
}

std::string_view to_string(Grade grade) {
  switch (grade) {
    case Grade::Good: return "good";
    case Grade::OK: return "ok";
    case Grade::Bad: return "bad";
    case Grade::NotSure: return "notsure";
  }
  return "unknown";
}

std::string_view to_string(OerType type) {
  switch (type) {
    case OerType::Video: return "video";
    case OerType::Slides: return "slides";
    case OerType::Wiki: return "wiki";
    case OerType::Code: return "code";
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  const std::string key = lower(text);
  for (auto kind : kEventKinds) {
    if (to_string(kind) == key) return kind;
  }
  return std::nullopt;
}

std::optional<Grade> parse_grade(std::string_view text) {
  const std::string key = lower(text);
  if (key == "good") return Grade::Good;
  if (key == "ok") return Grade::OK;
  if (key == "bad") return Grade::Bad;
  if (key == "notsure" || key == "not_sure" || key == "not sure") return Grade::NotSure;
  return std::nullopt;
}

std::optional<OerType> parse_oer_type(std::string_view text) {
  const std::string key = lower(text);
  for (auto type : kOerTypes) {
    if (to_string(type) == key) return type;
  }
  return std::nullopt;
}

std::optional<std::string> bbox_violation(const BBox& box) {
  for (double v : {box.x0, box.y0, box.x1, box.y1}) {
    if (!(v >= 0.0 && v <= 1.0)) return "coordinates must lie in [0,1]";
  }
  if (box.x0 > box.x1) return "x0 > x1";
  if (box.y0 > box.y1) return "y0 > y1";
  return std::nullopt;
}

Corpus Corpus::assemble(std::vector<ReaderProfile> readers, std::vector<ReadingEvent> events,
                        std::vector<OerItem> oers, std::vector<JudgedQuery> queries,
                        std::vector<std::string> warnings) {
  Corpus corpus;
  corpus.reader_index_ = build_index(readers, [](const ReaderProfile& r) { return r.reader_id; });
  corpus.event_index_ = build_index(events, [](const ReadingEvent& e) { return e.event_id; });
  corpus.oer_index_ = build_index(oers, [](const OerItem& o) { return o.oer_id; });
  build_index(queries, [](const JudgedQuery& q) { return q.query_id; });
  corpus.readers_ = std::move(readers);
  corpus.events_ = std::move(events);
  corpus.oers_ = std::move(oers);
  corpus.queries_ = std::move(queries);
  corpus.warnings_ = std::move(warnings);
  return corpus;
}

const ReaderProfile* Corpus::find_reader(const std::string& id) const {
  return lookup(reader_index_, id, readers_);
}
const ReadingEvent* Corpus::find_event(const std::string& id) const {
  return lookup(event_index_, id, events_);
}
const OerItem* Corpus::find_oer(const std::string& id) const { return lookup(oer_index_, id, oers_); }

std::vector<std::string> Corpus::reader_ids() const {
  std::vector<std::string> ids;
  ids.reserve(reader_index_.size());
  for (const auto& [id, _] : reader_index_) ids.push_back(id);
  return ids;
}

Corpus parse_corpus(std::optional<NamedStream> events, std::optional<NamedStream> readers,
                    std::optional<NamedStream> oers, std::optional<NamedStream> judgments) {
  std::vector<std::string> warnings;
  std::vector<ReaderProfile> reader_list;
  std::vector<ReadingEvent> event_list;
  std::vector<OerItem> oer_list;
  std::vector<JudgedQuery> query_list;

  // Duplicates are reported with their line number while reading.
  auto check_unique = [](std::set<std::string>& seen, const std::string& id) {
    if (!seen.insert(id).second) throw DuplicateId(id);
  };

  if (events) {
    std::set<std::string> seen;
    for_each_line(*events, [&](const std::string& line, std::size_t number) {
      json record = parse_json_line(*events, line, number);
      RecordReader rec(*events, number, record, warnings);
      event_list.push_back(parse_event(rec));
      check_unique(seen, event_list.back().event_id);
    });
  }
  if (readers) {
    std::set<std::string> seen;
    for_each_line(*readers, [&](const std::string& line, std::size_t number) {
      json record = parse_json_line(*readers, line, number);
      RecordReader rec(*readers, number, record, warnings);
      reader_list.push_back(parse_reader(rec));
      check_unique(seen, reader_list.back().reader_id);
    });
  }
  if (oers) {
    std::set<std::string> seen;
    for_each_line(*oers, [&](const std::string& line, std::size_t number) {
      json record = parse_json_line(*oers, line, number);
      RecordReader rec(*oers, number, record, warnings);
      oer_list.push_back(parse_oer(rec));
      check_unique(seen, oer_list.back().oer_id);
    });
  }
  if (judgments) query_list = parse_judgments(*judgments);

  if (!readers) {
    std::set<std::string> ids;
    for (const auto& e : event_list) ids.insert(e.reader_id);
    for (const auto& q : query_list) ids.insert(q.reader_id);
    for (const auto& id : ids) reader_list.push_back(ReaderProfile{id, {}, {}, false});
    if (!ids.empty()) warnings.emplace_back("no reader profiles supplied: all readers are RBF-only");
  }
  return Corpus::assemble(std::move(reader_list), std::move(event_list), std::move(oer_list),
                          std::move(query_list), std::move(warnings));
}

void write_readers(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.readers()) {
    ordered_json record;
    record["reader"] = r.reader_id;
    record["courses"] = r.courses;
    ordered_json skills = ordered_json::object();
    for (const auto& [name, level] : r.skills) skills[name] = level;
    record["skills"] = skills;
    out << record.dump() << '\n';
  }
}

void write_events(std::ostream& out, const Corpus& corpus) {
  auto nullable = [](const std::optional<std::string>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  for (const auto& e : corpus.events()) {
    ordered_json record;
    record["event"] = e.event_id;
    record["kind"] = to_string(e.kind);
    record["reader"] = e.reader_id;
    record["paper"] = e.paper_id;
    record["page"] = e.page;
    record["bbox"] = {e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1};
    record["quote_text"] = e.quote_text;
    record["content_text"] = e.content_text;
    record["target"] = nullable(e.target_event_id);
    record["oer"] = nullable(e.oer_id);
    record["grade"] = e.grade ? ordered_json(to_string(*e.grade)) : ordered_json(nullptr);
    record["ts"] = e.timestamp;
    out << record.dump() << '\n';
  }
}

void write_oers(std::ostream& out, const Corpus& corpus) {
  for (const auto& o : corpus.oers()) {
    ordered_json record;
    record["oer"] = o.oer_id;
    record["type"] = to_string(o.type);
    record["title"] = o.title;
    record["body"] = o.body;
    out << record.dump() << '\n';
  }
}

void write_judgments(std::ostream& out, const Corpus& corpus) {
  for (const auto& q : corpus.queries()) {
    for (const auto& j : q.judgments) {
      out << escape_tsv(q.query_id) << '\t' << escape_tsv(q.reader_id) << '\t'
          << escape_tsv(q.paper_id) << '\t' << escape_tsv(q.quote_text) << '\t'
          << escape_tsv(j.oer_id) << '\t' << to_string(j.grade) << '\n';
    }
  }
}

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport report;
  for (auto kind : kEventKinds) report.kind_counts[kind] = 0;
  for (const auto& e : corpus.events()) {
    ++report.kind_counts[e.kind];
    if (corpus.find_reader(e.reader_id) == nullptr) {
      report.issues.push_back({"dangling_reader", e.event_id, "unknown reader '" + e.reader_id + "'"});
    }
    if (e.target_event_id) {
      const ReadingEvent* target = corpus.find_event(*e.target_event_id);
      if (target == nullptr) {
        report.issues.push_back(
            {"dangling_event", e.event_id, "reply target '" + *e.target_event_id + "' not found"});
      } else if (target->reader_id == e.reader_id) {
        report.issues.push_back({"self_reply", e.event_id, "reply targets the reader's own event"});
      }
    }
    if (e.oer_id && corpus.find_oer(*e.oer_id) == nullptr) {
      report.issues.push_back({"dangling_oer", e.event_id, "unknown oer '" + *e.oer_id + "'"});
    }
  }
  for (const auto& q : corpus.queries()) {
    if (corpus.find_reader(q.reader_id) == nullptr) {
      report.issues.push_back({"dangling_reader", q.query_id, "unknown reader '" + q.reader_id + "'"});
    }
    for (const auto& j : q.judgments) {
      if (corpus.find_oer(j.oer_id) == nullptr) {
        report.issues.push_back({"dangling_oer", q.query_id, "unknown oer '" + j.oer_id + "'"});
      }
    }
  }
  return report;
}

std::string escape_tsv(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_tsv(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size()) {
      const char next = field[++i];
      switch (next) {
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        default: out.push_back(next);
      }
    } else {
      out.push_back(field[i]);
    }
  }
  return out;
}

}  // namespace commrec
