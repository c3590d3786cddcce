#ifndef COMMREC_TESTS_FIXTURES_HPP
#define COMMREC_TESTS_FIXTURES_HPP

#include <string>

#include "commrec/corpus.hpp"

namespace fixture {

inline commrec::ReadingEvent event(const std::string& id, commrec::EventKind kind, const std::string& reader,
                                   const std::string& paper = "p1", std::int64_t page = 0,
                                   commrec::BBox box = {0.1, 0.1, 0.3, 0.2}) {
  commrec::ReadingEvent e;
  e.event_id = id;
  e.kind = kind;
  e.reader_id = reader;
  e.paper_id = paper;
  e.page = page;
  e.bbox = box;
  return e;
}

inline commrec::ReaderProfile reader(const std::string& id, std::set<std::string> courses = {},
                                     std::map<std::string, int> skills = {}) {
  commrec::ReaderProfile r;
  r.reader_id = id;
  r.courses = std::move(courses);
  r.skills = std::move(skills);
  r.has_rpf = !r.courses.empty() || !r.skills.empty();
  return r;
}

}  // namespace fixture

#endif  // COMMREC_TESTS_FIXTURES_HPP
