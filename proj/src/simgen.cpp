#include "commrec/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "commrec/error.hpp"
#include "commrec/rng.hpp"

namespace commrec {

using nlohmann::json;

namespace {

constexpr std::size_t kTermsPerTopic = 3;
constexpr std::size_t kWordsPerCommunity = 20;
constexpr std::int64_t kPagesPerPaper = 12;

std::string padded(char prefix, std::size_t i, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count).size());
  std::string digits = std::to_string(i + 1);
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0,1]");
}

class Generator {
 public:
  explicit Generator(const SimConfig& c) : c_(c), rng_(c.seed) {}

  SimOutput run() {
    make_vocabulary();
    assign_communities();
    reader_events_.resize(c_.readers);
    make_papers_and_oers();
    make_community_traits();
    for (std::size_t r = 0; r < c_.readers; ++r) {
      make_profile(r);
      make_events(r);
    }
    make_replies();
    for (std::size_t r = 0; r < c_.readers; ++r) make_queries(r);

    SimOutput out;
    if (c_.readers > 0) {
      out.corpus = Corpus::assemble(std::move(profiles_), std::move(events_), oers_, std::move(queries_));
    }
    for (std::size_t r = 0; r < c_.readers; ++r) out.latent[reader_id(r)] = community_[r];
    out.graph = build_graph();
    return out;
  }

 private:
  struct Location {
    std::int64_t page = 0;
    BBox bbox;
  };

  std::string reader_id(std::size_t r) const { return padded('r', r, c_.readers); }
  std::string paper_id(std::size_t p) const { return padded('p', p, c_.papers); }
  std::string topic_id(std::size_t t) const { return padded('t', t, c_.topics); }

  void make_vocabulary() {
    for (std::size_t i = 0; i < c_.vocabulary; ++i) words_.push_back("v" + std::to_string(i));
  }

  void assign_communities() {
    community_.resize(c_.readers);
    for (std::size_t r = 0; r < c_.readers; ++r) community_[r] = static_cast<int>(r % c_.communities);
    rng_.shuffle(community_);
  }

  const std::string& topic_term(std::size_t t, std::size_t j) const { return words_[t * kTermsPerTopic + j]; }
  const std::string& community_word(std::size_t c, std::size_t j) const {
    return words_[c_.topics * kTermsPerTopic + c * kWordsPerCommunity + j];
  }
  const std::string& background_word() {
    const std::size_t first = c_.topics * kTermsPerTopic + c_.communities * kWordsPerCommunity;
    return words_[first + rng_.below(c_.vocabulary - first)];
  }

  void make_papers_and_oers() {
    // Topics are split into contiguous blocks, one block per paper.
    paper_topics_.resize(c_.papers);
    topic_paper_.resize(c_.topics);
    for (std::size_t t = 0; t < c_.topics; ++t) {
      const std::size_t p = t * c_.papers / c_.topics;
      paper_topics_[p].push_back(t);
      topic_paper_[t] = p;
    }
    topic_oers_.resize(c_.topics);
    const std::size_t per_type = c_.oers_per_type;
    for (std::size_t ti = 0; ti < kOerTypes.size(); ++ti) {
      for (std::size_t i = 0; i < per_type; ++i) {
        const std::size_t index = ti * per_type + i;
        const std::size_t topic = rng_.below(c_.topics);
        OerItem item;
        item.oer_id = padded('o', index, kOerTypes.size() * per_type);
        item.type = kOerTypes[ti];
        item.title = std::string(to_string(item.type)) + " on " + topic_term(topic, 0);
        std::string body;
        const std::size_t length = 12 + rng_.below(9);
        for (std::size_t w = 0; w < length; ++w) {
          if (!body.empty()) body += ' ';
          body += rng_.bernoulli(0.5) ? topic_term(topic, rng_.below(kTermsPerTopic)) : background_word();
        }
        item.body = std::move(body);
        oers_.push_back(item);
        oer_topic_.push_back(topic);
        topic_oers_[topic].push_back(index);
      }
    }
  }

  void make_community_traits() {
    for (std::size_t c = 0; c < c_.communities; ++c) {
      std::set<std::size_t> courses;
      const std::size_t signature = std::max<std::size_t>(1, c_.courses / c_.communities);
      for (std::size_t j = 0; j < signature; ++j) courses.insert((c * signature + j) % c_.courses);
      signature_courses_.push_back(std::move(courses));
      std::vector<int> skills;
      for (std::size_t s = 0; s < c_.skills; ++s) skills.push_back(s % c_.communities == c ? 4 : 1);
      skill_profile_.push_back(std::move(skills));
    }
  }

  void make_profile(std::size_t r) {
    const auto c = static_cast<std::size_t>(community_[r]);
    ReaderProfile profile;
    profile.reader_id = reader_id(r);
    profile.has_rpf = true;
    for (std::size_t j = 0; j < c_.courses; ++j) {
      const bool signature = signature_courses_[c].contains(j);
      const double p = signature ? 0.5 + 0.5 * c_.alpha : 0.5 * (1.0 - c_.alpha);
      if (rng_.bernoulli(p)) profile.courses.insert("c" + std::to_string(j + 1));
    }
    for (std::size_t s = 0; s < c_.skills; ++s) {
      int level = skill_profile_[c][s];
      if (rng_.bernoulli(1.0 - c_.alpha)) level = 1 + static_cast<int>(rng_.below(4));
      profile.skills["s" + std::to_string(s + 1)] = level;
    }
    profiles_.push_back(std::move(profile));
  }

  /// A topic of the paper, favoring those of the reader's community.
  std::size_t draw_topic(std::size_t paper, std::size_t c) {
    const auto& topics = paper_topics_[paper];
    std::vector<std::size_t> favored;
    for (auto t : topics) {
      if (t % c_.communities == c) favored.push_back(t);
    }
    if (!favored.empty() && rng_.bernoulli(c_.alpha * c_.behavior_signal)) return favored[rng_.below(favored.size())];
    return topics[rng_.below(topics.size())];
  }

  /// Page band of the topic within its paper, row band of the community.
  Location draw_location(std::size_t topic, std::size_t c) {
    const auto& topics = paper_topics_[topic_paper_[topic]];
    const auto slot = static_cast<std::int64_t>(std::find(topics.begin(), topics.end(), topic) - topics.begin());
    const auto span = std::max<std::int64_t>(1, kPagesPerPaper / static_cast<std::int64_t>(topics.size()));
    Location loc;
    loc.page = slot * span + static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(span)));
    double y = rng_.uniform(0.05, 0.95);
    if (rng_.bernoulli(c_.alpha * c_.behavior_signal)) {
      y = (static_cast<double>(c) + rng_.uniform(0.2, 0.8)) / static_cast<double>(c_.communities);
    }
    const double x0 = rng_.uniform(0.0, 0.5);
    loc.bbox = BBox{x0, std::max(0.0, y - 0.02), x0 + rng_.uniform(0.2, 0.5), std::min(1.0, y + 0.02)};
    return loc;
  }

  std::string quote_text(std::size_t topic) {
    std::string text;
    const std::size_t length = 4 + rng_.below(5);
    for (std::size_t w = 0; w < length; ++w) {
      if (!text.empty()) text += ' ';
      text += rng_.bernoulli(0.7) ? topic_term(topic, rng_.below(kTermsPerTopic)) : background_word();
    }
    return text;
  }

  std::string content_text(std::size_t topic, std::size_t c) {
    std::string text;
    const std::size_t length = 5 + rng_.below(6);
    for (std::size_t w = 0; w < length; ++w) {
      if (!text.empty()) text += ' ';
      const double u = rng_.uniform();
      if (u < 0.5) {
        const std::size_t owner =
            rng_.bernoulli(c_.alpha * c_.behavior_signal) ? c : rng_.below(c_.communities);
        text += community_word(owner, rng_.below(kWordsPerCommunity));
      } else if (u < 0.8) {
        text += topic_term(topic, rng_.below(kTermsPerTopic));
      } else {
        text += background_word();
      }
    }
    return text;
  }

  std::string next_event_id() const {
    const std::string digits = std::to_string(events_.size() + 1);
    return "e" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
  }

  void make_events(std::size_t r) {
    const auto c = static_cast<std::size_t>(community_[r]);
    const std::size_t count = rng_.poisson(c_.events_per_reader) + 1;
    static constexpr std::array<double, 3> kKindWeights{0.4, 0.3, 0.3};
    static constexpr std::array<EventKind, 3> kKinds{EventKind::Quote, EventKind::Question, EventKind::Comment};
    for (std::size_t i = 0; i < count; ++i) {
      ReadingEvent e;
      e.event_id = next_event_id();
      e.kind = kKinds[rng_.categorical(kKindWeights)];
      e.reader_id = reader_id(r);
      const std::size_t paper = rng_.below(c_.papers);
      const std::size_t topic = draw_topic(paper, c);
      e.paper_id = paper_id(paper);
      const Location loc = draw_location(topic, c);
      e.page = loc.page;
      e.bbox = loc.bbox;
      e.quote_text = quote_text(topic);
      if (e.kind != EventKind::Quote) e.content_text = content_text(topic, c);
      e.timestamp = clock_++;
      reader_events_[r].push_back(events_.size());
      events_.push_back(std::move(e));
    }
  }

  void make_replies() {
    for (std::size_t i = 0; i < c_.readers; ++i) {
      for (std::size_t j = i + 1; j < c_.readers; ++j) {
        const bool same = community_[i] == community_[j];
        const double p = same ? c_.alpha + (1.0 - c_.alpha) * c_.reply_base_rate
                              : (1.0 - c_.alpha) * c_.reply_base_rate;
        if (!rng_.bernoulli(p)) continue;
        const bool i_replies = rng_.bernoulli(0.5);
        const std::size_t author = i_replies ? i : j;
        const std::size_t other = i_replies ? j : i;
        const auto& targets = reader_events_[other];
        const ReadingEvent target = events_[targets[rng_.below(targets.size())]];
        ReadingEvent e;
        e.event_id = next_event_id();
        e.kind = EventKind::Reply;
        e.reader_id = reader_id(author);
        e.paper_id = target.paper_id;
        e.page = target.page;
        e.bbox = target.bbox;
        e.quote_text = target.quote_text;
        e.content_text = community_word(static_cast<std::size_t>(community_[author]), rng_.below(kWordsPerCommunity));
        e.target_event_id = target.event_id;
        e.timestamp = clock_++;
        events_.push_back(std::move(e));
      }
    }
  }

  std::vector<std::size_t> draw_candidates(std::size_t topic) {
    std::vector<OerType> types(kOerTypes.begin(), kOerTypes.end());
    rng_.shuffle(types);
    std::set<std::size_t> used;
    std::vector<std::size_t> picked;
    const std::size_t per_type = c_.oers_per_type;
    for (std::size_t s = 0; s < c_.candidates_per_query; ++s) {
      const OerType type = types[s % types.size()];
      std::vector<std::size_t> pool;
      if (rng_.bernoulli(0.5)) {
        for (auto o : topic_oers_[topic]) {
          if (oers_[o].type == type && !used.contains(o)) pool.push_back(o);
        }
      }
      if (pool.empty()) {
        const auto base = static_cast<std::size_t>(type) * per_type;
        for (std::size_t o = base; o < base + per_type; ++o) {
          if (!used.contains(o)) pool.push_back(o);
        }
      }
      if (pool.empty()) {
        for (std::size_t o = 0; o < oers_.size(); ++o) {
          if (!used.contains(o)) pool.push_back(o);
        }
      }
      const std::size_t o = pool[rng_.below(pool.size())];
      used.insert(o);
      picked.push_back(o);
    }
    return picked;
  }

  Grade draw_grade(std::size_t oer, std::size_t topic, std::size_t c) {
    Grade grade = Grade::Bad;
    if (rng_.bernoulli(c_.grade_noise)) {
      static constexpr std::array<Grade, 3> kGrades{Grade::Bad, Grade::OK, Grade::Good};
      grade = kGrades[rng_.below(kGrades.size())];
    } else if (oers_[oer].type == c_.preferred_types[c % c_.preferred_types.size()]) {
      grade = Grade::Good;
    } else if (oer_topic_[oer] == topic) {
      grade = Grade::OK;
    }
    if (rng_.bernoulli(c_.not_sure_rate)) grade = Grade::NotSure;
    return grade;
  }

  void make_queries(std::size_t r) {
    const auto c = static_cast<std::size_t>(community_[r]);
    for (std::size_t q = 0; q < c_.queries_per_reader; ++q) {
      const std::size_t paper = rng_.below(c_.papers);
      const std::size_t topic = draw_topic(paper, c);
      const Location loc = draw_location(topic, c);

      ReadingEvent quote;
      quote.event_id = next_event_id();
      quote.kind = EventKind::Quote;
      quote.reader_id = reader_id(r);
      quote.paper_id = paper_id(paper);
      quote.page = loc.page;
      quote.bbox = loc.bbox;
      quote.quote_text = quote_text(topic);
      quote.timestamp = clock_++;

      JudgedQuery query;
      query.query_id = padded('q', queries_.size(), c_.readers * c_.queries_per_reader);
      query.reader_id = quote.reader_id;
      query.paper_id = quote.paper_id;
      query.quote_text = quote.quote_text;
      events_.push_back(quote);

      for (auto o : draw_candidates(topic)) {
        const Grade grade = draw_grade(o, topic, c);
        query.judgments.push_back({oers_[o].oer_id, grade});
        if (grade == Grade::NotSure || !rng_.bernoulli(c_.rating_rate)) continue;
        ReadingEvent rating = quote;
        rating.event_id = next_event_id();
        rating.kind = EventKind::Rating;
        rating.oer_id = oers_[o].oer_id;
        rating.grade = grade;
        rating.timestamp = clock_++;
        events_.push_back(std::move(rating));
      }
      std::sort(query.judgments.begin(), query.judgments.end(),
                [](const Judgment& a, const Judgment& b) { return a.oer_id < b.oer_id; });
      queries_.push_back(std::move(query));
    }
  }

  HetGraph build_graph() const {
    HetGraph::Builder builder;
    for (std::size_t p = 0; p < c_.papers; ++p) {
      builder.add_vertex({paper_id(p), VertexKind::Paper, std::nullopt, "paper " + std::to_string(p + 1)});
    }
    for (std::size_t t = 0; t < c_.topics; ++t) {
      std::string label = topic_term(t, 0);
      for (std::size_t j = 1; j < kTermsPerTopic; ++j) label += " " + topic_term(t, j);
      builder.add_vertex({topic_id(t), VertexKind::Topic, std::nullopt, label});
    }
    for (const auto& o : oers_) {
      builder.add_vertex({o.oer_id, VertexKind::Oer, o.type, std::string(to_string(o.type))});
    }
    for (std::size_t p = 0; p < c_.papers; ++p) {
      for (auto t : paper_topics_[p]) {
        builder.add_edge(paper_id(p), "about", topic_id(t));
        builder.add_edge(topic_id(t), "covers", paper_id(p));
        for (auto o : topic_oers_[t]) {
          builder.add_edge(topic_id(t), "related", oers_[o].oer_id);
          builder.add_edge(paper_id(p), "resource", oers_[o].oer_id);
        }
      }
    }
    return std::move(builder).build();
  }

  const SimConfig& c_;
  Rng rng_;
  std::int64_t clock_ = 1;
  std::vector<std::string> words_;
  std::vector<int> community_;
  std::vector<std::vector<std::size_t>> paper_topics_;
  std::vector<std::size_t> topic_paper_;
  std::vector<std::vector<std::size_t>> topic_oers_;
  std::vector<std::size_t> oer_topic_;
  std::vector<OerItem> oers_;
  std::vector<std::set<std::size_t>> signature_courses_;
  std::vector<std::vector<int>> skill_profile_;
  std::vector<ReaderProfile> profiles_;
  std::vector<ReadingEvent> events_;
  std::vector<std::vector<std::size_t>> reader_events_;
  std::vector<JudgedQuery> queries_;
};

}  // namespace

void validate(const SimConfig& c) {
  if (c.communities == 0) throw InvalidArgument("community count must be positive");
  if (c.papers == 0 || c.topics < c.papers) throw InvalidArgument("need at least one topic per paper");
  if (c.oers_per_type == 0) throw InvalidArgument("OER count per type must be positive");
  if (c.candidates_per_query == 0 || c.candidates_per_query > c.oers_per_type * kOerTypes.size()) {
    throw InvalidArgument("candidates per query must be between 1 and the OER count");
  }
  if (c.preferred_types.empty()) throw InvalidArgument("at least one preferred OER type is required");
  if (c.courses == 0 || c.skills == 0) throw InvalidArgument("course and skill counts must be positive");
  if (c.vocabulary < c.topics * kTermsPerTopic + c.communities * kWordsPerCommunity + 1) {
    throw InvalidArgument("vocabulary too small for the topic and community word lists");
  }
  if (!(c.events_per_reader >= 0.0) || !std::isfinite(c.events_per_reader)) {
    throw InvalidArgument("events per reader must be a finite nonnegative mean");
  }
  check_probability(c.alpha, "alpha");
  check_probability(c.behavior_signal, "behavior signal");
  check_probability(c.grade_noise, "grade noise");
  check_probability(c.reply_base_rate, "reply base rate");
  check_probability(c.not_sure_rate, "not-sure rate");
  check_probability(c.rating_rate, "rating rate");
}

SimOutput generate_corpus(const SimConfig& config) {
  validate(config);
  return Generator(config).run();
}

json sim_config_to_json(const SimConfig& c) {
  std::vector<std::string> preferred;
  for (auto t : c.preferred_types) preferred.emplace_back(to_string(t));
  return json{{"readers", c.readers},
              {"communities", c.communities},
              {"alpha", c.alpha},
              {"papers", c.papers},
              {"topics", c.topics},
              {"oers_per_type", c.oers_per_type},
              {"events_per_reader", c.events_per_reader},
              {"preferred_types", preferred},
              {"behavior_signal", c.behavior_signal},
              {"grade_noise", c.grade_noise},
              {"vocabulary", c.vocabulary},
              {"queries_per_reader", c.queries_per_reader},
              {"candidates_per_query", c.candidates_per_query},
              {"reply_base_rate", c.reply_base_rate},
              {"not_sure_rate", c.not_sure_rate},
              {"rating_rate", c.rating_rate},
              {"courses", c.courses},
              {"skills", c.skills},
              {"seed", c.seed}};
}

SimConfig sim_config_from_json(const json& doc, SimConfig c) {
  if (!doc.is_object()) throw InvalidArgument("simulation settings must be a JSON object");
  auto read = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("readers", c.readers);
  read("communities", c.communities);
  read("alpha", c.alpha);
  read("papers", c.papers);
  read("topics", c.topics);
  read("oers_per_type", c.oers_per_type);
  read("events_per_reader", c.events_per_reader);
  read("behavior_signal", c.behavior_signal);
  read("grade_noise", c.grade_noise);
  read("vocabulary", c.vocabulary);
  read("queries_per_reader", c.queries_per_reader);
  read("candidates_per_query", c.candidates_per_query);
  read("reply_base_rate", c.reply_base_rate);
  read("not_sure_rate", c.not_sure_rate);
  read("rating_rate", c.rating_rate);
  read("courses", c.courses);
  read("skills", c.skills);
  read("seed", c.seed);
  if (doc.contains("preferred_types")) {
    c.preferred_types.clear();
    for (const auto& name : doc.at("preferred_types")) {
      auto t = parse_oer_type(name.get<std::string>());
      if (!t) throw InvalidArgument("unknown OER type '" + name.get<std::string>() + "'");
      c.preferred_types.push_back(*t);
    }
  }
  return c;
}

void write_latent(std::ostream& out, const std::map<std::string, int>& latent) {
  for (const auto& [reader, c] : latent) out << escape_tsv(reader) << '\t' << c << '\n';
}

}  // namespace commrec
