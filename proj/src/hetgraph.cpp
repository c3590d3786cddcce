#include "commrec/hetgraph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "commrec/error.hpp"

namespace commrec {

using nlohmann::json;

namespace {

bool passes(const Vertex& v, const MetaPathStep& step) {
  if (v.kind != step.to) return false;
  return !step.oer_type || v.oer_type == step.oer_type;
}

std::vector<std::string> split3(const std::string& line, const std::string& stream, std::size_t number) {
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
  if (t2 == std::string::npos) throw ParseError(stream, number, "expected three tab-separated fields");
  std::string third = line.substr(t2 + 1);
  if (third.find('\t') != std::string::npos) {
    throw ParseError(stream, number, "expected three tab-separated fields");
  }
  return {unescape_tsv(line.substr(0, t1)), unescape_tsv(line.substr(t1 + 1, t2 - t1 - 1)),
          unescape_tsv(third)};
}

template <typename Fn>
void read_lines(std::istream& in, const std::string& stream, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split3(line, stream, number), number);
  }
}

}  // namespace

std::string_view to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::Paper: return "paper";
    case VertexKind::Topic: return "topic";
    case VertexKind::Oer: return "oer";
  }
  return "unknown";
}

std::optional<VertexKind> parse_vertex_kind(std::string_view text) {
  for (auto k : {VertexKind::Paper, VertexKind::Topic, VertexKind::Oer}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::vector<EdgeTypeDecl> default_edge_types() {
  return {{"about", VertexKind::Paper, VertexKind::Topic},
          {"covers", VertexKind::Topic, VertexKind::Paper},
          {"resource", VertexKind::Paper, VertexKind::Oer},
          {"related", VertexKind::Topic, VertexKind::Oer}};
}

std::optional<std::size_t> HetGraph::find(const std::string& id) const {
  auto it = vertex_index_.find(id);
  if (it == vertex_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> HetGraph::edge_type(const std::string& name) const {
  for (std::size_t t = 0; t < edge_types_.size(); ++t) {
    if (edge_types_[t].name == name) return t;
  }
  return std::nullopt;
}

std::span<const std::size_t> HetGraph::out(std::size_t v, std::size_t edge_type) const {
  const auto& lists = adjacency_[v];
  if (edge_type >= lists.size()) return {};
  return lists[edge_type];
}

HetGraph::Builder::Builder(std::vector<EdgeTypeDecl> edge_types) : edge_types_(std::move(edge_types)) {}

HetGraph::Builder& HetGraph::Builder::add_vertex(Vertex vertex) {
  if (vertex.kind == VertexKind::Oer && !vertex.oer_type) {
    throw InvalidArgument("OER vertex '" + vertex.id + "' needs an OER type");
  }
  if (vertex.kind != VertexKind::Oer) vertex.oer_type.reset();
  if (!index_.emplace(vertex.id, vertices_.size()).second) throw DuplicateId(vertex.id);
  vertices_.push_back(std::move(vertex));
  return *this;
}

HetGraph::Builder& HetGraph::Builder::add_edge(const std::string& src, const std::string& edge_type,
                                               const std::string& dst) {
  auto s = index_.find(src);
  auto d = index_.find(dst);
  if (s == index_.end()) throw InvalidArgument("edge source '" + src + "' is not a vertex");
  if (d == index_.end()) throw InvalidArgument("edge target '" + dst + "' is not a vertex");
  const VertexKind from = vertices_[s->second].kind;
  const VertexKind to = vertices_[d->second].kind;
  auto decl = std::find_if(edge_types_.begin(), edge_types_.end(),
                           [&](const EdgeTypeDecl& e) { return e.name == edge_type; });
  if (decl == edge_types_.end()) {
    warnings_.push_back("edge type '" + edge_type + "' declared from first use as " +
                        std::string(to_string(from)) + "->" + std::string(to_string(to)));
    edge_types_.push_back({edge_type, from, to});
    decl = edge_types_.end() - 1;
  }
  if (decl->from != from || decl->to != to) {
    throw InvalidArgument("edge '" + src + " " + edge_type + " " + dst + "' connects " +
                          std::string(to_string(from)) + "->" + std::string(to_string(to)) +
                          " but '" + edge_type + "' is declared " + std::string(to_string(decl->from)) +
                          "->" + std::string(to_string(decl->to)));
  }
  edges_.emplace_back(s->second, static_cast<std::size_t>(decl - edge_types_.begin()), d->second);
  return *this;
}

HetGraph HetGraph::Builder::build() && {
  HetGraph g;
  g.vertices_ = std::move(vertices_);
  g.vertex_index_ = std::move(index_);
  g.edge_types_ = std::move(edge_types_);
  g.adjacency_.assign(g.vertices_.size(),
                      std::vector<std::vector<std::size_t>>(g.edge_types_.size()));
  for (const auto& [src, type, dst] : edges_) g.adjacency_[src][type].push_back(dst);
  for (auto& lists : g.adjacency_) {
    for (auto& heads : lists) {
      std::sort(heads.begin(), heads.end(), [&](std::size_t a, std::size_t b) {
        return g.vertices_[a].id < g.vertices_[b].id;
      });
      heads.erase(std::unique(heads.begin(), heads.end()), heads.end());
      g.edge_count_ += heads.size();
    }
  }
  return g;
}

HetGraph load_graph(std::istream& vertices, std::istream& edges, std::vector<std::string>* warnings) {
  HetGraph::Builder builder;
  read_lines(vertices, "vertices.tsv", [&](const std::vector<std::string>& f, std::size_t number) {
    auto kind = parse_vertex_kind(f[1]);
    if (!kind) throw ParseError("vertices.tsv", number, "unknown vertex type '" + f[1] + "'");
    Vertex v{f[0], *kind, std::nullopt, f[2]};
    if (*kind == VertexKind::Oer) {
      v.oer_type = parse_oer_type(f[2]);
      if (!v.oer_type) throw ParseError("vertices.tsv", number, "unknown OER type '" + f[2] + "'");
    }
    try {
      builder.add_vertex(std::move(v));
    } catch (const DuplicateId& e) {
      throw ParseError("vertices.tsv", number, e.what());
    }
  });
  read_lines(edges, "edges.tsv", [&](const std::vector<std::string>& f, std::size_t number) {
    try {
      builder.add_edge(f[0], f[1], f[2]);
    } catch (const InvalidArgument& e) {
      throw ParseError("edges.tsv", number, e.what());
    }
  });
  if (warnings != nullptr) *warnings = builder.warnings();
  return std::move(builder).build();
}

void write_vertices(std::ostream& out, const HetGraph& graph) {
  for (const auto& v : graph.vertices()) {
    const std::string payload = v.oer_type ? std::string(to_string(*v.oer_type)) : v.payload;
    out << escape_tsv(v.id) << '\t' << to_string(v.kind) << '\t' << escape_tsv(payload) << '\n';
  }
}

void write_edges(std::ostream& out, const HetGraph& graph) {
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
    for (std::size_t t = 0; t < graph.edge_types().size(); ++t) {
      for (auto head : graph.out(v, t)) {
        out << escape_tsv(graph.vertex(v).id) << '\t' << graph.edge_types()[t].name << '\t'
            << escape_tsv(graph.vertex(head).id) << '\n';
      }
    }
  }
}

std::string metapath_name(const std::vector<MetaPathStep>& steps) {
  if (steps.empty()) return "identity";
  std::string name;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) name += '>';
    name += steps[i].edge;
    if (steps[i].oer_type) name += ":" + std::string(to_string(*steps[i].oer_type));
  }
  return name;
}

void validate_metapath(const HetGraph& graph, const MetaPath& path) {
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& step = path.steps[i];
    const std::string where = "meta-path '" + path.name + "' step " + std::to_string(i) + ": ";
    auto t = graph.edge_type(step.edge);
    if (!t) throw InvalidArgument(where + "unknown edge type '" + step.edge + "'");
    const auto& decl = graph.edge_types()[*t];
    if (decl.to != step.to) {
      throw InvalidArgument(where + "edge '" + step.edge + "' leads to " +
                            std::string(to_string(decl.to)) + ", not " + std::string(to_string(step.to)));
    }
    if (i > 0 && decl.from != path.steps[i - 1].to) {
      throw InvalidArgument(where + "edge '" + step.edge + "' starts at " +
                            std::string(to_string(decl.from)) + " but the previous step ends at " +
                            std::string(to_string(path.steps[i - 1].to)));
    }
    if (step.oer_type && step.to != VertexKind::Oer) {
      throw InvalidArgument(where + "an OER-type filter needs an oer target");
    }
  }
}

std::optional<VertexKind> metapath_start_kind(const HetGraph& graph, const MetaPath& path) {
  if (path.steps.empty()) return std::nullopt;
  auto t = graph.edge_type(path.steps.front().edge);
  if (!t) throw InvalidArgument("unknown edge type '" + path.steps.front().edge + "'");
  return graph.edge_types()[*t].from;
}

std::vector<MetaPath> default_metapaths() {
  std::vector<MetaPath> paths;
  for (auto type : kOerTypes) {
    const std::vector<std::vector<MetaPathStep>> templates{
        {{"about", VertexKind::Topic, std::nullopt}, {"related", VertexKind::Oer, type}},
        {{"resource", VertexKind::Oer, type}},
        {{"about", VertexKind::Topic, std::nullopt},
         {"covers", VertexKind::Paper, std::nullopt},
         {"resource", VertexKind::Oer, type}}};
    for (const auto& steps : templates) paths.push_back({metapath_name(steps), steps});
  }
  return paths;
}

std::vector<MetaPath> metapaths_from_json(const json& doc) {
  if (!doc.is_array()) throw InvalidArgument("meta-path file must hold a JSON array");
  std::vector<MetaPath> paths;
  for (const auto& entry : doc) {
    const json& steps_json = entry.is_object() ? entry.at("steps") : entry;
    if (!steps_json.is_array()) throw InvalidArgument("a meta-path must be an array of steps");
    std::vector<MetaPathStep> steps;
    for (const auto& s : steps_json) {
      MetaPathStep step;
      step.edge = s.at("edge").get<std::string>();
      const auto to = s.at("to").get<std::string>();
      auto kind = parse_vertex_kind(to);
      if (!kind) throw InvalidArgument("unknown vertex type '" + to + "' in meta-path");
      step.to = *kind;
      if (s.contains("oer_type") && !s["oer_type"].is_null()) {
        const auto type_text = s["oer_type"].get<std::string>();
        step.oer_type = parse_oer_type(type_text);
        if (!step.oer_type) throw InvalidArgument("unknown OER type '" + type_text + "' in meta-path");
      }
      steps.push_back(std::move(step));
    }
    std::string name = entry.is_object() && entry.contains("name") ? entry["name"].get<std::string>()
                                                                    : metapath_name(steps);
    paths.push_back({std::move(name), std::move(steps)});
  }
  return paths;
}

json metapaths_to_json(const std::vector<MetaPath>& paths) {
  json out = json::array();
  for (const auto& path : paths) {
    json steps = json::array();
    for (const auto& s : path.steps) {
      json step{{"edge", s.edge}, {"to", to_string(s.to)}};
      if (s.oer_type) step["oer_type"] = to_string(*s.oer_type);
      steps.push_back(std::move(step));
    }
    out.push_back(std::move(steps));
  }
  return out;
}

WalkResult metapath_score(const HetGraph& graph, std::span<const std::size_t> starts,
                          const MetaPath& path) {
  if (starts.empty()) throw InvalidArgument("meta-path walk needs at least one start vertex");
  validate_metapath(graph, path);
  if (auto kind = metapath_start_kind(graph, path)) {
    for (auto s : starts) {
      if (graph.vertex(s).kind != *kind) {
        throw InvalidArgument("start vertex '" + graph.vertex(s).id + "' is a " +
                              std::string(to_string(graph.vertex(s).kind)) + " but meta-path '" +
                              path.name + "' starts from " + std::string(to_string(*kind)));
      }
    }
  }

  WalkResult result;
  std::map<std::size_t, double> mass;
  const double share = 1.0 / static_cast<double>(starts.size());
  for (auto s : starts) mass[s] += share;

  std::vector<std::size_t> heads;
  for (const auto& step : path.steps) {
    const std::size_t type = *graph.edge_type(step.edge);
    std::map<std::size_t, double> next;
    for (const auto& [v, m] : mass) {
      heads.clear();
      for (auto h : graph.out(v, type)) {
        if (passes(graph.vertex(h), step)) heads.push_back(h);
      }
      if (heads.empty()) {
        result.absorbed += m;
        continue;
      }
      const double split = m / static_cast<double>(heads.size());
      for (auto h : heads) next[h] += split;
    }
    mass = std::move(next);
  }
  result.scores = std::move(mass);
  return result;
}

}  // namespace commrec
