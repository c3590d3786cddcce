#ifndef COMMREC_HETGRAPH_HPP
#define COMMREC_HETGRAPH_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "commrec/corpus.hpp"

namespace commrec {

enum class VertexKind { Paper, Topic, Oer };
std::string_view to_string(VertexKind kind);
std::optional<VertexKind> parse_vertex_kind(std::string_view text);

struct Vertex {
  std::string id;
  VertexKind kind = VertexKind::Paper;
  std::optional<OerType> oer_type;  // set iff kind == Oer
  std::string payload;              // title (paper), label terms (topic), type name (oer)
};

struct EdgeTypeDecl {
  std::string name;
  VertexKind from = VertexKind::Paper;
  VertexKind to = VertexKind::Paper;
};

/// about: paper->topic, covers: topic->paper, resource: paper->oer,
/// related: topic->oer.
std::vector<EdgeTypeDecl> default_edge_types();

/// Typed directed graph over papers, topics and OERs. Immutable once built;
/// adjacency lists are deduplicated and ordered by head id.
class HetGraph {
 public:
  class Builder;

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const Vertex& vertex(std::size_t v) const { return vertices_[v]; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  std::optional<std::size_t> find(const std::string& id) const;

  const std::vector<EdgeTypeDecl>& edge_types() const { return edge_types_; }
  std::optional<std::size_t> edge_type(const std::string& name) const;

  /// Heads of `v`'s out-edges of the given type.
  std::span<const std::size_t> out(std::size_t v, std::size_t edge_type) const;

 private:
  std::vector<Vertex> vertices_;
  std::map<std::string, std::size_t, std::less<>> vertex_index_;
  std::vector<EdgeTypeDecl> edge_types_;
  // adjacency_[v][t] = sorted heads
  std::vector<std::vector<std::vector<std::size_t>>> adjacency_;
  std::size_t edge_count_ = 0;
};

class HetGraph::Builder {
 public:
  explicit Builder(std::vector<EdgeTypeDecl> edge_types = default_edge_types());

  /// Throws DuplicateId on a repeated vertex id.
  Builder& add_vertex(Vertex vertex);
  /// Throws if an endpoint is unknown or violates the edge type's declaration.
  /// Undeclared edge types are declared from their first use.
  Builder& add_edge(const std::string& src, const std::string& edge_type, const std::string& dst);

  HetGraph build() &&;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<Vertex> vertices_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<EdgeTypeDecl> edge_types_;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> edges_;
  std::vector<std::string> warnings_;
};

/// vertices.tsv: id<TAB>type<TAB>payload with type in {paper, topic, oer};
/// an oer payload is its type. edges.tsv: src<TAB>edge_type<TAB>dst.
HetGraph load_graph(std::istream& vertices, std::istream& edges,
                    std::vector<std::string>* warnings = nullptr);
void write_vertices(std::ostream& out, const HetGraph& graph);
void write_edges(std::ostream& out, const HetGraph& graph);

struct MetaPathStep {
  std::string edge;
  VertexKind to = VertexKind::Topic;
  std::optional<OerType> oer_type;
};

struct MetaPath {
  std::string name;
  std::vector<MetaPathStep> steps;
  std::size_t length() const { return steps.size(); }
};

/// Name derived from the steps, e.g. "about>related:video".
std::string metapath_name(const std::vector<MetaPathStep>& steps);

/// Throws InvalidArgument when a step uses an unknown edge type, when
/// consecutive steps do not chain, or when a type filter is misplaced.
void validate_metapath(const HetGraph& graph, const MetaPath& path);

/// Vertex kind the walk must start from; nullopt for a length-0 path.
std::optional<VertexKind> metapath_start_kind(const HetGraph& graph, const MetaPath& path);

/// The 12 default templates: paper->topic->OER, paper->OER and
/// paper->topic->paper->OER, each restricted to one of the 4 OER types.
std::vector<MetaPath> default_metapaths();

std::vector<MetaPath> metapaths_from_json(const nlohmann::json& doc);
nlohmann::json metapaths_to_json(const std::vector<MetaPath>& paths);

struct WalkResult {
  std::map<std::size_t, double> scores;  // terminal vertex -> probability
  double absorbed = 0.0;                  // mass lost at dead ends
};

/// Exact random-walk probability of reaching each terminal vertex along the
/// meta-path: mass starts uniform over `starts` and splits uniformly over the
/// qualifying out-edges at each step; vertices without one absorb their mass.
WalkResult metapath_score(const HetGraph& graph, std::span<const std::size_t> starts,
                          const MetaPath& path);

}  // namespace commrec

#endif  // COMMREC_HETGRAPH_HPP
