#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cmn {

inline constexpr std::size_t kMaxBlanketConfigurations = std::size_t{1} << 16;

// Unordered node pair stored with a < b.
struct Edge {
  int a = 0;
  int b = 0;
  auto operator<=>(const Edge&) const = default;
};

Edge make_edge(int i, int j);

class UndirectedGraph {
 public:
  explicit UndirectedGraph(int d = 0);
  UndirectedGraph(int d, std::span<const Edge> edges);

  int d() const noexcept { return d_; }
  bool has_edge(int i, int j) const;
  void add_edge(int i, int j);
  void remove_edge(int i, int j);
  void toggle_edge(int i, int j);

  // Canonical (lexicographic) edge list.
  std::vector<Edge> edges() const;
  std::size_t edge_count() const noexcept { return edge_count_; }
  // mb(j), ascending.
  std::vector<int> blanket(int j) const;

  bool operator==(const UndirectedGraph& other) const = default;

 private:
  void check_pair(int i, int j) const;

  int d_ = 0;
  std::vector<std::uint8_t> adj_;
  std::size_t edge_count_ = 0;
};

// cn(i, j) = mb(i) ∩ mb(j), ascending.
std::vector<int> common_neighbors(const UndirectedGraph& g, int i, int j);

// All graphs one edge toggle away, ordered by the toggled pair.
std::vector<UndirectedGraph> neighbor_graphs(const UndirectedGraph& g);

// Number of edges present in exactly one of the two graphs.
std::size_t hamming_distance(const UndirectedGraph& a, const UndirectedGraph& b);

// Context of one edge: configurations of its common neighbours under which
// the edge's direct dependence vanishes. Elements are row-major codes over
// the outcome space of `cn` (first common neighbour most significant), kept
// sorted, so code order is lexicographic order of the configurations.
struct EdgeContext {
  std::vector<int> cn;
  std::vector<std::uint32_t> elements;

  bool empty() const noexcept { return elements.empty(); }
  bool contains(std::uint32_t code) const;
  bool operator==(const EdgeContext&) const = default;
};

// |X_S| for the variables in `nodes`.
std::size_t outcome_count(std::span<const int> nodes, std::span<const int> cards);
std::uint32_t encode_config(std::span<const int> values, std::span<const int> nodes,
                            std::span<const int> cards);
std::vector<int> decode_config(std::uint32_t code, std::span<const int> nodes,
                               std::span<const int> cards);

class ContextualStructure {
 public:
  ContextualStructure() = default;
  explicit ContextualStructure(UndirectedGraph graph) : graph_(std::move(graph)) {}

  const UndirectedGraph& graph() const noexcept { return graph_; }
  int d() const noexcept { return graph_.d(); }

  // Only non-empty contexts are stored.
  const std::map<Edge, EdgeContext>& contexts() const noexcept { return contexts_; }
  const EdgeContext* context(Edge e) const;

  // Replaces the context of an existing edge; an empty context erases it.
  // StructuralError if the edge is not in the graph.
  void set_context(Edge e, EdgeContext ctx);
  // Adds one element, using the current common neighbours of the edge.
  void add_element(Edge e, std::uint32_t code);

  // Toggles an edge. The toggled edge's own context and every context whose
  // common-neighbour set changes are dropped.
  ContextualStructure with_edge_toggled(int i, int j) const;

  std::size_t context_element_count() const;

  bool operator==(const ContextualStructure&) const = default;

 private:
  UndirectedGraph graph_;
  std::map<Edge, EdgeContext> contexts_;
};

struct Violation {
  Edge edge;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// Checks every context: edge present, stored cn current, codes in range,
// elements sorted/unique, and regularity (strict subset of X_cn).
// Maximality is not checked.
ValidationReport validate_structure(const ContextualStructure& s, std::span<const int> cards);

// Partition of the Markov-blanket outcome space of one node into classes
// sharing a conditional distribution. Blanket configurations are indexed
// row-major over `blanket` (first blanket node most significant).
struct BlanketPartition {
  int node = 0;
  std::vector<int> blanket;
  std::vector<int> blanket_cards;
  std::vector<std::uint32_t> class_of;
  std::uint32_t q = 0;

  std::size_t configurations() const noexcept { return class_of.size(); }
};

// Merges, for each context element on each edge {i, node}, the blanket
// configurations that match the element on cn(i, node), agree elsewhere and
// differ only in the coordinate of i. Class ids follow the lexicographically
// smallest member. CapacityError above kMaxBlanketConfigurations;
// StructuralError if a stored cn is stale.
BlanketPartition build_blanket_partition(const ContextualStructure& s,
                                         std::span<const int> cards, int node);

// One line per edge, "i–j" or "i–j: {label,...}", nodes numbered from `base`.
// A coordinate that spans its full range within a group is written as '*'.
std::string render_labeled_graph(const ContextualStructure& s, std::span<const int> cards,
                                 int base = 1);

}  // namespace cmn
