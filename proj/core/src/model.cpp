#include "cmn/model.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cmn/errors.hpp"
#include "cmn/union_find.hpp"

namespace cmn {

Edge make_edge(int i, int j) {
  if (i == j) throw std::invalid_argument("self-loop on node " + std::to_string(i));
  return i < j ? Edge{i, j} : Edge{j, i};
}

UndirectedGraph::UndirectedGraph(int d) : d_(d), adj_(static_cast<std::size_t>(d) * d, 0) {
  if (d < 0) throw std::invalid_argument("negative node count");
}

UndirectedGraph::UndirectedGraph(int d, std::span<const Edge> edges) : UndirectedGraph(d) {
  for (const Edge& e : edges) add_edge(e.a, e.b);
}

void UndirectedGraph::check_pair(int i, int j) const {
  if (i < 0 || j < 0 || i >= d_ || j >= d_)
    throw std::out_of_range("node index out of range for a graph over " + std::to_string(d_) + " nodes");
  if (i == j) throw std::invalid_argument("self-loop on node " + std::to_string(i));
}

bool UndirectedGraph::has_edge(int i, int j) const {
  if (i == j) return false;
  check_pair(i, j);
  return adj_[static_cast<std::size_t>(i) * d_ + j] != 0;
}

void UndirectedGraph::add_edge(int i, int j) {
  check_pair(i, j);
  auto& a = adj_[static_cast<std::size_t>(i) * d_ + j];
  if (!a) {
    a = 1;
    adj_[static_cast<std::size_t>(j) * d_ + i] = 1;
    ++edge_count_;
  }
}

void UndirectedGraph::remove_edge(int i, int j) {
  check_pair(i, j);
  auto& a = adj_[static_cast<std::size_t>(i) * d_ + j];
  if (a) {
    a = 0;
    adj_[static_cast<std::size_t>(j) * d_ + i] = 0;
    --edge_count_;
  }
}

void UndirectedGraph::toggle_edge(int i, int j) {
  if (has_edge(i, j)) {
    remove_edge(i, j);
  } else {
    add_edge(i, j);
  }
}

std::vector<Edge> UndirectedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (int i = 0; i < d_; ++i)
    for (int j = i + 1; j < d_; ++j)
      if (adj_[static_cast<std::size_t>(i) * d_ + j]) out.push_back({i, j});
  return out;
}

std::vector<int> UndirectedGraph::blanket(int j) const {
  if (j < 0 || j >= d_) throw std::out_of_range("node index out of range");
  std::vector<int> out;
  for (int i = 0; i < d_; ++i)
    if (adj_[static_cast<std::size_t>(j) * d_ + i]) out.push_back(i);
  return out;
}

std::vector<int> common_neighbors(const UndirectedGraph& g, int i, int j) {
  if (i == j) throw std::invalid_argument("common_neighbors needs two distinct nodes");
  std::vector<int> out;
  for (int k = 0; k < g.d(); ++k) {
    if (k == i || k == j) continue;
    if (g.has_edge(i, k) && g.has_edge(j, k)) out.push_back(k);
  }
  return out;
}

std::vector<UndirectedGraph> neighbor_graphs(const UndirectedGraph& g) {
  std::vector<UndirectedGraph> out;
  out.reserve(static_cast<std::size_t>(g.d()) * (g.d() - 1) / 2);
  for (int i = 0; i < g.d(); ++i) {
    for (int j = i + 1; j < g.d(); ++j) {
      out.push_back(g);
      out.back().toggle_edge(i, j);
    }
  }
  return out;
}

std::size_t hamming_distance(const UndirectedGraph& a, const UndirectedGraph& b) {
  if (a.d() != b.d()) throw std::invalid_argument("graphs have different node counts");
  std::size_t dist = 0;
  for (int i = 0; i < a.d(); ++i)
    for (int j = i + 1; j < a.d(); ++j)
      if (a.has_edge(i, j) != b.has_edge(i, j)) ++dist;
  return dist;
}

bool EdgeContext::contains(std::uint32_t code) const {
  return std::binary_search(elements.begin(), elements.end(), code);
}

std::size_t outcome_count(std::span<const int> nodes, std::span<const int> cards) {
  std::size_t total = 1;
  for (int v : nodes) {
    const auto r = static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]);
    if (total > std::numeric_limits<std::uint32_t>::max() / std::max<std::size_t>(r, 1))
      throw CapacityError("outcome space too large to enumerate");
    total *= r;
  }
  return total;
}

std::uint32_t encode_config(std::span<const int> values, std::span<const int> nodes,
                            std::span<const int> cards) {
  if (values.size() != nodes.size()) throw std::invalid_argument("configuration has the wrong length");
  std::uint32_t code = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int r = cards[static_cast<std::size_t>(nodes[k])];
    if (values[k] < 0 || values[k] >= r) throw std::invalid_argument("configuration value out of range");
    code = code * static_cast<std::uint32_t>(r) + static_cast<std::uint32_t>(values[k]);
  }
  return code;
}

std::vector<int> decode_config(std::uint32_t code, std::span<const int> nodes,
                               std::span<const int> cards) {
  std::vector<int> out(nodes.size());
  for (std::size_t k = nodes.size(); k-- > 0;) {
    const auto r = static_cast<std::uint32_t>(cards[static_cast<std::size_t>(nodes[k])]);
    out[k] = static_cast<int>(code % r);
    code /= r;
  }
  return out;
}

const EdgeContext* ContextualStructure::context(Edge e) const {
  auto it = contexts_.find(e);
  return it == contexts_.end() ? nullptr : &it->second;
}

void ContextualStructure::set_context(Edge e, EdgeContext ctx) {
  if (!graph_.has_edge(e.a, e.b)) {
    throw StructuralError("context on absent edge {" + std::to_string(e.a) + "," +
                          std::to_string(e.b) + "}");
  }
  if (ctx.elements.empty()) {
    contexts_.erase(e);
    return;
  }
  std::sort(ctx.elements.begin(), ctx.elements.end());
  ctx.elements.erase(std::unique(ctx.elements.begin(), ctx.elements.end()), ctx.elements.end());
  contexts_[e] = std::move(ctx);
}

void ContextualStructure::add_element(Edge e, std::uint32_t code) {
  auto it = contexts_.find(e);
  if (it == contexts_.end()) {
    set_context(e, EdgeContext{common_neighbors(graph_, e.a, e.b), {code}});
    return;
  }
  auto& el = it->second.elements;
  el.insert(std::lower_bound(el.begin(), el.end(), code), code);
  el.erase(std::unique(el.begin(), el.end()), el.end());
}

ContextualStructure ContextualStructure::with_edge_toggled(int i, int j) const {
  ContextualStructure out(graph_);
  out.graph_.toggle_edge(i, j);
  const Edge toggled = make_edge(i, j);
  for (const auto& [e, ctx] : contexts_) {
    if (e == toggled) continue;
    if (common_neighbors(out.graph_, e.a, e.b) == ctx.cn) out.contexts_.emplace(e, ctx);
  }
  return out;
}

std::size_t ContextualStructure::context_element_count() const {
  std::size_t total = 0;
  for (const auto& [e, ctx] : contexts_) total += ctx.elements.size();
  return total;
}

ValidationReport validate_structure(const ContextualStructure& s, std::span<const int> cards) {
  ValidationReport report;
  const auto& g = s.graph();
  if (cards.size() != static_cast<std::size_t>(g.d())) {
    report.violations.push_back({{0, 0}, "cardinality list has " + std::to_string(cards.size()) +
                                             " entries for " + std::to_string(g.d()) + " nodes"});
    return report;
  }
  for (const auto& [e, ctx] : s.contexts()) {
    auto flag = [&](std::string msg) { report.violations.push_back({e, std::move(msg)}); };
    if (e.a >= e.b || e.a < 0 || e.b >= g.d() || !g.has_edge(e.a, e.b)) {
      flag("context on an edge that is not in the graph");
      continue;
    }
    const auto cn = common_neighbors(g, e.a, e.b);
    if (ctx.cn != cn) {
      flag("stored common neighbours are stale");
      continue;
    }
    if (cn.empty()) {
      if (!ctx.elements.empty()) flag("non-empty context on an edge without common neighbours");
      continue;
    }
    const std::size_t space = outcome_count(cn, cards);
    if (!std::is_sorted(ctx.elements.begin(), ctx.elements.end()) ||
        std::adjacent_find(ctx.elements.begin(), ctx.elements.end()) != ctx.elements.end()) {
      flag("context elements are not sorted and unique");
    }
    if (std::any_of(ctx.elements.begin(), ctx.elements.end(),
                    [&](std::uint32_t c) { return c >= space; })) {
      flag("context element outside the common-neighbour outcome space");
    }
    if (ctx.elements.size() >= space) flag("context covers the full outcome space (not regular)");
  }
  return report;
}

BlanketPartition build_blanket_partition(const ContextualStructure& s, std::span<const int> cards,
                                         int node) {
  const auto& g = s.graph();
  BlanketPartition part;
  part.node = node;
  part.blanket = g.blanket(node);
  for (int v : part.blanket) part.blanket_cards.push_back(cards[static_cast<std::size_t>(v)]);

  std::size_t total = 1;
  for (int r : part.blanket_cards) {
    total *= static_cast<std::size_t>(r);
    if (total > kMaxBlanketConfigurations) {
      throw CapacityError("Markov blanket of node " + std::to_string(node) + " has more than " +
                          std::to_string(kMaxBlanketConfigurations) + " configurations");
    }
  }
  const std::size_t m = part.blanket.size();
  std::vector<std::size_t> stride(m, 1);
  for (std::size_t k = m; k-- > 1;) stride[k - 1] = stride[k] * static_cast<std::size_t>(part.blanket_cards[k]);

  UnionFind uf(total);
  std::vector<int> config(m);
  for (std::size_t pi = 0; pi < m; ++pi) {
    const int i = part.blanket[pi];
    const EdgeContext* ctx = s.context(make_edge(i, node));
    if (ctx == nullptr) continue;
    if (ctx->cn != common_neighbors(g, i, node)) {
      throw StructuralError("context of edge {" + std::to_string(std::min(i, node)) + "," +
                            std::to_string(std::max(i, node)) + "} refers to stale common neighbours");
    }
    // Positions of cn(i, node) inside the blanket.
    std::vector<std::size_t> pos;
    for (int c : ctx->cn)
      pos.push_back(static_cast<std::size_t>(std::lower_bound(part.blanket.begin(), part.blanket.end(), c) -
                                             part.blanket.begin()));
    const int ri = part.blanket_cards[pi];
    for (std::uint32_t code : ctx->elements) {
      const auto element = decode_config(code, ctx->cn, cards);
      // Walk every blanket configuration with coordinate i at 0 and cn fixed.
      for (std::size_t b = 0; b < total; ++b) {
        std::size_t rest = b;
        for (std::size_t k = m; k-- > 0;) {
          config[k] = static_cast<int>(rest % static_cast<std::size_t>(part.blanket_cards[k]));
          rest /= static_cast<std::size_t>(part.blanket_cards[k]);
        }
        if (config[pi] != 0) continue;
        bool match = true;
        for (std::size_t t = 0; t < pos.size() && match; ++t) match = config[pos[t]] == element[t];
        if (!match) continue;
        for (int v = 1; v < ri; ++v)
          uf.unite(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b + v * stride[pi]));
      }
    }
  }

  part.class_of.resize(total);
  std::vector<std::uint32_t> id_of_root(total, std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (std::size_t b = 0; b < total; ++b) {
    const auto root = uf.find(static_cast<std::uint32_t>(b));
    if (id_of_root[root] == std::numeric_limits<std::uint32_t>::max()) id_of_root[root] = next++;
    part.class_of[b] = id_of_root[root];
  }
  part.q = next;
  return part;
}

namespace {

constexpr int kStar = -1;

// Collapses groups of patterns that differ only in one coordinate and cover
// its whole range into a single pattern with a star there.
std::vector<std::vector<int>> star_compress(std::vector<std::vector<int>> patterns,
                                            const std::vector<int>& ranges) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < ranges.size() && !changed; ++k) {
      std::map<std::vector<int>, std::set<int>> groups;
      for (const auto& p : patterns) {
        if (p[k] == kStar) continue;
        auto key = p;
        key[k] = kStar;
        groups[key].insert(p[k]);
      }
      for (const auto& [key, vals] : groups) {
        if (static_cast<int>(vals.size()) != ranges[k]) continue;
        std::erase_if(patterns, [&](const std::vector<int>& p) {
          if (p[k] == kStar) return false;
          auto other = p;
          other[k] = kStar;
          return other == key;
        });
        patterns.push_back(key);
        changed = true;
        break;
      }
    }
  }
  // Digits before stars in each coordinate.
  std::sort(patterns.begin(), patterns.end(), [](const auto& x, const auto& y) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      const int a = x[k] == kStar ? std::numeric_limits<int>::max() : x[k];
      const int b = y[k] == kStar ? std::numeric_limits<int>::max() : y[k];
      if (a != b) return a < b;
    }
    return false;
  });
  return patterns;
}

}  // namespace

std::string render_labeled_graph(const ContextualStructure& s, std::span<const int> cards, int base) {
  std::ostringstream out;
  for (const Edge& e : s.graph().edges()) {
    out << (e.a + base) << "–" << (e.b + base);
    if (const EdgeContext* ctx = s.context(e)) {
      std::vector<int> ranges;
      bool wide = false;
      for (int c : ctx->cn) {
        ranges.push_back(cards[static_cast<std::size_t>(c)]);
        wide = wide || ranges.back() > 10;
      }
      std::vector<std::vector<int>> patterns;
      for (auto code : ctx->elements) patterns.push_back(decode_config(code, ctx->cn, cards));
      patterns = star_compress(std::move(patterns), ranges);
      out << ": {";
      for (std::size_t p = 0; p < patterns.size(); ++p) {
        if (p) out << ',';
        if (wide) out << '(';
        for (std::size_t k = 0; k < patterns[p].size(); ++k) {
          if (wide && k) out << ',';
          if (patterns[p][k] == kStar) {
            out << '*';
          } else {
            out << patterns[p][k];
          }
        }
        if (wide) out << ')';
      }
      out << '}';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cmn
