// Independent reference implementations and fixtures shared by the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/model.hpp"

namespace cmn::testing {

// Six nodes, 0-based: 0-1, 1-2, 0-3, 3-4, 1-4, 2-4.
inline UndirectedGraph six_node_graph() {
  UndirectedGraph g(6);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {0, 3}, {3, 4}, {1, 4}, {2, 4}})
    g.add_edge(a, b);
  return g;
}

// The six-node graph with C(2,5) = {0} over cn {3} and C(3,5) = {1,2} over
// cn {2} (1-based names), ternary variables.
inline ContextualStructure six_node_contextual() {
  ContextualStructure s(six_node_graph());
  s.add_element(make_edge(1, 4), 0);
  s.add_element(make_edge(2, 4), 1);
  s.add_element(make_edge(2, 4), 2);
  return s;
}

// Complete graph on four binary nodes with C(1,3) = {(0,1),(1,0)} over cn
// (2,4) and C(2,4) = {(1,0),(1,1)} over cn (1,3), 1-based names.
inline ContextualStructure four_node_contextual() {
  UndirectedGraph g(4);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) g.add_edge(i, j);
  ContextualStructure s(g);
  s.add_element(make_edge(0, 2), 1);
  s.add_element(make_edge(0, 2), 2);
  s.add_element(make_edge(1, 3), 2);
  s.add_element(make_edge(1, 3), 3);
  return s;
}

inline std::vector<int> digits(std::size_t code, const std::vector<int>& radix) {
  std::vector<int> out(radix.size());
  for (std::size_t k = radix.size(); k-- > 0;) {
    out[k] = static_cast<int>(code % static_cast<std::size_t>(radix[k]));
    code /= static_cast<std::size_t>(radix[k]);
  }
  return out;
}

// Repeatedly scans every pair of blanket configurations and merges any pair
// related by a context element until nothing changes. Class ids are assigned
// in order of first appearance, which is the smallest member.
inline std::vector<std::uint32_t> brute_force_partition(const ContextualStructure& s,
                                                        const std::vector<int>& cards, int node) {
  const auto mb = s.graph().blanket(node);
  std::vector<int> radix;
  for (int v : mb) radix.push_back(cards[static_cast<std::size_t>(v)]);
  std::size_t total = 1;
  for (int r : radix) total *= static_cast<std::size_t>(r);
  std::vector<std::size_t> label(total);
  std::iota(label.begin(), label.end(), 0);

  auto related = [&](const std::vector<int>& x, const std::vector<int>& y) {
    std::size_t diff = 0, where = 0;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k] != y[k]) {
        ++diff;
        where = k;
      }
    if (diff != 1) return false;
    const int i = mb[where];
    const EdgeContext* ctx = s.context(make_edge(i, node));
    if (ctx == nullptr) return false;
    for (auto code : ctx->elements) {
      std::vector<int> cn_radix;
      for (int c : ctx->cn) cn_radix.push_back(cards[static_cast<std::size_t>(c)]);
      const auto element = digits(code, cn_radix);
      bool match = true;
      for (std::size_t c = 0; c < ctx->cn.size(); ++c) {
        const auto pos = static_cast<std::size_t>(std::find(mb.begin(), mb.end(), ctx->cn[c]) - mb.begin());
        if (x[pos] != element[c]) match = false;
      }
      if (match) return true;
    }
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < total; ++a)
      for (std::size_t b = a + 1; b < total; ++b) {
        if (label[a] == label[b]) continue;
        if (!related(digits(a, radix), digits(b, radix))) continue;
        const auto from = std::max(label[a], label[b]), to = std::min(label[a], label[b]);
        for (auto& l : label)
          if (l == from) l = to;
        changed = true;
      }
  }
  std::map<std::size_t, std::uint32_t> id;
  std::vector<std::uint32_t> out(total);
  for (std::size_t b = 0; b < total; ++b) {
    auto [it, fresh] = id.try_emplace(label[b], static_cast<std::uint32_t>(id.size()));
    out[b] = it->second;
  }
  return out;
}

// Dirichlet-multinomial marginal likelihood evaluated as a product of Polya
// urn predictive probabilities, one row at a time; needs no gamma function.
inline double polya_log_mpl(const Dataset& data, const ContextualStructure& s, double alpha) {
  const auto& cards = data.cardinalities();
  double total = 0.0;
  for (int j = 0; j < s.d(); ++j) {
    const auto classes = brute_force_partition(s, cards, j);
    const auto mb = s.graph().blanket(j);
    const int r = cards[static_cast<std::size_t>(j)];
    std::map<std::uint32_t, std::vector<double>> seen;
    for (std::size_t row = 0; row < data.n(); ++row) {
      std::size_t b = 0;
      for (int v : mb) b = b * static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]) + data.at(row, v);
      auto& c = seen.try_emplace(classes[b], std::vector<double>(r, 0.0)).first->second;
      const double n_l = std::accumulate(c.begin(), c.end(), 0.0);
      const int x = data.at(row, static_cast<std::size_t>(j));
      total += std::log((c[x] + alpha) / (n_l + r * alpha));
      c[x] += 1.0;
    }
  }
  return total;
}

inline Dataset dataset_from_rows(const std::vector<std::vector<int>>& rows, std::vector<int> cards) {
  std::vector<int> values;
  for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
  return Dataset(values, std::move(cards));
}

inline double total_variation(const JointTable& a, const JointTable& b) {
  double tv = 0.0;
  for (std::size_t x = 0; x < a.cells(); ++x) tv += std::abs(a.probabilities[x] - b.probabilities[x]);
  return 0.5 * tv;
}

// Marginal of `table` on `nodes` evaluated at the configuration `x`.
inline double marginal_at(const JointTable& table, const std::vector<int>& nodes, std::span<const int> x) {
  std::vector<int> y(table.cardinalities.size());
  double p = 0.0;
  for (std::size_t c = 0; c < table.cells(); ++c) {
    unflatten(c, table.cardinalities, y);
    bool match = true;
    for (int v : nodes) match = match && y[static_cast<std::size_t>(v)] == x[static_cast<std::size_t>(v)];
    if (match) p += table.probabilities[c];
  }
  return p;
}

// Closed-form MLE of a decomposable model: product of clique marginals over
// product of separator marginals of the empirical table.
inline JointTable junction_tree_fit(const JointTable& empirical, const std::vector<std::vector<int>>& cliques,
                                    const std::vector<std::vector<int>>& separators) {
  JointTable out{empirical.cardinalities, std::vector<double>(empirical.cells())};
  std::vector<int> x(empirical.cardinalities.size());
  for (std::size_t c = 0; c < empirical.cells(); ++c) {
    unflatten(c, empirical.cardinalities, x);
    double p = 1.0;
    for (const auto& q : cliques) p *= marginal_at(empirical, q, x);
    for (const auto& sep : separators) {
      const double m = marginal_at(empirical, sep, x);
      p = m > 0.0 ? p / m : 0.0;
    }
    out.probabilities[c] = p;
  }
  return out;
}

}  // namespace cmn::testing
