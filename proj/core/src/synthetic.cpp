#include "cmn/synthetic.hpp"

#include <initializer_list>
#include <stdexcept>

namespace cmn {

ContextualStructure reference_structure() {
  // 1-based edge list, shifted below.
  const std::initializer_list<std::pair<int, int>> edges = {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4},
                                                            {3, 5}, {4, 5}, {5, 6}, {5, 7}, {6, 7}};
  UndirectedGraph g(7);
  for (auto [a, b] : edges) g.add_edge(a - 1, b - 1);
  ContextualStructure s(g);
  // Codes are row-major over the sorted common neighbours.
  s.add_element(make_edge(0, 1), 2);  // (X3,X4) = (1,0)
  s.add_element(make_edge(0, 2), 2);  // (X2,X4) = (1,*)
  s.add_element(make_edge(0, 2), 3);
  s.add_element(make_edge(3, 4), 0);  // X3 = 0
  s.add_element(make_edge(4, 6), 0);  // X6 = 0
  s.add_element(make_edge(5, 6), 1);  // X5 = 1
  return s;
}

LogLinearModel reference_generator() {
  LogLinearModel m;
  m.structure = reference_structure();
  const std::vector<int> cards(7, 2);
  m.layout = ParameterLayout(m.structure.graph(), cards);
  m.phi.assign(m.layout.size(), 0.0);
  struct Value {
    std::vector<int> nodes;  // 1-based
    double phi;
  };
  const std::vector<Value> values = {
      {{1}, -2.710}, {{2}, 1.294}, {{3}, -1.448}, {{4}, -1.341}, {{5}, -2.557}, {{6}, -0.443}, {{7}, 0.197},
      {{1, 2}, 2.0}, {{1, 3}, 2.0}, {{1, 4}, 1.5}, {{2, 3}, -1.5}, {{2, 4}, -2.5}, {{3, 4}, 1.5},
      {{3, 5}, 1.4}, {{4, 5}, 0.0}, {{5, 6}, 1.5}, {{5, 7}, 0.0}, {{6, 7}, -1.8},
      {{1, 2, 3}, -2.0}, {{1, 2, 4}, 1.2}, {{1, 3, 4}, 0.0}, {{2, 3, 4}, 0.0},
      {{3, 4, 5}, 2.0}, {{5, 6, 7}, 1.8}, {{1, 2, 3, 4}, 0.0},
  };
  for (const auto& v : values) {
    std::vector<int> nodes;
    for (int k : v.nodes) nodes.push_back(k - 1);
    const std::vector<int> ones(nodes.size(), 1);
    const auto slot = m.layout.index(nodes, ones);
    if (!slot) throw std::logic_error("reference generator term is not a clique");
    m.phi[*slot] = v.phi;
  }
  m.log_z = log_partition(m.layout, m.phi);
  return m;
}

}  // namespace cmn
