#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cmn/errors.hpp"
#include "cmn/params.hpp"
#include "cmn/synthetic.hpp"
#include "oracles.hpp"

using namespace cmn;

namespace {

UndirectedGraph triangle() {
  UndirectedGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(1, 2);
  return g;
}

JointTable random_table(std::mt19937_64& rng, std::vector<int> cards) {
  JointTable t{std::move(cards), {}};
  std::size_t cells = 1;
  for (int r : t.cardinalities) cells *= static_cast<std::size_t>(r);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    t.probabilities.push_back(u(rng));
    total += t.probabilities.back();
  }
  for (double& p : t.probabilities) p /= total;
  return t;
}

}  // namespace

TEST_SUITE("params") {

TEST_CASE("complete subsets in size then lexicographic order") {
  const auto subsets = complete_subsets(testing::six_node_graph());
  std::vector<std::vector<int>> expected{{0}, {1}, {2}, {3}, {4}, {5}, {0, 1}, {0, 3}, {1, 2},
                                         {1, 4}, {2, 4}, {3, 4}, {1, 2, 4}};
  CHECK(subsets == expected);
  CHECK_THROWS_AS(complete_subsets(testing::six_node_graph(), 5), CapacityError);
}

TEST_CASE("parameter layout") {
  const std::vector<int> cards{3, 2, 3};
  const ParameterLayout layout(triangle(), cards);
  // 2 + 1 + 2 mains, 2 + 4 + 2 pairs, 4 triple.
  CHECK(layout.size() == 17);
  const std::vector<int> nodes{0, 2}, values{2, 1};
  const auto slot = layout.index(nodes, values);
  REQUIRE(slot);
  auto [term, back] = layout.locate(*slot);
  CHECK(term->nodes == nodes);
  CHECK(back == values);
  const std::vector<int> zero{0, 1};
  CHECK_FALSE(layout.index(nodes, zero));
}

TEST_CASE("constraint table of the six-node ternary example") {
  const auto sys = constraint_system(testing::six_node_contextual(), std::vector<int>(6, 3));
  std::set<std::string> rows;
  for (std::size_t r = 0; r < sys.rows.size(); ++r) rows.insert(sys.format_row(r));
  const std::set<std::string> expected{
      "phi{2,5}(1,1)=0",
      "phi{2,5}(1,2)=0",
      "phi{2,5}(2,1)=0",
      "phi{2,5}(2,2)=0",
      "phi{3,5}(1,1)+phi{2,3,5}(1,1,1)=0",
      "phi{3,5}(1,2)+phi{2,3,5}(1,1,2)=0",
      "phi{3,5}(2,1)+phi{2,3,5}(1,2,1)=0",
      "phi{3,5}(2,2)+phi{2,3,5}(1,2,2)=0",
      "phi{3,5}(1,1)+phi{2,3,5}(2,1,1)=0",
      "phi{3,5}(1,2)+phi{2,3,5}(2,1,2)=0",
      "phi{3,5}(2,1)+phi{2,3,5}(2,2,1)=0",
      "phi{3,5}(2,2)+phi{2,3,5}(2,2,2)=0",
  };
  CHECK(sys.rows.size() == 12);
  CHECK(rows == expected);
  CHECK(sys.rank == 12);
}

TEST_CASE("empty contexts give an empty system") {
  const auto sys = constraint_system(ContextualStructure(testing::six_node_graph()), std::vector<int>(6, 3));
  CHECK(sys.rows.empty());
  CHECK(sys.rank == 0);
}

TEST_CASE("exact rank handles dependent rows") {
  using E = ConstraintSystem::Entry;
  std::vector<std::vector<E>> rows{{{0, 1}, {1, 1}}, {{1, 1}, {2, 1}}, {{0, 1}, {2, -1}}, {{3, 1}}};
  // row0 - row1 = x0 - x2 = row2
  CHECK(exact_rank(rows, 4) == 3);
}

TEST_CASE("model dimension") {
  CHECK(model_dimension(ContextualStructure(UndirectedGraph(4)), std::vector<int>(4, 2)) == 4);
  UndirectedGraph edge(2);
  edge.add_edge(0, 1);
  CHECK(model_dimension(ContextualStructure(edge), std::vector<int>(2, 2)) == 3);
  ContextualStructure s(triangle());
  s.add_element(make_edge(0, 1), 0);
  const auto info = dimension_info(s, std::vector<int>(3, 2));
  CHECK(info.unconstrained == 7);
  CHECK(info.rank == 1);
  CHECK(info.nominal_restrictions == 1);
  CHECK(info.dimension() == 6);
}

TEST_CASE("joint of simple models") {
  LogLinearModel m;
  m.structure = ContextualStructure(UndirectedGraph(1));
  m.layout = ParameterLayout(m.structure.graph(), std::vector<int>{2});
  m.phi = {std::log(3.0)};
  const auto t = joint_of(m);
  CHECK(t.probabilities[0] == doctest::Approx(0.25));
  CHECK(t.probabilities[1] == doctest::Approx(0.75));

  m.structure = ContextualStructure(triangle());
  m.layout = ParameterLayout(m.structure.graph(), std::vector<int>{2, 3, 2});
  m.phi.assign(m.layout.size(), 0.0);
  for (double p : joint_of(m).probabilities) CHECK(p == doctest::Approx(1.0 / 12));
  CHECK_THROWS_AS(joint_of(m, 6), CapacityError);
}

TEST_CASE("reference generator") {
  const auto m = reference_generator();
  CHECK(validate_structure(m.structure, std::vector<int>(7, 2)).ok());
  CHECK(m.structure.graph().edge_count() == 11);
  CHECK(m.structure.context_element_count() == 6);
  const auto sys = constraint_system(m.structure, std::vector<int>(7, 2));
  CHECK(sys.max_residual(m.phi) == 0.0);
  const auto t = joint_of(m);
  double total = 0.0;
  for (double p : t.probabilities) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-12);
  std::vector<int> x(7, 0);
  for (int k = 0; k < 7; ++k) {
    std::vector<int> one{k};
    x.assign(7, 1);
    CHECK(testing::marginal_at(t, one, x) == doctest::Approx(0.5).epsilon(0.01));
  }
}

TEST_CASE("fit: empty graph and symmetric data") {
  const auto d = testing::dataset_from_rows({{0}, {1}}, {2});
  const auto fit = fit_mle(d, ContextualStructure(UndirectedGraph(1)));
  CHECK(std::abs(fit.model.phi[0]) < 1e-8);
  const auto t = joint_of(fit.model);
  CHECK(t.probabilities[0] == doctest::Approx(0.5));
  CHECK(fit.log_lik == doctest::Approx(2.0 * std::log(0.5)));
  CHECK(fit.dimension == 1);
}

TEST_CASE("fit: decomposable graph matches the junction-tree closed form") {
  std::mt19937_64 rng(2);
  const auto truth = random_table(rng, {2, 3, 2, 2});
  const auto data = sample_joint(truth, 5000, 21);
  const auto empirical = empirical_joint(data);
  REQUIRE(std::all_of(empirical.probabilities.begin(), empirical.probabilities.end(), [](double p) { return p > 0; }));
  // Cliques {0,1,2} and {2,3}, separator {2}.
  UndirectedGraph g(4);
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  FitOptions opt;
  opt.smoothing = false;
  const auto fit = fit_mle(data, ContextualStructure(g), opt);
  const auto closed = testing::junction_tree_fit(empirical, {{0, 1, 2}, {2, 3}}, {{2}});
  CHECK(testing::total_variation(joint_of(fit.model), closed) < 1e-6);
  CHECK(fit.gradient_norm < 1e-8);
}

TEST_CASE("fit: saturated model reproduces the empirical table") {
  std::mt19937_64 rng(6);
  const auto data = sample_joint(random_table(rng, {2, 2, 3}), 3000, 5);
  const auto empirical = empirical_joint(data);
  FitOptions opt;
  opt.smoothing = false;
  const auto fitted = joint_of(fit_mle(data, ContextualStructure(triangle()), opt).model);
  for (std::size_t c = 0; c < fitted.cells(); ++c)
    if (empirical.probabilities[c] > 0) CHECK(std::abs(fitted.probabilities[c] - empirical.probabilities[c]) < 1e-6);
}

TEST_CASE("fit: context constraints hold and encode the independence") {
  std::mt19937_64 rng(9);
  const auto data = sample_joint(random_table(rng, {2, 2, 2}), 2000, 3);
  ContextualStructure s(triangle());
  s.add_element(make_edge(0, 1), 0);  // X1 independent of X2 when X3 = 0
  const auto fit = fit_mle(data, s);
  const auto sys = constraint_system(s, data.cardinalities());
  CHECK(sys.max_residual(fit.model.phi) < 1e-8);
  CHECK(fit.gradient_norm < 1e-8);
  const auto t = joint_of(fit.model);
  auto p = [&](int a, int b, int c) { return t.probabilities[static_cast<std::size_t>(a * 4 + b * 2 + c)]; };
  const double given0 = p(1, 0, 0) / (p(0, 0, 0) + p(1, 0, 0));
  const double given1 = p(1, 1, 0) / (p(0, 1, 0) + p(1, 1, 0));
  CHECK(std::abs(given0 - given1) < 1e-6);
  CHECK(fit.dimension == 6);

  // Nested models: constraining can only lower the likelihood.
  const auto free_fit = fit_mle(data, ContextualStructure(triangle()));
  CHECK(fit.log_lik <= free_fit.log_lik + 1e-9);
}

TEST_CASE("fit: gradient matches finite differences") {
  std::mt19937_64 rng(14);
  const auto s4 = testing::four_node_contextual();
  const auto data = sample_joint(random_table(rng, {2, 2, 2, 2}), 800, 2);
  const auto target = fitting_target(empirical_joint(data), FitOptions{});
  const LikelihoodObjective obj(s4, target, static_cast<double>(data.n()));
  REQUIRE(obj.dimension() > 0);
  std::normal_distribution<double> normal(0.0, 0.7);
  const double h = 1e-5;
  for (int point = 0; point < 10; ++point) {
    Eigen::VectorXd beta(static_cast<Eigen::Index>(obj.dimension()));
    for (Eigen::Index k = 0; k < beta.size(); ++k) beta[k] = normal(rng);
    const Eigen::VectorXd grad = obj.gradient(beta);
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      Eigen::VectorXd up = beta, down = beta;
      up[k] += h;
      down[k] -= h;
      const double fd = (obj.value(up) - obj.value(down)) / (2 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(1.0, std::abs(grad[k])));
    }
    // Every phi built from the basis satisfies the constraints.
    CHECK(obj.constraints().max_residual(obj.phi(beta)) < 1e-10);
  }
}

TEST_CASE("fit: Hessian agrees with differenced gradients") {
  std::mt19937_64 rng(15);
  const auto data = sample_joint(random_table(rng, {2, 3, 2}), 500, 8);
  ContextualStructure s(triangle());
  s.add_element(make_edge(0, 2), 2);
  const auto target = fitting_target(empirical_joint(data), FitOptions{});
  const LikelihoodObjective obj(s, target, static_cast<double>(data.n()));
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(obj.dimension()), 0.1);
  Eigen::VectorXd g;
  Eigen::MatrixXd hess;
  obj.evaluate(beta, &g, &hess);
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    Eigen::VectorXd up = beta, down = beta;
    up[k] += h;
    down[k] -= h;
    const Eigen::VectorXd col = (obj.gradient(up) - obj.gradient(down)) / (2 * h);
    CHECK((col - hess.col(k)).norm() <= 1e-4 * std::max(1.0, col.norm()));
  }
}

TEST_CASE("fit: sampling round trip") {
  std::mt19937_64 rng(10);
  const auto truth = random_table(rng, {2, 2, 2});
  const auto data = sample_joint(truth, 100000, 1);
  const auto fitted = joint_of(fit_mle(data, ContextualStructure(triangle())).model);
  CHECK(testing::total_variation(fitted, truth) < 0.02);
}

TEST_CASE("fit: zero cells are handled by smoothing") {
  const auto data = testing::dataset_from_rows({{0, 0}, {0, 0}, {1, 1}}, {2, 2});
  UndirectedGraph g(2);
  g.add_edge(0, 1);
  const auto fit = fit_mle(data, ContextualStructure(g));
  const auto t = joint_of(fit.model);
  for (double p : t.probabilities) CHECK(p > 0.0);
  CHECK(fit.log_lik == doctest::Approx(2 * std::log(2.0 / 3) + std::log(1.0 / 3)).epsilon(1e-4));
}

TEST_CASE("fit: shape mismatch and non-convergence") {
  const auto data = testing::dataset_from_rows({{0, 1}, {1, 0}}, {2, 2});
  CHECK_THROWS_AS(fit_mle(data, ContextualStructure(UndirectedGraph(3))), std::invalid_argument);
  std::mt19937_64 rng(1);
  const auto big = sample_joint(random_table(rng, {2, 2, 2}), 400, 4);
  FitOptions opt;
  opt.max_iter = 1;
  opt.tolerance = 1e-14;
  try {
    fit_mle(big, ContextualStructure(triangle()), opt);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.gradient_norm() > 0.0);
  }
}

TEST_CASE("mean log probability") {
  const JointTable t{{2}, {0.25, 0.75}};
  const auto data = testing::dataset_from_rows({{0}, {1}}, {2});
  CHECK(mean_log_probability(t, data) == doctest::Approx(0.5 * (std::log(0.25) + std::log(0.75))));
}

}  // TEST_SUITE
