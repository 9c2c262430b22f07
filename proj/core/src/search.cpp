#include "cmn/search.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cmn/errors.hpp"
#include "cmn/parallel.hpp"

namespace cmn {

std::string Kappa::label() const {
  if (epsilon) return "eps";
  std::ostringstream out;
  out.precision(10);
  out << value;
  return out.str();
}

std::vector<Kappa> default_kappa_grid(std::size_t n) {
  const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
  return {Kappa::eps(), Kappa::of(1.0 / nn), Kappa::of(std::pow(nn, -0.5)), Kappa::of(std::pow(nn, -0.25))};
}

namespace {

struct Candidate {
  Edge edge;
  std::uint32_t code;
  double delta = 0.0;
  bool stale = true;
};

bool touches(Edge a, Edge b) { return a.a == b.a || a.a == b.b || a.b == b.a || a.b == b.b; }

void check_delta(LocalScorer& scorer, const ContextualStructure& s, double expected) {
  const double full = scorer.log_mpl(s) + scorer.log_prior(s);
  if (std::abs(full - expected) > 1e-9 * std::max(1.0, std::abs(full))) {
    throw std::logic_error("incremental score " + std::to_string(expected) + " differs from recomputed " +
                           std::to_string(full));
  }
}

}  // namespace

ContextualStructure context_hill_climb(LocalScorer& scorer, const UndirectedGraph& g,
                                       const SearchOptions& options) {
  ContextualStructure s(g);
  const ScoreConfig& config = scorer.config();
  if (config.kappa_is_epsilon) return s;

  const auto& cards = scorer.data().cardinalities();
  const double log_kappa = std::log(config.kappa);

  std::vector<Candidate> candidates;
  std::map<Edge, std::size_t> space_of;
  for (const Edge& e : g.edges()) {
    const auto cn = common_neighbors(g, e.a, e.b);
    if (cn.empty()) continue;
    const std::size_t space = outcome_count(cn, cards);
    if (space < 2) continue;  // the only element would erase the edge
    space_of[e] = space;
    for (std::uint32_t code = 0; code < space; ++code) candidates.push_back({e, code});
  }
  if (candidates.empty()) return s;

  std::vector<double> local(static_cast<std::size_t>(g.d()));
  for (int j = 0; j < g.d(); ++j) local[static_cast<std::size_t>(j)] = scorer.local(s, j);
  double score = scorer.log_mpl(s);

  while (true) {
    Candidate* best = nullptr;
    for (auto& c : candidates) {
      const EdgeContext* ctx = s.context(c.edge);
      if (ctx != nullptr && (ctx->contains(c.code) || ctx->elements.size() + 1 >= space_of[c.edge])) continue;
      if (c.stale) {
        ContextualStructure trial = s;
        trial.add_element(c.edge, c.code);
        c.delta = scorer.local(trial, c.edge.a) + scorer.local(trial, c.edge.b) -
                  local[static_cast<std::size_t>(c.edge.a)] - local[static_cast<std::size_t>(c.edge.b)] +
                  context_prior_exponent(c.edge, cards) * log_kappa;
        c.stale = false;
      }
      if (c.delta > options.tie_threshold && (best == nullptr || c.delta > best->delta)) best = &c;
    }
    if (best == nullptr) break;

    const Edge changed = best->edge;
    s.add_element(changed, best->code);
    score += best->delta;
    local[static_cast<std::size_t>(changed.a)] = scorer.local(s, changed.a);
    local[static_cast<std::size_t>(changed.b)] = scorer.local(s, changed.b);
    for (auto& c : candidates)
      if (touches(c.edge, changed)) c.stale = true;
    if (options.verify_deltas) check_delta(scorer, s, score);
#ifndef NDEBUG
    else
      check_delta(scorer, s, score);
#endif
  }
  return s;
}

ContextualStructure context_hill_climb(const Dataset& data, const UndirectedGraph& g, const ScoreConfig& config,
                                       const SearchOptions& options) {
  LocalScorer scorer(data, config, options.cache_capacity);
  return context_hill_climb(scorer, g, options);
}

ScoredModel graph_hill_climb(const Dataset& data, const ScoreConfig& config, const SearchOptions& options) {
  config.validate();
  LocalScorer scorer(data, config, options.cache_capacity);
  const int d = static_cast<int>(data.d());
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 10 * d * d;

  ContextualStructure incumbent{UndirectedGraph(d)};
  double incumbent_score = scorer.total(incumbent);
  ScoredModel out;
  out.trace.push_back(incumbent_score);

  constexpr double kInfeasible = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto neighbours = neighbor_graphs(incumbent.graph());
    std::vector<ContextualStructure> structures(neighbours.size());
    std::vector<double> scores(neighbours.size(), kInfeasible);
    parallel_for(neighbours.size(), options.threads, [&](std::size_t k) {
      try {
        structures[k] = context_hill_climb(scorer, neighbours[k], options);
        scores[k] = scorer.total(structures[k]);
      } catch (const CapacityError&) {
        scores[k] = kInfeasible;  // blanket too large to enumerate
      }
    });
    std::size_t best = neighbours.size();
    double best_score = incumbent_score;
    for (std::size_t k = 0; k < neighbours.size(); ++k) {
      if (scores[k] > best_score + options.tie_threshold) {
        best = k;
        best_score = scores[k];
      }
    }
    if (best == neighbours.size()) break;
    incumbent = std::move(structures[best]);
    incumbent_score = best_score;
    out.trace.push_back(incumbent_score);
  }

  out.kappa = {config.kappa_is_epsilon, config.kappa};
  out.label = config.kappa_is_epsilon ? "MN" : "CMN";
  out.structure = std::move(incumbent);
  out.log_mpl = scorer.log_mpl(out.structure);
  out.log_prior = scorer.log_prior(out.structure);
  out.score = out.log_mpl + out.log_prior;
  out.n = data.n();
  out.dimension = model_dimension(out.structure, data.cardinalities());
  return out;
}

void fit_scored_model(ScoredModel& model, const Dataset& data, const FitOptions& options) {
  FitResult fit = fit_mle(data, model.structure, options);
  model.n = data.n();
  model.log_lik = fit.log_lik;
  model.dimension = fit.dimension;
  model.bic = bic(fit.log_lik, static_cast<double>(fit.dimension), data.n());
  model.sbic = model.bic / static_cast<double>(data.n());
  model.fitted = std::move(fit.model);
}

SweepResult kappa_sweep(const Dataset& data, const std::vector<Kappa>& grid, double alpha,
                        const SearchOptions& search, const FitOptions& fit) {
  if (grid.empty()) throw std::invalid_argument("kappa grid is empty");
  SweepResult result;
  result.models.resize(grid.size());
  std::optional<std::size_t> eps_index;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    result.models[k] = graph_hill_climb(data, grid[k].config(alpha), search);
    fit_scored_model(result.models[k], data, fit);
    if (grid[k].epsilon && !eps_index) eps_index = k;
  }
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (result.models[k].bic > result.models[result.selected].bic) result.selected = k;

  if (eps_index) {
    result.mn = result.models[*eps_index];
  } else {
    result.mn = graph_hill_climb(data, ScoreConfig::epsilon(alpha), search);
    fit_scored_model(result.mn, data, fit);
  }
  result.mn.label = "MN";
  return result;
}

}  // namespace cmn
