#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/model.hpp"
#include "cmn/params.hpp"
#include "cmn/scoring.hpp"

namespace cmn {

// A point of the context-prior grid; `epsilon` forbids contexts.
struct Kappa {
  bool epsilon = false;
  double value = 1.0;

  static Kappa eps() { return {true, 1.0}; }
  static Kappa of(double v) { return {false, v}; }
  ScoreConfig config(double alpha) const { return {alpha, value, epsilon}; }
  std::string label() const;
};

// {eps, 1/n, n^-1/2, n^-1/4}.
std::vector<Kappa> default_kappa_grid(std::size_t n);

struct SearchOptions {
  int max_iterations = 0;        // graph steps; 0 means 10 * d^2
  double tie_threshold = 1e-9;   // improvements at or below this keep the incumbent
  unsigned threads = 1;          // workers for neighbour-graph evaluation
  std::size_t cache_capacity = 1 << 16;
  bool verify_deltas = false;    // recompute the full score after every accepted step
};

// Greedy context search for a fixed graph, starting from empty contexts.
// Each sweep evaluates every single-element addition that keeps the context
// regular against the sweep's starting structure and accepts the best one;
// after an addition only candidates on edges sharing a node with the changed
// edge are rescored.
ContextualStructure context_hill_climb(LocalScorer& scorer, const UndirectedGraph& g,
                                       const SearchOptions& options = {});
ContextualStructure context_hill_climb(const Dataset& data, const UndirectedGraph& g,
                                       const ScoreConfig& config, const SearchOptions& options = {});

// Selection record for one learned structure. Likelihood fields are NaN
// until fit_scored_model runs.
struct ScoredModel {
  std::string label;
  Kappa kappa;
  ContextualStructure structure;
  double log_mpl = 0.0;
  double log_prior = 0.0;
  double score = 0.0;
  std::size_t n = 0;
  std::size_t dimension = 0;
  double log_lik = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  double sbic = std::numeric_limits<double>::quiet_NaN();
  std::optional<LogLinearModel> fitted;
  std::vector<double> trace;  // incumbent scores of the graph search
};

// Greedy graph search from the empty graph; every neighbour graph gets its
// own context search and the best pair per sweep replaces the incumbent.
ScoredModel graph_hill_climb(const Dataset& data, const ScoreConfig& config, const SearchOptions& options = {});

// Fits MLE parameters and fills log_lik, dimension, bic and sbic.
void fit_scored_model(ScoredModel& model, const Dataset& data, const FitOptions& options = {});

struct SweepResult {
  std::vector<ScoredModel> models;  // one per grid point, grid order
  std::size_t selected = 0;         // argmax BIC, first on ties
  ScoredModel mn;                   // the kappa = eps model

  const ScoredModel& best() const { return models.at(selected); }
};

// std::invalid_argument on an empty grid. If the grid lacks eps, the MN model
// is learned separately and takes no part in selection.
SweepResult kappa_sweep(const Dataset& data, const std::vector<Kappa>& grid, double alpha = 0.5,
                        const SearchOptions& search = {}, const FitOptions& fit = {});

}  // namespace cmn
