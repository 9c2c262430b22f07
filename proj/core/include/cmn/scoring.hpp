#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/lru_cache.hpp"
#include "cmn/model.hpp"

namespace cmn {

struct ScoreConfig {
  double alpha = 0.5;        // Dirichlet pseudo-count per cell (Jeffreys)
  double kappa = 1.0;        // context prior strength in (0, 1]
  bool kappa_is_epsilon = false;  // contexts forbidden outright

  static ScoreConfig epsilon(double alpha = 0.5) { return {alpha, 1.0, true}; }
  // std::invalid_argument unless alpha > 0 and 0 < kappa <= 1.
  void validate() const;
};

// n_ijl and n_jl over the classes of one node's blanket partition.
struct ClassCounts {
  int node = 0;
  std::uint32_t q = 0;
  int r = 0;
  std::vector<std::uint32_t> counts;  // q x r, row-major
  std::vector<std::uint32_t> totals;  // q

  std::uint32_t at(std::uint32_t l, int x) const { return counts[l * static_cast<std::size_t>(r) + x]; }
};

ClassCounts class_counts(const Dataset& data, const BlanketPartition& partition);

// Log of the Dirichlet-multinomial marginal of the node's conditional
// likelihood, summed over classes.
double local_log_mpl(const ClassCounts& counts, const ScoreConfig& config);

struct MplBreakdown {
  double total = 0.0;
  std::vector<double> per_node;
};

MplBreakdown log_mpl(const Dataset& data, const ContextualStructure& s, const ScoreConfig& config);

// (r_i - 1)(r_j - 1): prior exponent contributed by one element of C(i, j).
double context_prior_exponent(Edge e, std::span<const int> cards);

// Unnormalised log p(C | G). -infinity for any non-empty context under
// kappa_is_epsilon.
double log_context_prior(const ContextualStructure& s, std::span<const int> cards,
                         const ScoreConfig& config);

double total_score(const Dataset& data, const ContextualStructure& s, const ScoreConfig& config);

double bic(double log_lik, double dimension, std::size_t n);
double sbic(double log_lik, double dimension, std::size_t n);

// Node-wise MPL evaluator with two caches: blanket histograms keyed by
// (node, mb) and local scores keyed by (node, mb, C(node)). Safe for
// concurrent use; results do not depend on cache state.
class LocalScorer {
 public:
  LocalScorer(const Dataset& data, ScoreConfig config, std::size_t cache_capacity = 1 << 16);

  const Dataset& data() const noexcept { return *data_; }
  const ScoreConfig& config() const noexcept { return config_; }

  double local(const ContextualStructure& s, int node);
  double log_mpl(const ContextualStructure& s);
  double log_prior(const ContextualStructure& s) const;
  double total(const ContextualStructure& s);

  std::size_t cache_hits() const { return scores_.hits(); }
  std::size_t cache_misses() const { return scores_.misses(); }

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<std::int32_t>& key) const noexcept;
  };
  using Histogram = std::shared_ptr<const std::vector<std::uint32_t>>;

  Histogram histogram(int node, const std::vector<int>& blanket);

  const Dataset* data_;
  ScoreConfig config_;
  LruCache<std::vector<std::int32_t>, double, KeyHash> scores_;
  LruCache<std::vector<std::int32_t>, Histogram, KeyHash> histograms_;
};

}  // namespace cmn
