#include "cmn/scoring.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cmn/errors.hpp"

namespace cmn {

namespace {

// glibc's lgamma writes the global signgam; the reentrant variant does not.
double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

std::vector<std::int32_t> local_key(const ContextualStructure& s, int node,
                                    const std::vector<int>& blanket) {
  std::vector<std::int32_t> key;
  key.reserve(2 + blanket.size() * 2);
  key.push_back(node);
  key.push_back(static_cast<std::int32_t>(blanket.size()));
  key.insert(key.end(), blanket.begin(), blanket.end());
  for (int i : blanket) {
    const EdgeContext* ctx = s.context(make_edge(i, node));
    if (ctx == nullptr) continue;
    key.push_back(-1 - i);
    key.push_back(static_cast<std::int32_t>(ctx->cn.size()));
    key.insert(key.end(), ctx->cn.begin(), ctx->cn.end());
    key.push_back(static_cast<std::int32_t>(ctx->elements.size()));
    for (auto c : ctx->elements) key.push_back(static_cast<std::int32_t>(c));
  }
  return key;
}

ClassCounts counts_from_histogram(const std::vector<std::uint32_t>& hist, const BlanketPartition& part,
                                  int r) {
  ClassCounts out;
  out.node = part.node;
  out.q = part.q;
  out.r = r;
  out.counts.assign(static_cast<std::size_t>(part.q) * r, 0);
  out.totals.assign(part.q, 0);
  for (std::size_t b = 0; b < part.class_of.size(); ++b) {
    const auto l = part.class_of[b];
    for (int x = 0; x < r; ++x) {
      const auto c = hist[b * static_cast<std::size_t>(r) + x];
      out.counts[l * static_cast<std::size_t>(r) + x] += c;
      out.totals[l] += c;
    }
  }
  return out;
}

}  // namespace

void ScoreConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw std::invalid_argument("kappa must lie in (0, 1]");
}

ClassCounts class_counts(const Dataset& data, const BlanketPartition& partition) {
  const int r = data.cardinalities()[static_cast<std::size_t>(partition.node)];
  ClassCounts out;
  out.node = partition.node;
  out.q = partition.q;
  out.r = r;
  out.counts.assign(static_cast<std::size_t>(partition.q) * r, 0);
  out.totals.assign(partition.q, 0);
  for (std::size_t row = 0; row < data.n(); ++row) {
    std::size_t b = 0;
    for (std::size_t k = 0; k < partition.blanket.size(); ++k) {
      b = b * static_cast<std::size_t>(partition.blanket_cards[k]) +
          static_cast<std::size_t>(data.at(row, static_cast<std::size_t>(partition.blanket[k])));
    }
    const auto l = partition.class_of[b];
    ++out.counts[l * static_cast<std::size_t>(r) + data.at(row, static_cast<std::size_t>(partition.node))];
    ++out.totals[l];
  }
  return out;
}

double local_log_mpl(const ClassCounts& counts, const ScoreConfig& config) {
  const double a = config.alpha;
  const double a_class = a * counts.r;
  const double lg_a = log_gamma(a);
  const double lg_class = log_gamma(a_class);
  double score = 0.0;
  for (std::uint32_t l = 0; l < counts.q; ++l) {
    if (counts.totals[l] == 0) continue;
    score += lg_class - log_gamma(counts.totals[l] + a_class);
    for (int x = 0; x < counts.r; ++x) {
      const auto c = counts.at(l, x);
      if (c != 0) score += log_gamma(c + a) - lg_a;
    }
  }
  return score;
}

MplBreakdown log_mpl(const Dataset& data, const ContextualStructure& s, const ScoreConfig& config) {
  if (static_cast<std::size_t>(s.d()) != data.d())
    throw std::invalid_argument("structure has " + std::to_string(s.d()) + " nodes but data has " +
                                std::to_string(data.d()) + " variables");
  MplBreakdown out;
  out.per_node.reserve(data.d());
  for (int j = 0; j < s.d(); ++j) {
    const auto part = build_blanket_partition(s, data.cardinalities(), j);
    out.per_node.push_back(local_log_mpl(class_counts(data, part), config));
    out.total += out.per_node.back();
  }
  return out;
}

double context_prior_exponent(Edge e, std::span<const int> cards) {
  return static_cast<double>(cards[static_cast<std::size_t>(e.a)] - 1) *
         static_cast<double>(cards[static_cast<std::size_t>(e.b)] - 1);
}

double log_context_prior(const ContextualStructure& s, std::span<const int> cards,
                         const ScoreConfig& config) {
  double total = 0.0;
  for (const auto& [e, ctx] : s.contexts()) {
    if (ctx.elements.empty()) continue;
    if (config.kappa_is_epsilon) return -std::numeric_limits<double>::infinity();
    total += static_cast<double>(ctx.elements.size()) * context_prior_exponent(e, cards) *
             std::log(config.kappa);
  }
  return total;
}

double total_score(const Dataset& data, const ContextualStructure& s, const ScoreConfig& config) {
  return log_mpl(data, s, config).total + log_context_prior(s, data.cardinalities(), config);
}

double bic(double log_lik, double dimension, std::size_t n) {
  if (n == 0) throw std::invalid_argument("BIC needs n >= 1");
  return log_lik - 0.5 * dimension * std::log(static_cast<double>(n));
}

double sbic(double log_lik, double dimension, std::size_t n) {
  return bic(log_lik, dimension, n) / static_cast<double>(n);
}

std::size_t LocalScorer::KeyHash::operator()(const std::vector<std::int32_t>& key) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (auto v : key) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

LocalScorer::LocalScorer(const Dataset& data, ScoreConfig config, std::size_t cache_capacity)
    : data_(&data), config_(config), scores_(cache_capacity), histograms_(cache_capacity) {
  config_.validate();
}

LocalScorer::Histogram LocalScorer::histogram(int node, const std::vector<int>& blanket) {
  std::vector<std::int32_t> key;
  key.push_back(node);
  key.insert(key.end(), blanket.begin(), blanket.end());
  if (auto hit = histograms_.get(key)) return *hit;

  const auto& cards = data_->cardinalities();
  const int r = cards[static_cast<std::size_t>(node)];
  std::size_t total = 1;
  for (int v : blanket) {
    total *= static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]);
    if (total > kMaxBlanketConfigurations)
      throw CapacityError("Markov blanket of node " + std::to_string(node) + " is too large");
  }
  auto hist = std::make_shared<std::vector<std::uint32_t>>(total * static_cast<std::size_t>(r), 0);
  for (std::size_t row = 0; row < data_->n(); ++row) {
    std::size_t b = 0;
    for (int v : blanket)
      b = b * static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]) +
          static_cast<std::size_t>(data_->at(row, static_cast<std::size_t>(v)));
    ++(*hist)[b * static_cast<std::size_t>(r) + data_->at(row, static_cast<std::size_t>(node))];
  }
  Histogram out = std::move(hist);
  histograms_.put(key, out);
  return out;
}

double LocalScorer::local(const ContextualStructure& s, int node) {
  const auto blanket = s.graph().blanket(node);
  auto key = local_key(s, node, blanket);
  if (auto hit = scores_.get(key)) return *hit;
  const auto hist = histogram(node, blanket);
  const auto part = build_blanket_partition(s, data_->cardinalities(), node);
  const double score = local_log_mpl(
      counts_from_histogram(*hist, part, data_->cardinalities()[static_cast<std::size_t>(node)]), config_);
  scores_.put(std::move(key), score);
  return score;
}

double LocalScorer::log_mpl(const ContextualStructure& s) {
  double total = 0.0;
  for (int j = 0; j < s.d(); ++j) total += local(s, j);
  return total;
}

double LocalScorer::log_prior(const ContextualStructure& s) const {
  return log_context_prior(s, data_->cardinalities(), config_);
}

double LocalScorer::total(const ContextualStructure& s) { return log_mpl(s) + log_prior(s); }

}  // namespace cmn
