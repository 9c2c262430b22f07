#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/search.hpp"

namespace cmn {

// Natural-log D(p || q). Returns +infinity when some cell has p > 0 and q = 0.
// std::invalid_argument on differing shapes.
double kl_divergence(const JointTable& p, const JointTable& q);

struct LearnConfig {
  std::vector<Kappa> grid;  // empty: default_kappa_grid of the training size
  double alpha = 0.5;
  SearchOptions search;
  FitOptions fit;
  unsigned threads = 1;  // concurrent folds
};

struct CvResult {
  std::vector<double> cmn;  // mean test log-probability per fold
  std::vector<double> mn;
  double cmn_mean = 0.0;
  double mn_mean = 0.0;
};

// For every fold: kappa_sweep on the other folds, then the per-row mean
// log-probability of the held-out rows under the selected and the MN model.
CvResult cross_validated_accuracy(const Dataset& data, const FoldPlan& folds, const LearnConfig& config);

struct ReportRow {
  std::string label;
  std::string kappa;
  double score = 0.0;
  double log_lik = 0.0;
  double sbic = 0.0;
  std::optional<double> kl;
  std::size_t edges = 0;
  std::size_t parameters = 0;
  std::size_t context_elements = 0;
  bool bic_winner = false;
};

struct ExperimentReport {
  std::size_t n = 0;
  std::vector<ReportRow> rows;

  std::string to_json() const;
  std::string to_text() const;
};

// One row per model; models without a fitted table get NaN likelihood
// columns. KL is filled when `truth` is given.
ExperimentReport experiment_report(const std::vector<const ScoredModel*>& models,
                                   const std::optional<JointTable>& truth = std::nullopt,
                                   std::size_t cap = kDefaultTableCap);

}  // namespace cmn
