#include "cmn/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cmn/parallel.hpp"

namespace cmn {

double kl_divergence(const JointTable& p, const JointTable& q) {
  if (p.cardinalities != q.cardinalities || p.cells() != q.cells())
    throw std::invalid_argument("KL divergence needs tables of identical shape");
  double total = 0.0;
  for (std::size_t x = 0; x < p.cells(); ++x) {
    const double px = p.probabilities[x];
    if (px <= 0.0) continue;
    const double qx = q.probabilities[x];
    if (qx <= 0.0) return std::numeric_limits<double>::infinity();
    total += px * std::log(px / qx);
  }
  // Rounding can leave a tiny negative sum for near-identical tables.
  return std::max(total, 0.0);
}

CvResult cross_validated_accuracy(const Dataset& data, const FoldPlan& folds, const LearnConfig& config) {
  if (folds.fold_assignment.size() != data.n())
    throw std::invalid_argument("fold plan covers " + std::to_string(folds.fold_assignment.size()) +
                                " rows but data has " + std::to_string(data.n()));
  const auto k = static_cast<std::size_t>(folds.k);
  CvResult out;
  out.cmn.assign(k, 0.0);
  out.mn.assign(k, 0.0);
  parallel_for(k, config.threads, [&](std::size_t f) {
    const auto train_rows = folds.train_indices(static_cast<int>(f));
    const auto test_rows = folds.test_indices(static_cast<int>(f));
    if (train_rows.empty() || test_rows.empty())
      throw std::invalid_argument("fold " + std::to_string(f) + " leaves an empty training or test set");
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(test_rows);
    const auto grid = config.grid.empty() ? default_kappa_grid(train.n()) : config.grid;
    const SweepResult sweep = kappa_sweep(train, grid, config.alpha, config.search, config.fit);
    out.cmn[f] = mean_log_probability(joint_of(*sweep.best().fitted, config.fit.cap), test);
    out.mn[f] = mean_log_probability(joint_of(*sweep.mn.fitted, config.fit.cap), test);
  });
  for (std::size_t f = 0; f < k; ++f) {
    out.cmn_mean += out.cmn[f];
    out.mn_mean += out.mn[f];
  }
  out.cmn_mean /= static_cast<double>(k);
  out.mn_mean /= static_cast<double>(k);
  return out;
}

ExperimentReport experiment_report(const std::vector<const ScoredModel*>& models,
                                   const std::optional<JointTable>& truth, std::size_t cap) {
  ExperimentReport report;
  std::optional<std::size_t> winner;
  for (const ScoredModel* m : models) {
    ReportRow row;
    row.label = m->label;
    row.kappa = m->kappa.label();
    row.score = m->score;
    row.log_lik = m->log_lik;
    row.sbic = m->sbic;
    row.edges = m->structure.graph().edge_count();
    row.parameters = m->dimension;
    row.context_elements = m->structure.context_element_count();
    if (truth && m->fitted) row.kl = kl_divergence(*truth, joint_of(*m->fitted, cap));
    report.n = std::max(report.n, m->n);
    if (!std::isnan(row.sbic) && (!winner || row.sbic > report.rows[*winner].sbic)) winner = report.rows.size();
    report.rows.push_back(std::move(row));
  }
  if (winner) report.rows[*winner].bic_winner = true;
  return report;
}

namespace {

nlohmann::json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

std::string ExperimentReport::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["models"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json m{{"label", r.label},
                     {"kappa", r.kappa},
                     {"score", number(r.score)},
                     {"log_lik", number(r.log_lik)},
                     {"sbic", number(r.sbic)},
                     {"edges", r.edges},
                     {"parameters", r.parameters},
                     {"context_elements", r.context_elements},
                     {"bic_winner", r.bic_winner}};
    if (r.kl) m["kl"] = number(*r.kl);
    j["models"].push_back(std::move(m));
  }
  return j.dump(2) + "\n";
}

std::string ExperimentReport::to_text() const {
  bool any_kl = false;
  for (const auto& r : rows) any_kl = any_kl || r.kl.has_value();
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-14s %12s %10s %6s %6s %8s", "", "kappa", "score", "sBIC", "edges",
                "params", "contexts");
  out += line;
  if (any_kl) out += "         KL";
  out += "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-4s %-14s %12.4f %10.4f %6zu %6zu %8zu", r.label.c_str(),
                  r.kappa.c_str(), r.score, r.sbic, r.edges, r.parameters, r.context_elements);
    out += line;
    if (any_kl) {
      if (r.kl) {
        std::snprintf(line, sizeof line, " %10.6f", *r.kl);
        out += line;
      } else {
        out += "           ";
      }
    }
    if (r.bic_winner) out += "  *";
    out += "\n";
  }
  return out;
}

}  // namespace cmn
