#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmn/data.hpp"
#include "cmn/model.hpp"

namespace cmn {

// All non-empty node subsets inducing complete subgraphs, ordered by size and
// then lexicographically. CapacityError past `limit` subsets.
std::vector<std::vector<int>> complete_subsets(const UndirectedGraph& g, std::size_t limit = 1 << 20);

// One phi-term: phi_A(x_A) for x_A in {1..r_k-1} over k in A. Values with any
// zero coordinate are identically zero and have no slot.
struct Term {
  std::vector<int> nodes;
  std::vector<int> levels;  // r_k - 1 per node
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat indexing of every free phi coordinate of the graph's log-linear model.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  ParameterLayout(const UndirectedGraph& g, std::span<const int> cards);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  const std::vector<int>& cardinalities() const noexcept { return cards_; }
  std::size_t size() const noexcept { return size_; }

  // Slot of phi_A(x_A); nullopt if A is not a support term or any x is 0.
  std::optional<std::size_t> index(std::span<const int> nodes, std::span<const int> values) const;
  // Term and coordinate values of a slot.
  std::pair<const Term*, std::vector<int>> locate(std::size_t slot) const;

  // For each joint cell (row-major), the slots whose indicator is 1.
  void active_slots(std::size_t cell_count, std::vector<std::size_t>& offsets,
                    std::vector<std::uint32_t>& slots) const;

 private:
  std::vector<int> cards_;
  std::vector<Term> terms_;
  std::map<std::vector<int>, std::size_t> term_of_;
  std::size_t size_ = 0;
};

// Homogeneous linear restrictions with +-1 coefficients, one row per
// (edge, context element, non-zero level pair of the edge's endpoints).
struct ConstraintSystem {
  struct Entry {
    std::size_t slot;
    int coefficient;
  };
  ParameterLayout layout;
  std::vector<std::vector<Entry>> rows;
  std::size_t rank = 0;

  // Largest |row . phi|.
  double max_residual(std::span<const double> phi) const;
  // e.g. "phi{3,5}(1,1)+phi{2,3,5}(1,1,1)=0", nodes numbered from `base`.
  std::string format_row(std::size_t row, int base = 1) const;
};

ConstraintSystem constraint_system(const ContextualStructure& s, std::span<const int> cards);

// Exact rank by rational elimination.
std::size_t exact_rank(const std::vector<std::vector<ConstraintSystem::Entry>>& rows, std::size_t columns);

// Orthonormal basis (columns) of the null space of the constraint rows.
Eigen::MatrixXd null_space_basis(const ConstraintSystem& system);

struct DimensionInfo {
  std::size_t unconstrained = 0;  // sum over complete subsets of prod (r_k - 1)
  std::size_t rank = 0;
  std::size_t nominal_restrictions = 0;  // sum |C(i,j)| (r_i-1)(r_j-1)
  std::size_t dimension() const noexcept { return unconstrained - rank; }
};

DimensionInfo dimension_info(const ContextualStructure& s, std::span<const int> cards);
std::size_t model_dimension(const ContextualStructure& s, std::span<const int> cards);

struct LogLinearModel {
  ContextualStructure structure;
  ParameterLayout layout;
  std::vector<double> phi;  // indexed by layout slots
  double log_z = 0.0;

  const std::vector<int>& cardinalities() const noexcept { return layout.cardinalities(); }
  // phi_A(x_A) including the implicit zeros.
  double value(std::span<const int> nodes, std::span<const int> values) const;
};

// Normalised joint table; log_z of the model is ignored and recomputed.
JointTable joint_of(const LogLinearModel& model, std::size_t cap = kDefaultTableCap);
double log_partition(const ParameterLayout& layout, std::span<const double> phi,
                     std::size_t cap = kDefaultTableCap);

struct FitOptions {
  double tolerance = 1e-8;  // on the gradient norm in free coordinates
  int max_iter = 200;
  bool smoothing = true;    // add smoothing_mass spread over all cells
  double smoothing_mass = 1e-6;
  std::size_t cap = kDefaultTableCap;
};

struct FitResult {
  LogLinearModel model;
  double log_lik = 0.0;  // of the (unsmoothed) data
  double gradient_norm = 0.0;
  int iterations = 0;
  std::size_t dimension = 0;
};

// n * sum_x target(x) log p(x) over the constrained parameter space, written
// in coordinates beta of an orthonormal null-space basis: phi = B beta.
class LikelihoodObjective {
 public:
  LikelihoodObjective(const ContextualStructure& s, const JointTable& target, double n,
                      std::size_t cap = kDefaultTableCap);

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
  const ParameterLayout& layout() const noexcept { return system_.layout; }
  const ConstraintSystem& constraints() const noexcept { return system_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }

  std::vector<double> phi(const Eigen::VectorXd& beta) const;
  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
  // Value, gradient and (negative definite) Hessian in one pass.
  double evaluate(const Eigen::VectorXd& beta, Eigen::VectorXd* gradient, Eigen::MatrixXd* hessian) const;

 private:
  ConstraintSystem system_;
  Eigen::MatrixXd basis_;
  std::vector<double> target_;
  double n_;
  std::vector<std::size_t> cell_offsets_;
  std::vector<std::uint32_t> cell_slots_;
  Eigen::VectorXd target_moments_;  // E_target[indicator] per slot
};

// Target distribution used for fitting: the empirical table, optionally mixed
// with smoothing_mass / cells per cell and renormalised.
JointTable fitting_target(const JointTable& empirical, const FitOptions& options);

// Damped Newton ascent; ConvergenceError if the gradient norm has not dropped
// below options.tolerance within options.max_iter iterations.
FitResult fit_mle(const Dataset& data, const ContextualStructure& s, const FitOptions& options = {});

// Mean log-probability per row of `data` under a fitted joint table.
double mean_log_probability(const JointTable& joint, const Dataset& data);

}  // namespace cmn
