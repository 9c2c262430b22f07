#include "cmn/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cmn/errors.hpp"

namespace cmn {

std::vector<std::vector<int>> complete_subsets(const UndirectedGraph& g, std::size_t limit) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  // Extend `current` with larger nodes adjacent to every member.
  auto extend = [&](auto&& self, int from) -> void {
    for (int v = from; v < g.d(); ++v) {
      bool ok = std::all_of(current.begin(), current.end(), [&](int u) { return g.has_edge(u, v); });
      if (!ok) continue;
      current.push_back(v);
      out.push_back(current);
      if (out.size() > limit) throw CapacityError("too many complete subsets to enumerate");
      self(self, v + 1);
      current.pop_back();
    }
  };
  extend(extend, 0);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

ParameterLayout::ParameterLayout(const UndirectedGraph& g, std::span<const int> cards)
    : cards_(cards.begin(), cards.end()) {
  if (cards.size() != static_cast<std::size_t>(g.d()))
    throw std::invalid_argument("cardinality count does not match the graph");
  for (auto& nodes : complete_subsets(g)) {
    Term t;
    t.size = 1;
    for (int v : nodes) {
      const int levels = cards_[static_cast<std::size_t>(v)] - 1;
      t.levels.push_back(levels);
      if (levels > 0 && t.size > (std::size_t{1} << 40) / static_cast<std::size_t>(levels))
        throw CapacityError("log-linear parameter count overflows");
      t.size *= static_cast<std::size_t>(levels);
    }
    if (t.size == 0) continue;
    t.nodes = std::move(nodes);
    t.offset = size_;
    size_ += t.size;
    if (size_ > (std::size_t{1} << 40)) throw CapacityError("log-linear parameter count overflows");
    term_of_.emplace(t.nodes, terms_.size());
    terms_.push_back(std::move(t));
  }
}

std::optional<std::size_t> ParameterLayout::index(std::span<const int> nodes,
                                                  std::span<const int> values) const {
  auto it = term_of_.find(std::vector<int>(nodes.begin(), nodes.end()));
  if (it == term_of_.end()) return std::nullopt;
  const Term& t = terms_[it->second];
  std::size_t slot = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (values[k] < 1 || values[k] > t.levels[k]) return std::nullopt;
    slot = slot * static_cast<std::size_t>(t.levels[k]) + static_cast<std::size_t>(values[k] - 1);
  }
  return t.offset + slot;
}

std::pair<const Term*, std::vector<int>> ParameterLayout::locate(std::size_t slot) const {
  auto it = std::upper_bound(terms_.begin(), terms_.end(), slot,
                             [](std::size_t s, const Term& t) { return s < t.offset; });
  if (it == terms_.begin() || slot >= size_) throw std::out_of_range("parameter slot out of range");
  const Term& t = *(it - 1);
  std::size_t rest = slot - t.offset;
  std::vector<int> values(t.nodes.size());
  for (std::size_t k = t.nodes.size(); k-- > 0;) {
    values[k] = static_cast<int>(rest % static_cast<std::size_t>(t.levels[k])) + 1;
    rest /= static_cast<std::size_t>(t.levels[k]);
  }
  return {&t, std::move(values)};
}

void ParameterLayout::active_slots(std::size_t cell_count, std::vector<std::size_t>& offsets,
                                   std::vector<std::uint32_t>& slots) const {
  offsets.assign(1, 0);
  slots.clear();
  std::vector<int> x(cards_.size());
  for (std::size_t cell = 0; cell < cell_count; ++cell) {
    unflatten(cell, cards_, x);
    for (const Term& t : terms_) {
      std::size_t slot = 0;
      bool active = true;
      for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        const int v = x[static_cast<std::size_t>(t.nodes[k])];
        if (v == 0) {
          active = false;
          break;
        }
        slot = slot * static_cast<std::size_t>(t.levels[k]) + static_cast<std::size_t>(v - 1);
      }
      if (active) slots.push_back(static_cast<std::uint32_t>(t.offset + slot));
    }
    offsets.push_back(slots.size());
  }
}

double ConstraintSystem::max_residual(std::span<const double> phi) const {
  double worst = 0.0;
  for (const auto& row : rows) {
    double s = 0.0;
    for (const auto& e : row) s += e.coefficient * phi[e.slot];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

std::string ConstraintSystem::format_row(std::size_t row, int base) const {
  std::ostringstream out;
  bool first = true;
  for (const auto& e : rows.at(row)) {
    if (!first || e.coefficient < 0) out << (e.coefficient < 0 ? "-" : "+");
    first = false;
    auto [term, values] = layout.locate(e.slot);
    out << "phi{";
    for (std::size_t k = 0; k < term->nodes.size(); ++k) out << (k ? "," : "") << term->nodes[k] + base;
    out << "}(";
    for (std::size_t k = 0; k < values.size(); ++k) out << (k ? "," : "") << values[k];
    out << ")";
  }
  out << "=0";
  return out.str();
}

ConstraintSystem constraint_system(const ContextualStructure& s, std::span<const int> cards) {
  ConstraintSystem sys;
  sys.layout = ParameterLayout(s.graph(), cards);
  for (const auto& [e, ctx] : s.contexts()) {
    const int ri = cards[static_cast<std::size_t>(e.a)];
    const int rj = cards[static_cast<std::size_t>(e.b)];
    const std::size_t m = ctx.cn.size();
    if (m >= 31) throw CapacityError("too many common neighbours");
    for (auto code : ctx.elements) {
      const auto element = decode_config(code, ctx.cn, cards);
      for (int xi = 1; xi < ri; ++xi) {
        for (int xj = 1; xj < rj; ++xj) {
          std::vector<ConstraintSystem::Entry> row;
          for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
            std::vector<std::pair<int, int>> nv{{e.a, xi}, {e.b, xj}};
            bool zero = false;
            for (std::size_t k = 0; k < m; ++k) {
              if (!(mask & (1u << k))) continue;
              if (element[k] == 0) {
                zero = true;
                break;
              }
              nv.emplace_back(ctx.cn[k], element[k]);
            }
            if (zero) continue;
            std::sort(nv.begin(), nv.end());
            std::vector<int> nodes, values;
            for (auto [v, x] : nv) {
              nodes.push_back(v);
              values.push_back(x);
            }
            if (auto slot = sys.layout.index(nodes, values)) row.push_back({*slot, 1});
          }
          std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
          sys.rows.push_back(std::move(row));
        }
      }
    }
  }
  sys.rank = exact_rank(sys.rows, sys.layout.size());
  return sys;
}

namespace {

__extension__ typedef __int128 Int128;

// Exact rational number with 64-bit parts; operands here stay tiny.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) { normalise(); }

  void normalise() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const auto g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  bool zero() const { return num == 0; }
  friend Rational operator-(const Rational& a, const Rational& b) { return make(a.num, a.den, -b.num, b.den); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from128(static_cast<Int128>(a.num) * b.num, static_cast<Int128>(a.den) * b.den);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    return from128(static_cast<Int128>(a.num) * b.den, static_cast<Int128>(a.den) * b.num);
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

 private:
  static Rational make(std::int64_t an, std::int64_t ad, std::int64_t bn, std::int64_t bd) {
    return from128(static_cast<Int128>(an) * bd + static_cast<Int128>(bn) * ad,
                   static_cast<Int128>(ad) * bd);
  }
  static Rational from128(Int128 n, Int128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    Int128 a = n < 0 ? -n : n, b = d;
    while (b != 0) {
      auto t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr Int128 lim = std::numeric_limits<std::int64_t>::max();
    if (n > lim || -n > lim || d > lim) throw std::overflow_error("rational elimination overflow");
    Rational r;
    r.num = static_cast<std::int64_t>(n);
    r.den = static_cast<std::int64_t>(d);
    return r;
  }
};

struct Echelon {
  std::vector<std::size_t> columns;             // compressed column -> slot
  std::vector<std::vector<Rational>> rows;      // reduced rows (pivot rows only)
  std::vector<std::size_t> pivots;              // compressed pivot column per row
};

Echelon reduce(const std::vector<std::vector<ConstraintSystem::Entry>>& input) {
  Echelon ech;
  for (const auto& row : input)
    for (const auto& e : row) ech.columns.push_back(e.slot);
  std::sort(ech.columns.begin(), ech.columns.end());
  ech.columns.erase(std::unique(ech.columns.begin(), ech.columns.end()), ech.columns.end());
  const std::size_t width = ech.columns.size();

  std::vector<std::vector<Rational>> m;
  for (const auto& row : input) {
    std::vector<Rational> dense(width);
    for (const auto& e : row) {
      auto c = static_cast<std::size_t>(std::lower_bound(ech.columns.begin(), ech.columns.end(), e.slot) -
                                        ech.columns.begin());
      dense[c] = dense[c] - Rational(-e.coefficient);
    }
    m.push_back(std::move(dense));
  }
  std::size_t r = 0;
  for (std::size_t c = 0; c < width && r < m.size(); ++c) {
    std::size_t p = r;
    while (p < m.size() && m[p][c].zero()) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[r]);
    const Rational pivot = m[r][c];
    for (auto& v : m[r]) v = v / pivot;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i == r || m[i][c].zero()) continue;
      const Rational f = m[i][c];
      for (std::size_t k = c; k < width; ++k) m[i][k] = m[i][k] - f * m[r][k];
    }
    ech.pivots.push_back(c);
    ++r;
  }
  m.resize(r);
  ech.rows = std::move(m);
  return ech;
}

}  // namespace

std::size_t exact_rank(const std::vector<std::vector<ConstraintSystem::Entry>>& rows, std::size_t) {
  return reduce(rows).pivots.size();
}

Eigen::MatrixXd null_space_basis(const ConstraintSystem& system) {
  const std::size_t total = system.layout.size();
  const Echelon ech = reduce(system.rows);
  std::vector<bool> is_pivot(total, false);
  for (auto c : ech.pivots) is_pivot[ech.columns[c]] = true;
  const std::size_t k = total - ech.pivots.size();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> compressed_of(total, std::numeric_limits<std::size_t>::max());
  for (std::size_t c = 0; c < ech.columns.size(); ++c) compressed_of[ech.columns[c]] = c;

  Eigen::Index col = 0;
  for (std::size_t slot = 0; slot < total; ++slot) {
    if (is_pivot[slot]) continue;
    basis(static_cast<Eigen::Index>(slot), col) = 1.0;
    const auto cc = compressed_of[slot];
    if (cc != std::numeric_limits<std::size_t>::max()) {
      for (std::size_t r = 0; r < ech.rows.size(); ++r) {
        const Rational& v = ech.rows[r][cc];
        if (!v.zero())
          basis(static_cast<Eigen::Index>(ech.columns[ech.pivots[r]]), col) = -v.to_double();
      }
    }
    ++col;
  }
  if (k == 0 || ech.pivots.empty()) return basis;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  return q;
}

DimensionInfo dimension_info(const ContextualStructure& s, std::span<const int> cards) {
  const ConstraintSystem sys = constraint_system(s, cards);
  DimensionInfo info;
  info.unconstrained = sys.layout.size();
  info.rank = sys.rank;
  for (const auto& [e, ctx] : s.contexts()) {
    info.nominal_restrictions += ctx.elements.size() *
                                 static_cast<std::size_t>(cards[static_cast<std::size_t>(e.a)] - 1) *
                                 static_cast<std::size_t>(cards[static_cast<std::size_t>(e.b)] - 1);
  }
  return info;
}

std::size_t model_dimension(const ContextualStructure& s, std::span<const int> cards) {
  return dimension_info(s, cards).dimension();
}

double LogLinearModel::value(std::span<const int> nodes, std::span<const int> values) const {
  std::vector<std::pair<int, int>> nv;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (values[k] == 0) return 0.0;
    nv.emplace_back(nodes[k], values[k]);
  }
  std::sort(nv.begin(), nv.end());
  std::vector<int> n, v;
  for (auto [a, b] : nv) {
    n.push_back(a);
    v.push_back(b);
  }
  auto slot = layout.index(n, v);
  return slot ? phi[*slot] : 0.0;
}

namespace {

// Unnormalised log-potentials per cell.
std::vector<double> cell_energies(const ParameterLayout& layout, std::span<const double> phi, std::size_t cap) {
  const std::size_t cells = table_size(layout.cardinalities(), cap);
  std::vector<double> eta(cells, 0.0);
  std::vector<int> x(layout.cardinalities().size());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    unflatten(cell, layout.cardinalities(), x);
    double s = 0.0;
    for (const Term& t : layout.terms()) {
      std::size_t slot = 0;
      bool active = true;
      for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        const int v = x[static_cast<std::size_t>(t.nodes[k])];
        if (v == 0) {
          active = false;
          break;
        }
        slot = slot * static_cast<std::size_t>(t.levels[k]) + static_cast<std::size_t>(v - 1);
      }
      if (active) s += phi[t.offset + slot];
    }
    eta[cell] = s;
  }
  return eta;
}

double log_sum_exp(const std::vector<double>& eta) {
  const double m = *std::max_element(eta.begin(), eta.end());
  double z = 0.0;
  for (double e : eta) z += std::exp(e - m);
  return m + std::log(z);
}

}  // namespace

double log_partition(const ParameterLayout& layout, std::span<const double> phi, std::size_t cap) {
  return log_sum_exp(cell_energies(layout, phi, cap));
}

JointTable joint_of(const LogLinearModel& model, std::size_t cap) {
  if (model.phi.size() != model.layout.size()) throw std::invalid_argument("phi does not match the layout");
  const auto eta = cell_energies(model.layout, model.phi, cap);
  const double log_z = log_sum_exp(eta);
  JointTable t;
  t.cardinalities = model.layout.cardinalities();
  t.probabilities.resize(eta.size());
  double total = 0.0;
  for (std::size_t c = 0; c < eta.size(); ++c) {
    t.probabilities[c] = std::exp(eta[c] - log_z);
    total += t.probabilities[c];
  }
  for (double& p : t.probabilities) p /= total;
  return t;
}

LikelihoodObjective::LikelihoodObjective(const ContextualStructure& s, const JointTable& target, double n,
                                         std::size_t cap)
    : system_(constraint_system(s, target.cardinalities)), target_(target.probabilities), n_(n) {
  const std::size_t cells = table_size(target.cardinalities, cap);
  if (cells != target_.size()) throw std::invalid_argument("target table has the wrong size");
  basis_ = null_space_basis(system_);
  system_.layout.active_slots(cells, cell_offsets_, cell_slots_);
  target_moments_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(system_.layout.size()));
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t k = cell_offsets_[c]; k < cell_offsets_[c + 1]; ++k) target_moments_[cell_slots_[k]] += target_[c];
}

std::vector<double> LikelihoodObjective::phi(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd theta = basis_ * beta;
  return std::vector<double>(theta.data(), theta.data() + theta.size());
}

double LikelihoodObjective::value(const Eigen::VectorXd& beta) const { return evaluate(beta, nullptr, nullptr); }

Eigen::VectorXd LikelihoodObjective::gradient(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd g;
  evaluate(beta, &g, nullptr);
  return g;
}

double LikelihoodObjective::evaluate(const Eigen::VectorXd& beta, Eigen::VectorXd* gradient,
                                     Eigen::MatrixXd* hessian) const {
  const Eigen::VectorXd theta = basis_ * beta;
  const std::size_t cells = target_.size();
  std::vector<double> eta(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    double s = 0.0;
    for (std::size_t k = cell_offsets_[c]; k < cell_offsets_[c + 1]; ++k) s += theta[cell_slots_[k]];
    eta[c] = s;
  }
  const double log_z = log_sum_exp(eta);
  const double value = n_ * (target_moments_.dot(theta) - log_z);
  if (gradient == nullptr && hessian == nullptr) return value;

  const auto dim = static_cast<Eigen::Index>(system_.layout.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd second;
  if (hessian != nullptr) second = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t c = 0; c < cells; ++c) {
    const double p = std::exp(eta[c] - log_z);
    for (std::size_t k = cell_offsets_[c]; k < cell_offsets_[c + 1]; ++k) {
      mean[cell_slots_[k]] += p;
      if (hessian != nullptr)
        for (std::size_t l = cell_offsets_[c]; l < cell_offsets_[c + 1]; ++l)
          second(cell_slots_[k], cell_slots_[l]) += p;
    }
  }
  if (gradient != nullptr) *gradient = n_ * (basis_.transpose() * (target_moments_ - mean));
  if (hessian != nullptr) {
    second -= mean * mean.transpose();
    *hessian = -n_ * (basis_.transpose() * second * basis_);
  }
  return value;
}

JointTable fitting_target(const JointTable& empirical, const FitOptions& options) {
  JointTable t = empirical;
  if (!options.smoothing) return t;
  const double add = options.smoothing_mass / static_cast<double>(t.cells());
  for (double& p : t.probabilities) p = (p + add) / (1.0 + options.smoothing_mass);
  return t;
}

FitResult fit_mle(const Dataset& data, const ContextualStructure& s, const FitOptions& options) {
  if (static_cast<std::size_t>(s.d()) != data.d()) {
    throw std::invalid_argument("structure has " + std::to_string(s.d()) + " variables but the data has " +
                                std::to_string(data.d()));
  }
  const JointTable empirical = empirical_joint(data, options.cap);
  const LikelihoodObjective objective(s, fitting_target(empirical, options), static_cast<double>(data.n()),
                                      options.cap);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(objective.dimension()));
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double value = objective.evaluate(beta, &grad, &hess);
  int iter = 0;
  while (grad.norm() >= options.tolerance) {
    if (iter >= options.max_iter) {
      throw ConvergenceError("likelihood maximisation did not converge in " + std::to_string(options.max_iter) +
                                 " iterations (gradient norm " + std::to_string(grad.norm()) + ")",
                             grad.norm());
    }
    ++iter;
    // Newton direction on the concave objective; fall back to the gradient.
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(grad);
      if (!step.allFinite() || step.dot(grad) <= 0.0) step = grad;
    } else {
      step = grad;
    }
    const double slope = step.dot(grad);
    double t = 1.0;
    Eigen::VectorXd next_grad;
    Eigen::MatrixXd next_hess;
    Eigen::VectorXd candidate;
    double next_value = 0.0;
    while (true) {
      candidate = beta + t * step;
      next_value = objective.evaluate(candidate, &next_grad, &next_hess);
      // Armijo, or a smaller gradient once the value is flat to rounding.
      if (next_value >= value + 1e-4 * t * slope) break;
      if (next_grad.norm() < grad.norm() && std::abs(next_value - value) <= 1e-12 * (1.0 + std::abs(value))) break;
      t *= 0.5;
      if (t < 1e-16) break;
    }
    if (t < 1e-16) {
      throw ConvergenceError("line search failed (gradient norm " + std::to_string(grad.norm()) + ")",
                             grad.norm());
    }
    beta = candidate;
    value = next_value;
    grad = next_grad;
    hess = next_hess;
  }

  FitResult result;
  result.model.structure = s;
  result.model.layout = objective.layout();
  result.model.phi = objective.phi(beta);
  result.model.log_z = log_partition(result.model.layout, result.model.phi, options.cap);
  result.gradient_norm = grad.norm();
  result.iterations = iter;
  result.dimension = objective.dimension();
  const JointTable fitted = joint_of(result.model, options.cap);
  double ll = 0.0;
  for (std::size_t c = 0; c < fitted.cells(); ++c)
    if (empirical.probabilities[c] > 0.0) ll += empirical.probabilities[c] * std::log(fitted.probabilities[c]);
  result.log_lik = static_cast<double>(data.n()) * ll;
  return result;
}

double mean_log_probability(const JointTable& joint, const Dataset& data) {
  if (joint.cardinalities != data.cardinalities())
    throw std::invalid_argument("joint table and data have different shapes");
  if (data.n() == 0) throw std::invalid_argument("mean_log_probability: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) total += std::log(joint.probabilities[flat_index(data.row(i), joint.cardinalities)]);
  return total / static_cast<double>(data.n());
}

}  // namespace cmn
