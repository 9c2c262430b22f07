#include "cmn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cmn/errors.hpp"

namespace cmn {

Dataset::Dataset(std::vector<int> values, std::vector<int> cardinalities,
                 std::vector<std::string> variable_names,
                 std::vector<std::vector<std::string>> levels)
    : values_(std::move(values)),
      cardinalities_(std::move(cardinalities)),
      names_(std::move(variable_names)),
      levels_(std::move(levels)) {
  const std::size_t d = cardinalities_.size();
  if (d == 0) throw std::invalid_argument("dataset needs at least one variable");
  if (values_.size() % d != 0) throw std::invalid_argument("value count is not a multiple of d");
  n_ = values_.size() / d;
  for (std::size_t j = 0; j < d; ++j) {
    if (cardinalities_[j] < 1)
      throw std::invalid_argument("cardinality of variable " + std::to_string(j) + " must be >= 1");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const int v = values_[i * d + j];
      if (v < 0 || v >= cardinalities_[j]) {
        throw std::invalid_argument("value " + std::to_string(v) + " at row " + std::to_string(i) +
                                    ", column " + std::to_string(j) + " out of range");
      }
    }
  }
  if (names_.empty()) {
    for (std::size_t j = 0; j < d; ++j) names_.push_back("X" + std::to_string(j + 1));
  }
  if (names_.size() != d) throw std::invalid_argument("variable_names size differs from d");
  if (!levels_.empty() && levels_.size() != d)
    throw std::invalid_argument("levels size differs from d");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size() * d());
  for (std::size_t i : indices) {
    if (i >= n_) throw std::out_of_range("row index out of range");
    auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Dataset(std::move(out), cardinalities_, names_, levels_);
}

std::vector<VariableSchema> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("schema " + path.string() + ": " + e.what());
  }
  if (!j.contains("variables") || !j["variables"].is_array())
    throw FormatError("schema " + path.string() + " lacks a \"variables\" array");
  std::vector<VariableSchema> out;
  for (const auto& v : j["variables"]) {
    VariableSchema s;
    s.name = v.value("name", "X" + std::to_string(out.size() + 1));
    s.cardinality = v.at("cardinality").get<int>();
    if (s.cardinality < 1) throw FormatError("schema cardinality must be positive");
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_code(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Numeric-looking tokens that are not nonnegative integers (e.g. "-1", "2.5").
bool is_non_categorical(const std::string& t) {
  if (t.empty()) return true;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (options.has_header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw FormatError("CSV input has no data rows");

  const std::size_t d = rows.front().size();
  if (!header.empty() && header.size() != d)
    throw FormatError("header has " + std::to_string(header.size()) + " fields but rows have " +
                      std::to_string(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) {
      throw FormatError("ragged CSV: line " + std::to_string(line_numbers[r]) + " has " +
                        std::to_string(rows[r].size()) + " fields, expected " + std::to_string(d));
    }
  }
  if (options.schema && options.schema->size() != d) {
    throw FormatError("schema declares " + std::to_string(options.schema->size()) +
                      " variables but the data has " + std::to_string(d));
  }

  const std::size_t n = rows.size();
  std::vector<int> values(n * d);
  std::vector<int> cards(d, 0);
  std::vector<std::vector<std::string>> levels(d);
  for (std::size_t j = 0; j < d; ++j) {
    bool coded = true;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& t = rows[r][j];
      if (is_code(t)) continue;
      if (is_non_categorical(t)) {
        throw ParseError("non-categorical token '" + t + "' at line " +
                             std::to_string(line_numbers[r]) + ", column " + std::to_string(j + 1),
                         line_numbers[r], j + 1);
      }
      coded = false;
    }
    if (coded) {
      int max_code = 0;
      for (std::size_t r = 0; r < n; ++r) {
        int v = 0;
        const auto& t = rows[r][j];
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
          throw ParseError("integer code '" + t + "' out of range at line " +
                               std::to_string(line_numbers[r]) + ", column " + std::to_string(j + 1),
                           line_numbers[r], j + 1);
        }
        values[r * d + j] = v;
        max_code = std::max(max_code, v);
      }
      cards[j] = max_code + 1;
      for (int c = 0; c < cards[j]; ++c) levels[j].push_back(std::to_string(c));
    } else {
      std::map<std::string, int> code_of;
      for (std::size_t r = 0; r < n; ++r) {
        const auto& t = rows[r][j];
        auto [it, inserted] = code_of.emplace(t, static_cast<int>(levels[j].size()));
        if (inserted) levels[j].push_back(t);
        values[r * d + j] = it->second;
      }
      cards[j] = static_cast<int>(levels[j].size());
    }
    if (options.schema) {
      const int declared = (*options.schema)[j].cardinality;
      if (cards[j] > declared) {
        for (std::size_t r = 0; r < n; ++r) {
          if (values[r * d + j] >= declared) {
            throw ParseError("value '" + rows[r][j] + "' at line " + std::to_string(line_numbers[r]) +
                                 " exceeds declared cardinality " + std::to_string(declared) +
                                 " of column " + std::to_string(j + 1),
                             line_numbers[r], j + 1);
          }
        }
      }
      cards[j] = declared;
      for (int c = static_cast<int>(levels[j].size()); c < declared; ++c)
        levels[j].push_back(std::to_string(c));
    }
  }

  std::vector<std::string> names;
  if (options.schema) {
    for (const auto& s : *options.schema) names.push_back(s.name);
  } else if (!header.empty()) {
    names = header;
  }
  return Dataset(std::move(values), std::move(cards), std::move(names), std::move(levels));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.d(); ++j) {
    if (j) out += ',';
    out += data.variable_names()[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    auto r = data.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out += ',';
      out += std::to_string(r[j]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignment.size(); ++i)
    if (fold_assignment[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignment.size(); ++i)
    if (fold_assignment[i] != fold) out.push_back(i);
  return out;
}

FoldPlan make_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("fold count must be at least 2");
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("fold count " + std::to_string(k) + " exceeds sample size " +
                                std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Engine engine(seed);
  for (std::size_t i = n; i > 1; --i) {
    auto j = static_cast<std::size_t>(rng::below(engine, i));
    std::swap(perm[i - 1], perm[j]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_assignment.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) plan.fold_assignment[perm[t]] = static_cast<int>(t % k);
  return plan;
}

std::size_t table_size(std::span<const int> cardinalities, std::size_t cap) {
  std::size_t cells = 1;
  for (int r : cardinalities) {
    if (r < 1) throw std::invalid_argument("cardinalities must be positive");
    if (cells > cap / static_cast<std::size_t>(r)) {
      throw CapacityError("joint table exceeds the cap of " + std::to_string(cap) + " cells");
    }
    cells *= static_cast<std::size_t>(r);
  }
  if (cells > cap) throw CapacityError("joint table exceeds the cap of " + std::to_string(cap) + " cells");
  return cells;
}

void validate_joint(const JointTable& table, std::size_t cap) {
  const std::size_t cells = table_size(table.cardinalities, cap);
  if (cells != table.probabilities.size())
    throw std::invalid_argument("joint table has " + std::to_string(table.probabilities.size()) +
                                " entries, expected " + std::to_string(cells));
  double total = 0.0;
  for (double p : table.probabilities) {
    if (!(p >= 0.0)) throw std::invalid_argument("joint table has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("joint table does not sum to 1");
}

Dataset sample_joint(const JointTable& table, std::size_t n, std::uint64_t seed, std::size_t cap) {
  validate_joint(table, cap);
  const auto& p = table.probabilities;
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::size_t last_positive = 0;
  for (std::size_t c = 0; c < p.size(); ++c)
    if (p[c] > 0.0) last_positive = c;

  const std::size_t d = table.cardinalities.size();
  std::vector<int> values(n * d);
  rng::Engine engine(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng::uniform01(engine);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t cell = it == cdf.end() ? last_positive : static_cast<std::size_t>(it - cdf.begin());
    if (cell > last_positive) cell = last_positive;
    unflatten(cell, table.cardinalities, std::span<int>(values.data() + i * d, d));
  }
  return Dataset(std::move(values), table.cardinalities);
}

JointTable empirical_joint(const Dataset& data, std::size_t cap) {
  if (data.n() == 0) throw std::invalid_argument("empirical_joint: empty dataset");
  JointTable t;
  t.cardinalities = data.cardinalities();
  const std::size_t cells = table_size(t.cardinalities, cap);
  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t i = 0; i < data.n(); ++i) ++counts[flat_index(data.row(i), t.cardinalities)];
  t.probabilities.resize(cells);
  const double n = static_cast<double>(data.n());
  for (std::size_t c = 0; c < cells; ++c) t.probabilities[c] = static_cast<double>(counts[c]) / n;
  return t;
}

std::size_t flat_index(std::span<const int> config, std::span<const int> cardinalities) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < config.size(); ++k)
    idx = idx * static_cast<std::size_t>(cardinalities[k]) + static_cast<std::size_t>(config[k]);
  return idx;
}

void unflatten(std::size_t index, std::span<const int> cardinalities, std::span<int> out) {
  for (std::size_t k = cardinalities.size(); k-- > 0;) {
    const auto r = static_cast<std::size_t>(cardinalities[k]);
    out[k] = static_cast<int>(index % r);
    index /= r;
  }
}

namespace rng {

double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::uint64_t below(Engine& engine, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("rng::below: bound must be positive");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return x % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace rng

}  // namespace cmn
