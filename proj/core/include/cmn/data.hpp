#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cmn {

inline constexpr std::size_t kDefaultTableCap = std::size_t{1} << 22;

// n complete observations of d categorical variables, stored row-major.
// Column j holds codes in {0, ..., cardinalities[j]-1}.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<int> values, std::vector<int> cardinalities,
          std::vector<std::string> variable_names = {},
          std::vector<std::vector<std::string>> levels = {});

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return cardinalities_.size(); }

  std::span<const int> row(std::size_t i) const {
    return {values_.data() + i * d(), d()};
  }
  int at(std::size_t i, std::size_t j) const { return values_[i * d() + j]; }

  const std::vector<int>& values() const noexcept { return values_; }
  const std::vector<int>& cardinalities() const noexcept { return cardinalities_; }
  const std::vector<std::string>& variable_names() const noexcept { return names_; }
  // levels[j][c] is the original label of code c in column j.
  const std::vector<std::vector<std::string>>& levels() const noexcept { return levels_; }

  // Rows listed in `indices`, keeping cardinalities and metadata.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<int> values_;
  std::vector<int> cardinalities_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> levels_;
  std::size_t n_ = 0;
};

struct VariableSchema {
  std::string name;
  int cardinality = 0;
};

// Sidecar schema: {"variables": [{"name": "a", "cardinality": 2}, ...]}.
std::vector<VariableSchema> load_schema(const std::filesystem::path& path);

struct CsvOptions {
  bool has_header = false;
  std::optional<std::vector<VariableSchema>> schema;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

// Writes integer codes with a header of variable names.
std::string to_csv(const Dataset& data);

struct FoldPlan {
  std::vector<int> fold_assignment;
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> train_indices(int fold) const;
};

FoldPlan make_folds(std::size_t n, int k, std::uint64_t seed);

// Dense distribution over the product space, row-major (variable 0 most
// significant).
struct JointTable {
  std::vector<int> cardinalities;
  std::vector<double> probabilities;

  std::size_t cells() const noexcept { return probabilities.size(); }
};

// Number of cells of the product space, or CapacityError above `cap`.
std::size_t table_size(std::span<const int> cardinalities, std::size_t cap = kDefaultTableCap);

// Throws std::invalid_argument unless entries are nonnegative and sum to 1
// within 1e-12.
void validate_joint(const JointTable& table, std::size_t cap = kDefaultTableCap);

Dataset sample_joint(const JointTable& table, std::size_t n, std::uint64_t seed,
                     std::size_t cap = kDefaultTableCap);
JointTable empirical_joint(const Dataset& data, std::size_t cap = kDefaultTableCap);

// Row-major flat index of a configuration, and the inverse.
std::size_t flat_index(std::span<const int> config, std::span<const int> cardinalities);
void unflatten(std::size_t index, std::span<const int> cardinalities, std::span<int> out);

// Seeded randomness. The engine is std::mt19937_64, whose output sequence is
// fixed by the C++ standard; the conversions below are done by hand so that
// samples are bit-identical across standard libraries.
namespace rng {
using Engine = std::mt19937_64;
// Uniform double in [0, 1) from the top 53 bits.
double uniform01(Engine& engine);
// Uniform integer in [0, bound) by rejection; bound > 0.
std::uint64_t below(Engine& engine, std::uint64_t bound);
// SplitMix64 finaliser applied to (seed, stream); used to derive sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
}  // namespace rng

}  // namespace cmn
