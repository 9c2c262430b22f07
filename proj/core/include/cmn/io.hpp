#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/params.hpp"

namespace cmn {

struct FitSummary {
  std::size_t n = 0;
  double log_lik = 0.0;
  std::size_t dimension = 0;
  double bic = 0.0;
  double sbic = 0.0;
};

// On-disk model: structure, variable metadata and, once fitted, phi.
// Nodes are 0-based; context elements are stored as value tuples over cn.
struct ModelFile {
  ContextualStructure structure;
  std::vector<int> cardinalities;
  std::vector<std::string> variable_names;
  std::optional<std::string> kappa;  // grid label the structure was learned with
  std::optional<double> score;       // log MPL plus log prior
  std::optional<LogLinearModel> fitted;
  std::optional<FitSummary> fit;
};

std::string model_to_json(const ModelFile& model);
// FormatError on malformed input or a structure failing validation.
ModelFile model_from_json(const std::string& text);
ModelFile load_model(const std::filesystem::path& path);

// The fitted parameters, or FormatError telling the user to run `fit`.
const LogLinearModel& require_fitted(const ModelFile& model);

std::string joint_to_json(const JointTable& table);
JointTable joint_from_json(const std::string& text);
JointTable load_joint(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file in the same directory and renames it.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cmn
