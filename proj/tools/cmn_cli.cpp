// cmn: learn, fit, sample and evaluate contextual Markov networks.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmn/data.hpp"
#include "cmn/errors.hpp"
#include "cmn/eval.hpp"
#include "cmn/io.hpp"
#include "cmn/search.hpp"
#include "cmn/synthetic.hpp"

namespace {

constexpr int kUsageExit = 2;
constexpr int kCapacityExit = 3;

// Sub-seed streams split off the single --seed.
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kFoldStream = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataFlags {
  std::string path;
  bool no_header = false;
  std::string schema;
};

struct LearnFlags {
  std::vector<std::string> kappa;
  double alpha = 0.5;
  unsigned threads = 1;
  int max_iter = 0;
  double tol = 1e-8;
  std::size_t cap = cmn::kDefaultTableCap;
  std::uint64_t seed = 0;
  bool no_smoothing = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& f, bool required) {
  auto* opt = cmd->add_option("--data", f.path, "CSV file of categorical observations");
  if (required) opt->required();
  cmd->add_flag("--no-header", f.no_header, "the CSV has no header row");
  cmd->add_option("--schema", f.schema, "JSON schema fixing variable names and cardinalities");
}

void add_learn_flags(CLI::App* cmd, LearnFlags& f) {
  cmd->add_option("--kappa", f.kappa, "context prior grid point; repeatable, `eps` forbids contexts");
  cmd->add_option("--alpha", f.alpha, "Dirichlet pseudo-count")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::Range(1u, 256u));
  cmd->add_option("--max-iter", f.max_iter, "graph search step limit (0: 10 d^2)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--tol", f.tol, "gradient-norm tolerance of the parameter fit")->check(CLI::PositiveNumber);
  cmd->add_option("--cap", f.cap, "largest joint table the fitter may build")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_flag("--no-smoothing", f.no_smoothing, "fit the raw empirical table without the 1e-6 floor");
}

cmn::Dataset read_data(const DataFlags& f, const std::optional<cmn::ModelFile>& model = std::nullopt) {
  cmn::CsvOptions options;
  options.has_header = !f.no_header;
  if (!f.schema.empty()) {
    options.schema = cmn::load_schema(f.schema);
  } else if (model) {
    std::vector<cmn::VariableSchema> schema;
    for (std::size_t k = 0; k < model->cardinalities.size(); ++k)
      schema.push_back({model->variable_names[k], model->cardinalities[k]});
    options.schema = std::move(schema);
  }
  return cmn::load_csv(f.path, options);
}

std::vector<cmn::Kappa> parse_grid(const std::vector<std::string>& tokens, std::size_t n) {
  if (tokens.empty()) return cmn::default_kappa_grid(n);
  std::vector<cmn::Kappa> grid;
  for (const auto& t : tokens) {
    if (t == "eps") {
      grid.push_back(cmn::Kappa::eps());
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || !(v > 0.0 && v <= 1.0))
      throw UsageError("--kappa expects `eps` or a number in (0, 1], got `" + t + "`");
    grid.push_back(cmn::Kappa::of(v));
  }
  return grid;
}

cmn::LearnConfig learn_config(const LearnFlags& f, std::size_t n) {
  cmn::LearnConfig c;
  c.grid = f.kappa.empty() ? std::vector<cmn::Kappa>{} : parse_grid(f.kappa, n);
  c.alpha = f.alpha;
  c.search.max_iterations = f.max_iter;
  c.search.threads = f.threads;
  c.fit.tolerance = f.tol;
  c.fit.cap = f.cap;
  c.fit.smoothing = !f.no_smoothing;
  c.threads = f.threads;
  return c;
}

cmn::ModelFile to_file(const cmn::ScoredModel& m, const cmn::Dataset& data) {
  cmn::ModelFile out;
  out.structure = m.structure;
  out.cardinalities = data.cardinalities();
  out.variable_names = data.variable_names();
  out.kappa = m.kappa.label();
  out.score = m.score;
  out.fitted = m.fitted;
  if (m.fitted) out.fit = cmn::FitSummary{m.n, m.log_lik, m.dimension, m.bic, m.sbic};
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    cmn::write_text(path, text);
}

int run_learn(const DataFlags& df, const LearnFlags& lf, const std::string& out, const std::string& mn_out,
              const std::string& report_path) {
  const auto data = read_data(df);
  const auto config = learn_config(lf, data.n());
  const auto grid = config.grid.empty() ? cmn::default_kappa_grid(data.n()) : config.grid;
  const auto sweep = cmn::kappa_sweep(data, grid, config.alpha, config.search, config.fit);

  emit(out, cmn::model_to_json(to_file(sweep.best(), data)));
  if (!mn_out.empty()) emit(mn_out, cmn::model_to_json(to_file(sweep.mn, data)));

  std::vector<const cmn::ScoredModel*> rows;
  for (const auto& m : sweep.models) rows.push_back(&m);
  bool mn_in_grid = false;
  for (const auto& k : grid) mn_in_grid = mn_in_grid || k.epsilon;
  if (!mn_in_grid) rows.push_back(&sweep.mn);
  const auto report = cmn::experiment_report(rows);
  if (!report_path.empty()) cmn::write_text(report_path, report.to_json());
  if (out != "-") std::cout << report.to_text();
  return 0;
}

int run_fit(const DataFlags& df, const std::string& structure_path, const std::string& out, double tol,
            int max_iter, std::size_t cap, bool smoothing) {
  auto model = cmn::load_model(structure_path);
  const auto data = read_data(df, model);
  if (data.d() != model.cardinalities.size())
    throw std::invalid_argument("structure has " + std::to_string(model.cardinalities.size()) +
                                " variables but data has " + std::to_string(data.d()));
  if (data.cardinalities() != model.cardinalities)
    throw std::invalid_argument("data cardinalities differ from those of the structure");
  cmn::FitOptions options;
  options.tolerance = tol;
  options.cap = cap;
  options.smoothing = smoothing;
  if (max_iter > 0) options.max_iter = max_iter;
  auto fit = cmn::fit_mle(data, model.structure, options);
  const double b = cmn::bic(fit.log_lik, static_cast<double>(fit.dimension), data.n());
  model.fit = cmn::FitSummary{data.n(), fit.log_lik, fit.dimension, b, b / static_cast<double>(data.n())};
  model.fitted = std::move(fit.model);
  emit(out, cmn::model_to_json(model));
  return 0;
}

int run_sample(const std::string& model_path, const std::string& generator, std::size_t n, std::uint64_t seed,
               const std::string& out, const std::string& joint_out, std::size_t cap) {
  if (model_path.empty() == generator.empty()) throw UsageError("sample needs exactly one of --model, --generator");
  cmn::JointTable joint;
  std::vector<std::string> names;
  if (!generator.empty()) {
    if (generator != "reference") throw UsageError("unknown generator `" + generator + "`; known: reference");
    joint = cmn::joint_of(cmn::reference_generator(), cap);
  } else {
    const auto model = cmn::load_model(model_path);
    joint = cmn::joint_of(cmn::require_fitted(model), cap);
    names = model.variable_names;
  }
  auto data = cmn::sample_joint(joint, n, cmn::rng::derive_seed(seed, kSampleStream), cap);
  if (!names.empty()) data = cmn::Dataset(data.values(), data.cardinalities(), names);
  emit(out, cmn::to_csv(data));
  if (!joint_out.empty()) cmn::write_text(joint_out, cmn::joint_to_json(joint));
  return 0;
}

int run_eval(const DataFlags& df, const LearnFlags& lf, int folds, const std::string& truth,
             const std::string& model_path, const std::string& out) {
  nlohmann::json result;
  if (!truth.empty() || !model_path.empty()) {
    if (truth.empty() || model_path.empty()) throw UsageError("KL evaluation needs both --truth and --model");
    const auto p = cmn::load_joint(truth);
    const auto model = cmn::load_model(model_path);
    const auto q = cmn::joint_of(cmn::require_fitted(model), lf.cap);
    if (p.cardinalities != q.cardinalities)
      throw std::invalid_argument("truth table has " + std::to_string(p.cardinalities.size()) +
                                  " variables, model has " + std::to_string(q.cardinalities.size()) +
                                  " (or cardinalities differ)");
    const double kl = cmn::kl_divergence(p, q);
    if (std::isinf(kl))
      result["kl"] = "inf";
    else
      result["kl"] = kl;
  }
  if (!df.path.empty()) {
    const auto data = read_data(df);
    if (folds < 2 || static_cast<std::size_t>(folds) > data.n())
      throw UsageError("--folds must lie in [2, n]");
    const auto plan = cmn::make_folds(data.n(), folds, cmn::rng::derive_seed(lf.seed, kFoldStream));
    const auto cv = cmn::cross_validated_accuracy(data, plan, learn_config(lf, data.n()));
    result["folds"] = folds;
    result["seed"] = lf.seed;
    result["cmn"] = {{"per_fold", cv.cmn}, {"mean", cv.cmn_mean}};
    result["mn"] = {{"per_fold", cv.mn}, {"mean", cv.mn_mean}};
  }
  if (result.is_null()) throw UsageError("eval needs --data or --truth with --model");
  emit(out, result.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure learning, fitting and evaluation for contextual Markov networks"};
  app.require_subcommand(1);

  DataFlags learn_data, fit_data, eval_data;
  LearnFlags learn_flags, eval_flags;
  std::string learn_out, learn_mn_out, learn_report;
  auto* learn = app.add_subcommand("learn", "learn a structure by a kappa sweep and fit it");
  add_data_flags(learn, learn_data, true);
  add_learn_flags(learn, learn_flags);
  learn->add_option("--out", learn_out, "selected model JSON (`-` for stdout)")->required();
  learn->add_option("--mn-out", learn_mn_out, "model JSON of the kappa = eps search");
  learn->add_option("--report", learn_report, "report JSON");

  std::string fit_structure, fit_out;
  double fit_tol = 1e-8;
  int fit_max_iter = 0;
  std::size_t fit_cap = cmn::kDefaultTableCap;
  bool fit_no_smoothing = false;
  auto* fit = app.add_subcommand("fit", "fit maximum-likelihood parameters for a structure");
  add_data_flags(fit, fit_data, true);
  fit->add_option("--structure", fit_structure, "model or structure JSON")->required();
  fit->add_option("--out", fit_out, "fitted model JSON (`-` for stdout)")->required();
  fit->add_option("--tol", fit_tol, "gradient-norm tolerance")->check(CLI::PositiveNumber);
  fit->add_option("--max-iter", fit_max_iter, "Newton iteration limit")->check(CLI::NonNegativeNumber);
  fit->add_option("--cap", fit_cap, "largest joint table")->check(CLI::PositiveNumber);
  fit->add_flag("--no-smoothing", fit_no_smoothing, "fit the raw empirical table without the 1e-6 floor");

  std::string sample_model, sample_generator, sample_out, sample_joint;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 0;
  std::size_t sample_cap = cmn::kDefaultTableCap;
  auto* sample = app.add_subcommand("sample", "draw a CSV sample from a fitted model or a built-in generator");
  sample->add_option("--model", sample_model, "fitted model JSON");
  sample->add_option("--generator", sample_generator, "built-in generator name (`reference`)");
  sample->add_option("--n", sample_n, "number of rows")->required()->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "random seed");
  sample->add_option("--out", sample_out, "CSV output (stdout if omitted)");
  sample->add_option("--joint-out", sample_joint, "also write the sampled joint table as JSON");
  sample->add_option("--cap", sample_cap, "largest joint table")->check(CLI::PositiveNumber);

  int eval_folds = 10;
  std::string eval_truth, eval_model, eval_out;
  auto* eval = app.add_subcommand("eval", "cross-validated accuracy and/or KL divergence to a true table");
  add_data_flags(eval, eval_data, false);
  add_learn_flags(eval, eval_flags);
  eval->add_option("--folds", eval_folds, "number of folds");
  eval->add_option("--truth", eval_truth, "true joint table JSON");
  eval->add_option("--model", eval_model, "fitted model JSON");
  eval->add_option("--out", eval_out, "metrics JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    if (*learn) return run_learn(learn_data, learn_flags, learn_out, learn_mn_out, learn_report);
    if (*fit) return run_fit(fit_data, fit_structure, fit_out, fit_tol, fit_max_iter, fit_cap, !fit_no_smoothing);
    if (*sample)
      return run_sample(sample_model, sample_generator, sample_n, sample_seed, sample_out, sample_joint,
                        sample_cap);
    if (*eval) return run_eval(eval_data, eval_flags, eval_folds, eval_truth, eval_model, eval_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const cmn::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kCapacityExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageExit;
}
