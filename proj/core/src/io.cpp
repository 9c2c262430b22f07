#include "cmn/io.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmn/errors.hpp"

namespace cmn {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string(what) + " lacks \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + " field \"" + key + "\": " + e.what());
  }
}

}  // namespace

std::string model_to_json(const ModelFile& model) {
  const auto& s = model.structure;
  json j;
  j["d"] = s.d();
  j["cardinalities"] = model.cardinalities;
  j["variable_names"] = model.variable_names;
  if (model.kappa) j["kappa"] = *model.kappa;
  if (model.score) j["score"] = *model.score;
  json edges = json::array();
  for (const Edge& e : s.graph().edges()) edges.push_back({e.a, e.b});
  j["edges"] = std::move(edges);
  json contexts = json::array();
  for (const auto& [e, ctx] : s.contexts()) {
    json elements = json::array();
    for (auto code : ctx.elements) elements.push_back(decode_config(code, ctx.cn, model.cardinalities));
    contexts.push_back({{"edge", {e.a, e.b}}, {"cn", ctx.cn}, {"elements", std::move(elements)}});
  }
  j["contexts"] = std::move(contexts);
  if (model.fitted) {
    const auto& m = *model.fitted;
    json phi = json::array();
    for (std::size_t slot = 0; slot < m.phi.size(); ++slot) {
      auto [term, values] = m.layout.locate(slot);
      phi.push_back({{"A", term->nodes}, {"x", values}, {"value", m.phi[slot]}});
    }
    j["phi"] = std::move(phi);
    j["logZ"] = m.log_z;
  }
  if (model.fit) {
    const auto& f = *model.fit;
    j["fit"] = {{"n", f.n}, {"log_lik", f.log_lik}, {"dimension", f.dimension}, {"bic", f.bic}, {"sbic", f.sbic}};
  }
  return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model JSON: ") + e.what());
  }
  ModelFile out;
  const int d = field<int>(j, "d", "model");
  if (d < 1) throw FormatError("model: d must be positive");
  out.cardinalities = field<std::vector<int>>(j, "cardinalities", "model");
  if (out.cardinalities.size() != static_cast<std::size_t>(d))
    throw FormatError("model: " + std::to_string(out.cardinalities.size()) + " cardinalities for d = " +
                      std::to_string(d));
  for (int r : out.cardinalities)
    if (r < 1) throw FormatError("model: cardinalities must be positive");
  if (j.contains("variable_names")) {
    out.variable_names = field<std::vector<std::string>>(j, "variable_names", "model");
    if (out.variable_names.size() != static_cast<std::size_t>(d))
      throw FormatError("model: variable_names does not match d");
  } else {
    for (int k = 0; k < d; ++k) out.variable_names.push_back("X" + std::to_string(k + 1));
  }
  if (j.contains("kappa")) out.kappa = field<std::string>(j, "kappa", "model");
  if (j.contains("score")) out.score = field<double>(j, "score", "model");

  UndirectedGraph g(d);
  for (const auto& e : field<std::vector<std::array<int, 2>>>(j, "edges", "model")) {
    if (e[0] < 0 || e[1] < 0 || e[0] >= d || e[1] >= d || e[0] == e[1])
      throw FormatError("model: invalid edge (" + std::to_string(e[0]) + "," + std::to_string(e[1]) + ")");
    g.add_edge(e[0], e[1]);
  }
  out.structure = ContextualStructure(g);
  if (j.contains("contexts")) {
    for (const auto& c : j.at("contexts")) {
      const auto ends = field<std::array<int, 2>>(c, "edge", "context");
      if (ends[0] < 0 || ends[1] < 0 || ends[0] >= d || ends[1] >= d || ends[0] == ends[1])
        throw FormatError("context: invalid edge");
      const Edge e = make_edge(ends[0], ends[1]);
      if (!g.has_edge(e.a, e.b)) throw FormatError("context on absent edge");
      EdgeContext ctx;
      ctx.cn = field<std::vector<int>>(c, "cn", "context");
      for (const auto& values : field<std::vector<std::vector<int>>>(c, "elements", "context")) {
        if (values.size() != ctx.cn.size()) throw FormatError("context element has the wrong length");
        for (std::size_t k = 0; k < values.size(); ++k) {
          const int node = ctx.cn[k];
          if (node < 0 || node >= d || values[k] < 0 || values[k] >= out.cardinalities[static_cast<std::size_t>(node)])
            throw FormatError("context element out of range");
        }
        ctx.elements.push_back(encode_config(values, ctx.cn, out.cardinalities));
      }
      try {
        out.structure.set_context(e, std::move(ctx));
      } catch (const StructuralError& err) {
        throw FormatError(std::string("context: ") + err.what());
      }
    }
  }
  const auto report = validate_structure(out.structure, out.cardinalities);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw FormatError("invalid context on edge (" + std::to_string(v.edge.a) + "," + std::to_string(v.edge.b) +
                      "): " + v.message);
  }

  if (j.contains("phi")) {
    LogLinearModel m;
    m.structure = out.structure;
    m.layout = ParameterLayout(g, out.cardinalities);
    m.phi.assign(m.layout.size(), 0.0);
    std::vector<bool> seen(m.layout.size(), false);
    for (const auto& p : j.at("phi")) {
      const auto nodes = field<std::vector<int>>(p, "A", "phi entry");
      const auto values = field<std::vector<int>>(p, "x", "phi entry");
      if (nodes.size() != values.size()) throw FormatError("phi entry: A and x differ in length");
      const auto slot = m.layout.index(nodes, values);
      if (!slot) throw FormatError("phi entry does not name a free parameter of the graph");
      m.phi[*slot] = field<double>(p, "value", "phi entry");
      seen[*slot] = true;
    }
    for (bool s : seen)
      if (!s) throw FormatError("phi is incomplete for the graph");
    m.log_z = log_partition(m.layout, m.phi);
    out.fitted = std::move(m);
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    out.fit = FitSummary{field<std::size_t>(f, "n", "fit"), field<double>(f, "log_lik", "fit"),
                         field<std::size_t>(f, "dimension", "fit"), field<double>(f, "bic", "fit"),
                         field<double>(f, "sbic", "fit")};
  }
  return out;
}

ModelFile load_model(const std::filesystem::path& path) { return model_from_json(read_text(path)); }

const LogLinearModel& require_fitted(const ModelFile& model) {
  if (!model.fitted) throw FormatError("model has no parameters (phi); run `cmn fit` on it first");
  return *model.fitted;
}

std::string joint_to_json(const JointTable& table) {
  json j{{"cardinalities", table.cardinalities}, {"probabilities", table.probabilities}};
  return j.dump(2) + "\n";
}

JointTable joint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("joint table JSON: ") + e.what());
  }
  JointTable t;
  t.cardinalities = field<std::vector<int>>(j, "cardinalities", "joint table");
  t.probabilities = field<std::vector<double>>(j, "probabilities", "joint table");
  try {
    validate_joint(t);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("joint table: ") + e.what());
  }
  return t;
}

JointTable load_joint(const std::filesystem::path& path) { return joint_from_json(read_text(path)); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    if (!out) throw FormatError("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cmn
