#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "cmn/errors.hpp"
#include "cmn/io.hpp"
#include "cmn/synthetic.hpp"
#include "oracles.hpp"

using namespace cmn;

TEST_SUITE("io") {

TEST_CASE("structure JSON round trip") {
  ModelFile m;
  m.structure = testing::six_node_contextual();
  m.cardinalities.assign(6, 3);
  m.variable_names = {"a", "b", "c", "d", "e", "f"};
  m.kappa = "0.5";
  const auto text = model_to_json(m);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["d"] == 6);
  CHECK(j["edges"].size() == 6);
  CHECK(j["contexts"].size() == 2);
  CHECK_FALSE(j.contains("phi"));
  const auto back = model_from_json(text);
  CHECK(back.structure == m.structure);
  CHECK(back.variable_names == m.variable_names);
  CHECK(back.kappa == m.kappa);
  CHECK_FALSE(back.fitted.has_value());
  CHECK_THROWS_AS(require_fitted(back), FormatError);
  try {
    require_fitted(back);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("fit") != std::string::npos);
  }
}

TEST_CASE("fitted model JSON round trip") {
  ModelFile m;
  m.fitted = reference_generator();
  m.structure = m.fitted->structure;
  m.cardinalities.assign(7, 2);
  for (int k = 0; k < 7; ++k) m.variable_names.push_back("X" + std::to_string(k + 1));
  m.fit = FitSummary{100, -400.0, 25, -457.5, -4.575};
  const auto text = model_to_json(m);
  const auto j = nlohmann::json::parse(text);
  CHECK(j.contains("logZ"));
  CHECK(j["phi"][0].contains("A"));
  CHECK(j["phi"][0].contains("x"));
  const auto back = model_from_json(text);
  REQUIRE(back.fitted.has_value());
  CHECK(back.fitted->phi == m.fitted->phi);
  CHECK(back.fit->sbic == -4.575);
  CHECK(model_to_json(back) == text);
}

TEST_CASE("malformed model JSON") {
  CHECK_THROWS_AS(model_from_json("{"), FormatError);
  CHECK_THROWS_AS(model_from_json(R"({"d":2})"), FormatError);
  CHECK_THROWS_AS(model_from_json(R"({"d":2,"cardinalities":[2],"edges":[]})"), FormatError);
  CHECK_THROWS_AS(model_from_json(R"({"d":2,"cardinalities":[2,2],"edges":[[0,0]]})"), FormatError);
  // Context over the full outcome space of its common neighbour.
  CHECK_THROWS_AS(
      model_from_json(
          R"({"d":3,"cardinalities":[2,2,2],"edges":[[0,1],[0,2],[1,2]],"contexts":[{"edge":[0,1],"cn":[2],"elements":[[0],[1]]}]})"),
      FormatError);
  // Stale common neighbours.
  CHECK_THROWS_AS(
      model_from_json(
          R"({"d":3,"cardinalities":[2,2,2],"edges":[[0,1]],"contexts":[{"edge":[0,1],"cn":[2],"elements":[[0]]}]})"),
      FormatError);
}

TEST_CASE("joint table JSON") {
  const JointTable t{{2, 2}, {0.1, 0.2, 0.3, 0.4}};
  const auto back = joint_from_json(joint_to_json(t));
  CHECK(back.cardinalities == t.cardinalities);
  CHECK(back.probabilities == t.probabilities);
  CHECK_THROWS_AS(joint_from_json(R"({"cardinalities":[2],"probabilities":[0.7,0.7]})"), FormatError);
}

TEST_CASE("text files") {
  const auto path = std::filesystem::temp_directory_path() / "cmn_io_test.txt";
  write_text(path, "hello\n");
  CHECK(read_text(path) == "hello\n");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_text(path), FormatError);
}

}  // TEST_SUITE
