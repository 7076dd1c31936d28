#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "parahom/config.hpp"
#include "parahom/error.hpp"
#include "parahom/report.hpp"

using namespace parahom;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // sentinel: nothing thrown
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config resolves defaults") {
  const auto c = parse_config("problem.k = 2\nproblem.coefficient = sep-trig\n");
  CHECK(c.problem.d == 1);
  REQUIRE(c.problem.k.size() == 1);
  CHECK(c.problem.k[0] == 2.0);
  REQUIRE(c.problem.params.size() == 1);
  CHECK(c.problem.params[0] == 0.5);
  CHECK(c.ladders.eps.front() == 0.125);
  CHECK(c.harness.threads == 1);
  CHECK(c.slope_tol_for(2.0) == 0.15);
  CHECK(c.slope_tol_for(3.0) == 0.2);
}

TEST_CASE("sections, fractions, comments") {
  const auto c = parse_config(
      "# experiment\n"
      "[problem]\n"
      "k = [1, 5/2]   ; two regimes\n"
      "coefficient = \"prod-trig\"\n"
      "[ladders]\n"
      "eps = [1/4, 1/8, 1/16, 1/32]\n"
      "[harness]\n"
      "slope_tol = 0.1\n"
      "[output]\n"
      "plot = true\n");
  CHECK(c.problem.k[1] == 2.5);
  CHECK(c.ladders.eps[3] == 1.0 / 32);
  CHECK(*c.harness.slope_tol == 0.1);
  CHECK(c.slope_tol_for(2.5) == 0.1);
  CHECK(c.output.plot);
}

TEST_CASE("validation") {
  CHECK(code_of("[ladders]\neps = [1/8, 1/2]\n") == ErrorCode::ValidationError);
  CHECK(message_of("[ladders]\neps = [1/8, 1/2]\n").find("ladders.eps") != std::string::npos);
  CHECK(code_of("[ladders]\neps = [1/8, 1/16, 1/20]\n") == ErrorCode::ValidationError);  // not geometric
  CHECK(code_of("[problem]\ncoefficient = marble\n") == ErrorCode::ValidationError);
  CHECK(code_of("[problem]\nk = 0\n") == ErrorCode::ValidationError);
  CHECK(code_of("[harness]\np = 3\n") == ErrorCode::ValidationError);  // p must exceed d + 2
  CHECK(code_of("[problem]\ncolour = red\n") == ErrorCode::ValidationError);
  CHECK(code_of("[extras]\n") == ErrorCode::ValidationError);
  CHECK(code_of("[harness]\nthreads = 0\n") == ErrorCode::ValidationError);
}

TEST_CASE("parse errors carry the line") {
  CHECK(code_of("[problem]\nk = [1, 2\n") == ErrorCode::ParseError);
  CHECK(message_of("[problem]\nd = 1\nk = [1, 2\n").find("line 3") != std::string::npos);
  CHECK(code_of("[problem]\nk = 1\nk = 2\n") == ErrorCode::ParseError);
  CHECK(code_of("[problem\n") == ErrorCode::ParseError);
  CHECK(code_of("{\n\"problem\": {\"k\": [1,]\n}\n") == ErrorCode::ParseError);
  CHECK(message_of("{\n\"problem\":\n {\"k\": [1,]\n}\n").find("line 3") != std::string::npos);
}

TEST_CASE("round trip") {
  auto c = parse_config(
      "[problem]\nd = 2\nk = [1, 2, 3]\ncoefficient = prod-trig\nT = 0.2\n"
      "[ladders]\neps = [1/16, 1/32, 1/64, 1/128]\n[harness]\nseed = 77\nanchor = [0.5, 0.4, 0.1]\n");
  const auto again = parse_config(emit_config(c));
  CHECK(again == c);
  CHECK(parse_config(emit_config(again)) == c);

  // The JSON view is itself a valid config document.
  const auto from_json = parse_config(config_to_json(c, true).dump(2));
  CHECK(from_json == c);
}

TEST_CASE("digest ignores execution settings") {
  auto a = parse_config("problem.k = 2\n");
  auto b = a;
  b.harness.threads = 4;
  b.output.directory = "elsewhere";
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_to_json(a).dump() == config_to_json(b).dump());
  b.problem.T = 0.3;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("report serialization") {
  ojson j;
  j["x"] = 0.1;
  j["bad"] = std::nan("");
  j["v"] = {1.0, 2.5};
  const std::string text = dump_json(j);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("\"bad\": null") != std::string::npos);
  CHECK(text.find("[1, 2.5]") != std::string::npos);
  CHECK(nlohmann::json::parse(text)["x"].get<double>() == 0.1);

  CHECK(to_csv({"a", "b"}, {{1.0, 0.5}}) == "a,b\n1,0.5\n");

  const auto dir = std::filesystem::temp_directory_path() / "parahom_report_test";
  std::filesystem::remove_all(dir);
  write_atomic(dir / "sub" / "r.json", "{}\n");
  std::ifstream f(dir / "sub" / "r.json");
  std::string got((std::istreambuf_iterator<char>(f)), {});
  CHECK(got == "{}\n");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "r.json.tmp"));
  std::filesystem::remove_all(dir);
}
