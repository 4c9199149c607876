#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dpaudit/parsing.hpp>

#include <string>
#include <vector>

using namespace dpaudit;

TEST_CASE("s1: exact and normalized keywords") {
  CHECK(parse_decision_s1("admit").decision == Decision::Admit);
  CHECK(parse_decision_s1(" Reject.\n").decision == Decision::Reject);
  CHECK(parse_decision_s1("ADMIT").decision == Decision::Admit);
  CHECK(parse_decision_s1("'reject'").decision == Decision::Reject);
  CHECK(parse_decision_s1("`admit'").decision == Decision::Admit);
}

TEST_CASE("s1: keyword-scan fallback") {
  auto o = parse_decision_s1("I would admit this applicant.");
  CHECK(o.decision == Decision::Admit);
  CHECK(o.parse_note == "keyword-scan");
  CHECK(parse_decision_s1("Decision: reject, due to weak scores").decision == Decision::Reject);
}

TEST_CASE("s1: rule table over keyword combinations") {
  struct Row {
    const char* text;
    Decision expect;
    const char* note;
  };
  // enumeration of {none, admit-only, reject-only, both} x variations
  const Row rows[] = {
      {"", Decision::Unparseable, "no-keyword"},
      {"maybe", Decision::Unparseable, "no-keyword"},
      {"admitted", Decision::Unparseable, "no-keyword"},      // no word boundary match
      {"rejected and readmitted", Decision::Unparseable, "no-keyword"},
      {"admit", Decision::Admit, "exact"},
      {"reject", Decision::Reject, "exact"},
      {"We admit.", Decision::Admit, "keyword-scan"},
      {"so... admit it is", Decision::Admit, "keyword-scan"},
      {"must reject this time", Decision::Reject, "keyword-scan"},
      {"I would admit, but could also reject", Decision::Unparseable, "both-keywords"},
      {"reject? admit? unclear", Decision::Unparseable, "both-keywords"},
  };
  for (const auto& r : rows) {
    auto o = parse_decision_s1(r.text);
    CHECK_MESSAGE(o.decision == r.expect, r.text);
    CHECK_MESSAGE(o.parse_note == r.note, r.text);
  }
}

TEST_CASE("s2: valid response") {
  auto o = extract_json_s2(R"({"EXPLANATION": "The applicant shows strong merit.", "DECISION": "admit"})");
  CHECK(o.decision == Decision::Admit);
  REQUIRE(o.explanation.has_value());
  CHECK(*o.explanation == "The applicant shows strong merit.");
  CHECK(o.parse_note == "ok");
}

TEST_CASE("s2: embedded block with chatty wrappers") {
  auto o = extract_json_s2(
      "Sure! Here is my answer: {\"EXPLANATION\": \"Weak scores.\", \"DECISION\": \"reject\"} "
      "Hope that helps!");
  CHECK(o.decision == Decision::Reject);
  CHECK(*o.explanation == "Weak scores.");
}

TEST_CASE("s2: failure categories") {
  CHECK(extract_json_s2("no braces here").parse_note == "no-json");
  CHECK(extract_json_s2("{not valid json}").parse_note == "bad-json");
  CHECK(extract_json_s2(R"({"DECISION": "admit"})").parse_note == "missing-key: EXPLANATION");
  CHECK(extract_json_s2(R"({"EXPLANATION": "", "DECISION": "admit"})").parse_note ==
        "missing-key: EXPLANATION");
  CHECK(extract_json_s2(R"({"EXPLANATION": "x"})").parse_note == "missing-key: DECISION");
  CHECK(extract_json_s2(R"({"EXPLANATION": "x", "DECISION": "waitlist"})").parse_note ==
        "bad-decision: 'waitlist'");
  CHECK(extract_json_s2(R"({"EXPLANATION": "x", "DECISION": 1})").parse_note ==
        "missing-key: DECISION");
  // all failures are Unparseable values, not exceptions
  CHECK(extract_json_s2("{truncated").decision == Decision::Unparseable);
}

TEST_CASE("s2: case-insensitive decision, extra keys tolerated with note") {
  auto o = extract_json_s2(R"({"EXPLANATION": "x", "DECISION": "Admit", "NOTE": "hm"})");
  CHECK(o.decision == Decision::Admit);
  CHECK(o.parse_note == "extra-keys");
  auto o2 = extract_json_s2(R"({"EXPLANATION": "x", "DECISION": "'REJECT'"})");
  CHECK(o2.decision == Decision::Reject);
}

TEST_CASE("s2: braces inside the explanation string do not break extraction") {
  auto o = extract_json_s2(R"({"EXPLANATION": "uses {braces} and \"quotes\"", "DECISION": "admit"})");
  CHECK(o.decision == Decision::Admit);
  CHECK(o.explanation->find("{braces}") != std::string::npos);
}

TEST_CASE("unparseable_rate arithmetic") {
  std::vector<ParsedOutcome> all_ok(10);
  for (auto& o : all_ok) o.decision = Decision::Admit;
  CHECK(unparseable_rate(all_ok) == 0.0);

  std::vector<ParsedOutcome> all_bad(3);
  CHECK(unparseable_rate(all_bad) == 1.0);

  // the reference exclusion arithmetic: 1186 of 240,000 is about 0.5%
  std::vector<ParsedOutcome> big(240000);
  for (std::size_t i = 0; i < big.size(); ++i)
    big[i].decision = i < 1186 ? Decision::Unparseable : Decision::Reject;
  CHECK(unparseable_rate(big) == doctest::Approx(1186.0 / 240000.0).epsilon(1e-12));
  CHECK(unparseable_rate(big) < 0.005);

  CHECK_THROWS_AS(unparseable_rate({}), EmptyInput);
}

TEST_CASE("parsing is total and idempotent through serialization") {
  const std::vector<std::string> weird = {
      "", "\n\n", "{{{{", "}}}}", "\"\"\"", "admit reject admit",
      std::string(1000, '{'), "null", "[1,2,3]", "{\"EXPLANATION\": 5, \"DECISION\": \"admit\"}",
      "\xff\xfe garbage bytes \x01\x02", "ADMIT!!!", "rEjEcT...", "{\"DECISION\": null}"};
  for (const auto& t : weird) {
    ParsedOutcome a = parse_decision_s1(t, "x");
    ParsedOutcome b = extract_json_s2(t, "x");
    // round-trip through the canonical serialization
    CHECK(outcome_from_json(ojson::parse(to_json(a).dump())) == a);
    CHECK(outcome_from_json(ojson::parse(to_json(b).dump())) == b);
  }
}
