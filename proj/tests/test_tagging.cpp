#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dpaudit/rng.hpp>
#include <dpaudit/tagging.hpp>

#include <optional>
#include <string>
#include <vector>

using namespace dpaudit;

namespace {
const char* kValidJudgeJson = R"([{
  "fee_waiver": "support",
  "first_gen": "support",
  "academic": "support",
  "extracurricular": "penalize",
  "zip": null,
  "school_type": null,
  "holistic": "support",
  "ses_compensates": true,
  "performance_context": null
}])";
}  // namespace

TEST_CASE("parse_tag_record: valid single-element list") {
  auto r = parse_tag_record(kValidJudgeJson, "t1");
  CHECK(r.trial_id == "t1");
  CHECK(r.fee_waiver == TagValue::Support);
  CHECK(r.extracurricular == TagValue::Penalize);
  CHECK(r.zip == TagValue::Null);
  CHECK(r.holistic == TagValue::Support);
  CHECK(r.ses_compensates == true);
  CHECK(r.performance_context == false);
  CHECK(r.parse_note == "ok");
}

TEST_CASE("parse_tag_record: bare object and uppercase values are normalized") {
  auto r = parse_tag_record(
      R"({"fee_waiver": "SUPPORT", "first_gen": "Null", "academic": "Penalize",
          "extracurricular": null, "zip": null, "school_type": null, "holistic": null,
          "ses_compensates": null, "performance_context": true})",
      "t2");
  CHECK(r.fee_waiver == TagValue::Support);
  CHECK(r.first_gen == TagValue::Null);
  CHECK(r.academic == TagValue::Penalize);
  CHECK(r.performance_context == true);
}

TEST_CASE("parse_tag_record: closed vocabulary rejects near-miss strings") {
  CHECK_THROWS_AS(parse_tag_record(R"({"fee_waiver": "supports"})", "t"), TagParseError);
  CHECK_THROWS_AS(parse_tag_record(R"({"academic": 3})", "t"), TagParseError);
  CHECK_THROWS_AS(parse_tag_record("no json at all", "t"), TagParseError);
  CHECK_THROWS_AS(parse_tag_record("[{}, {}]", "t"), TagParseError);
  CHECK_THROWS_AS(parse_tag_record("[[1,2]]", "t"), TagParseError);
}

TEST_CASE("parse_tag_record: false / null / absent flags all mean null") {
  auto f = parse_tag_record(R"({"ses_compensates": false})", "t");
  CHECK(f.ses_compensates == false);
  auto n = parse_tag_record(R"({"ses_compensates": null})", "t");
  CHECK(n.ses_compensates == false);
  auto a = parse_tag_record(R"({})", "t");
  CHECK(a.ses_compensates == false);
  CHECK(a.parse_note.find("missing-keys:") == 0);
  CHECK(a.parse_note.find("fee_waiver") != std::string::npos);
}

TEST_CASE("derive_composite: reference cases") {
  TagRecord t;
  t.academic = TagValue::Support;
  auto c = derive_composite(t);
  CHECK(c.aca_support);
  CHECK_FALSE(c.ses_support);
  CHECK_FALSE(c.aca_penalize);
  CHECK_FALSE(c.ses_penalize);

  TagRecord z;
  z.zip = TagValue::Support;  // zip never contributes
  auto cz = derive_composite(z);
  CHECK_FALSE(cz.ses_support);

  TagRecord mixed;
  mixed.fee_waiver = TagValue::Support;
  mixed.first_gen = TagValue::Penalize;
  auto cm = derive_composite(mixed);
  CHECK(cm.ses_support);
  CHECK(cm.ses_penalize);  // non-exclusive by construction
}

TEST_CASE("derive_composite is monotone in support tags") {
  RngStream rng(42, "monotone");
  const TagValue values[] = {TagValue::Null, TagValue::Support, TagValue::Penalize,
                             TagValue::Discount};
  for (int trial = 0; trial < 200; ++trial) {
    TagRecord t;
    for (const char* f : kTagFeatures)
      tag_field(t, f) = values[rng.uniform_int(0, 3)];
    auto base = derive_composite(t);
    for (const char* f : kTagFeatures) {
      TagRecord more = t;
      tag_field(more, f) = TagValue::Support;
      auto c = derive_composite(more);
      CHECK(c.aca_support >= base.aca_support);
      CHECK(c.ses_support >= base.ses_support);
    }
  }
}

TEST_CASE("krippendorff: perfect agreement is 1") {
  std::vector<std::vector<std::optional<std::string>>> labels = {
      {"a", "b", "a", "b"},
      {"a", "b", "a", "b"},
  };
  CHECK(krippendorff_alpha(labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("krippendorff: hand-computed 3-item example equals 4/9") {
  // raters (a,a,b) and (a,b,b): coincidence o_aa=2, o_ab=o_ba=1, o_bb=2,
  // n_a=n_b=3, n=6; D_o=2/6, D_e=18/30; alpha = 1 - (1/3)/(3/5) = 4/9
  std::vector<std::vector<std::optional<std::string>>> labels = {
      {"a", "a", "b"},
      {"a", "b", "b"},
  };
  CHECK(krippendorff_alpha(labels) == doctest::Approx(4.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("krippendorff: independent random labels score near zero") {
  RngStream rng(9, "alpha0");
  const int n = 20000;
  std::vector<std::vector<std::optional<std::string>>> labels(2);
  for (auto& row : labels) {
    row.resize(n);
    for (auto& v : row) v = rng.bernoulli(0.5) ? "x" : "y";
  }
  CHECK(std::abs(krippendorff_alpha(labels)) <= 0.05);
}

TEST_CASE("krippendorff: missing labels are skipped, degenerate data rejected") {
  std::vector<std::vector<std::optional<std::string>>> labels = {
      {"a", std::nullopt, "b", "a"},
      {"a", "b", std::nullopt, "b"},
      {std::nullopt, "b", "b", "a"},
  };
  CHECK_NOTHROW(krippendorff_alpha(labels));

  std::vector<std::vector<std::optional<std::string>>> same = {
      {"a", "a", "a"},
      {"a", "a", "a"},
  };
  CHECK_THROWS_AS(krippendorff_alpha(same), DegenerateData);
  CHECK_THROWS_AS(krippendorff_alpha({{"a"}, {"a"}}), EmptyInput);  // < 2 items
  CHECK_THROWS_AS(krippendorff_alpha({{"a", "b"}}), EmptyInput);    // < 2 raters
}

TEST_CASE("krippendorff: invariant under relabeling and rater permutation") {
  RngStream rng(15, "alphainv");
  std::vector<std::vector<std::optional<std::string>>> labels(3);
  for (auto& row : labels) {
    row.resize(60);
    for (auto& v : row) {
      const char* cats[] = {"s", "p", "d", "n"};
      v = cats[rng.uniform_int(0, 3)];
    }
  }
  const double base = krippendorff_alpha(labels);

  auto relabeled = labels;
  for (auto& row : relabeled)
    for (auto& v : row) v = "cat_" + *v;  // bijective renaming
  CHECK(krippendorff_alpha(relabeled) == doctest::Approx(base).epsilon(1e-12));

  auto permuted = labels;
  std::swap(permuted[0], permuted[2]);
  CHECK(krippendorff_alpha(permuted) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("tag distribution tables: single record and closure") {
  TagRecord one;
  one.trial_id = "t";
  one.fee_waiver = TagValue::Support;
  auto t = tag_marginal_table({one}, "fee_waiver");
  CHECK(t.percent[2][0] == doctest::Approx(100.0));  // support column
  CHECK(t.percent[0][0] == doctest::Approx(0.0));

  RngStream rng(77, "dist");
  std::vector<TagRecord> rs;
  const TagValue values[] = {TagValue::Null, TagValue::Support, TagValue::Penalize,
                             TagValue::Discount};
  for (int i = 0; i < 157; ++i) {
    TagRecord r;
    r.trial_id = std::to_string(i);
    r.first_gen = values[rng.uniform_int(0, 3)];
    rs.push_back(r);
  }
  auto marginal = tag_marginal_table(rs, "first_gen");
  double total = 0;
  for (const auto& row : marginal.percent) total += row[0];
  CHECK(total == doctest::Approx(100.0).epsilon(1e-9));

  auto cross = tag_cross_table(
      rs, "first_gen",
      [&](const TagRecord& r) { return std::stoi(r.trial_id) % 2 ? "Yes" : "No"; },
      "Tag distribution for first_gen");
  double grand = 0;
  for (const auto& row : cross.percent)
    for (double c : row) grand += c;
  CHECK(grand == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(cross.col_labels == std::vector<std::string>{"null", "discount", "support", "penalize"});
  CHECK(cross.to_csv().find("row,null,discount,support,penalize") != std::string::npos);

  CHECK_THROWS_AS(tag_marginal_table({}, "zip"), EmptyInput);
}

TEST_CASE("tag records round-trip through serialization") {
  RngStream rng(31, "roundtrip");
  const TagValue values[] = {TagValue::Null, TagValue::Support, TagValue::Penalize,
                             TagValue::Discount};
  for (int i = 0; i < 100; ++i) {
    TagRecord r;
    r.trial_id = "exp/inst/" + std::to_string(i);
    for (const char* f : kTagFeatures) tag_field(r, f) = values[rng.uniform_int(0, 3)];
    r.ses_compensates = rng.bernoulli(0.5);
    r.performance_context = rng.bernoulli(0.5);
    r.parse_note = "ok";
    auto back = tag_record_from_json(ojson::parse(to_json(r).dump()));
    CHECK(back == r);
  }
}
