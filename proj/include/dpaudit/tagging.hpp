#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/errors.hpp>
#include <dpaudit/parsing.hpp>
#include <dpaudit/profile.hpp>

namespace dpaudit {

enum class TagValue { Null, Support, Penalize, Discount };

inline const char* to_string(TagValue v) {
  switch (v) {
    case TagValue::Null: return "null";
    case TagValue::Support: return "support";
    case TagValue::Penalize: return "penalize";
    case TagValue::Discount: return "discount";
  }
  return "?";
}

// Judge-assigned usage tags for the seven features plus two boolean meta
// flags (false stands for the judge's null).
struct TagRecord {
  std::string trial_id;
  TagValue fee_waiver = TagValue::Null;
  TagValue first_gen = TagValue::Null;
  TagValue academic = TagValue::Null;
  TagValue extracurricular = TagValue::Null;
  TagValue zip = TagValue::Null;
  TagValue school_type = TagValue::Null;
  TagValue holistic = TagValue::Null;
  bool ses_compensates = false;
  bool performance_context = false;
  std::string parse_note;

  bool operator==(const TagRecord&) const = default;
};

inline constexpr std::array<const char*, 7> kTagFeatures = {
    "fee_waiver", "first_gen", "academic", "extracurricular", "zip", "school_type", "holistic"};

inline TagValue& tag_field(TagRecord& r, const std::string& feature) {
  if (feature == "fee_waiver") return r.fee_waiver;
  if (feature == "first_gen") return r.first_gen;
  if (feature == "academic") return r.academic;
  if (feature == "extracurricular") return r.extracurricular;
  if (feature == "zip") return r.zip;
  if (feature == "school_type") return r.school_type;
  if (feature == "holistic") return r.holistic;
  throw ConfigError("unknown tag feature '" + feature + "'");
}

inline TagValue tag_field(const TagRecord& r, const std::string& feature) {
  return tag_field(const_cast<TagRecord&>(r), feature);
}

struct CompositeTags {
  bool aca_support = false;
  bool ses_support = false;
  bool aca_penalize = false;
  bool ses_penalize = false;

  bool operator==(const CompositeTags&) const = default;
};

// Composite markers: academic side from academic/extracurricular, SES side
// from fee_waiver/first_gen only; zip and school_type never contribute.
// Support and penalize markers are non-exclusive.
inline CompositeTags derive_composite(const TagRecord& t) {
  CompositeTags c;
  c.aca_support = t.academic == TagValue::Support || t.extracurricular == TagValue::Support;
  c.ses_support = t.fee_waiver == TagValue::Support || t.first_gen == TagValue::Support;
  c.aca_penalize = t.academic == TagValue::Penalize || t.extracurricular == TagValue::Penalize;
  c.ses_penalize = t.fee_waiver == TagValue::Penalize || t.first_gen == TagValue::Penalize;
  return c;
}

namespace detail {

inline TagValue tag_value_from_json(const nlohmann::json& v, const std::string& key) {
  if (v.is_null()) return TagValue::Null;
  if (!v.is_string())
    throw TagParseError("bad-value: " + key + " must be a string or null");
  std::string s = lowercase(v.get<std::string>());
  if (s == "null") return TagValue::Null;
  if (s == "support") return TagValue::Support;
  if (s == "penalize") return TagValue::Penalize;
  if (s == "discount") return TagValue::Discount;
  throw TagParseError("bad-value: " + key + " = '" + v.get<std::string>() + "'");
}

// Meta flags: true stays true; false, null and absent all mean null.
inline bool flag_from_json(const nlohmann::json& v, const std::string& key) {
  if (v.is_null()) return false;
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    std::string s = lowercase(v.get<std::string>());
    if (s == "true") return true;
    if (s == "false" || s == "null") return false;
  }
  throw TagParseError("bad-value: " + key + " must be true or null");
}

}  // namespace detail

// Parses one judge response: a single JSON object or a one-element list.
// Values are lowercased and validated against the closed vocabulary; unknown
// strings are rejected rather than coerced. Missing tag keys default to null
// with a note.
inline TagRecord parse_tag_record(const std::string& judge_raw_text,
                                  const std::string& trial_id) {
  const auto block_start = judge_raw_text.find_first_of("[{");
  if (block_start == std::string::npos) throw TagParseError("no-json");
  auto j = nlohmann::json::parse(judge_raw_text.substr(block_start), nullptr, false);
  if (j.is_discarded()) {
    // tolerate chatty wrappers around a plain object
    if (auto block = detail::first_brace_block(judge_raw_text))
      j = nlohmann::json::parse(*block, nullptr, false);
    if (j.is_discarded()) throw TagParseError("bad-json");
  }
  const nlohmann::json* obj = &j;
  if (j.is_array()) {
    if (j.size() != 1) throw TagParseError("bad-json: expected a single-element list");
    obj = &j[0];
  }
  if (!obj->is_object()) throw TagParseError("bad-json: expected an object");

  TagRecord r;
  r.trial_id = trial_id;
  std::string missing;
  for (const char* feature : kTagFeatures) {
    if (obj->contains(feature)) {
      tag_field(r, feature) = detail::tag_value_from_json((*obj)[feature], feature);
    } else {
      missing += missing.empty() ? feature : std::string(",") + feature;
    }
  }
  r.ses_compensates =
      obj->contains("ses_compensates") ? detail::flag_from_json((*obj)["ses_compensates"], "ses_compensates") : false;
  r.performance_context = obj->contains("performance_context")
                              ? detail::flag_from_json((*obj)["performance_context"], "performance_context")
                              : false;
  r.parse_note = missing.empty() ? "ok" : "missing-keys: " + missing;
  return r;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha, nominal metric, missing labels allowed.
// ---------------------------------------------------------------------------

// labels[rater][item]; nullopt marks a missing label.
inline double krippendorff_alpha(
    const std::vector<std::vector<std::optional<std::string>>>& labels) {
  const std::size_t n_raters = labels.size();
  if (n_raters < 2) throw EmptyInput("need at least 2 raters");
  const std::size_t n_items = labels[0].size();
  if (n_items < 2) throw EmptyInput("need at least 2 items");
  for (const auto& row : labels)
    if (row.size() != n_items) throw EmptyInput("ragged label matrix");

  std::map<std::string, std::size_t> cat_index;
  for (const auto& row : labels)
    for (const auto& v : row)
      if (v) cat_index.emplace(*v, cat_index.size());
  const std::size_t k = cat_index.size();
  if (k == 0) throw DegenerateData("no labels present");

  // coincidence matrix: each pairable value pair in an item contributes
  // 1/(m_u - 1) to both ordered cells
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  for (std::size_t item = 0; item < n_items; ++item) {
    std::vector<std::size_t> present;
    for (std::size_t r = 0; r < n_raters; ++r)
      if (labels[r][item]) present.push_back(cat_index.at(*labels[r][item]));
    const std::size_t m = present.size();
    if (m < 2) continue;
    const double inc = 1.0 / static_cast<double>(m - 1);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        if (a != b) o[present[a]][present[b]] += inc;
  }

  std::vector<double> n_c(k, 0.0);
  double n_total = 0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < k; ++d) {
      n_c[c] += o[c][d];
    }
  for (double v : n_c) n_total += v;
  if (n_total < 2) throw DegenerateData("fewer than 2 pairable values");

  double d_obs = 0, d_exp = 0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < k; ++d)
      if (c != d) {
        d_obs += o[c][d];
        d_exp += n_c[c] * n_c[d];
      }
  d_obs /= n_total;
  d_exp /= n_total * (n_total - 1.0);
  if (d_exp == 0)
    throw DegenerateData("expected disagreement is zero; alpha undefined");
  return 1.0 - d_obs / d_exp;
}

// ---------------------------------------------------------------------------
// Distribution tables
// ---------------------------------------------------------------------------

struct FreqTable {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::vector<double>> percent;  // of the grand total

  std::string to_csv() const {
    std::string out = title.empty() ? "" : "# " + title + "\n";
    out += "row";
    for (const auto& c : col_labels) out += "," + c;
    out += "\n";
    char buf[32];
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
      out += row_labels[r];
      for (std::size_t c = 0; c < col_labels.size(); ++c) {
        std::snprintf(buf, sizeof buf, ",%.1f", percent[r][c]);
        out += buf;
      }
      out += "\n";
    }
    return out;
  }
};

inline const std::vector<std::string>& tag_value_columns() {
  static const std::vector<std::string> cols{"null", "discount", "support", "penalize"};
  return cols;
}

namespace detail {

inline std::size_t tag_column(TagValue v) {
  switch (v) {
    case TagValue::Null: return 0;
    case TagValue::Discount: return 1;
    case TagValue::Support: return 2;
    case TagValue::Penalize: return 3;
  }
  return 0;
}

}  // namespace detail

// Marginal distribution of one feature's tag values, in percent of records.
inline FreqTable tag_marginal_table(const std::vector<TagRecord>& records,
                                    const std::string& feature) {
  if (records.empty()) throw EmptyInput("no tag records");
  FreqTable t;
  t.title = "Tag distribution for " + feature;
  t.row_labels = tag_value_columns();
  t.col_labels = {"frequency"};
  t.counts.assign(4, std::vector<std::int64_t>(1, 0));
  for (const auto& r : records) t.counts[detail::tag_column(tag_field(r, feature))][0]++;
  t.percent.assign(4, std::vector<double>(1, 0));
  for (std::size_t i = 0; i < 4; ++i)
    t.percent[i][0] = 100.0 * static_cast<double>(t.counts[i][0]) / static_cast<double>(records.size());
  return t;
}

// Cross-tabulation of a feature's tag values against a per-record row label
// (e.g. the profile's first_gen status). Cells are percent of the grand
// total, so the whole table sums to 100.
inline FreqTable tag_cross_table(const std::vector<TagRecord>& records,
                                 const std::string& feature,
                                 const std::function<std::string(const TagRecord&)>& row_of,
                                 const std::string& title) {
  if (records.empty()) throw EmptyInput("no tag records");
  FreqTable t;
  t.title = title;
  t.col_labels = tag_value_columns();
  std::map<std::string, std::vector<std::int64_t>> rows;
  for (const auto& r : records) {
    auto& row = rows[row_of(r)];
    if (row.empty()) row.assign(4, 0);
    row[detail::tag_column(tag_field(r, feature))]++;
  }
  for (auto& [label, counts] : rows) {
    t.row_labels.push_back(label);
    t.counts.push_back(counts);
    std::vector<double> pct(4);
    for (std::size_t i = 0; i < 4; ++i)
      pct[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(records.size());
    t.percent.push_back(std::move(pct));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline ojson to_json(const TagRecord& r) {
  ojson j;
  j["trial_id"] = r.trial_id;
  for (const char* f : kTagFeatures) j[f] = to_string(tag_field(r, f));
  j["ses_compensates"] = r.ses_compensates ? ojson(true) : ojson(nullptr);
  j["performance_context"] = r.performance_context ? ojson(true) : ojson(nullptr);
  auto c = derive_composite(r);
  j["aca_support"] = c.aca_support;
  j["ses_support"] = c.ses_support;
  j["aca_penalize"] = c.aca_penalize;
  j["ses_penalize"] = c.ses_penalize;
  j["parse_note"] = r.parse_note;
  return j;
}

inline TagRecord tag_record_from_json(const ojson& j) {
  TagRecord r;
  r.trial_id = j.at("trial_id").get<std::string>();
  for (const char* f : kTagFeatures)
    tag_field(r, f) = detail::tag_value_from_json(j.at(f), f);
  r.ses_compensates = detail::flag_from_json(j.at("ses_compensates"), "ses_compensates");
  r.performance_context =
      detail::flag_from_json(j.at("performance_context"), "performance_context");
  r.parse_note = j.value("parse_note", "ok");
  return r;
}

inline void write_tags_jsonl(const std::string& path, const std::vector<TagRecord>& rs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : rs) out << to_json(r).dump() << '\n';
}

inline std::vector<TagRecord> read_tags_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<TagRecord> rs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + " line " + std::to_string(lineno) + ": bad JSON");
    rs.push_back(tag_record_from_json(j));
  }
  return rs;
}

}  // namespace dpaudit
