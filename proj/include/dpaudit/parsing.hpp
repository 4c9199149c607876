#pragma once

#include <cctype>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/errors.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/prompts.hpp>

namespace dpaudit {

enum class Decision { Admit, Reject, Unparseable };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::Admit: return "admit";
    case Decision::Reject: return "reject";
    case Decision::Unparseable: return "unparseable";
  }
  return "?";
}

inline Decision decision_from_string(const std::string& s) {
  if (s == "admit") return Decision::Admit;
  if (s == "reject") return Decision::Reject;
  if (s == "unparseable") return Decision::Unparseable;
  throw ParseError("unknown decision '" + s + "'");
}

// Structured outcome of one trial. Unparseable is a value, not an error;
// parse_note records the category for auditing.
struct ParsedOutcome {
  std::string trial_id;
  Decision decision = Decision::Unparseable;
  std::optional<std::string> explanation;
  std::string parse_note;

  bool operator==(const ParsedOutcome&) const = default;
};

namespace detail {

inline std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Word-boundary occurrence count of a lowercase keyword in lowercase text.
inline bool contains_word(const std::string& text, const std::string& word) {
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end >= text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

}  // namespace detail

// Decision-only responses: normalize and match the bare keyword, falling back
// to a whole-text scan. Zero or both keywords means Unparseable; defaulting
// either way would bias the admit rates this toolkit measures.
inline ParsedOutcome parse_decision_s1(const std::string& raw_text,
                                       const std::string& trial_id = {}) {
  ParsedOutcome out;
  out.trial_id = trial_id;
  std::string t = detail::lowercase(raw_text);
  std::size_t b = 0, e = t.size();
  while (b < e && !detail::is_word_char(t[b])) ++b;
  while (e > b && !detail::is_word_char(t[e - 1])) --e;
  const std::string token = t.substr(b, e - b);
  if (token == "admit") {
    out.decision = Decision::Admit;
    out.parse_note = "exact";
    return out;
  }
  if (token == "reject") {
    out.decision = Decision::Reject;
    out.parse_note = "exact";
    return out;
  }
  const bool has_admit = detail::contains_word(t, "admit");
  const bool has_reject = detail::contains_word(t, "reject");
  if (has_admit && !has_reject) {
    out.decision = Decision::Admit;
    out.parse_note = "keyword-scan";
  } else if (has_reject && !has_admit) {
    out.decision = Decision::Reject;
    out.parse_note = "keyword-scan";
  } else {
    out.decision = Decision::Unparseable;
    out.parse_note = has_admit ? "both-keywords" : "no-keyword";
  }
  return out;
}

namespace detail {

// First balanced top-level {...} block, honoring string literals and escapes.
inline std::optional<std::string> first_brace_block(const std::string& s) {
  std::size_t start = s.find('{');
  if (start == std::string::npos) return std::nullopt;
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return s.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Explanation-mode responses: find the first balanced JSON object, require
// EXPLANATION (non-empty string) and DECISION ("admit"/"reject", any case).
// Extra keys are tolerated with a note. Failures map to categorized
// Unparseable outcomes: no-json / bad-json / missing-key / bad-decision.
inline ParsedOutcome extract_json_s2(const std::string& raw_text,
                                     const std::string& trial_id = {}) {
  ParsedOutcome out;
  out.trial_id = trial_id;
  out.decision = Decision::Unparseable;

  auto block = detail::first_brace_block(raw_text);
  if (!block) {
    out.parse_note = "no-json";
    return out;
  }
  const auto j = nlohmann::json::parse(*block, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    out.parse_note = "bad-json";
    return out;
  }
  if (!j.contains("EXPLANATION") || !j["EXPLANATION"].is_string() ||
      j["EXPLANATION"].get<std::string>().empty()) {
    out.parse_note = "missing-key: EXPLANATION";
    return out;
  }
  if (!j.contains("DECISION") || !j["DECISION"].is_string()) {
    out.parse_note = "missing-key: DECISION";
    return out;
  }
  std::string d = detail::lowercase(j["DECISION"].get<std::string>());
  std::size_t b = 0, e = d.size();
  while (b < e && !detail::is_word_char(d[b])) ++b;
  while (e > b && !detail::is_word_char(d[e - 1])) --e;
  d = d.substr(b, e - b);
  if (d == "admit") {
    out.decision = Decision::Admit;
  } else if (d == "reject") {
    out.decision = Decision::Reject;
  } else {
    out.parse_note = "bad-decision: '" + d + "'";
    return out;
  }
  out.explanation = j["EXPLANATION"].get<std::string>();
  out.parse_note = j.size() > 2 ? "extra-keys" : "ok";
  return out;
}

inline ParsedOutcome parse_outcome(System system, const std::string& raw_text,
                                   const std::string& trial_id = {}) {
  return system == System::S1 ? parse_decision_s1(raw_text, trial_id)
                              : extract_json_s2(raw_text, trial_id);
}

inline double unparseable_rate(const std::vector<ParsedOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("no outcomes to rate");
  std::size_t bad = 0;
  for (const auto& o : outcomes) bad += o.decision == Decision::Unparseable;
  return static_cast<double>(bad) / static_cast<double>(outcomes.size());
}

inline ojson to_json(const ParsedOutcome& o) {
  ojson j;
  j["trial_id"] = o.trial_id;
  j["decision"] = to_string(o.decision);
  if (o.explanation)
    j["explanation"] = *o.explanation;
  else
    j["explanation"] = nullptr;
  j["parse_note"] = o.parse_note;
  return j;
}

inline ParsedOutcome outcome_from_json(const ojson& j) {
  ParsedOutcome o;
  o.trial_id = j.at("trial_id").get<std::string>();
  o.decision = decision_from_string(j.at("decision").get<std::string>());
  if (j.contains("explanation") && !j.at("explanation").is_null())
    o.explanation = j.at("explanation").get<std::string>();
  o.parse_note = j.at("parse_note").get<std::string>();
  return o;
}

inline void write_outcomes_jsonl(const std::string& path,
                                 const std::vector<ParsedOutcome>& os) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& o : os) out << to_json(o).dump() << '\n';
}

inline std::vector<ParsedOutcome> read_outcomes_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<ParsedOutcome> os;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + " line " + std::to_string(lineno) + ": bad JSON");
    os.push_back(outcome_from_json(j));
  }
  return os;
}

}  // namespace dpaudit
