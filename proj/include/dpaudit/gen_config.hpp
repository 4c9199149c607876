#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <dpaudit/errors.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

// ---------------------------------------------------------------------------
// Minimal TOML-style reader: `key = value` lines, [section] headers flattened
// to dotted keys, # comments, and (possibly nested, possibly multi-line)
// arrays. Covers exactly what the generator config needs.
// ---------------------------------------------------------------------------

struct TomlValue {
  using Array = std::vector<TomlValue>;
  std::variant<std::int64_t, double, bool, std::string, Array> v;

  bool is_array() const { return std::holds_alternative<Array>(v); }
  const Array& array(const std::string& key) const {
    if (!is_array()) throw ConfigError("expected array for key '" + key + "'");
    return std::get<Array>(v);
  }
  double number(const std::string& key) const {
    if (std::holds_alternative<std::int64_t>(v)) return double(std::get<std::int64_t>(v));
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    throw ConfigError("expected number for key '" + key + "'");
  }
  std::int64_t integer(const std::string& key) const {
    if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
    throw ConfigError("expected integer for key '" + key + "'");
  }
  bool boolean(const std::string& key) const {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    throw ConfigError("expected boolean for key '" + key + "'");
  }
  const std::string& str(const std::string& key) const {
    if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
    throw ConfigError("expected string for key '" + key + "'");
  }
};

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline TomlValue parse_toml_value(const std::string& s, std::size_t& i) {
  skip_ws(s, i);
  if (i >= s.size()) throw ConfigError("missing value");
  char c = s[i];
  if (c == '[') {
    ++i;
    TomlValue::Array arr;
    skip_ws(s, i);
    if (i < s.size() && s[i] == ']') {
      ++i;
      return TomlValue{arr};
    }
    while (true) {
      arr.push_back(parse_toml_value(s, i));
      skip_ws(s, i);
      if (i < s.size() && s[i] == ',') {
        ++i;
        skip_ws(s, i);
        if (i < s.size() && s[i] == ']') { ++i; break; }  // trailing comma
        continue;
      }
      if (i < s.size() && s[i] == ']') {
        ++i;
        break;
      }
      throw ConfigError("malformed array near '" + s.substr(i, 20) + "'");
    }
    return TomlValue{arr};
  }
  if (c == '"') {
    std::string out;
    ++i;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      out += s[i++];
    }
    if (i >= s.size()) throw ConfigError("unterminated string");
    ++i;
    return TomlValue{out};
  }
  // bare token: bool or number
  std::size_t j = i;
  while (j < s.size() && s[j] != ',' && s[j] != ']' && s[j] != ' ' && s[j] != '\t') ++j;
  std::string tok = s.substr(i, j - i);
  i = j;
  if (tok == "true") return TomlValue{true};
  if (tok == "false") return TomlValue{false};
  if (tok.find_first_of(".eE") == std::string::npos ||
      (tok.size() > 1 && (tok[0] == '0' && tok[1] == 'x'))) {
    std::int64_t iv{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (ec == std::errc{} && p == tok.data() + tok.size()) return TomlValue{iv};
  }
  try {
    std::size_t used = 0;
    double dv = std::stod(tok, &used);
    if (used == tok.size()) return TomlValue{dv};
  } catch (...) {
  }
  throw ConfigError("cannot parse value '" + tok + "'");
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline int bracket_balance(const std::string& s) {
  int bal = 0;
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (in_str) continue;
    if (s[i] == '[') ++bal;
    if (s[i] == ']') --bal;
  }
  return bal;
}

}  // namespace detail

inline std::map<std::string, TomlValue> parse_toml_lite(std::istream& in) {
  std::map<std::string, TomlValue> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::strip_comment(line);
    // join continuation lines of a multi-line array
    while (detail::bracket_balance(s) > 0) {
      std::string next;
      if (!std::getline(in, next)) throw ConfigError("unbalanced array at line " + std::to_string(lineno));
      ++lineno;
      s += " " + detail::strip_comment(next);
    }
    std::size_t i = 0;
    detail::skip_ws(s, i);
    if (i >= s.size()) continue;
    if (s[i] == '[') {  // section header (not an array: no '=' before it)
      auto close = s.find(']', i);
      if (close == std::string::npos) throw ConfigError("bad section at line " + std::to_string(lineno));
      section = s.substr(i + 1, close - i - 1);
      continue;
    }
    auto eq = s.find('=', i);
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    std::string key = s.substr(i, eq - i);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
    std::size_t vi = eq + 1;
    TomlValue val = detail::parse_toml_value(s, vi);
    out[section.empty() ? key : section + "." + key] = std::move(val);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator configuration: every distributional knob of the cohort generator.
// ---------------------------------------------------------------------------

struct IncomeBracket {
  double low = 0, high = 0, mode = 0;
  bool operator==(const IncomeBracket&) const = default;
};

// Density knot for the piecewise-linear GPA marginal.
struct DensityKnot {
  double x = 0, w = 0;
  bool operator==(const DensityKnot&) const = default;
};

struct GenConfig {
  std::int64_t cohort_size = 15000;
  std::int64_t subsample_size = 10000;
  std::int64_t subsample_min_cell = 40;
  std::uint64_t master_seed = 90210;

  // Household income, (low, high, mode) per quintile: approximate 2022 US
  // household income quintile brackets, mode at the quintile mean.
  std::array<IncomeBracket, 5> income_brackets{
      IncomeBracket{1000, 30000, 16000}, IncomeBracket{30000, 58000, 44000},
      IncomeBracket{58000, 94000, 76000}, IncomeBracket{94000, 153000, 121000},
      IncomeBracket{153000, 500000, 269000}};

  double sat_income_target_corr = 0.40;
  double gpa_quintile_target_corr = 0.15;
  double corr_tolerance = 0.01;
  int corr_max_iter = 60;

  std::array<double, 5> school_private_prob_by_quintile{0.12, 0.17, 0.24, 0.33, 0.44};
  std::array<double, 5> first_gen_prob_by_quintile{0.55, 0.45, 0.33, 0.22, 0.12};
  double fee_waiver_flip_prob = 0.05;

  int household_size_min = 2;
  int household_size_max = 6;
  // Annual USD eligibility cutoffs indexed by household size (min..max);
  // approximate 185%-of-poverty-line guidelines for 2022.
  std::vector<double> usda_thresholds{33874, 42606, 51338, 60070, 68802};

  std::map<int, std::vector<std::string>> zip_pools;  // quintile -> 5-digit ZIPs
  double zip_match_prob = 0.5;

  // Reported-activity count: Binomial(activity_max, p) with p by quintile
  // plus a private-school bump.
  int activity_max = 10;
  std::array<double, 5> activity_base_prob_by_quintile{0.600, 0.640, 0.675, 0.710, 0.745};
  double activity_private_bonus = 0.05;

  // Leadership/award counts: Binomial(activity, rate * adjustment); the
  // adjustment grows with quintile and private schooling.
  double leadership_rate = 0.15;
  double award_rate = 0.22;
  double rate_quintile_gain = 0.08;
  double rate_private_gain = 0.15;

  // GPA marginal: piecewise-linear density over [1, 5], right-heavy with the
  // mode near 3.9. Placeholder shape — replace via config when a calibrated
  // histogram is available.
  std::vector<DensityKnot> gpa_density{{1.0, 0.05}, {2.0, 0.20}, {2.5, 0.45},
                                       {3.0, 0.80}, {3.5, 1.30}, {3.9, 1.60},
                                       {4.2, 1.35}, {4.6, 0.85}, {5.0, 0.40}};

  // SAT marginal per income quintile: truncated normal, ascending means.
  // Placeholder parameters, replace via config when calibrated bins exist.
  std::array<double, 5> sat_mean_by_quintile{1000, 1055, 1110, 1165, 1220};
  double sat_sd = 170;
  int sat_min = 800;
  int sat_max = 1600;

  // SES index weights for (zip quintile, school type, fee waiver, first gen).
  std::array<double, 4> ses_weights{0.35, 0.15, 0.25, 0.25};
  // When true, weights are recomputed per cohort from normalized absolute
  // correlations with income quintile instead of the fixed vector above.
  bool ses_weights_from_cohort = false;

  bool operator==(const GenConfig&) const = default;

  void validate() const;
};

// Synthetic default ZIP pools: 200 distinct 5-digit codes per quintile,
// deterministically derived from a fixed internal seed. Replace with real
// data via a `quintile,zip` CSV.
inline std::map<int, std::vector<std::string>> default_zip_pools() {
  std::map<int, std::vector<std::string>> pools;
  RngStream rng(0, "default_zip_pools");
  std::vector<bool> used(100000, false);
  for (int q = 1; q <= 5; ++q) {
    auto& pool = pools[q];
    pool.reserve(200);
    while (pool.size() < 200) {
      auto z = rng.uniform_int(501, 99499);
      if (used[static_cast<std::size_t>(z)]) continue;
      used[static_cast<std::size_t>(z)] = true;
      char buf[8];
      std::snprintf(buf, sizeof buf, "%05lld", static_cast<long long>(z));
      pool.emplace_back(buf);
    }
  }
  return pools;
}

inline void GenConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (cohort_size <= 0) fail("cohort_size must be positive");
  if (subsample_size <= 0 || subsample_size > cohort_size)
    fail("subsample_size must be in [1, cohort_size]");
  if (subsample_min_cell < 0 || 25 * subsample_min_cell > subsample_size)
    fail("subsample_min_cell too large: 25*min_cell must not exceed subsample_size");
  for (std::size_t i = 0; i < income_brackets.size(); ++i) {
    const auto& br = income_brackets[i];
    if (!(br.low <= br.mode && br.mode <= br.high))
      fail("income bracket " + std::to_string(i + 1) + " violates low <= mode <= high");
    if (i > 0 && income_brackets[i - 1].high > br.low)
      fail("income brackets must be disjoint and ascending");
  }
  auto check_prob = [&](double p, const std::string& name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(name + " must be in [0,1]");
  };
  for (double p : school_private_prob_by_quintile) check_prob(p, "school_private_prob_by_quintile");
  for (double p : first_gen_prob_by_quintile) check_prob(p, "first_gen_prob_by_quintile");
  for (double p : activity_base_prob_by_quintile) check_prob(p, "activity_base_prob_by_quintile");
  check_prob(fee_waiver_flip_prob, "fee_waiver_flip_prob");
  check_prob(zip_match_prob, "zip_match_prob");
  if (std::abs(sat_income_target_corr) > 1.0 || std::abs(gpa_quintile_target_corr) > 1.0)
    fail("target correlations must be in [-1,1]");
  if (corr_tolerance <= 0) fail("corr_tolerance must be positive");
  if (household_size_min < 1 || household_size_max < household_size_min)
    fail("household_size range invalid");
  if (usda_thresholds.size() !=
      static_cast<std::size_t>(household_size_max - household_size_min + 1))
    fail("usda_thresholds must have one entry per household size");
  for (double t : usda_thresholds)
    if (t <= 0) fail("usda_thresholds must be positive");
  for (int q = 1; q <= 5; ++q) {
    auto it = zip_pools.find(q);
    if (it == zip_pools.end() || it->second.empty())
      fail("zip pool for quintile " + std::to_string(q) + " is empty");
    for (const auto& z : it->second) {
      if (z.size() != 5 || z.find_first_not_of("0123456789") != std::string::npos)
        fail("zip '" + z + "' is not a 5-digit code");
    }
  }
  if (gpa_density.size() < 2) fail("gpa_density needs at least 2 knots");
  double mass = 0;
  for (std::size_t i = 0; i < gpa_density.size(); ++i) {
    if (gpa_density[i].w < 0) fail("gpa_density weights must be non-negative");
    if (i > 0) {
      if (gpa_density[i].x <= gpa_density[i - 1].x) fail("gpa_density knots must ascend");
      mass += 0.5 * (gpa_density[i].w + gpa_density[i - 1].w) *
              (gpa_density[i].x - gpa_density[i - 1].x);
    }
  }
  if (mass <= 0) fail("gpa_density has zero mass");
  if (sat_min >= sat_max) fail("sat range invalid");
  if (sat_sd <= 0) fail("sat_sd must be positive");
  double wsum = 0;
  for (double w : ses_weights) {
    if (w < 0) fail("ses_weights must be non-negative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) fail("ses_weights must sum to 1");
}

inline GenConfig default_gen_config() {
  GenConfig cfg;
  cfg.zip_pools = default_zip_pools();
  return cfg;
}

// Replace the ZIP pools from a `quintile,zip` CSV.
inline void load_zip_pool_csv(const std::string& path, GenConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open zip pool csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty zip pool csv: " + path);
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != "quintile,zip")
    throw ParseError("zip pool csv must start with header 'quintile,zip'");
  std::map<int, std::vector<std::string>> pools;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("zip pool csv line " + std::to_string(lineno) + ": missing comma");
    int q = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + comma, q);
    if (ec != std::errc{} || q < 1 || q > 5)
      throw ParseError("zip pool csv line " + std::to_string(lineno) + ": bad quintile");
    pools[q].push_back(line.substr(comma + 1));
  }
  cfg.zip_pools = std::move(pools);
}

namespace detail {

template <std::size_t N>
inline void read_double_array(const std::map<std::string, TomlValue>& kv,
                              const std::string& key, std::array<double, N>& out) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  const auto& arr = it->second.array(key);
  if (arr.size() != N)
    throw ConfigError(key + " must have " + std::to_string(N) + " entries");
  for (std::size_t i = 0; i < N; ++i) out[i] = arr[i].number(key);
}

}  // namespace detail

// Load a generator config file over the built-in defaults. Unknown keys are
// rejected so typos do not silently fall back to defaults.
inline GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  auto kv = parse_toml_lite(in);
  GenConfig cfg = default_gen_config();

  static const std::vector<std::string> known = {
      "cohort_size", "subsample_size", "subsample_min_cell", "master_seed",
      "income_brackets", "sat_income_target_corr", "gpa_quintile_target_corr",
      "corr_tolerance", "corr_max_iter", "school_private_prob_by_quintile",
      "first_gen_prob_by_quintile", "fee_waiver_flip_prob", "household_size_range",
      "usda_thresholds", "zip_match_prob", "zip_pool_csv", "activity_max",
      "activity_base_prob_by_quintile", "activity_private_bonus", "leadership_rate",
      "award_rate", "rate_quintile_gain", "rate_private_gain", "gpa_density_knots",
      "gpa_density_weights", "sat_mean_by_quintile", "sat_sd", "sat_range",
      "ses_weights", "ses_weights_from_cohort"};
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown config key '" + k + "'");
  }

  auto get_int = [&](const std::string& k, std::int64_t& out) {
    if (auto it = kv.find(k); it != kv.end()) out = it->second.integer(k);
  };
  auto get_num = [&](const std::string& k, double& out) {
    if (auto it = kv.find(k); it != kv.end()) out = it->second.number(k);
  };
  auto get_bool = [&](const std::string& k, bool& out) {
    if (auto it = kv.find(k); it != kv.end()) out = it->second.boolean(k);
  };

  get_int("cohort_size", cfg.cohort_size);
  get_int("subsample_size", cfg.subsample_size);
  get_int("subsample_min_cell", cfg.subsample_min_cell);
  if (auto it = kv.find("master_seed"); it != kv.end())
    cfg.master_seed = static_cast<std::uint64_t>(it->second.integer("master_seed"));
  if (auto it = kv.find("income_brackets"); it != kv.end()) {
    const auto& arr = it->second.array("income_brackets");
    if (arr.size() != 5) throw ConfigError("income_brackets must have 5 triples");
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& tri = arr[i].array("income_brackets[i]");
      if (tri.size() != 3) throw ConfigError("income bracket must be (low, high, mode)");
      cfg.income_brackets[i] = {tri[0].number("low"), tri[1].number("high"),
                                tri[2].number("mode")};
    }
  }
  get_num("sat_income_target_corr", cfg.sat_income_target_corr);
  get_num("gpa_quintile_target_corr", cfg.gpa_quintile_target_corr);
  get_num("corr_tolerance", cfg.corr_tolerance);
  if (auto it = kv.find("corr_max_iter"); it != kv.end())
    cfg.corr_max_iter = static_cast<int>(it->second.integer("corr_max_iter"));
  detail::read_double_array(kv, "school_private_prob_by_quintile",
                            cfg.school_private_prob_by_quintile);
  detail::read_double_array(kv, "first_gen_prob_by_quintile", cfg.first_gen_prob_by_quintile);
  get_num("fee_waiver_flip_prob", cfg.fee_waiver_flip_prob);
  if (auto it = kv.find("household_size_range"); it != kv.end()) {
    const auto& arr = it->second.array("household_size_range");
    if (arr.size() != 2) throw ConfigError("household_size_range must be [min, max]");
    cfg.household_size_min = static_cast<int>(arr[0].integer("household_size_range"));
    cfg.household_size_max = static_cast<int>(arr[1].integer("household_size_range"));
  }
  if (auto it = kv.find("usda_thresholds"); it != kv.end()) {
    cfg.usda_thresholds.clear();
    for (const auto& v : it->second.array("usda_thresholds"))
      cfg.usda_thresholds.push_back(v.number("usda_thresholds"));
  }
  get_num("zip_match_prob", cfg.zip_match_prob);
  if (auto it = kv.find("activity_max"); it != kv.end())
    cfg.activity_max = static_cast<int>(it->second.integer("activity_max"));
  detail::read_double_array(kv, "activity_base_prob_by_quintile",
                            cfg.activity_base_prob_by_quintile);
  get_num("activity_private_bonus", cfg.activity_private_bonus);
  get_num("leadership_rate", cfg.leadership_rate);
  get_num("award_rate", cfg.award_rate);
  get_num("rate_quintile_gain", cfg.rate_quintile_gain);
  get_num("rate_private_gain", cfg.rate_private_gain);
  {
    auto kit = kv.find("gpa_density_knots");
    auto wit = kv.find("gpa_density_weights");
    if ((kit == kv.end()) != (wit == kv.end()))
      throw ConfigError("gpa_density_knots and gpa_density_weights come as a pair");
    if (kit != kv.end()) {
      const auto& xs = kit->second.array("gpa_density_knots");
      const auto& ws = wit->second.array("gpa_density_weights");
      if (xs.size() != ws.size()) throw ConfigError("gpa density arrays differ in length");
      cfg.gpa_density.clear();
      for (std::size_t i = 0; i < xs.size(); ++i)
        cfg.gpa_density.push_back({xs[i].number("gpa_density_knots"),
                                   ws[i].number("gpa_density_weights")});
    }
  }
  detail::read_double_array(kv, "sat_mean_by_quintile", cfg.sat_mean_by_quintile);
  get_num("sat_sd", cfg.sat_sd);
  if (auto it = kv.find("sat_range"); it != kv.end()) {
    const auto& arr = it->second.array("sat_range");
    if (arr.size() != 2) throw ConfigError("sat_range must be [min, max]");
    cfg.sat_min = static_cast<int>(arr[0].integer("sat_range"));
    cfg.sat_max = static_cast<int>(arr[1].integer("sat_range"));
  }
  detail::read_double_array(kv, "ses_weights", cfg.ses_weights);
  get_bool("ses_weights_from_cohort", cfg.ses_weights_from_cohort);
  if (auto it = kv.find("zip_pool_csv"); it != kv.end()) {
    std::string csv = it->second.str("zip_pool_csv");
    if (!csv.empty()) {
      // relative paths resolve against the config file's directory
      if (csv.front() != '/' && path.find('/') != std::string::npos)
        csv = path.substr(0, path.rfind('/') + 1) + csv;
      load_zip_pool_csv(csv, cfg);
    }
  }

  cfg.validate();
  return cfg;
}

}  // namespace dpaudit

#include <json.hpp>

namespace dpaudit {

// Effective-config snapshot recorded alongside generated cohorts.
inline nlohmann::ordered_json gen_config_to_json(const GenConfig& c) {
  nlohmann::ordered_json j;
  j["cohort_size"] = c.cohort_size;
  j["subsample_size"] = c.subsample_size;
  j["subsample_min_cell"] = c.subsample_min_cell;
  j["master_seed"] = c.master_seed;
  auto brackets = nlohmann::ordered_json::array();
  for (const auto& b : c.income_brackets) brackets.push_back({b.low, b.high, b.mode});
  j["income_brackets"] = std::move(brackets);
  j["sat_income_target_corr"] = c.sat_income_target_corr;
  j["gpa_quintile_target_corr"] = c.gpa_quintile_target_corr;
  j["corr_tolerance"] = c.corr_tolerance;
  j["corr_max_iter"] = c.corr_max_iter;
  j["school_private_prob_by_quintile"] = c.school_private_prob_by_quintile;
  j["first_gen_prob_by_quintile"] = c.first_gen_prob_by_quintile;
  j["fee_waiver_flip_prob"] = c.fee_waiver_flip_prob;
  j["household_size_range"] = {c.household_size_min, c.household_size_max};
  j["usda_thresholds"] = c.usda_thresholds;
  j["zip_match_prob"] = c.zip_match_prob;
  j["activity_max"] = c.activity_max;
  j["activity_base_prob_by_quintile"] = c.activity_base_prob_by_quintile;
  j["activity_private_bonus"] = c.activity_private_bonus;
  j["leadership_rate"] = c.leadership_rate;
  j["award_rate"] = c.award_rate;
  j["rate_quintile_gain"] = c.rate_quintile_gain;
  j["rate_private_gain"] = c.rate_private_gain;
  auto knots = nlohmann::ordered_json::array(), weights = nlohmann::ordered_json::array();
  for (const auto& k : c.gpa_density) {
    knots.push_back(k.x);
    weights.push_back(k.w);
  }
  j["gpa_density_knots"] = std::move(knots);
  j["gpa_density_weights"] = std::move(weights);
  j["sat_mean_by_quintile"] = c.sat_mean_by_quintile;
  j["sat_sd"] = c.sat_sd;
  j["sat_range"] = {c.sat_min, c.sat_max};
  j["ses_weights"] = c.ses_weights;
  j["ses_weights_from_cohort"] = c.ses_weights_from_cohort;
  auto pools = nlohmann::ordered_json::object();
  for (const auto& [q, pool] : c.zip_pools) pools[std::to_string(q)] = pool;
  j["zip_pools"] = std::move(pools);
  return j;
}

}  // namespace dpaudit
