#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include <dpaudit/errors.hpp>

namespace dpaudit {

enum class Tier { Tier1 = 1, Tier2 = 2, Tier3 = 3 };

inline const char* to_string(Tier t) {
  switch (t) {
    case Tier::Tier1: return "tier1";
    case Tier::Tier2: return "tier2";
    case Tier::Tier3: return "tier3";
  }
  return "?";
}

inline Tier tier_from_string(const std::string& s) {
  if (s == "tier1") return Tier::Tier1;
  if (s == "tier2") return Tier::Tier2;
  if (s == "tier3") return Tier::Tier3;
  throw ParseError("unknown tier '" + s + "'");
}

// Display name and the acceptance-rate range wording used in prompts.
inline const char* tier_display_name(Tier t) {
  switch (t) {
    case Tier::Tier1: return "highly selective";
    case Tier::Tier2: return "selective";
    case Tier::Tier3: return "moderately selective";
  }
  return "?";
}

inline const char* tier_rate_range(Tier t) {
  switch (t) {
    case Tier::Tier1: return "less than 15%";
    case Tier::Tier2: return "between 15% and 30%";
    case Tier::Tier3: return "between 30% and 50%";
  }
  return "?";
}

// Selectivity tiers by acceptance rate: <0.15 -> tier1, [0.15, 0.30) -> tier2,
// [0.30, 0.50] -> tier3. Rates above 0.50 are out of scope.
inline Tier tier_of(double acceptance_rate) {
  if (!(acceptance_rate > 0.0) || acceptance_rate > 0.5)
    throw OutOfScopeRate("acceptance rate " + std::to_string(acceptance_rate) +
                         " outside (0, 0.5]");
  if (acceptance_rate < 0.15) return Tier::Tier1;
  if (acceptance_rate < 0.30) return Tier::Tier2;
  return Tier::Tier3;
}

struct Institution {
  std::string name;
  double acceptance_rate = 0;  // fraction in (0, 0.5]
  Tier tier = Tier::Tier1;

  bool operator==(const Institution&) const = default;
};

// CSV with header `name,acceptance_rate`; rates are fractions. An empty body
// yields an empty list.
inline std::vector<Institution> load_institutions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open institutions csv: " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "name,acceptance_rate")
    throw ParseError(path + " line 1: expected header 'name,acceptance_rate'");
  std::vector<Institution> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0)
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected name,rate");
    Institution inst;
    inst.name = line.substr(0, comma);
    const char* b = line.data() + comma + 1;
    const char* e = line.data() + line.size();
    auto [p, ec] = std::from_chars(b, e, inst.acceptance_rate);
    if (ec != std::errc{} || p != e)
      throw ParseError(path + " line " + std::to_string(lineno) + ": malformed rate '" +
                       std::string(b, e) + "'");
    try {
      inst.tier = tier_of(inst.acceptance_rate);
    } catch (const OutOfScopeRate& ex) {
      throw TierError(path + " line " + std::to_string(lineno) + ": " + ex.what());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace dpaudit
