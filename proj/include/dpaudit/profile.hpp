#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/errors.hpp>

namespace dpaudit {

using ojson = nlohmann::ordered_json;

enum class SchoolType { Public, Private };

inline const char* to_string(SchoolType t) {
  return t == SchoolType::Public ? "Public" : "Private";
}

inline SchoolType school_type_from_string(const std::string& s) {
  if (s == "Public") return SchoolType::Public;
  if (s == "Private") return SchoolType::Private;
  throw ParseError("unknown school_type '" + s + "'");
}

// One synthetic applicant. income_quintile and household_income are latent
// drivers; they are serialized for auditability but never rendered into a
// prompt.
struct Profile {
  std::int64_t profile_id = 0;
  int cohort_id = 0;
  int income_quintile = 0;
  std::int64_t household_income = 0;
  double gpa = 0;
  int sat = 0;
  int activity = 0;
  int leadership = 0;
  int award = 0;
  bool first_gen = false;
  bool fee_waiver = false;
  SchoolType school_type = SchoolType::Public;
  std::string zip;
  int zip_quintile = 0;
  double perf_index = 0;
  double ses_index = 0;
  int perf_quintile = 0;
  int ses_quintile = 0;

  bool operator==(const Profile&) const = default;
};

inline ojson to_json(const Profile& p) {
  ojson j;
  j["profile_id"] = p.profile_id;
  j["cohort_id"] = p.cohort_id;
  j["income_quintile"] = p.income_quintile;
  j["household_income"] = p.household_income;
  j["gpa"] = p.gpa;
  j["sat"] = p.sat;
  j["activity"] = p.activity;
  j["leadership"] = p.leadership;
  j["award"] = p.award;
  j["first_gen"] = p.first_gen;
  j["fee_waiver"] = p.fee_waiver;
  j["school_type"] = to_string(p.school_type);
  j["zip"] = p.zip;
  j["zip_quintile"] = p.zip_quintile;
  j["perf_index"] = p.perf_index;
  j["ses_index"] = p.ses_index;
  j["perf_quintile"] = p.perf_quintile;
  j["ses_quintile"] = p.ses_quintile;
  return j;
}

inline Profile profile_from_json(const ojson& j) {
  Profile p;
  p.profile_id = j.at("profile_id").get<std::int64_t>();
  p.cohort_id = j.at("cohort_id").get<int>();
  p.income_quintile = j.at("income_quintile").get<int>();
  p.household_income = j.at("household_income").get<std::int64_t>();
  p.gpa = j.at("gpa").get<double>();
  p.sat = j.at("sat").get<int>();
  p.activity = j.at("activity").get<int>();
  p.leadership = j.at("leadership").get<int>();
  p.award = j.at("award").get<int>();
  p.first_gen = j.at("first_gen").get<bool>();
  p.fee_waiver = j.at("fee_waiver").get<bool>();
  p.school_type = school_type_from_string(j.at("school_type").get<std::string>());
  p.zip = j.at("zip").get<std::string>();
  p.zip_quintile = j.at("zip_quintile").get<int>();
  p.perf_index = j.at("perf_index").get<double>();
  p.ses_index = j.at("ses_index").get<double>();
  p.perf_quintile = j.at("perf_quintile").get<int>();
  p.ses_quintile = j.at("ses_quintile").get<int>();
  return p;
}

inline void write_profiles_jsonl(const std::string& path, const std::vector<Profile>& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : ps) out << to_json(p).dump() << '\n';
}

inline std::vector<Profile> read_profiles_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<Profile> ps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + " line " + std::to_string(lineno) + ": bad JSON");
    ps.push_back(profile_from_json(j));
  }
  return ps;
}

// Marginal summaries, the pairwise Pearson matrix, and the SES x performance
// occupancy grid of a finished cohort.
struct CohortStats {
  std::size_t n = 0;
  std::map<std::string, double> means;
  std::map<std::string, double> fractions;
  std::map<std::string, std::map<std::string, std::int64_t>> histograms;
  std::vector<std::string> corr_vars;
  std::vector<std::vector<double>> pearson;
  std::array<std::array<std::int64_t, 5>, 5> cell_counts{};  // [ses-1][perf-1]
};

inline ojson to_json(const CohortStats& s) {
  ojson j;
  j["n"] = s.n;
  j["means"] = s.means;
  j["fractions"] = s.fractions;
  j["histograms"] = s.histograms;
  j["pearson"]["vars"] = s.corr_vars;
  j["pearson"]["matrix"] = s.pearson;
  ojson grid = ojson::array();
  for (const auto& row : s.cell_counts) grid.push_back(row);
  j["ses_by_perf_counts"] = grid;
  return j;
}

}  // namespace dpaudit
