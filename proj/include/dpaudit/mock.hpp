#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/plan.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

// Planted decision model for offline runs: a logistic model over profile
// features with monotone tier intercepts and per-institution random
// intercepts. The downstream regression should recover these coefficients.
struct MockParams {
  double intercept_tier1 = -4.2;
  double intercept_tier2 = -3.3;
  double intercept_tier3 = -2.4;
  double beta_zip = 0.05;          // per zip-quintile step
  double beta_fee = 0.7;
  double beta_first_gen = 0.6931471805599453;  // ln 2
  double beta_school_public = -0.05;
  double beta_perf = 0.55;         // per perf-quintile step
  double sigma_institution = 0.3;  // sd of the per-institution intercept
  std::uint64_t seed = 1;
};

inline double mock_admit_probability(const TrialSpec& trial, const Profile& p,
                                     const MockParams& m) {
  double eta = 0;
  switch (trial.tier) {
    case Tier::Tier1: eta = m.intercept_tier1; break;
    case Tier::Tier2: eta = m.intercept_tier2; break;
    case Tier::Tier3: eta = m.intercept_tier3; break;
  }
  RngStream inst_rng(m.seed, "mock_institution", fnv1a64(trial.institution));
  eta += inst_rng.normal(0.0, m.sigma_institution);
  eta += m.beta_zip * p.zip_quintile;
  eta += m.beta_fee * (p.fee_waiver ? 1.0 : 0.0);
  eta += m.beta_first_gen * (p.first_gen ? 1.0 : 0.0);
  eta += m.beta_school_public * (p.school_type == SchoolType::Public ? 1.0 : 0.0);
  eta += m.beta_perf * p.perf_quintile;
  return 1.0 / (1.0 + std::exp(-eta));
}

inline bool mock_decision(const TrialSpec& trial, const Profile& p, const MockParams& m) {
  const double prob = mock_admit_probability(trial, p, m);
  RngStream rng(m.seed, "mock_decision", fnv1a64(trial.trial_id));
  return rng.bernoulli(prob);
}

// Phrase vocabulary shared between the mock model's explanations and the
// rule-based mock judge. Sentences are assembled so each feature mention
// carries exactly one polarity marker.
namespace mockphrase {
inline constexpr const char* kSupport = " strengthens the case.";
inline constexpr const char* kPenalize = " weighs against the applicant.";
inline constexpr const char* kDiscount = " is noted but does not affect this decision.";
}  // namespace mockphrase

inline std::string mock_explanation(const TrialSpec& trial, const Profile& p, bool admit) {
  std::vector<std::string> sentences;
  if (p.perf_quintile >= 4)
    sentences.push_back(std::string("The strong academic record") + mockphrase::kSupport);
  else if (p.perf_quintile <= 2)
    sentences.push_back(std::string("The weak academic record") + mockphrase::kPenalize);
  else
    sentences.push_back(std::string("The academic record") + mockphrase::kDiscount);

  if (p.activity >= 7)
    sentences.push_back(std::string("Extensive extracurricular involvement") + mockphrase::kSupport);
  else if (p.activity <= 3)
    sentences.push_back(std::string("Limited extracurricular involvement") + mockphrase::kPenalize);

  if (p.first_gen)
    sentences.push_back(std::string("First-generation status") +
                        (admit ? mockphrase::kSupport : mockphrase::kDiscount));
  else if (!admit && p.ses_quintile >= 4)
    sentences.push_back(std::string("The absence of first-generation status") + mockphrase::kPenalize);

  if (p.fee_waiver)
    sentences.push_back(std::string("Fee waiver eligibility") +
                        (admit ? mockphrase::kSupport : mockphrase::kDiscount));
  else if (!admit && p.ses_quintile >= 4)
    sentences.push_back(std::string("The absence of fee waiver eligibility") + mockphrase::kPenalize);

  if (admit && p.zip_quintile == 1)
    sentences.push_back(std::string("Coming from an underserved area") + mockphrase::kSupport);

  if (!admit && p.school_type == SchoolType::Private && p.ses_quintile >= 4)
    sentences.push_back(std::string("The private school background") + mockphrase::kPenalize);
  else if (admit && p.school_type == SchoolType::Public && p.ses_quintile <= 2)
    sentences.push_back(std::string("The public school background") + mockphrase::kSupport);

  if (admit && p.perf_quintile <= 2 && (p.first_gen || p.fee_waiver)) {
    sentences.push_back("Socioeconomic hardship offsets the weak academic profile.");
    sentences.push_back(std::string("A holistic view of the applicant's circumstances") +
                        mockphrase::kSupport);
  }
  if (p.perf_quintile == 1 || p.perf_quintile == 5)
    sentences.push_back("The profile was weighed against the institution's competitive pool.");

  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out += sentences[i];
    if (i + 1 < sentences.size()) out += ' ';
  }
  (void)trial;
  return out;
}

// Raw model text for one trial under the planted model: the bare keyword for
// decision-only prompts, the two-key JSON for explanation prompts.
inline std::string mock_response(const TrialSpec& trial, const Profile& p, const MockParams& m) {
  const bool admit = mock_decision(trial, p, m);
  if (trial.system == System::S1) return admit ? "admit" : "reject";
  nlohmann::ordered_json j;
  j["EXPLANATION"] = mock_explanation(trial, p, admit);
  j["DECISION"] = admit ? "admit" : "reject";
  return j.dump();
}

// Rule-based judge for offline tagging: maps the mock phrase vocabulary back
// to tag values and returns the same JSON shape a hosted judge would.
inline std::string mock_judge_response(const std::string& explanation) {
  auto sentence_tag = [&](const std::string& subject) -> std::string {
    const auto pos = explanation.find(subject);
    if (pos == std::string::npos) return "null";
    const auto end = explanation.find('.', pos);
    const std::string sentence =
        explanation.substr(pos, end == std::string::npos ? std::string::npos : end - pos + 1);
    if (sentence.find("strengthens the case") != std::string::npos) return "support";
    if (sentence.find("weighs against") != std::string::npos) return "penalize";
    if (sentence.find("noted but does not affect") != std::string::npos) return "discount";
    return "null";
  };

  nlohmann::ordered_json j;
  j["fee_waiver"] = sentence_tag("ee waiver");
  j["first_gen"] = sentence_tag("irst-generation");
  j["academic"] = sentence_tag("academic record");
  j["extracurricular"] = sentence_tag("extracurricular involvement");
  j["zip"] = sentence_tag("underserved area");
  j["school_type"] = sentence_tag("school background");
  j["holistic"] = sentence_tag("holistic view");
  for (auto& [key, value] : j.items())
    if (value == "null") value = nullptr;
  if (explanation.find("Socioeconomic hardship offsets") != std::string::npos)
    j["ses_compensates"] = true;
  else
    j["ses_compensates"] = nullptr;
  if (explanation.find("competitive pool") != std::string::npos)
    j["performance_context"] = true;
  else
    j["performance_context"] = nullptr;

  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  list.push_back(std::move(j));
  return list.dump();
}

}  // namespace dpaudit
