#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/errors.hpp>
#include <dpaudit/institutions.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/prompts.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

// Per-institution factorial assignment. profile_ids empty means "the whole
// assigned cohort" (decision-only runs); the explanation runs store their
// subsample explicitly for auditability.
struct Assignment {
  std::string institution;
  double acceptance_rate = 0;
  Tier tier = Tier::Tier1;
  int cohort_id = 0;
  int prompt_variant = 1;
  int attr_seed = 1;
  std::vector<std::int64_t> profile_ids;

  bool operator==(const Assignment&) const = default;
};

struct RunPlan {
  std::string experiment_id;
  System system = System::S1;
  SystemMode mode = SystemMode::Omitted;
  std::uint64_t master_seed = 0;
  double s2_fraction = 0.10;
  std::vector<Assignment> assignments;

  bool operator==(const RunPlan&) const = default;
};

// One prompt instance: institution x profile x variant x permutation x mode.
struct TrialSpec {
  std::string trial_id;
  std::string institution;
  double acceptance_rate = 0;
  Tier tier = Tier::Tier1;
  std::int64_t profile_id = 0;
  int cohort_id = 0;
  int prompt_variant = 1;
  int attr_seed = 1;
  SystemMode mode = SystemMode::Omitted;
  System system = System::S1;
};

inline std::string make_trial_id(const std::string& experiment_id,
                                 const std::string& institution, std::int64_t profile_id) {
  return experiment_id + "/" + institution + "/" + std::to_string(profile_id);
}

// Uniform, reproducible assignment of cohorts, prompt variants and attribute
// seeds to institutions. Draws are keyed by institution name so the plan is
// stable under file reordering. For explanation (s2) runs, each institution
// keeps the same assignment it has under s1 and additionally selects
// floor(s2_fraction * n) of its cohort's profiles.
inline RunPlan make_plan(const std::vector<Institution>& institutions,
                         const std::map<int, std::vector<std::int64_t>>& cohort_profiles,
                         std::uint64_t master_seed, SystemMode mode, System system,
                         const std::string& experiment_id, int n_cohorts = 3,
                         int n_variants = 3, int n_seeds = 3, double s2_fraction = 0.10) {
  if (n_cohorts < 1 || n_variants < 1 || n_seeds < 1)
    throw ConfigError("plan factor counts must be >= 1");
  if (!(s2_fraction > 0.0 && s2_fraction <= 1.0))
    throw ConfigError("s2_fraction must be in (0, 1]");
  RunPlan plan;
  plan.experiment_id = experiment_id;
  plan.system = system;
  plan.mode = mode;
  plan.master_seed = master_seed;
  plan.s2_fraction = s2_fraction;
  plan.assignments.reserve(institutions.size());
  for (const auto& inst : institutions) {
    Assignment a;
    a.institution = inst.name;
    a.acceptance_rate = inst.acceptance_rate;
    a.tier = inst.tier;
    RngStream rng(master_seed, "plan_assignment", fnv1a64(inst.name));
    a.cohort_id = static_cast<int>(rng.uniform_int(0, n_cohorts - 1));
    a.prompt_variant = static_cast<int>(rng.uniform_int(1, n_variants));
    a.attr_seed = static_cast<int>(rng.uniform_int(1, n_seeds));
    auto it = cohort_profiles.find(a.cohort_id);
    if (it == cohort_profiles.end())
      throw MissingStage("plan references cohort " + std::to_string(a.cohort_id) +
                         " which has not been generated");
    if (system == System::S2) {
      const auto& ids = it->second;
      const auto k = static_cast<std::size_t>(s2_fraction * static_cast<double>(ids.size()));
      RngStream pick(master_seed, "s2_subsample", fnv1a64(inst.name));
      auto sel = pick.sample_without_replacement(ids.size(), k);
      std::sort(sel.begin(), sel.end());
      a.profile_ids.reserve(sel.size());
      for (auto s : sel) a.profile_ids.push_back(ids[s]);
    }
    plan.assignments.push_back(std::move(a));
  }
  return plan;
}

// Expands a plan into its full trial sequence, in institution-file order and
// ascending profile id. Byte-for-byte reproducible for equal inputs.
inline std::vector<TrialSpec> expand_trials(
    const RunPlan& plan, const std::map<int, std::vector<std::int64_t>>& cohort_profiles) {
  std::vector<TrialSpec> trials;
  for (const auto& a : plan.assignments) {
    const std::vector<std::int64_t>* ids = &a.profile_ids;
    if (ids->empty()) {
      auto it = cohort_profiles.find(a.cohort_id);
      if (it == cohort_profiles.end())
        throw MissingStage("cohort " + std::to_string(a.cohort_id) + " missing for plan");
      ids = &it->second;
    }
    for (auto pid : *ids) {
      TrialSpec t;
      t.trial_id = make_trial_id(plan.experiment_id, a.institution, pid);
      t.institution = a.institution;
      t.acceptance_rate = a.acceptance_rate;
      t.tier = a.tier;
      t.profile_id = pid;
      t.cohort_id = a.cohort_id;
      t.prompt_variant = a.prompt_variant;
      t.attr_seed = a.attr_seed;
      t.mode = plan.mode;
      t.system = plan.system;
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

inline ojson to_json(const RunPlan& plan) {
  ojson j;
  j["experiment_id"] = plan.experiment_id;
  j["system"] = to_string(plan.system);
  j["mode"] = to_string(plan.mode);
  j["master_seed"] = plan.master_seed;
  j["s2_fraction"] = plan.s2_fraction;
  ojson arr = ojson::array();
  for (const auto& a : plan.assignments) {
    ojson ja;
    ja["institution"] = a.institution;
    ja["acceptance_rate"] = a.acceptance_rate;
    ja["tier"] = to_string(a.tier);
    ja["cohort_id"] = a.cohort_id;
    ja["prompt_variant"] = a.prompt_variant;
    ja["attr_seed"] = a.attr_seed;
    ja["profile_ids"] = a.profile_ids;
    arr.push_back(std::move(ja));
  }
  j["assignments"] = std::move(arr);
  return j;
}

inline RunPlan plan_from_json(const ojson& j) {
  RunPlan plan;
  plan.experiment_id = j.at("experiment_id").get<std::string>();
  plan.system = system_from_string(j.at("system").get<std::string>());
  plan.mode = mode_from_string(j.at("mode").get<std::string>());
  plan.master_seed = j.at("master_seed").get<std::uint64_t>();
  plan.s2_fraction = j.at("s2_fraction").get<double>();
  for (const auto& ja : j.at("assignments")) {
    Assignment a;
    a.institution = ja.at("institution").get<std::string>();
    a.acceptance_rate = ja.at("acceptance_rate").get<double>();
    a.tier = tier_from_string(ja.at("tier").get<std::string>());
    a.cohort_id = ja.at("cohort_id").get<int>();
    a.prompt_variant = ja.at("prompt_variant").get<int>();
    a.attr_seed = ja.at("attr_seed").get<int>();
    a.profile_ids = ja.at("profile_ids").get<std::vector<std::int64_t>>();
    plan.assignments.push_back(std::move(a));
  }
  return plan;
}

}  // namespace dpaudit
