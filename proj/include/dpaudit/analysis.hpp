#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <dpaudit/experiment.hpp>
#include <dpaudit/gen_config.hpp>
#include <dpaudit/inference.hpp>
#include <dpaudit/institutions.hpp>
#include <dpaudit/mock.hpp>
#include <dpaudit/parsing.hpp>
#include <dpaudit/plan.hpp>
#include <dpaudit/profilegen.hpp>
#include <dpaudit/prompts.hpp>
#include <dpaudit/stats/glmm.hpp>
#include <dpaudit/stats/report.hpp>
#include <dpaudit/stats/tables.hpp>
#include <dpaudit/tagging.hpp>

namespace dpaudit {

inline std::string stage_suffix(System system, SystemMode mode) {
  return std::string(to_string(system)) + "_" + to_string(mode);
}
inline std::string plan_stage_name(System system, SystemMode mode) {
  return "plan_" + stage_suffix(system, mode);
}
inline std::string run_stage_name(System system, SystemMode mode) {
  return "run_" + stage_suffix(system, mode);
}

// ---------------------------------------------------------------------------
// Artifact access
// ---------------------------------------------------------------------------

inline std::vector<Profile> load_all_profiles(const ExperimentDir& dir) {
  std::vector<Profile> all;
  for (int c = 0; c < dir.manifest().n_cohorts; ++c) {
    auto ps = read_profiles_jsonl(dir.path("cohorts/cohort_" + std::to_string(c) + ".jsonl"));
    all.insert(all.end(), ps.begin(), ps.end());
  }
  return all;
}

inline std::map<int, std::vector<std::int64_t>> cohort_profile_ids(
    const std::vector<Profile>& profiles) {
  std::map<int, std::vector<std::int64_t>> ids;
  for (const auto& p : profiles) ids[p.cohort_id].push_back(p.profile_id);
  for (auto& [c, v] : ids) std::sort(v.begin(), v.end());
  return ids;
}

inline RunPlan load_plan(const ExperimentDir& dir, System system, SystemMode mode) {
  const auto path = dir.path("plans/plan_" + stage_suffix(system, mode) + ".json");
  std::ifstream in(path);
  if (!in) throw MissingStage("missing plan file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto j = ojson::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ParseError(path + " is corrupt");
  return plan_from_json(j);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void stage_generate(ExperimentDir& dir, const GenConfig& cfg) {
  dir.ensure_subdir("cohorts");
  std::vector<std::string> outputs;
  for (int c = 0; c < dir.manifest().n_cohorts; ++c) {
    auto [profiles, stats] = generate_cohort(c, cfg);
    const std::string base = "cohorts/cohort_" + std::to_string(c);
    write_profiles_jsonl(dir.path(base + ".jsonl"), profiles);
    atomic_write(dir.path(base + ".stats.json"), to_json(stats).dump(2) + "\n");
    outputs.push_back(base + ".jsonl");
    outputs.push_back(base + ".stats.json");
  }
  atomic_write(dir.path("cohorts/gen_config.json"), gen_config_to_json(cfg).dump(2) + "\n");
  outputs.push_back("cohorts/gen_config.json");
  dir.mark_stage("generate", outputs);
}

inline void stage_plan(ExperimentDir& dir, System system, SystemMode mode,
                       const std::vector<Institution>& institutions, double s2_fraction) {
  dir.require_stage("generate", plan_stage_name(system, mode));
  dir.ensure_subdir("plans");
  const auto profiles = load_all_profiles(dir);
  const auto cohort_ids = cohort_profile_ids(profiles);
  // the suffix keeps trial ids unique across systems and modes
  const std::string plan_id = dir.manifest().experiment_id + ":" + stage_suffix(system, mode);
  auto plan = make_plan(institutions, cohort_ids, dir.manifest().master_seed, mode, system,
                        plan_id, dir.manifest().n_cohorts, 3, 3, s2_fraction);
  const std::string rel = "plans/plan_" + stage_suffix(system, mode) + ".json";
  atomic_write(dir.path(rel), to_json(plan).dump() + "\n");
  dir.mark_stage(plan_stage_name(system, mode), {rel});
}

inline std::vector<BatchItem> plan_batch_items(const ExperimentDir& dir, System system,
                                               SystemMode mode) {
  const auto profiles = load_all_profiles(dir);
  const auto cohort_ids = cohort_profile_ids(profiles);
  std::map<std::int64_t, const Profile*> by_id;
  for (const auto& p : profiles) by_id[p.profile_id] = &p;
  const auto plan = load_plan(dir, system, mode);
  auto trials = expand_trials(plan, cohort_ids);
  std::vector<BatchItem> items;
  items.reserve(trials.size());
  for (auto& t : trials) {
    BatchItem item;
    item.profile = *by_id.at(t.profile_id);
    item.spec = std::move(t);
    items.push_back(std::move(item));
  }
  return items;
}

// Runs every trial of the plan against the client and parses the raw
// responses. Resumable: completed trial ids already in the results log are
// skipped.
inline void stage_run(ExperimentDir& dir, System system, SystemMode mode, ChatClient& client,
                      const ClientConfig& cfg,
                      const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  dir.require_stage(plan_stage_name(system, mode), run_stage_name(system, mode));
  dir.ensure_subdir("results");
  dir.ensure_subdir("parsed");
  auto items = plan_batch_items(dir, system, mode);
  const std::string results_rel = "results/results_" + stage_suffix(system, mode) + ".jsonl";
  auto results = execute_batch(items, client, cfg, dir.path(results_rel), progress);

  std::vector<ParsedOutcome> outcomes;
  outcomes.reserve(results.size());
  for (const auto& r : results) {
    if (!r.ok) {
      ParsedOutcome o;
      o.trial_id = r.trial_id;
      o.decision = Decision::Unparseable;
      o.parse_note = "inference-failed";
      outcomes.push_back(std::move(o));
      continue;
    }
    outcomes.push_back(parse_outcome(system, r.raw_text, r.trial_id));
  }
  const std::string parsed_rel = "parsed/parsed_" + stage_suffix(system, mode) + ".jsonl";
  write_outcomes_jsonl(dir.path(parsed_rel), outcomes);
  dir.mark_stage(run_stage_name(system, mode), {results_rel, parsed_rel});
}

// Judge interface for the tagging stage.
class TagJudge {
 public:
  virtual ~TagJudge() = default;
  virtual std::string tag(const std::string& rendered_prompt, const std::string& explanation) = 0;
};

class MockTagJudge : public TagJudge {
 public:
  std::string tag(const std::string&, const std::string& explanation) override {
    return mock_judge_response(explanation);
  }
};

class EndpointTagJudge : public TagJudge {
 public:
  explicit EndpointTagJudge(ClientConfig cfg) : cfg_(std::move(cfg)) {}
  std::string tag(const std::string& rendered_prompt, const std::string&) override {
    RngStream jitter(fnv1a64(rendered_prompt), "judge_jitter");
    for (int attempt = 1; attempt <= cfg_.retry_budget + 1; ++attempt) {
      auto reply = post_chat(cfg_, "", rendered_prompt);
      if (reply.ok) return reply.text;
      if (!reply.retryable || attempt == cfg_.retry_budget + 1)
        throw IoError("judge request failed: " + reply.error);
      const double cap = std::min(cfg_.backoff_cap_sec,
                                  cfg_.backoff_base_sec * std::pow(2.0, attempt - 1));
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<std::int64_t>(jitter.uniform(0.0, cap) * 1000)));
    }
    throw IoError("unreachable");
  }

 private:
  ClientConfig cfg_;
};

// Tags every parseable explanation from the s2 run. Judge outputs violating
// the closed vocabulary are excluded and counted, never coerced.
inline void stage_tag(ExperimentDir& dir, TagJudge& judge, const PromptLibrary& lib) {
  dir.require_stage(run_stage_name(System::S2, SystemMode::Omitted), "tag");
  dir.ensure_subdir("tags");
  auto outcomes =
      read_outcomes_jsonl(dir.path("parsed/parsed_" + stage_suffix(System::S2, SystemMode::Omitted) + ".jsonl"));
  std::vector<TagRecord> records;
  std::map<std::string, std::int64_t> exclusions;
  for (const auto& o : outcomes) {
    if (o.decision == Decision::Unparseable || !o.explanation) continue;
    const std::string prompt = lib.tag_prompt(*o.explanation);
    std::string raw;
    try {
      raw = judge.tag(prompt, *o.explanation);
    } catch (const Error& e) {
      exclusions["judge-error"] += 1;
      continue;
    }
    try {
      records.push_back(parse_tag_record(raw, o.trial_id));
    } catch (const TagParseError& e) {
      std::string category = e.what();
      if (auto colon = category.find(':'); colon != std::string::npos)
        category = category.substr(0, colon);
      exclusions[category] += 1;
    }
  }
  write_tags_jsonl(dir.path("tags/tags.jsonl"), records);
  ojson excl;
  excl["tagged"] = records.size();
  excl["excluded"] = exclusions;
  atomic_write(dir.path("tags/tag_exclusions.json"), excl.dump(2) + "\n");
  dir.mark_stage("tag", {"tags/tags.jsonl", "tags/tag_exclusions.json"});
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::vector<JoinedRecord> load_joined(const ExperimentDir& dir, System system,
                                             SystemMode mode, bool with_tags,
                                             bool with_pair) {
  const auto profiles = load_all_profiles(dir);
  const auto cohort_ids = cohort_profile_ids(profiles);
  const auto plan = load_plan(dir, system, mode);
  const auto trials = expand_trials(plan, cohort_ids);
  const auto outcomes =
      read_outcomes_jsonl(dir.path("parsed/parsed_" + stage_suffix(system, mode) + ".jsonl"));

  std::optional<std::vector<TagRecord>> tags;
  if (with_tags && std::filesystem::exists(dir.path("tags/tags.jsonl")))
    tags = read_tags_jsonl(dir.path("tags/tags.jsonl"));

  std::optional<std::vector<ParsedOutcome>> paired;
  std::optional<std::vector<TrialSpec>> paired_trials;
  if (with_pair) {
    const System other = system == System::S1 ? System::S2 : System::S1;
    const auto parsed_path =
        dir.path("parsed/parsed_" + stage_suffix(other, SystemMode::Omitted) + ".jsonl");
    if (std::filesystem::exists(parsed_path)) {
      paired = read_outcomes_jsonl(parsed_path);
      paired_trials = expand_trials(load_plan(dir, other, SystemMode::Omitted), cohort_ids);
    }
  }
  return join_records(trials, profiles, outcomes, tags ? &*tags : nullptr,
                      paired ? &*paired : nullptr, paired_trials ? &*paired_trials : nullptr);
}

// Every quantitative table: admit rates (by tier and cross-stratified),
// mixed-model odds ratios, flip rates, tag distributions, composite trends,
// SES-compensation shares, unparseable accounting, and the real-world
// benchmark when an observed CSV is supplied.
inline void stage_analyze(ExperimentDir& dir, const std::string& benchmark_csv = {}) {
  dir.require_stage("generate", "analyze");
  dir.ensure_subdir("analysis");
  std::vector<std::string> outputs;

  struct StageRef {
    System system;
    SystemMode mode;
  };
  std::vector<StageRef> present;
  for (auto system : {System::S1, System::S2})
    for (auto mode : {SystemMode::Omitted, SystemMode::Specified})
      if (dir.stage_complete(run_stage_name(system, mode))) present.push_back({system, mode});
  if (present.empty()) throw MissingStage("no completed run stages to analyze");

  std::string unparseable_csv = "stage,tier,total,unparseable,rate\n";
  std::map<std::string, std::vector<JoinedRecord>> joined_by_stage;

  for (const auto& ref : present) {
    const std::string suffix = stage_suffix(ref.system, ref.mode);
    auto joined = load_joined(dir, ref.system, ref.mode, ref.system == System::S2,
                              ref.mode == SystemMode::Omitted);

    // admit rates by tier
    {
      auto res = admit_rate_table(joined, false);
      std::string csv = "tier,admits,total,rate\n";
      for (const auto& row : res.rows)
        csv += row.tier + "," + std::to_string(row.admits) + "," + std::to_string(row.total) +
               "," + detail::fmt(row.rate) + "\n";
      const std::string rel = "analysis/admit_rate_" + suffix + ".csv";
      atomic_write(dir.path(rel), csv);
      outputs.push_back(rel);
    }
    // cross-stratified heatmap, long format
    {
      auto res = admit_rate_table(joined, true);
      std::string csv = "tier,ses_quintile,perf_quintile,admits,total,rate\n";
      for (const auto& row : res.rows)
        csv += row.tier + "," + std::to_string(row.ses_quintile) + "," +
               std::to_string(row.perf_quintile) + "," + std::to_string(row.admits) + "," +
               std::to_string(row.total) + "," + detail::fmt(row.rate) + "\n";
      const std::string rel = "analysis/admit_heatmap_" + suffix + ".csv";
      atomic_write(dir.path(rel), csv);
      outputs.push_back(rel);
    }
    // unparseable accounting, overall and per tier
    {
      std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_tier;
      for (const auto& r : joined) {
        auto& [total, bad] = per_tier[to_string(r.spec.tier)];
        total += 1;
        bad += r.outcome.decision == Decision::Unparseable;
      }
      std::int64_t all_total = 0, all_bad = 0;
      for (const auto& [tier, cnt] : per_tier) {
        all_total += cnt.first;
        all_bad += cnt.second;
      }
      unparseable_csv += suffix + ",all," + std::to_string(all_total) + "," +
                         std::to_string(all_bad) + "," +
                         detail::fmt(all_total > 0 ? double(all_bad) / double(all_total) : 0.0) +
                         "\n";
      for (const auto& [tier, cnt] : per_tier)
        unparseable_csv += suffix + "," + tier + "," + std::to_string(cnt.first) + "," +
                           std::to_string(cnt.second) + "," +
                           detail::fmt(cnt.first > 0 ? double(cnt.second) / double(cnt.first) : 0.0) +
                           "\n";
    }
    // mixed-effects odds ratios
    {
      auto fit = fit_glmm_laplace(build_admit_model(joined));
      const std::string rel_csv = "analysis/or_table_" + suffix + ".csv";
      atomic_write(dir.path(rel_csv), or_report_csv(fit));
      outputs.push_back(rel_csv);
      const std::string rel_json = "analysis/fit_" + suffix + ".json";
      atomic_write(dir.path(rel_json), to_json(fit).dump(2) + "\n");
      outputs.push_back(rel_json);
    }
    // benchmark comparison
    if (!benchmark_csv.empty()) {
      auto observed = load_benchmark_csv(benchmark_csv);
      auto predicted = first_gen_admit_share(joined);
      try {
        auto res = benchmark_compare(predicted, observed);
        char mae1[16], r1[16];
        std::snprintf(mae1, sizeof mae1, "%.1f", res.mae);
        std::snprintf(r1, sizeof r1, "%.1f", res.pearson_r);
        std::string csv = "stage,n_matched,mae,pearson_r,mae_1dp,pearson_r_1dp\n";
        csv += suffix + "," + std::to_string(res.n_matched) + "," + detail::fmt(res.mae) + "," +
               detail::fmt(res.pearson_r) + "," + mae1 + "," + r1 + "\n";
        const std::string rel = "analysis/benchmark_" + suffix + ".csv";
        atomic_write(dir.path(rel), csv);
        outputs.push_back(rel);
      } catch (const InsufficientOverlap&) {
        // fewer than 2 matched institutions: nothing to report for this stage
      }
    }
    joined_by_stage[suffix] = std::move(joined);
  }

  // flip rates between the paired omitted runs
  if (joined_by_stage.count("s1_omitted") && joined_by_stage.count("s2_omitted")) {
    auto pairs = collect_flip_pairs(joined_by_stage["s1_omitted"]);
    if (!pairs.empty()) {
      std::string csv =
          "tier,ses_quintile,pairs,s1_admits,s1_rejects,admit_to_reject,reject_to_admit,"
          "overall_rate,a2r_rate,r2a_rate\n";
      for (const auto& row : flip_rates(pairs))
        csv += row.tier + "," + std::to_string(row.ses_quintile) + "," +
               std::to_string(row.pairs) + "," + std::to_string(row.s1_admits) + "," +
               std::to_string(row.s1_rejects) + "," + std::to_string(row.admit_to_reject) + "," +
               std::to_string(row.reject_to_admit) + "," + detail::fmt(row.overall_rate) + "," +
               detail::fmt(row.a2r_rate) + "," + detail::fmt(row.r2a_rate) + "\n";
      atomic_write(dir.path("analysis/flip_rates.csv"), csv);
      outputs.push_back("analysis/flip_rates.csv");
    }
  }

  // tag distributions and composite trends from the s2 run
  if (joined_by_stage.count("s2_omitted") &&
      std::filesystem::exists(dir.path("tags/tags.jsonl"))) {
    const auto& joined = joined_by_stage["s2_omitted"];
    std::vector<TagRecord> tags;
    std::map<std::string, const Profile*> profile_of;
    for (const auto& r : joined) {
      if (r.tags) {
        tags.push_back(*r.tags);
        profile_of[r.tags->trial_id] = &r.profile;
      }
    }
    if (!tags.empty()) {
      std::string csv = "feature,null,discount,support,penalize\n";
      for (const char* f : kTagFeatures) {
        auto t = tag_marginal_table(tags, f);
        csv += std::string(f);
        for (int c = 0; c < 4; ++c) csv += "," + detail::fmt(t.percent[static_cast<std::size_t>(c)][0]);
        csv += "\n";
      }
      atomic_write(dir.path("analysis/tag_marginal.csv"), csv);
      outputs.push_back("analysis/tag_marginal.csv");

      const std::pair<const char*, std::function<std::string(const TagRecord&)>> crosses[] = {
          {"first_gen",
           [&](const TagRecord& t) { return profile_of.at(t.trial_id)->first_gen ? "Yes" : "No"; }},
          {"fee_waiver",
           [&](const TagRecord& t) { return profile_of.at(t.trial_id)->fee_waiver ? "Yes" : "No"; }},
          {"school_type",
           [&](const TagRecord& t) {
             return std::string(to_string(profile_of.at(t.trial_id)->school_type));
           }},
      };
      for (const auto& [feature, row_of] : crosses) {
        auto t = tag_cross_table(tags, feature, row_of,
                                 std::string("Tag distribution for ") + feature);
        const std::string rel = std::string("analysis/tag_cross_") + feature + ".csv";
        atomic_write(dir.path(rel), t.to_csv());
        outputs.push_back(rel);
      }

      for (bool by_perf : {false, true}) {
        auto rows = composite_trend_table(joined, by_perf);
        std::string ctcsv =
            "decision,quintile,n,aca_support,ses_support,aca_penalize,ses_penalize\n";
        for (const auto& row : rows)
          ctcsv += row.decision + "," + std::to_string(row.quintile) + "," +
                   std::to_string(row.n) + "," + detail::fmt(row.aca_support) + "," +
                   detail::fmt(row.ses_support) + "," + detail::fmt(row.aca_penalize) + "," +
                   detail::fmt(row.ses_penalize) + "\n";
        const std::string rel = by_perf ? "analysis/composite_trends_perf.csv"
                                        : "analysis/composite_trends_ses.csv";
        atomic_write(dir.path(rel), ctcsv);
        outputs.push_back(rel);
      }
      {
        std::string sccsv = "decision,perf_quintile,n,share\n";
        for (const auto& row : ses_compensates_share(joined))
          sccsv += row.decision + "," + std::to_string(row.perf_quintile) + "," +
                   std::to_string(row.n) + "," + detail::fmt(row.share) + "\n";
        atomic_write(dir.path("analysis/ses_compensates.csv"), sccsv);
        outputs.push_back("analysis/ses_compensates.csv");
      }
    }
  }

  atomic_write(dir.path("analysis/unparseable.csv"), unparseable_csv);
  outputs.push_back("analysis/unparseable.csv");
  dir.mark_stage("analyze", outputs);
}

// Collects the analysis outputs into report/ with a summary markdown.
inline void stage_report(ExperimentDir& dir) {
  dir.require_stage("analyze", "report");
  dir.ensure_subdir("report");
  std::vector<std::string> outputs;

  const auto& analyze_outputs = dir.manifest().stages.at("analyze").outputs;
  for (const auto& [rel, hash] : analyze_outputs) {
    const std::string name = rel.substr(rel.rfind('/') + 1);
    std::filesystem::copy_file(dir.path(rel), dir.path("report/" + name),
                               std::filesystem::copy_options::overwrite_existing);
    outputs.push_back("report/" + name);
  }

  std::string md = "# Audit report: " + dir.manifest().experiment_id + "\n\n";
  md += "Master seed: " + std::to_string(dir.manifest().master_seed) + "\n\n";
  auto embed_csv = [&](const std::string& rel, const std::string& heading) {
    if (!std::filesystem::exists(dir.path(rel))) return;
    std::ifstream in(dir.path(rel));
    std::string line;
    md += "## " + heading + "\n\n```\n";
    while (std::getline(in, line)) md += line + "\n";
    md += "```\n\n";
  };
  for (const char* suffix : {"s1_omitted", "s1_specified", "s2_omitted"})
    embed_csv("analysis/admit_rate_" + std::string(suffix) + ".csv",
              std::string("Admit rates (") + suffix + ")");
  for (const char* suffix : {"s1_omitted", "s1_specified", "s2_omitted"})
    embed_csv("analysis/or_table_" + std::string(suffix) + ".csv",
              std::string("Mixed-model odds ratios (") + suffix + ")");
  embed_csv("analysis/flip_rates.csv", "Decision flips, s1 to s2");
  embed_csv("analysis/tag_marginal.csv", "Tag marginals");
  embed_csv("analysis/ses_compensates.csv", "SES-compensation share");
  embed_csv("analysis/unparseable.csv", "Unparseable accounting");
  for (const char* suffix : {"s1_omitted", "s1_specified", "s2_omitted"})
    embed_csv("analysis/benchmark_" + std::string(suffix) + ".csv",
              std::string("Real-world benchmark (") + suffix + ")");

  atomic_write(dir.path("report/summary.md"), md);
  outputs.push_back("report/summary.md");
  dir.mark_stage("report", outputs);
}

}  // namespace dpaudit
