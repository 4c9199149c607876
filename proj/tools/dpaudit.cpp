// dpaudit: dual-process audit pipeline for chat-model decision makers.
//
// Workflow: generate -> plan -> run -> tag -> analyze -> report, each stage
// idempotent and recorded in the experiment manifest. Exit codes: 0 ok,
// 2 usage, 3 missing stage, 4 upstream failure.

#include <CLI11.hpp>

#include <dpaudit/analysis.hpp>
#include <dpaudit/version.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

namespace {

using namespace dpaudit;

struct GlobalArgs {
  std::string out_dir;
  std::string config_path;
  std::string experiment_id;
  std::string asset_dir = default_asset_dir();
  std::uint64_t seed = 0;
  bool seed_set = false;
};

GenConfig resolve_config(const GlobalArgs& g, std::string* hash_out) {
  GenConfig cfg;
  if (!g.config_path.empty()) {
    cfg = load_gen_config(g.config_path);
    *hash_out = hash_file(g.config_path);
  } else {
    cfg = default_gen_config();
    *hash_out = "builtin";
  }
  if (g.seed_set) cfg.master_seed = g.seed;
  return cfg;
}

std::string resolve_experiment_id(const GlobalArgs& g, const GenConfig& cfg) {
  if (!g.experiment_id.empty()) return g.experiment_id;
  return "exp-" + std::to_string(cfg.master_seed);
}

ExperimentDir open_dir(const GlobalArgs& g, const GenConfig& cfg, const std::string& cfg_hash,
                       int n_cohorts) {
  return ExperimentDir::open_or_create(g.out_dir, resolve_experiment_id(g, cfg),
                                       cfg.master_seed, cfg_hash, n_cohorts);
}

// Refuses to overwrite artifacts that exist without a completed stage record.
void require_clean(const ExperimentDir& dir, const std::string& sentinel_rel,
                   const std::string& stage, bool allow_existing) {
  if (allow_existing) return;
  if (std::filesystem::exists(dir.path(sentinel_rel)))
    throw PartialArtifact("stage '" + stage + "' left " + sentinel_rel +
                          " behind; delete it or pass --resume where supported");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"dual-process audit toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--out-dir", g.out_dir, "experiment directory")->required();
  app.add_option("--config", g.config_path, "generator config file (TOML)");
  app.add_option("--id", g.experiment_id, "experiment id (default: exp-<seed>)");
  app.add_option("--assets", g.asset_dir, "asset directory with prompts and institutions");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed override");

  // generate
  auto* cmd_generate = app.add_subcommand("generate", "generate synthetic cohorts");
  int n_cohorts = 3;
  cmd_generate->add_option("--cohorts", n_cohorts, "number of cohorts")->check(CLI::Range(1, 64));

  // plan
  auto* cmd_plan = app.add_subcommand("plan", "assign cohorts, variants and seeds to institutions");
  std::string plan_system = "s1", plan_mode = "omitted", institutions_csv;
  double s2_fraction = 0.10;
  cmd_plan->add_option("--system", plan_system, "s1 or s2")->check(CLI::IsMember({"s1", "s2"}));
  cmd_plan->add_option("--mode", plan_mode, "omitted or specified")
      ->check(CLI::IsMember({"omitted", "specified"}));
  cmd_plan->add_option("--institutions", institutions_csv, "institutions csv override");
  cmd_plan->add_option("--s2-fraction", s2_fraction, "profile fraction for s2 plans")
      ->check(CLI::Range(0.0001, 1.0));

  // run
  auto* cmd_run = app.add_subcommand("run", "execute a planned batch of trials");
  std::string run_system = "s1", run_mode = "omitted", endpoint, model;
  bool mock = false, resume = false, merge_system = false;
  std::uint64_t mock_seed = 1;
  int concurrency = 4, max_tokens = 512, timeout_sec = 120, retries = 3;
  double temperature = 0.0;
  std::string auth_env = "DPAUDIT_API_KEY";
  cmd_run->add_option("--system", run_system, "s1 or s2")->check(CLI::IsMember({"s1", "s2"}));
  cmd_run->add_option("--mode", run_mode, "omitted or specified")
      ->check(CLI::IsMember({"omitted", "specified"}));
  cmd_run->add_flag("--mock", mock, "use the built-in mock model");
  cmd_run->add_option("--mock-seed", mock_seed, "seed of the mock decision model");
  cmd_run->add_option("--endpoint", endpoint, "chat-completions URL");
  cmd_run->add_option("--model", model, "model name sent to the endpoint");
  cmd_run->add_option("--concurrency", concurrency, "max in-flight requests")
      ->check(CLI::Range(1, 256));
  cmd_run->add_flag("--resume", resume, "continue an interrupted run");
  cmd_run->add_flag("--merge-system", merge_system,
                    "prepend the system text to the user prompt");
  cmd_run->add_option("--max-tokens", max_tokens, "max output tokens");
  cmd_run->add_option("--temperature", temperature, "sampling temperature (0 = greedy)");
  cmd_run->add_option("--timeout", timeout_sec, "request timeout in seconds");
  cmd_run->add_option("--retries", retries, "retry budget for transient failures");
  cmd_run->add_option("--auth-env", auth_env, "environment variable holding the API token");

  // tag
  auto* cmd_tag = app.add_subcommand("tag", "tag s2 explanations with a judge");
  std::string judge = "mock", judge_endpoint, judge_model;
  cmd_tag->add_option("--judge", judge, "mock or endpoint")
      ->check(CLI::IsMember({"mock", "endpoint"}));
  cmd_tag->add_option("--endpoint", judge_endpoint, "judge chat-completions URL");
  cmd_tag->add_option("--model", judge_model, "judge model name");
  cmd_tag->add_option("--auth-env", auth_env, "environment variable holding the API token");

  // analyze
  auto* cmd_analyze = app.add_subcommand("analyze", "compute all statistics tables");
  std::string benchmark_csv;
  cmd_analyze->add_option("--benchmark", benchmark_csv,
                          "observed first-gen shares csv (institution,first_gen_share)");

  // report
  auto* cmd_report = app.add_subcommand("report", "collect outputs and write the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help / --version
      app.exit(e);
      return 0;
    }
    std::fprintf(stderr, "error: Usage: %s\n", e.what());
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;

  std::string cfg_hash;
  const GenConfig cfg = resolve_config(g, &cfg_hash);

  if (cmd_generate->parsed()) {
    auto dir = open_dir(g, cfg, cfg_hash, n_cohorts);
    DirLock lock(dir.root());
    if (dir.stage_complete("generate")) {
      std::printf("generate: up to date\n");
      return 0;
    }
    require_clean(dir, "cohorts/cohort_0.jsonl",
                  "generate", dir.manifest().stages.count("generate") > 0);
    stage_generate(dir, cfg);
    std::printf("generate: wrote %d cohorts under %s/cohorts\n", dir.manifest().n_cohorts,
                dir.root().c_str());
    return 0;
  }

  auto dir = ExperimentDir::open_existing(g.out_dir);
  DirLock lock(dir.root());

  if (cmd_plan->parsed()) {
    const auto system = system_from_string(plan_system);
    const auto mode = mode_from_string(plan_mode);
    const auto stage = plan_stage_name(system, mode);
    if (dir.stage_complete(stage)) {
      std::printf("%s: up to date\n", stage.c_str());
      return 0;
    }
    const std::string csv =
        institutions_csv.empty() ? g.asset_dir + "/institutions.csv" : institutions_csv;
    auto institutions = load_institutions(csv);
    if (institutions.empty()) {
      std::fprintf(stderr, "warning: institutions file %s is empty\n", csv.c_str());
    }
    stage_plan(dir, system, mode, institutions, s2_fraction);
    std::printf("%s: planned %zu institutions\n", stage.c_str(), institutions.size());
    return 0;
  }

  if (cmd_run->parsed()) {
    const auto system = system_from_string(run_system);
    const auto mode = mode_from_string(run_mode);
    const auto stage = run_stage_name(system, mode);
    if (dir.stage_complete(stage)) {
      std::printf("%s: up to date\n", stage.c_str());
      return 0;
    }
    require_clean(dir, "results/results_" + stage_suffix(system, mode) + ".jsonl", stage,
                  resume || dir.manifest().stages.count(stage) > 0);

    ClientConfig ccfg;
    ccfg.endpoint = endpoint;
    ccfg.model = model;
    ccfg.auth_env = auth_env;
    ccfg.max_tokens = max_tokens;
    ccfg.temperature = temperature;
    ccfg.timeout_sec = timeout_sec;
    ccfg.retry_budget = retries;
    ccfg.max_in_flight = concurrency;
    ccfg.merge_system_into_user = merge_system;

    std::unique_ptr<ChatClient> client;
    if (mock) {
      MockParams params;
      params.seed = mock_seed;
      client = std::make_unique<MockChatClient>(params);
    } else {
      if (endpoint.empty() || model.empty())
        throw ConfigError("run needs --mock, or --endpoint and --model");
      client = std::make_unique<HttpChatClient>(ccfg, PromptLibrary::load(g.asset_dir));
    }
    stage_run(dir, system, mode, *client, ccfg, [&](std::size_t done, std::size_t total) {
      std::printf("%s: %zu/%zu\n", stage.c_str(), done, total);
      std::fflush(stdout);
    });
    std::printf("%s: complete\n", stage.c_str());
    return 0;
  }

  if (cmd_tag->parsed()) {
    if (dir.stage_complete("tag")) {
      std::printf("tag: up to date\n");
      return 0;
    }
    require_clean(dir, "tags/tags.jsonl", "tag", dir.manifest().stages.count("tag") > 0);
    auto lib = PromptLibrary::load(g.asset_dir);
    std::unique_ptr<TagJudge> tagger;
    if (judge == "mock") {
      tagger = std::make_unique<MockTagJudge>();
    } else {
      if (judge_endpoint.empty() || judge_model.empty())
        throw ConfigError("tag --judge endpoint needs --endpoint and --model");
      ClientConfig jcfg;
      jcfg.endpoint = judge_endpoint;
      jcfg.model = judge_model;
      jcfg.auth_env = auth_env;
      tagger = std::make_unique<EndpointTagJudge>(jcfg);
    }
    stage_tag(dir, *tagger, lib);
    std::printf("tag: complete\n");
    return 0;
  }

  if (cmd_analyze->parsed()) {
    if (dir.stage_complete("analyze")) {
      std::printf("analyze: up to date\n");
      return 0;
    }
    stage_analyze(dir, benchmark_csv);
    std::printf("analyze: tables written under %s/analysis\n", dir.root().c_str());
    return 0;
  }

  if (cmd_report->parsed()) {
    if (dir.stage_complete("report")) {
      std::printf("report: up to date\n");
      return 0;
    }
    stage_report(dir);
    std::printf("report: written to %s/report/summary.md\n", dir.root().c_str());
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const dpaudit::MissingStage& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const dpaudit::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 4;
  }
}
