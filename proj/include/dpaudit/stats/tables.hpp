#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <dpaudit/errors.hpp>
#include <dpaudit/parsing.hpp>
#include <dpaudit/plan.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/profilegen.hpp>
#include <dpaudit/stats/glmm.hpp>
#include <dpaudit/tagging.hpp>

namespace dpaudit {

// Full join of a trial with its profile and parsed outcome, plus optional
// tags and the paired other-system decision (matched by institution and
// profile id, which is valid because both systems share one assignment).
struct JoinedRecord {
  TrialSpec spec;
  Profile profile;
  ParsedOutcome outcome;
  std::optional<TagRecord> tags;
  std::optional<Decision> paired_decision;
};

inline std::vector<JoinedRecord> join_records(
    const std::vector<TrialSpec>& trials, const std::vector<Profile>& profiles,
    const std::vector<ParsedOutcome>& outcomes,
    const std::vector<TagRecord>* tags = nullptr,
    const std::vector<ParsedOutcome>* paired = nullptr,
    const std::vector<TrialSpec>* paired_trials = nullptr) {
  std::map<std::int64_t, const Profile*> by_pid;
  for (const auto& p : profiles) by_pid[p.profile_id] = &p;
  std::map<std::string, const ParsedOutcome*> by_trial;
  for (const auto& o : outcomes) by_trial[o.trial_id] = &o;
  std::map<std::string, const TagRecord*> tags_by_trial;
  if (tags)
    for (const auto& t : *tags) tags_by_trial[t.trial_id] = &t;

  // pair by (institution, profile_id)
  std::map<std::pair<std::string, std::int64_t>, Decision> pair_decision;
  if (paired && paired_trials) {
    std::map<std::string, const TrialSpec*> pt_by_id;
    for (const auto& t : *paired_trials) pt_by_id[t.trial_id] = &t;
    for (const auto& o : *paired) {
      auto it = pt_by_id.find(o.trial_id);
      if (it != pt_by_id.end())
        pair_decision[{it->second->institution, it->second->profile_id}] = o.decision;
    }
  }

  std::vector<JoinedRecord> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    auto oit = by_trial.find(t.trial_id);
    auto pit = by_pid.find(t.profile_id);
    if (oit == by_trial.end() || pit == by_pid.end()) continue;
    JoinedRecord r;
    r.spec = t;
    r.profile = *pit->second;
    r.outcome = *oit->second;
    if (auto tit = tags_by_trial.find(t.trial_id); tit != tags_by_trial.end())
      r.tags = *tit->second;
    if (auto dit = pair_decision.find({t.institution, t.profile_id});
        dit != pair_decision.end())
      r.paired_decision = dit->second;
    out.push_back(std::move(r));
  }
  // canonical order regardless of log completion order
  std::sort(out.begin(), out.end(), [](const JoinedRecord& a, const JoinedRecord& b) {
    return a.spec.trial_id < b.spec.trial_id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Admit-rate tables
// ---------------------------------------------------------------------------

struct AdmitRateRow {
  std::string tier;
  int ses_quintile = 0;   // 0 when not stratified
  int perf_quintile = 0;  // 0 when not stratified
  std::int64_t admits = 0;
  std::int64_t total = 0;
  double rate = 0;
};

struct AdmitRateResult {
  std::vector<AdmitRateRow> rows;
  std::int64_t excluded_unparseable = 0;
};

// Admit fraction per tier, optionally cross-stratified by SES x performance
// quintile. Unparseable outcomes are excluded and counted; empty cells are
// absent rather than zero.
inline AdmitRateResult admit_rate_table(const std::vector<JoinedRecord>& records,
                                        bool by_ses_perf = false) {
  AdmitRateResult res;
  std::map<std::tuple<std::string, int, int>, std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& r : records) {
    if (r.outcome.decision == Decision::Unparseable) {
      ++res.excluded_unparseable;
      continue;
    }
    auto key = by_ses_perf ? std::make_tuple(std::string(to_string(r.spec.tier)),
                                             r.profile.ses_quintile, r.profile.perf_quintile)
                           : std::make_tuple(std::string(to_string(r.spec.tier)), 0, 0);
    auto& [admits, total] = cells[key];
    total += 1;
    admits += r.outcome.decision == Decision::Admit;
  }
  for (const auto& [key, cnt] : cells) {
    AdmitRateRow row;
    row.tier = std::get<0>(key);
    row.ses_quintile = std::get<1>(key);
    row.perf_quintile = std::get<2>(key);
    row.admits = cnt.first;
    row.total = cnt.second;
    row.rate = static_cast<double>(cnt.first) / static_cast<double>(cnt.second);
    res.rows.push_back(std::move(row));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Decision flips between the two systems
// ---------------------------------------------------------------------------

struct FlipPair {
  Tier tier = Tier::Tier1;
  int ses_quintile = 0;
  Decision s1 = Decision::Unparseable;
  Decision s2 = Decision::Unparseable;
};

struct FlipRow {
  std::string tier;        // "all" for the aggregate row
  int ses_quintile = 0;    // 0 for the aggregate row
  std::int64_t pairs = 0;
  std::int64_t admit_to_reject = 0;
  std::int64_t reject_to_admit = 0;
  std::int64_t s1_admits = 0;
  std::int64_t s1_rejects = 0;
  double overall_rate = 0;
  double a2r_rate = 0;  // denominator: s1 admits; NaN when none
  double r2a_rate = 0;  // denominator: s1 rejects; NaN when none
};

namespace detail {

inline FlipRow flip_accumulate(const std::vector<const FlipPair*>& ps) {
  FlipRow row;
  for (const auto* p : ps) {
    row.pairs += 1;
    const bool s1_admit = p->s1 == Decision::Admit;
    (s1_admit ? row.s1_admits : row.s1_rejects) += 1;
    if (s1_admit && p->s2 == Decision::Reject) row.admit_to_reject += 1;
    if (!s1_admit && p->s2 == Decision::Admit) row.reject_to_admit += 1;
  }
  row.overall_rate = static_cast<double>(row.admit_to_reject + row.reject_to_admit) /
                     static_cast<double>(row.pairs);
  row.a2r_rate = row.s1_admits > 0
                     ? static_cast<double>(row.admit_to_reject) / static_cast<double>(row.s1_admits)
                     : NAN;
  row.r2a_rate = row.s1_rejects > 0
                     ? static_cast<double>(row.reject_to_admit) / static_cast<double>(row.s1_rejects)
                     : NAN;
  return row;
}

}  // namespace detail

// Overall and directional flip rates. Pairs with an unresolved decision on
// either side must be filtered out by the caller (they are not pairs).
inline FlipRow flip_summary(const std::vector<FlipPair>& pairs) {
  if (pairs.empty()) throw NoPairs("no decision pairs");
  std::vector<const FlipPair*> ps;
  ps.reserve(pairs.size());
  for (const auto& p : pairs) ps.push_back(&p);
  FlipRow row = detail::flip_accumulate(ps);
  row.tier = "all";
  return row;
}

inline std::vector<FlipRow> flip_rates(const std::vector<FlipPair>& pairs) {
  if (pairs.empty()) throw NoPairs("no decision pairs");
  std::map<std::pair<std::string, int>, std::vector<const FlipPair*>> groups;
  for (const auto& p : pairs) groups[{to_string(p.tier), p.ses_quintile}].push_back(&p);
  std::vector<FlipRow> rows;
  for (const auto& [key, ps] : groups) {
    FlipRow row = detail::flip_accumulate(ps);
    row.tier = key.first;
    row.ses_quintile = key.second;
    rows.push_back(std::move(row));
  }
  rows.push_back(flip_summary(pairs));
  return rows;
}

inline std::vector<FlipPair> collect_flip_pairs(const std::vector<JoinedRecord>& records) {
  std::vector<FlipPair> pairs;
  for (const auto& r : records) {
    if (!r.paired_decision) continue;
    if (r.outcome.decision == Decision::Unparseable || *r.paired_decision == Decision::Unparseable)
      continue;
    pairs.push_back({r.spec.tier, r.profile.ses_quintile, r.outcome.decision, *r.paired_decision});
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Composite-tag trends and SES-compensation shares
// ---------------------------------------------------------------------------

struct CompositeTrendRow {
  std::string decision;
  int quintile = 0;
  std::int64_t n = 0;
  double aca_support = 0, ses_support = 0, aca_penalize = 0, ses_penalize = 0;  // percent
};

inline std::vector<CompositeTrendRow> composite_trend_table(
    const std::vector<JoinedRecord>& records, bool by_perf_quintile = false) {
  std::map<std::pair<std::string, int>, std::array<std::int64_t, 5>> cells;  // 4 markers + n
  for (const auto& r : records) {
    if (!r.tags || r.outcome.decision == Decision::Unparseable) continue;
    const int q = by_perf_quintile ? r.profile.perf_quintile : r.profile.ses_quintile;
    auto& cell = cells[{to_string(r.outcome.decision), q}];
    const auto c = derive_composite(*r.tags);
    cell[0] += c.aca_support;
    cell[1] += c.ses_support;
    cell[2] += c.aca_penalize;
    cell[3] += c.ses_penalize;
    cell[4] += 1;
  }
  if (cells.empty()) throw EmptyInput("no tagged records");
  std::vector<CompositeTrendRow> rows;
  for (const auto& [key, cell] : cells) {
    CompositeTrendRow row;
    row.decision = key.first;
    row.quintile = key.second;
    row.n = cell[4];
    const double n = static_cast<double>(cell[4]);
    row.aca_support = 100.0 * static_cast<double>(cell[0]) / n;
    row.ses_support = 100.0 * static_cast<double>(cell[1]) / n;
    row.aca_penalize = 100.0 * static_cast<double>(cell[2]) / n;
    row.ses_penalize = 100.0 * static_cast<double>(cell[3]) / n;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct SesCompRow {
  std::string decision;
  int perf_quintile = 0;
  std::int64_t n = 0;
  double share = 0;  // percent with ses_compensates = true
};

inline std::vector<SesCompRow> ses_compensates_share(const std::vector<JoinedRecord>& records) {
  std::map<std::pair<std::string, int>, std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& r : records) {
    if (!r.tags || r.outcome.decision == Decision::Unparseable) continue;
    auto& [hits, n] = cells[{to_string(r.outcome.decision), r.profile.perf_quintile}];
    hits += r.tags->ses_compensates;
    n += 1;
  }
  if (cells.empty()) throw EmptyInput("no tagged records");
  std::vector<SesCompRow> rows;
  for (const auto& [key, cnt] : cells) {
    rows.push_back({key.first, key.second, cnt.second,
                    100.0 * static_cast<double>(cnt.first) / static_cast<double>(cnt.second)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Real-world benchmark comparison
// ---------------------------------------------------------------------------

struct BenchmarkResult {
  double mae = 0;       // percentage points
  double pearson_r = 0;
  int n_matched = 0;
};

// Compares per-institution predicted shares against observed ones over the
// institutions present in both maps.
inline BenchmarkResult benchmark_compare(const std::map<std::string, double>& predicted,
                                         const std::map<std::string, double>& observed) {
  std::vector<double> pred, obs;
  for (const auto& [name, p] : predicted) {
    auto it = observed.find(name);
    if (it == observed.end()) continue;
    pred.push_back(p);
    obs.push_back(it->second);
  }
  if (pred.size() < 2)
    throw InsufficientOverlap("need at least 2 matched institutions, have " +
                              std::to_string(pred.size()));
  BenchmarkResult res;
  res.n_matched = static_cast<int>(pred.size());
  double abs_sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) abs_sum += std::abs(pred[i] - obs[i]);
  res.mae = abs_sum / static_cast<double>(pred.size());
  res.pearson_r = pearson(pred, obs);
  return res;
}

// Share (in percent) of admitted applicants who are first-generation, per
// institution; institutions with no admits are absent.
inline std::map<std::string, double> first_gen_admit_share(
    const std::vector<JoinedRecord>& records) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& r : records) {
    if (r.outcome.decision != Decision::Admit) continue;
    auto& [fg, total] = counts[r.spec.institution];
    fg += r.profile.first_gen;
    total += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [name, cnt] : counts)
    out[name] = 100.0 * static_cast<double>(cnt.first) / static_cast<double>(cnt.second);
  return out;
}

// Observed benchmark CSV: header `institution,first_gen_share`, share in percent.
inline std::map<std::string, double> load_benchmark_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty benchmark csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "institution,first_gen_share")
    throw ParseError("benchmark csv must start with header 'institution,first_gen_share'");
  std::map<std::string, double> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos)
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected name,share");
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (...) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": malformed share");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Default regression design: admit ~ zip quintile + fee waiver + first gen +
// school type + perf quintile + tier, with institution / prompt / attribute
// seed as crossed random intercepts. zip and perf quintile enter as numeric
// covariates; school type reference is Private, tier reference is tier1.
// ---------------------------------------------------------------------------

inline GlmmData build_admit_model(const std::vector<JoinedRecord>& records) {
  std::vector<const JoinedRecord*> rs;
  for (const auto& r : records)
    if (r.outcome.decision != Decision::Unparseable) rs.push_back(&r);
  if (rs.size() < 50) throw EmptyInput("too few resolved records for a model fit");

  GlmmData d;
  const Eigen::Index n = static_cast<Eigen::Index>(rs.size());
  d.terms = {"(Intercept)", "zip quintile", "fee waiver: Yes", "first gen: Yes",
             "school type: Public", "perf quintile", "Tier 2", "Tier 3"};
  d.X.resize(n, 8);
  d.y.resize(n);
  std::map<std::string, int> inst_levels;
  std::map<int, int> variant_levels, seed_levels;
  for (const auto* r : rs) {
    inst_levels.emplace(r->spec.institution, static_cast<int>(inst_levels.size()));
    variant_levels.emplace(r->spec.prompt_variant, static_cast<int>(variant_levels.size()));
    seed_levels.emplace(r->spec.attr_seed, static_cast<int>(seed_levels.size()));
  }
  d.factor_names = {"institution", "prompt", "attr_seed"};
  d.n_levels = {static_cast<int>(inst_levels.size()), static_cast<int>(variant_levels.size()),
                static_cast<int>(seed_levels.size())};
  d.factor_levels.assign(3, std::vector<int>(rs.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *rs[static_cast<std::size_t>(i)];
    d.X(i, 0) = 1.0;
    d.X(i, 1) = r.profile.zip_quintile;
    d.X(i, 2) = r.profile.fee_waiver ? 1.0 : 0.0;
    d.X(i, 3) = r.profile.first_gen ? 1.0 : 0.0;
    d.X(i, 4) = r.profile.school_type == SchoolType::Public ? 1.0 : 0.0;
    d.X(i, 5) = r.profile.perf_quintile;
    d.X(i, 6) = r.spec.tier == Tier::Tier2 ? 1.0 : 0.0;
    d.X(i, 7) = r.spec.tier == Tier::Tier3 ? 1.0 : 0.0;
    d.y[i] = r.outcome.decision == Decision::Admit ? 1.0 : 0.0;
    d.factor_levels[0][static_cast<std::size_t>(i)] = inst_levels[r.spec.institution];
    d.factor_levels[1][static_cast<std::size_t>(i)] = variant_levels[r.spec.prompt_variant];
    d.factor_levels[2][static_cast<std::size_t>(i)] = seed_levels[r.spec.attr_seed];
  }
  return d;
}

}  // namespace dpaudit
