#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <dpaudit/errors.hpp>
#include <dpaudit/gen_config.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

// ---------------------------------------------------------------------------
// Small vector statistics used throughout the generator and the analyses.
// ---------------------------------------------------------------------------

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Percentile ranks in (0,1): (average rank - 0.5) / n, ties averaged.
inline std::vector<double> percentile_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = (avg_rank - 0.5) / static_cast<double>(n);
    i = j + 1;
  }
  return out;
}

inline std::vector<double> zscores(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sd > 0 ? (v[i] - m) / sd : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Marginal samplers
// ---------------------------------------------------------------------------

inline double sample_income(int quintile, const GenConfig& cfg, RngStream& rng) {
  const auto& br = cfg.income_brackets.at(static_cast<std::size_t>(quintile - 1));
  return rng.triangular(br.low, br.mode, br.high);
}

// Inverse-CDF draw from a piecewise-linear density given by knots.
inline double sample_piecewise_linear(const std::vector<DensityKnot>& knots, RngStream& rng) {
  std::vector<double> seg_area(knots.size() - 1);
  double total = 0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    seg_area[i] = 0.5 * (knots[i].w + knots[i + 1].w) * (knots[i + 1].x - knots[i].x);
    total += seg_area[i];
  }
  double a = rng.next_double() * total;
  std::size_t s = 0;
  while (s + 1 < seg_area.size() && a > seg_area[s]) a -= seg_area[s++];
  const double x0 = knots[s].x, dx = knots[s + 1].x - x0;
  const double f0 = knots[s].w, f1 = knots[s + 1].w;
  double t;
  if (std::abs(f1 - f0) < 1e-12 * (f0 + f1 + 1e-300)) {
    t = f0 > 0 ? a / (dx * f0) : 0.5;
  } else {
    // solve (f1-f0)/2 t^2 + f0 t - a/dx = 0 for t in [0,1]
    const double c2 = 0.5 * (f1 - f0), c1 = f0, c0 = -a / dx;
    const double disc = std::max(0.0, c1 * c1 - 4 * c2 * c0);
    t = (-c1 + std::sqrt(disc)) / (2 * c2);
  }
  return x0 + std::clamp(t, 0.0, 1.0) * dx;
}

inline int sample_binomial(int n, double p, RngStream& rng) {
  p = std::clamp(p, 0.0, 1.0);
  int k = 0;
  for (int i = 0; i < n; ++i) k += rng.bernoulli(p);
  return k;
}

// ---------------------------------------------------------------------------
// Correlation calibration: rank alignment against a latent blend.
// ---------------------------------------------------------------------------

struct Calibration {
  double mixing_weight = 0;
  std::vector<double> aligned;
  double achieved = 0;
  int iterations = 0;
};

namespace detail {

// Reorder `draws` so their ranks follow z = w*std(driver) + sqrt(1-w^2)*noise.
inline std::vector<double> rank_align(const std::vector<double>& driver_std,
                                      const std::vector<double>& noise,
                                      const std::vector<double>& draws, double w) {
  const std::size_t n = draws.size();
  const double wn = std::sqrt(std::max(0.0, 1.0 - w * w));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = w * driver_std[i] + wn * noise[i];
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return z[a] != z[b] ? z[a] < z[b] : a < b;
  });
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> aligned(n);
  for (std::size_t k = 0; k < n; ++k) aligned[order[k]] = sorted[k];
  return aligned;
}

}  // namespace detail

// Finds the mixing weight by bisection so that Pearson(driver, aligned) hits
// target_corr within tolerance. The aligned vector is always a permutation of
// `draws`, so the marginal distribution is preserved exactly.
inline Calibration calibrate_correlation(const std::vector<double>& driver,
                                         const std::vector<double>& draws,
                                         double target_corr, double tolerance,
                                         int max_iter, RngStream& rng) {
  if (driver.size() != draws.size()) throw ConfigError("driver/draws size mismatch");
  if (driver.size() < 100) throw ConfigError("calibration needs at least 100 entries");
  if (std::abs(target_corr) > 1.0) throw ConfigError("|target_corr| must be <= 1");
  const std::vector<double> driver_std = zscores(driver);
  {
    double ss = 0;
    for (double d : driver_std) ss += d * d;
    if (ss == 0) throw ConfigError("driver has zero variance");
  }
  std::vector<double> noise(driver.size());
  for (auto& x : noise) x = rng.normal();

  Calibration cal;
  if (target_corr == 0.0) {
    cal.mixing_weight = 0.0;
    cal.aligned = detail::rank_align(driver_std, noise, draws, 0.0);
    cal.achieved = pearson(driver, cal.aligned);
    return cal;
  }

  auto eval = [&](double w) {
    cal.aligned = detail::rank_align(driver_std, noise, draws, w);
    return pearson(driver, cal.aligned);
  };

  double lo = -1.0, hi = 1.0;
  const double f_hi = eval(1.0), f_lo = eval(-1.0);
  if (target_corr > f_hi + tolerance || target_corr < f_lo - tolerance)
    throw NonConvergence("correlation target " + std::to_string(target_corr) +
                         " infeasible for this marginal (achievable range [" +
                         std::to_string(f_lo) + ", " + std::to_string(f_hi) + "])");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = eval(mid);
    cal.mixing_weight = mid;
    cal.achieved = f;
    cal.iterations = it + 1;
    if (std::abs(f - target_corr) <= tolerance) return cal;
    if (f < target_corr)
      lo = mid;
    else
      hi = mid;
  }
  throw NonConvergence("correlation calibration did not reach tolerance " +
                       std::to_string(tolerance) + " in " + std::to_string(max_iter) +
                       " iterations (best " + std::to_string(cal.achieved) + ")");
}

// Convenience overload drawing the marginal from a sampler.
inline Calibration calibrate_correlation(const std::vector<double>& driver,
                                         const std::function<double(RngStream&)>& marginal,
                                         double target_corr, double tolerance,
                                         int max_iter, RngStream& rng) {
  std::vector<double> draws(driver.size());
  for (auto& d : draws) d = marginal(rng);
  return calibrate_correlation(driver, draws, target_corr, tolerance, max_iter, rng);
}

// ---------------------------------------------------------------------------
// Composite indices
// ---------------------------------------------------------------------------

inline double compute_perf_index(double gpa_pct, double sat_pct, double activity_norm,
                                 double leadership_norm, double award_norm) {
  return 0.35 * (gpa_pct + sat_pct) + 0.2 * activity_norm + 0.1 * leadership_norm +
         0.1 * award_norm;
}

// Ranks for fee waiver and first gen must already be sign-inverted by the
// caller (holding either marks lower SES).
inline double compute_ses_index(double zip_rank, double school_rank, double fee_rank,
                                double firstgen_rank, const std::array<double, 4>& weights) {
  double wsum = 0;
  for (double w : weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw WeightError("ses weights must sum to 1, got " + std::to_string(wsum));
  return weights[0] * zip_rank + weights[1] * school_rank + weights[2] * fee_rank +
         weights[3] * firstgen_rank;
}

// ---------------------------------------------------------------------------
// Quintile assignment and coverage subsampling
// ---------------------------------------------------------------------------

// Balanced rank partition into quintiles 1..5: occupancy differs by at most
// one, labels are monotone in value, ties break by ascending id.
inline std::vector<int> assign_quintiles(const std::vector<double>& values,
                                         const std::vector<std::int64_t>& ids) {
  const std::size_t n = values.size();
  if (n != ids.size()) throw ConfigError("values/ids size mismatch");
  if (n < 5) throw ConfigError("need at least 5 values to assign quintiles");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return ids[a] < ids[b];
  });
  std::vector<int> out(n);
  for (int q = 1; q <= 5; ++q) {
    const std::size_t beg = (static_cast<std::size_t>(q - 1) * n) / 5;
    const std::size_t end = (static_cast<std::size_t>(q) * n) / 5;
    for (std::size_t k = beg; k < end; ++k) out[order[k]] = q;
  }
  return out;
}

// Keeps min(min_cell, population) profiles from each SES x performance cell,
// then fills the remainder uniformly at random without replacement. Output is
// sorted by profile_id.
inline std::vector<Profile> subsample_with_coverage(const std::vector<Profile>& cohort,
                                                    std::int64_t target_n,
                                                    std::int64_t min_cell, RngStream& rng) {
  if (static_cast<std::int64_t>(cohort.size()) < target_n)
    throw InsufficientCohort("cohort of " + std::to_string(cohort.size()) +
                             " cannot yield subsample of " + std::to_string(target_n));
  if (25 * min_cell > target_n) throw ConfigError("25*min_cell exceeds target_n");

  const std::size_t n = cohort.size();
  std::vector<char> picked(n, 0);
  std::size_t n_picked = 0;

  if (min_cell > 0) {
    std::array<std::array<std::vector<std::size_t>, 5>, 5> cells;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cohort[i];
      if (p.ses_quintile < 1 || p.ses_quintile > 5 || p.perf_quintile < 1 || p.perf_quintile > 5)
        throw ConfigError("subsample requires assigned ses/perf quintiles");
      cells[static_cast<std::size_t>(p.ses_quintile - 1)]
           [static_cast<std::size_t>(p.perf_quintile - 1)].push_back(i);
    }
    for (auto& row : cells) {
      for (auto& cell : row) {
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(min_cell), cell.size());
        for (auto k : rng.sample_without_replacement(cell.size(), take)) {
          picked[cell[k]] = 1;
          ++n_picked;
        }
      }
    }
  }

  std::vector<std::size_t> rest;
  rest.reserve(n - n_picked);
  for (std::size_t i = 0; i < n; ++i)
    if (!picked[i]) rest.push_back(i);
  const std::size_t need = static_cast<std::size_t>(target_n) - n_picked;
  for (auto k : rng.sample_without_replacement(rest.size(), need)) picked[rest[k]] = 1;

  std::vector<Profile> out;
  out.reserve(static_cast<std::size_t>(target_n));
  for (std::size_t i = 0; i < n; ++i)
    if (picked[i]) out.push_back(cohort[i]);
  std::sort(out.begin(), out.end(),
            [](const Profile& a, const Profile& b) { return a.profile_id < b.profile_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Per-profile sampling and the cohort pipeline
// ---------------------------------------------------------------------------

namespace detail {

// Per-variable streams keyed by (seed, cohort, variable, profile) make the
// draw for one variable independent of every other variable's code path.
struct CohortStreams {
  std::uint64_t seed;
  std::uint64_t cohort;
  RngStream per_profile(std::string_view var, std::int64_t profile_id) const {
    return RngStream(seed, var, cohort, static_cast<std::uint64_t>(profile_id));
  }
  RngStream per_cohort(std::string_view var) const { return RngStream(seed, var, cohort); }
};

}  // namespace detail

// Draws everything that is independent per profile. gpa and sat hold raw
// marginal draws at this point; generate_cohort rank-aligns them across the
// cohort afterwards, and indices/quintiles stay unset.
inline Profile sample_profile(std::int64_t profile_id, int cohort_id, const GenConfig& cfg,
                              const detail::CohortStreams& streams) {
  Profile p;
  p.profile_id = profile_id;
  p.cohort_id = cohort_id;

  {
    auto rng = streams.per_profile("income_quintile", profile_id);
    p.income_quintile = static_cast<int>(rng.uniform_int(1, 5));
  }
  {
    auto rng = streams.per_profile("household_income", profile_id);
    p.household_income = static_cast<std::int64_t>(std::llround(sample_income(p.income_quintile, cfg, rng)));
  }
  {
    auto rng = streams.per_profile("gpa", profile_id);
    p.gpa = sample_piecewise_linear(cfg.gpa_density, rng);
  }
  {
    auto rng = streams.per_profile("sat", profile_id);
    const double mu = cfg.sat_mean_by_quintile[static_cast<std::size_t>(p.income_quintile - 1)];
    p.sat = static_cast<int>(std::llround(
        rng.truncated_normal(mu, cfg.sat_sd, cfg.sat_min, cfg.sat_max)));
  }
  const std::size_t qi = static_cast<std::size_t>(p.income_quintile - 1);
  {
    auto rng = streams.per_profile("school_type", profile_id);
    p.school_type = rng.bernoulli(cfg.school_private_prob_by_quintile[qi])
                        ? SchoolType::Private
                        : SchoolType::Public;
  }
  const bool is_private = p.school_type == SchoolType::Private;
  {
    auto rng = streams.per_profile("activity", profile_id);
    const double pa = cfg.activity_base_prob_by_quintile[qi] +
                      (is_private ? cfg.activity_private_bonus : 0.0);
    p.activity = sample_binomial(cfg.activity_max, pa, rng);
  }
  const double rate_adj = 1.0 + cfg.rate_quintile_gain * (p.income_quintile - 3) +
                          (is_private ? cfg.rate_private_gain : 0.0);
  {
    auto rng = streams.per_profile("leadership", profile_id);
    p.leadership = sample_binomial(p.activity, cfg.leadership_rate * rate_adj, rng);
  }
  {
    auto rng = streams.per_profile("award", profile_id);
    p.award = sample_binomial(p.activity, cfg.award_rate * rate_adj, rng);
  }
  {
    auto rng = streams.per_profile("fee_waiver", profile_id);
    const int size = static_cast<int>(rng.uniform_int(cfg.household_size_min, cfg.household_size_max));
    const double cutoff = cfg.usda_thresholds[static_cast<std::size_t>(size - cfg.household_size_min)];
    bool eligible = static_cast<double>(p.household_income) <= cutoff;
    if (rng.bernoulli(cfg.fee_waiver_flip_prob)) eligible = !eligible;
    p.fee_waiver = eligible;
  }
  {
    auto rng = streams.per_profile("first_gen", profile_id);
    p.first_gen = rng.bernoulli(cfg.first_gen_prob_by_quintile[qi]);
  }
  {
    auto rng = streams.per_profile("zip", profile_id);
    if (rng.bernoulli(cfg.zip_match_prob)) {
      p.zip_quintile = p.income_quintile;
    } else {
      int pick = static_cast<int>(rng.uniform_int(1, 4));
      p.zip_quintile = pick < p.income_quintile ? pick : pick + 1;
    }
    const auto& pool = cfg.zip_pools.at(p.zip_quintile);
    p.zip = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
  }
  return p;
}

inline void compute_indices(std::vector<Profile>& ps, const GenConfig& cfg) {
  const std::size_t n = ps.size();
  std::vector<double> gpa(n), sat(n), act(n), lead(n), award(n), zipq(n), school(n), fee(n),
      fg(n), iq(n);
  for (std::size_t i = 0; i < n; ++i) {
    gpa[i] = ps[i].gpa;
    sat[i] = ps[i].sat;
    act[i] = ps[i].activity;
    lead[i] = ps[i].leadership;
    award[i] = ps[i].award;
    zipq[i] = ps[i].zip_quintile;
    school[i] = ps[i].school_type == SchoolType::Private ? 1.0 : 0.0;
    fee[i] = ps[i].fee_waiver ? 1.0 : 0.0;
    fg[i] = ps[i].first_gen ? 1.0 : 0.0;
    iq[i] = ps[i].income_quintile;
  }
  const auto gpa_pct = percentile_ranks(gpa);
  const auto sat_pct = percentile_ranks(sat);
  const auto act_z = zscores(act);
  const auto lead_z = zscores(lead);
  const auto award_z = zscores(award);
  const auto zip_rank = percentile_ranks(zipq);
  const auto school_rank = percentile_ranks(school);
  const auto fee_rank = percentile_ranks(fee);
  const auto fg_rank = percentile_ranks(fg);

  std::array<double, 4> w = cfg.ses_weights;
  if (cfg.ses_weights_from_cohort) {
    w = {std::abs(pearson(zipq, iq)), std::abs(pearson(school, iq)),
         std::abs(pearson(fee, iq)), std::abs(pearson(fg, iq))};
    const double s = w[0] + w[1] + w[2] + w[3];
    if (s <= 0) throw DegenerateData("cohort SES weights are all zero");
    for (auto& x : w) x /= s;
  }

  for (std::size_t i = 0; i < n; ++i) {
    ps[i].perf_index =
        compute_perf_index(gpa_pct[i], sat_pct[i], act_z[i], lead_z[i], award_z[i]);
    ps[i].ses_index = compute_ses_index(zip_rank[i], school_rank[i], 1.0 - fee_rank[i],
                                        1.0 - fg_rank[i], w);
  }

  std::vector<double> perf(n), ses(n);
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    perf[i] = ps[i].perf_index;
    ses[i] = ps[i].ses_index;
    ids[i] = ps[i].profile_id;
  }
  const auto perf_q = assign_quintiles(perf, ids);
  const auto ses_q = assign_quintiles(ses, ids);
  for (std::size_t i = 0; i < n; ++i) {
    ps[i].perf_quintile = perf_q[i];
    ps[i].ses_quintile = ses_q[i];
  }
}

inline CohortStats compute_cohort_stats(const std::vector<Profile>& ps) {
  CohortStats s;
  s.n = ps.size();
  const std::size_t n = ps.size();
  if (n == 0) return s;

  auto col = [&](auto&& get) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(get(ps[i]));
    return v;
  };
  std::vector<std::pair<std::string, std::vector<double>>> vars;
  vars.emplace_back("income_quintile", col([](const Profile& p) { return p.income_quintile; }));
  vars.emplace_back("household_income", col([](const Profile& p) { return p.household_income; }));
  vars.emplace_back("gpa", col([](const Profile& p) { return p.gpa; }));
  vars.emplace_back("sat", col([](const Profile& p) { return p.sat; }));
  vars.emplace_back("activity", col([](const Profile& p) { return p.activity; }));
  vars.emplace_back("leadership", col([](const Profile& p) { return p.leadership; }));
  vars.emplace_back("award", col([](const Profile& p) { return p.award; }));
  vars.emplace_back("first_gen", col([](const Profile& p) { return p.first_gen ? 1 : 0; }));
  vars.emplace_back("fee_waiver", col([](const Profile& p) { return p.fee_waiver ? 1 : 0; }));
  vars.emplace_back("school_private",
                    col([](const Profile& p) { return p.school_type == SchoolType::Private ? 1 : 0; }));
  vars.emplace_back("zip_quintile", col([](const Profile& p) { return p.zip_quintile; }));
  vars.emplace_back("perf_index", col([](const Profile& p) { return p.perf_index; }));
  vars.emplace_back("ses_index", col([](const Profile& p) { return p.ses_index; }));
  vars.emplace_back("perf_quintile", col([](const Profile& p) { return p.perf_quintile; }));
  vars.emplace_back("ses_quintile", col([](const Profile& p) { return p.ses_quintile; }));

  for (const auto& [name, v] : vars) s.means[name] = mean_of(v);
  s.fractions["first_gen"] = s.means["first_gen"];
  s.fractions["fee_waiver"] = s.means["fee_waiver"];
  s.fractions["school_private"] = s.means["school_private"];

  auto int_hist = [&](const std::string& name, const std::vector<double>& v) {
    auto& h = s.histograms[name];
    for (double x : v) h[std::to_string(static_cast<long long>(x))]++;
  };
  auto bin_hist = [&](const std::string& name, const std::vector<double>& v, double lo,
                      double hi, int bins) {
    auto& h = s.histograms[name];
    for (double x : v) {
      int b = static_cast<int>((x - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f", lo + (hi - lo) * b / bins);
      h[buf]++;
    }
  };
  int_hist("activity", vars[4].second);
  int_hist("leadership", vars[5].second);
  int_hist("award", vars[6].second);
  bin_hist("gpa", vars[2].second, 1.0, 5.0, 16);
  bin_hist("sat", vars[3].second, 800, 1600, 16);

  s.corr_vars.reserve(vars.size());
  for (const auto& [name, v] : vars) s.corr_vars.push_back(name);
  s.pearson.assign(vars.size(), std::vector<double>(vars.size(), 1.0));
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      s.pearson[i][j] = s.pearson[j][i] = pearson(vars[i].second, vars[j].second);

  for (const auto& p : ps)
    s.cell_counts[static_cast<std::size_t>(p.ses_quintile - 1)]
                 [static_cast<std::size_t>(p.perf_quintile - 1)]++;
  return s;
}

// Full pipeline: sample, rank-align GPA and SAT to their correlation targets,
// compute indices and quintiles, coverage-subsample, summarize. Bit-identical
// for identical (config, cohort_id).
inline std::pair<std::vector<Profile>, CohortStats> generate_cohort(int cohort_id,
                                                                    const GenConfig& cfg) {
  cfg.validate();
  detail::CohortStreams streams{cfg.master_seed, static_cast<std::uint64_t>(cohort_id)};
  const std::int64_t n = cfg.cohort_size;

  std::vector<Profile> ps;
  ps.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    ps.push_back(sample_profile(cohort_id * 1000000LL + i, cohort_id, cfg, streams));

  std::vector<double> iq(ps.size()), income(ps.size()), gpa_draws(ps.size()), sat_draws(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    iq[i] = ps[i].income_quintile;
    income[i] = static_cast<double>(ps[i].household_income);
    gpa_draws[i] = ps[i].gpa;
    sat_draws[i] = ps[i].sat;
  }
  {
    auto rng = streams.per_cohort("gpa_align");
    auto cal = calibrate_correlation(iq, gpa_draws, cfg.gpa_quintile_target_corr,
                                     cfg.corr_tolerance, cfg.corr_max_iter, rng);
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].gpa = cal.aligned[i];
  }
  {
    auto rng = streams.per_cohort("sat_align");
    auto cal = calibrate_correlation(income, sat_draws, cfg.sat_income_target_corr,
                                     cfg.corr_tolerance, cfg.corr_max_iter, rng);
    for (std::size_t i = 0; i < ps.size(); ++i)
      ps[i].sat = static_cast<int>(std::llround(cal.aligned[i]));
  }

  compute_indices(ps, cfg);

  auto sub_rng = streams.per_cohort("subsample");
  auto sub = subsample_with_coverage(ps, cfg.subsample_size, cfg.subsample_min_cell, sub_rng);
  auto stats = compute_cohort_stats(sub);
  return {std::move(sub), std::move(stats)};
}

}  // namespace dpaudit
