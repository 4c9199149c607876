#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dpaudit/rng.hpp>
#include <dpaudit/stats/logistic.hpp>
#include <dpaudit/stats/report.hpp>
#include <dpaudit/stats/tables.hpp>

#include "support/nelder_mead.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace dpaudit;
using testsupport::nelder_mead_min;

namespace {

struct SimData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

SimData simulate_logistic(const Eigen::VectorXd& beta, Eigen::Index n, std::uint64_t seed,
                          bool intercept) {
  RngStream rng(seed, "sim_logistic");
  const Eigen::Index p = beta.size();
  SimData d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      d.X(i, j) = (intercept && j == 0) ? 1.0 : rng.normal();
      eta += d.X(i, j) * beta[j];
    }
    d.y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
  }
  return d;
}

JoinedRecord rec(Tier tier, Decision dec, int ses_q = 1, int perf_q = 1,
                 const std::string& inst = "A", bool first_gen = false) {
  JoinedRecord r;
  r.spec.tier = tier;
  r.spec.institution = inst;
  static int counter = 0;
  r.spec.trial_id = "t/" + inst + "/" + std::to_string(counter);
  r.spec.profile_id = counter++;
  r.profile.profile_id = r.spec.profile_id;
  r.profile.ses_quintile = ses_q;
  r.profile.perf_quintile = perf_q;
  r.profile.first_gen = first_gen;
  r.outcome.trial_id = r.spec.trial_id;
  r.outcome.decision = dec;
  return r;
}

}  // namespace

TEST_CASE("irls: intercept-only with half ones is exactly zero") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(100, 1);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) y[i] = i < 50 ? 1.0 : 0.0;
  auto fit = fit_logistic_irls(X, y, {"(Intercept)"});
  CHECK(fit.converged);
  CHECK(fit.beta[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(fit.odds_ratio[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("irls: planted coefficients recovered at n=50000") {
  Eigen::VectorXd beta(2);
  beta << 0.5, -1.0;
  auto d = simulate_logistic(beta, 50000, 1234, false);
  auto fit = fit_logistic_irls(d.X, d.y, {"x1", "x2"});
  CHECK(fit.converged);
  CHECK(fit.beta[0] == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(fit.beta[0] - 0.5) < 0.05);
  CHECK(std::abs(fit.beta[1] + 1.0) < 0.05);
}

TEST_CASE("irls: deviance matches the derivative-free oracle to 1e-6") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    RngStream pick(seed, "shape");
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(pick.uniform_int(0, 2));
    Eigen::VectorXd beta(p);
    for (Eigen::Index j = 0; j < p; ++j) beta[j] = pick.uniform(-1.0, 1.0);
    auto d = simulate_logistic(beta, 200, seed * 7 + 1, true);
    std::vector<std::string> terms(static_cast<std::size_t>(p), "b");
    auto fit = fit_logistic_irls(d.X, d.y, terms);
    const double oracle = nelder_mead_min(
        [&](const Eigen::VectorXd& b) { return logistic_deviance(d.X, d.y, b); },
        Eigen::VectorXd::Zero(p));
    CHECK(std::abs(fit.deviance - oracle) < 1e-6);
    // score vanishes at the maximum
    CHECK(score_max_norm(d.X, d.y, fit.beta) < 10 * 1e-8 * static_cast<double>(d.X.rows()));
  }
}

TEST_CASE("irls: separation and singular designs are reported") {
  Eigen::MatrixXd X(40, 2);
  Eigen::VectorXd y(40);
  RngStream rng(5, "sep");
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    y[i] = X(i, 1) > 0 ? 1.0 : 0.0;  // perfectly separated
  }
  CHECK_THROWS_AS(fit_logistic_irls(X, y, {"a", "b"}), SeparationError);

  Eigen::MatrixXd X2(40, 2);
  X2.col(0).setOnes();
  X2.col(1).setOnes();  // duplicate column
  CHECK_THROWS_AS(fit_logistic_irls(X2, y, {"a", "b"}), SingularDesign);
}

TEST_CASE("odds-ratio identity holds to 1e-12") {
  Eigen::VectorXd beta(3);
  beta << 0.3, -0.7, 1.2;
  auto d = simulate_logistic(beta, 2000, 99, true);
  auto fit = fit_logistic_irls(d.X, d.y, {"a", "b", "c"});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(fit.odds_ratio[i] == doctest::Approx(std::exp(fit.beta[static_cast<Eigen::Index>(i)]))
                                   .epsilon(1e-12));
}

TEST_CASE("or_report: formatting of OR, CI and stars") {
  ModelFit fit;
  fit.terms = {"first gen: Yes", "flat"};
  fit.beta = Eigen::VectorXd(2);
  fit.beta << 0.693147, 0.0;
  fit.se = Eigen::VectorXd(2);
  fit.se << 0.1, 0.5;
  detail::finalize_wald(fit);

  CHECK(fit.odds_ratio[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(fit.ci_lo[0] == doctest::Approx(1.64).epsilon(0.01));
  CHECK(fit.ci_hi[0] == doctest::Approx(2.44).epsilon(0.01));

  auto rows = or_report(fit);
  CHECK(rows[0].odds_ratio == "2.00");
  CHECK(rows[0].stars == "***");
  CHECK(rows[0].ci == "1.6-2.4");
  CHECK(rows[1].odds_ratio == "1.00");
  CHECK(rows[1].stars == "");  // p >= 0.1 for beta 0

  // layout reference: a strong first-gen term renders as "10.30 ***"
  ModelFit strong;
  strong.terms = {"first gen: Yes"};
  strong.beta = Eigen::VectorXd(1);
  strong.beta << std::log(10.30);
  strong.se = Eigen::VectorXd(1);
  strong.se << 0.01;
  detail::finalize_wald(strong);
  auto srow = or_report(strong)[0];
  CHECK(srow.odds_ratio == "10.30");
  CHECK(srow.stars == "***");
}

TEST_CASE("significance stars cover the dot threshold") {
  CHECK(significance_stars(0.0001) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.02) == "*");
  CHECK(significance_stars(0.07) == ".");
  CHECK(significance_stars(0.5) == "");
}

TEST_CASE("admit_rate_table: counting, exclusion, absent cells") {
  std::vector<JoinedRecord> rs;
  for (int i = 0; i < 3; ++i) rs.push_back(rec(Tier::Tier1, Decision::Admit));
  for (int i = 0; i < 7; ++i) rs.push_back(rec(Tier::Tier1, Decision::Reject));
  rs.push_back(rec(Tier::Tier2, Decision::Unparseable));
  auto res = admit_rate_table(rs);
  REQUIRE(res.rows.size() == 1);  // tier2 cell had only unparseable -> absent
  CHECK(res.rows[0].tier == "tier1");
  CHECK(res.rows[0].rate == doctest::Approx(0.30));
  CHECK(res.excluded_unparseable == 1);

  std::vector<JoinedRecord> all_admit;
  for (int i = 0; i < 5; ++i) all_admit.push_back(rec(Tier::Tier3, Decision::Admit));
  auto res2 = admit_rate_table(all_admit);
  CHECK(res2.rows[0].rate == 1.0);
}

TEST_CASE("admit_rate_table: permutation invariance") {
  std::vector<JoinedRecord> rs;
  RngStream rng(3, "amt");
  for (int i = 0; i < 200; ++i)
    rs.push_back(rec(rng.bernoulli(0.5) ? Tier::Tier1 : Tier::Tier3,
                     rng.bernoulli(0.4) ? Decision::Admit : Decision::Reject,
                     1 + static_cast<int>(rng.uniform_int(0, 4)),
                     1 + static_cast<int>(rng.uniform_int(0, 4))));
  auto base = admit_rate_table(rs, true);
  std::vector<std::size_t> perm(rs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<JoinedRecord> shuffled;
  for (auto k : perm) shuffled.push_back(rs[k]);
  auto other = admit_rate_table(shuffled, true);
  REQUIRE(base.rows.size() == other.rows.size());
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    CHECK(base.rows[i].tier == other.rows[i].tier);
    CHECK(base.rows[i].admits == other.rows[i].admits);
    CHECK(base.rows[i].total == other.rows[i].total);
  }
}

TEST_CASE("flip rates: exhaustive 4-pair example") {
  // S1 = (A, A, R, R), S2 = (A, R, R, A)
  std::vector<FlipPair> pairs = {
      {Tier::Tier1, 1, Decision::Admit, Decision::Admit},
      {Tier::Tier1, 1, Decision::Admit, Decision::Reject},
      {Tier::Tier1, 1, Decision::Reject, Decision::Reject},
      {Tier::Tier1, 1, Decision::Reject, Decision::Admit},
  };
  auto row = flip_summary(pairs);
  CHECK(row.pairs == 4);
  CHECK(row.admit_to_reject == 1);
  CHECK(row.reject_to_admit == 1);
  CHECK(row.a2r_rate == doctest::Approx(0.5));
  CHECK(row.r2a_rate == doctest::Approx(0.5));
  CHECK(row.overall_rate == doctest::Approx(0.5));
}

TEST_CASE("flip rates: trivial cases and the closure identity") {
  std::vector<FlipPair> same = {{Tier::Tier2, 2, Decision::Admit, Decision::Admit},
                                {Tier::Tier2, 2, Decision::Reject, Decision::Reject}};
  auto r0 = flip_summary(same);
  CHECK(r0.overall_rate == 0.0);

  std::vector<FlipPair> one = {{Tier::Tier3, 5, Decision::Admit, Decision::Reject}};
  CHECK(flip_summary(one).overall_rate == 1.0);

  RngStream rng(8, "flips");
  std::vector<FlipPair> pairs;
  for (int i = 0; i < 500; ++i) {
    pairs.push_back({rng.bernoulli(0.5) ? Tier::Tier1 : Tier::Tier2,
                     1 + static_cast<int>(rng.uniform_int(0, 4)),
                     rng.bernoulli(0.5) ? Decision::Admit : Decision::Reject,
                     rng.bernoulli(0.5) ? Decision::Admit : Decision::Reject});
  }
  for (const auto& row : flip_rates(pairs)) {
    // closure: overall flips = directional flip counts, exactly
    CHECK(row.overall_rate * static_cast<double>(row.pairs) ==
          doctest::Approx(static_cast<double>(row.admit_to_reject + row.reject_to_admit))
              .epsilon(1e-12));
    CHECK(row.s1_admits + row.s1_rejects == row.pairs);
  }
  CHECK_THROWS_AS(flip_summary({}), NoPairs);
}

TEST_CASE("composite trend table: hand-built fixture with exact fractions") {
  std::vector<JoinedRecord> rs;
  auto with_tags = [](JoinedRecord r, TagValue academic, TagValue fee, bool comp) {
    TagRecord t;
    t.trial_id = r.spec.trial_id;
    t.academic = academic;
    t.fee_waiver = fee;
    t.ses_compensates = comp;
    r.tags = t;
    return r;
  };
  // 4 admits in ses quintile 1: academic support 4/4, fee support 2/4
  for (int i = 0; i < 2; ++i)
    rs.push_back(with_tags(rec(Tier::Tier1, Decision::Admit, 1, 1), TagValue::Support,
                           TagValue::Support, true));
  for (int i = 0; i < 2; ++i)
    rs.push_back(with_tags(rec(Tier::Tier1, Decision::Admit, 1, 2), TagValue::Support,
                           TagValue::Null, false));
  // 4 rejects in ses quintile 5: academic penalize 3/4, fee penalize 1/4
  for (int i = 0; i < 3; ++i)
    rs.push_back(with_tags(rec(Tier::Tier1, Decision::Reject, 5, 1),
                           TagValue::Penalize, i == 0 ? TagValue::Penalize : TagValue::Null,
                           false));
  rs.push_back(with_tags(rec(Tier::Tier1, Decision::Reject, 5, 1), TagValue::Null,
                         TagValue::Null, false));

  auto rows = composite_trend_table(rs);
  REQUIRE(rows.size() == 2);
  const auto& admit = rows[0].decision == "admit" ? rows[0] : rows[1];
  const auto& reject = rows[0].decision == "admit" ? rows[1] : rows[0];
  CHECK(admit.n == 4);
  CHECK(admit.aca_support == doctest::Approx(100.0));
  CHECK(admit.ses_support == doctest::Approx(50.0));
  CHECK(admit.aca_penalize == doctest::Approx(0.0));
  CHECK(reject.n == 4);
  CHECK(reject.aca_penalize == doctest::Approx(75.0));
  CHECK(reject.ses_penalize == doctest::Approx(25.0));
  // closure: admit + reject counts partition the tagged records
  CHECK(admit.n + reject.n == 8);

  auto shares = ses_compensates_share(rs);
  bool found = false;
  for (const auto& s : shares)
    if (s.decision == "admit" && s.perf_quintile == 1) {
      CHECK(s.share == doctest::Approx(100.0));
      found = true;
    }
  CHECK(found);
}

TEST_CASE("benchmark_compare: trivial, hand example, and overlap guard") {
  std::map<std::string, double> pred{{"A", 10}, {"B", 20}, {"C", 30}};
  auto eq = benchmark_compare(pred, pred);
  CHECK(eq.mae == 0.0);
  CHECK(eq.pearson_r == doctest::Approx(1.0));

  std::map<std::string, double> obs{{"A", 12}, {"B", 18}, {"C", 36}};
  auto res = benchmark_compare(pred, obs);
  CHECK(res.mae == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
  // hand Pearson: r = 720 / sqrt(600 * 936)
  CHECK(res.pearson_r == doctest::Approx(720.0 / std::sqrt(600.0 * 936.0)).epsilon(1e-12));
  CHECK(res.n_matched == 3);

  std::map<std::string, double> tiny{{"A", 1}};
  CHECK_THROWS_AS(benchmark_compare(tiny, obs), InsufficientOverlap);
}

TEST_CASE("build_admit_model: design matrix encoding") {
  std::vector<JoinedRecord> rs;
  RngStream rng(77, "bld");
  for (int i = 0; i < 120; ++i) {
    auto r = rec(i % 2 ? Tier::Tier2 : Tier::Tier3,
                 rng.bernoulli(0.5) ? Decision::Admit : Decision::Reject,
                 1 + i % 5, 1 + (i / 5) % 5, i % 3 ? "Inst A" : "Inst B", i % 4 == 0);
    r.spec.prompt_variant = 1 + i % 3;
    r.spec.attr_seed = 1 + (i / 3) % 3;
    r.profile.zip_quintile = 1 + i % 5;
    r.profile.fee_waiver = i % 5 == 0;
    r.profile.school_type = i % 2 ? SchoolType::Public : SchoolType::Private;
    rs.push_back(r);
  }
  auto d = build_admit_model(rs);
  CHECK(d.X.rows() == 120);
  CHECK(d.X.cols() == 8);
  CHECK(d.terms[4] == "school type: Public");
  CHECK(d.factor_names.size() == 3);
  CHECK(d.n_levels[0] == 2);
  CHECK(d.n_levels[1] == 3);
  CHECK(d.n_levels[2] == 3);
  for (int i = 0; i < 120; ++i) {
    CHECK(d.X(i, 0) == 1.0);
    CHECK(d.X(i, 4) == (rs[static_cast<std::size_t>(i)].profile.school_type == SchoolType::Public ? 1.0 : 0.0));
  }
}
