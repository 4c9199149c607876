#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/profile.hpp>
#include <dpaudit/stats/logistic.hpp>

namespace dpaudit {

// Significance stars: *** p<0.001, ** p<0.01, * p<0.05, . p<0.1.
inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

struct OrRow {
  std::string term;
  std::string odds_ratio;  // 2 decimals
  std::string stars;
  std::string ci;          // "lo-hi", 1 decimal each
};

inline std::vector<OrRow> or_report(const ModelFit& fit) {
  std::vector<OrRow> rows;
  rows.reserve(fit.terms.size());
  char buf[64];
  for (std::size_t i = 0; i < fit.terms.size(); ++i) {
    OrRow r;
    r.term = fit.terms[i];
    std::snprintf(buf, sizeof buf, "%.2f", fit.odds_ratio[i]);
    r.odds_ratio = buf;
    r.stars = significance_stars(fit.p_value[i]);
    std::snprintf(buf, sizeof buf, "%.1f-%.1f", fit.ci_lo[i], fit.ci_hi[i]);
    r.ci = buf;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string or_report_csv(const ModelFit& fit) {
  std::string out = "term,odds_ratio,significance,ci\n";
  for (const auto& r : or_report(fit)) {
    out += "\"" + r.term + "\"," + r.odds_ratio + "," + r.stars + "," + r.ci + "\n";
  }
  return out;
}

inline ojson to_json(const ModelFit& fit) {
  ojson j;
  j["terms"] = fit.terms;
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  j["se"] = std::vector<double>(fit.se.data(), fit.se.data() + fit.se.size());
  j["odds_ratio"] = fit.odds_ratio;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["p_value"] = fit.p_value;
  j["random_variance"] = fit.random_variance;
  j["log_likelihood"] = fit.log_likelihood;
  j["deviance"] = fit.deviance;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["note"] = fit.note;
  return j;
}

}  // namespace dpaudit
