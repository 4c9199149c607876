#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <dpaudit/errors.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

// Fitted model summary shared by the plain logistic and the mixed fits.
struct ModelFit {
  std::vector<std::string> terms;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  std::vector<double> odds_ratio;  // exp(beta), exact
  std::vector<double> ci_lo;       // exp(beta - 1.96 se)
  std::vector<double> ci_hi;       // exp(beta + 1.96 se)
  std::vector<double> p_value;     // Wald, two-sided
  std::map<std::string, double> random_variance;  // per grouping factor
  double log_likelihood = 0;
  double deviance = 0;
  bool converged = false;
  int iterations = 0;
  std::string note;
};

namespace detail {

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  // sum y*eta - log(1 + exp(eta)), stable in both tails
  double ll = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = eta[i];
    const double log1pexp = e > 30 ? e : std::log1p(std::exp(e));
    ll += y[i] * e - log1pexp;
  }
  return ll;
}

inline void finalize_wald(ModelFit& fit) {
  const auto p = fit.beta.size();
  fit.odds_ratio.resize(static_cast<std::size_t>(p));
  fit.ci_lo.resize(static_cast<std::size_t>(p));
  fit.ci_hi.resize(static_cast<std::size_t>(p));
  fit.p_value.resize(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto i = static_cast<std::size_t>(k);
    fit.odds_ratio[i] = std::exp(fit.beta[k]);
    fit.ci_lo[i] = std::exp(fit.beta[k] - 1.96 * fit.se[k]);
    fit.ci_hi[i] = std::exp(fit.beta[k] + 1.96 * fit.se[k]);
    const double z = fit.se[k] > 0 ? std::abs(fit.beta[k]) / fit.se[k] : HUGE_VAL;
    fit.p_value[i] = 2.0 * (1.0 - normal_cdf(z));
  }
}

}  // namespace detail

// Maximum-likelihood logistic regression via iteratively reweighted least
// squares. X must have full column rank (intercept included by the caller).
inline ModelFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<std::string>& terms, double tol = 1e-8,
                                  int max_iter = 50) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n <= p) throw SingularDesign("need more rows than columns");
  if (terms.size() != static_cast<std::size_t>(p)) throw ConfigError("terms/columns mismatch");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) throw SingularDesign("design matrix is rank-deficient");
  }

  ModelFit fit;
  fit.terms = terms;
  fit.beta = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd eta(n), mu(n), w(n);
  Eigen::MatrixXd info(p, p);
  for (int it = 1; it <= max_iter; ++it) {
    eta = X * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = detail::logistic(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    info = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd score = X.transpose() * (y - mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw SingularDesign("information matrix is not positive definite");
    Eigen::VectorXd delta = ldlt.solve(score);
    fit.beta += delta;
    fit.iterations = it;
    if (fit.beta.cwiseAbs().maxCoeff() > 30.0)
      throw SeparationError("coefficients diverging; data are (quasi-)separated");
    if (delta.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    throw NonConvergence("IRLS did not converge in " + std::to_string(max_iter) + " iterations");

  eta = X * fit.beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = detail::logistic(eta[i]);
    w[i] = mu[i] * (1.0 - mu[i]);
  }
  info = X.transpose() * w.asDiagonal() * X;
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.log_likelihood = detail::bernoulli_loglik(y, eta);
  fit.deviance = -2.0 * fit.log_likelihood;
  detail::finalize_wald(fit);
  return fit;
}

// Max-norm of the score vector X'(y - mu) at the fitted coefficients; zero at
// an exact maximum.
inline double score_max_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu[i] = detail::logistic(eta[i]);
  return (X.transpose() * (y - mu)).cwiseAbs().maxCoeff();
}

inline double logistic_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& beta) {
  return -2.0 * detail::bernoulli_loglik(y, X * beta);
}

}  // namespace dpaudit
