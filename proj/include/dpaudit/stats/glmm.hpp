#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <dpaudit/errors.hpp>
#include <dpaudit/stats/logistic.hpp>

namespace dpaudit {

// Data for a random-intercept logistic model: dense fixed-effect design plus
// crossed grouping factors (one level index per row and factor).
struct GlmmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> terms;
  std::vector<std::string> factor_names;
  std::vector<std::vector<int>> factor_levels;  // [factor][row] -> 0-based level
  std::vector<int> n_levels;
};

struct GlmmOptions {
  double tol = 1e-7;
  int max_inner = 80;
  int outer_sweeps = 3;
  int golden_iters = 22;
  double var_lo = 1e-8;
  double var_hi = 25.0;
  // When non-empty: fit once at these per-factor variances (entries <= 0 drop
  // the factor exactly) instead of searching.
  std::vector<double> fixed_variances;
};

namespace detail {

struct PirlsState {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;  // stacked random intercepts for active factors
};

struct PirlsResult {
  double cond_loglik = 0;   // Bernoulli log-likelihood at the joint mode
  double logdet_Hu = 0;     // log|Z'WZ + D| at the mode
  Eigen::MatrixXd cov_beta; // top-left block of the joint information inverse
  int iterations = 0;
  bool converged = false;
};

// Joint penalized IRLS over (beta, u) at fixed variances. Factors listed in
// `active` contribute random intercepts with ridge 1/var.
class GlmmWorkspace {
 public:
  GlmmWorkspace(const GlmmData& d, std::vector<int> active)
      : d_(d), active_(std::move(active)) {
    p_ = d_.X.cols();
    offsets_.resize(active_.size());
    q_ = 0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      offsets_[a] = q_;
      q_ += d_.n_levels[static_cast<std::size_t>(active_[a])];
    }
  }

  Eigen::Index p() const { return p_; }
  Eigen::Index q() const { return q_; }
  const std::vector<int>& active() const { return active_; }

  PirlsResult solve(const std::vector<double>& variances, PirlsState& state,
                    const GlmmOptions& opts) const {
    const Eigen::Index n = d_.X.rows(), m = p_ + q_;
    if (state.beta.size() != p_) state.beta = Eigen::VectorXd::Zero(p_);
    if (state.u.size() != q_) state.u = Eigen::VectorXd::Zero(q_);

    std::vector<double> inv_var(active_.size());
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const double v = variances[static_cast<std::size_t>(active_[a])];
      inv_var[a] = 1.0 / v;
    }

    PirlsResult res;
    Eigen::MatrixXd A(m, m);
    Eigen::VectorXd g(m), eta(n), mu(n), w(n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    for (int it = 1; it <= opts.max_inner; ++it) {
      compute_eta(state, eta);
      for (Eigen::Index i = 0; i < n; ++i) {
        mu[i] = logistic(eta[i]);
        w[i] = mu[i] * (1.0 - mu[i]);
      }
      assemble(state, mu, w, inv_var, A, g);
      ldlt.compute(A);
      if (ldlt.info() != Eigen::Success)
        throw SingularDesign("mixed-model information matrix not positive definite");
      Eigen::VectorXd delta = ldlt.solve(g);
      state.beta += delta.head(p_);
      state.u += delta.tail(q_);
      res.iterations = it;
      if (state.beta.cwiseAbs().maxCoeff() > 30.0)
        throw SeparationError("mixed-model coefficients diverging");
      if (delta.cwiseAbs().maxCoeff() < opts.tol) {
        res.converged = true;
        break;
      }
    }
    if (!res.converged)
      throw NonConvergence("penalized IRLS did not converge in " +
                           std::to_string(opts.max_inner) + " iterations");

    compute_eta(state, eta);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = logistic(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    assemble(state, mu, w, inv_var, A, g);
    res.cond_loglik = bernoulli_loglik(d_.y, eta);
    if (q_ > 0) {
      Eigen::LDLT<Eigen::MatrixXd> hu(A.bottomRightCorner(q_, q_));
      res.logdet_Hu = hu.vectorD().array().log().sum();
    }
    ldlt.compute(A);
    res.cov_beta = ldlt.solve(Eigen::MatrixXd::Identity(m, m)).topLeftCorner(p_, p_);
    return res;
  }

  // Penalty part of the Laplace objective for the current mode.
  double penalty(const std::vector<double>& variances, const PirlsState& state) const {
    double pen = 0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const int f = active_[a];
      const double v = variances[static_cast<std::size_t>(f)];
      const Eigen::Index m_f = d_.n_levels[static_cast<std::size_t>(f)];
      const double ss = state.u.segment(offsets_[a], m_f).squaredNorm();
      pen += ss / v + static_cast<double>(m_f) * std::log(2.0 * M_PI * v);
    }
    return pen;
  }

 private:
  void compute_eta(const PirlsState& state, Eigen::VectorXd& eta) const {
    eta = d_.X * state.beta;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto& levels = d_.factor_levels[static_cast<std::size_t>(active_[a])];
      const Eigen::Index off = offsets_[a];
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] += state.u[off + levels[static_cast<std::size_t>(i)]];
    }
  }

  void assemble(const PirlsState& state, const Eigen::VectorXd& mu, const Eigen::VectorXd& w,
                const std::vector<double>& inv_var, Eigen::MatrixXd& A,
                Eigen::VectorXd& g) const {
    const Eigen::Index n = d_.X.rows();
    A.setZero();
    g.setZero();
    const std::size_t nf = active_.size();
    std::vector<Eigen::Index> pos(nf);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = w[i];
      const double ri = d_.y[i] - mu[i];
      const auto xi = d_.X.row(i);
      for (Eigen::Index j = 0; j < p_; ++j) {
        g[j] += ri * xi[j];
        for (Eigen::Index k = j; k < p_; ++k) A(j, k) += wi * xi[j] * xi[k];
      }
      for (std::size_t a = 0; a < nf; ++a) {
        pos[a] = p_ + offsets_[a] +
                 d_.factor_levels[static_cast<std::size_t>(active_[a])][static_cast<std::size_t>(i)];
        g[pos[a]] += ri;
        for (Eigen::Index j = 0; j < p_; ++j) A(j, pos[a]) += wi * xi[j];
      }
      for (std::size_t a = 0; a < nf; ++a)
        for (std::size_t b = a; b < nf; ++b) {
          const Eigen::Index r = std::min(pos[a], pos[b]), c = std::max(pos[a], pos[b]);
          A(r, c) += wi;
        }
    }
    // ridge penalty and its gradient
    for (std::size_t a = 0; a < nf; ++a) {
      const Eigen::Index off = p_ + offsets_[a];
      const Eigen::Index m_f = d_.n_levels[static_cast<std::size_t>(active_[a])];
      for (Eigen::Index k = 0; k < m_f; ++k) {
        A(off + k, off + k) += inv_var[a];
        g[off + k] -= inv_var[a] * state.u[offsets_[a] + k];
      }
    }
    A.triangularView<Eigen::StrictlyLower>() = A.transpose();
  }

  const GlmmData& d_;
  std::vector<int> active_;
  Eigen::Index p_ = 0, q_ = 0;
  std::vector<Eigen::Index> offsets_;
};

inline double golden_max(const std::function<double(double)>& f, double lo, double hi,
                         int iters) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? x1 : x2;
}

}  // namespace detail

// Random-intercept logistic regression by Laplace approximation: an inner
// penalized IRLS finds the joint (beta, u) mode for given variances, and the
// per-factor variances are profiled coordinate-wise on the Laplace
// log-likelihood. Falls back to a fixed-effects fit with dummy-coded factors
// when the mixed fit cannot converge, flagged in `note`.
inline ModelFit fit_glmm_laplace(const GlmmData& data, GlmmOptions opts = {}) {
  const std::size_t nf = data.factor_names.size();
  if (data.factor_levels.size() != nf || data.n_levels.size() != nf)
    throw ConfigError("inconsistent grouping factor specification");
  for (std::size_t f = 0; f < nf; ++f)
    if (data.n_levels[f] < 2)
      throw ConfigError("grouping factor '" + data.factor_names[f] + "' has fewer than 2 levels");

  auto laplace_loglik = [&](detail::GlmmWorkspace& ws, const std::vector<double>& variances,
                            detail::PirlsState& state, const GlmmOptions& o) {
    auto res = ws.solve(variances, state, o);
    const double q = static_cast<double>(ws.q());
    return res.cond_loglik - 0.5 * ws.penalty(variances, state) +
           0.5 * q * std::log(2.0 * M_PI) - 0.5 * res.logdet_Hu;
  };

  try {
    std::vector<double> variances(nf, 0.5);
    std::vector<int> active;
    if (!opts.fixed_variances.empty()) {
      if (opts.fixed_variances.size() != nf)
        throw ConfigError("fixed_variances must have one entry per factor");
      variances = opts.fixed_variances;
      for (std::size_t f = 0; f < nf; ++f)
        if (variances[f] > 0) active.push_back(static_cast<int>(f));
    } else {
      for (std::size_t f = 0; f < nf; ++f) active.push_back(static_cast<int>(f));
    }

    detail::GlmmWorkspace ws(data, active);
    detail::PirlsState state;
    int outer_evals = 0;

    if (opts.fixed_variances.empty()) {
      const double llo = std::log(opts.var_lo), lhi = std::log(opts.var_hi);
      for (int sweep = 0; sweep < opts.outer_sweeps; ++sweep) {
        for (int f : ws.active()) {
          auto objective = [&](double logv) {
            variances[static_cast<std::size_t>(f)] = std::exp(logv);
            ++outer_evals;
            return laplace_loglik(ws, variances, state, opts);
          };
          const double best = detail::golden_max(objective, llo, lhi, opts.golden_iters);
          variances[static_cast<std::size_t>(f)] = std::exp(best);
        }
      }
    }

    auto res = ws.solve(variances, state, opts);
    ModelFit fit;
    fit.terms = data.terms;
    fit.beta = state.beta;
    fit.se = res.cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.log_likelihood = laplace_loglik(ws, variances, state, opts);
    fit.deviance = -2.0 * fit.log_likelihood;
    fit.converged = true;
    fit.iterations = res.iterations + outer_evals;
    fit.note = "laplace";
    for (std::size_t f = 0; f < nf; ++f) {
      const bool is_active =
          std::find(active.begin(), active.end(), static_cast<int>(f)) != active.end();
      fit.random_variance[data.factor_names[f]] = is_active ? variances[f] : 0.0;
    }
    detail::finalize_wald(fit);
    return fit;
  } catch (const Error& e) {
    // fixed-effects fallback with dummy-coded grouping factors
    Eigen::Index extra = 0;
    for (std::size_t f = 0; f < nf; ++f) extra += data.n_levels[f] - 1;
    Eigen::MatrixXd X(data.X.rows(), data.X.cols() + extra);
    X.leftCols(data.X.cols()) = data.X;
    std::vector<std::string> terms = data.terms;
    Eigen::Index col = data.X.cols();
    for (std::size_t f = 0; f < nf; ++f) {
      for (int lvl = 1; lvl < data.n_levels[f]; ++lvl, ++col) {
        X.col(col).setZero();
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          if (data.factor_levels[f][static_cast<std::size_t>(i)] == lvl) X(i, col) = 1.0;
        terms.push_back(data.factor_names[f] + "[" + std::to_string(lvl) + "]");
      }
    }
    ModelFit fit = fit_logistic_irls(X, data.y, terms, 1e-8, 100);
    fit.note = std::string("fallback-fixed-effects (") + e.what() + ")";
    for (std::size_t f = 0; f < nf; ++f) fit.random_variance[data.factor_names[f]] = 0.0;
    return fit;
  }
}

}  // namespace dpaudit
