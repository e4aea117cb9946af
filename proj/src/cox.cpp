#include "blendsa/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace blendsa {

namespace {

constexpr double kScoreTol = 1e-9;
constexpr double kLikTol = 1e-11;
constexpr double kSeparationBound = 30.0;
constexpr int kMaxIter = 60;

struct SortedData {
  std::vector<std::size_t> order;  // indices by decreasing time
  std::vector<std::size_t> group_end;  // per position: last position sharing its time
};

SortedData sort_by_time_desc(const Eigen::VectorXd& time) {
  SortedData sd;
  const std::size_t n = static_cast<std::size_t>(time.size());
  sd.order.resize(n);
  std::iota(sd.order.begin(), sd.order.end(), 0);
  std::stable_sort(sd.order.begin(), sd.order.end(),
                   [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
  sd.group_end.resize(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && time[sd.order[j + 1]] == time[sd.order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) sd.group_end[k] = j;
    i = j + 1;
  }
  return sd;
}

// Breslow partial log-likelihood with analytic score and information,
// accumulated in one pass from the largest time down.
double partial_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& time,
                      const Eigen::VectorXd& event, const SortedData& sd,
                      const Eigen::VectorXd& alpha, Eigen::VectorXd* score,
                      Eigen::MatrixXd* info) {
  const std::size_t n = static_cast<std::size_t>(time.size());
  const Eigen::Index p = X.cols();
  double ll = 0.0;
  if (score) score->setZero();
  if (info) info->setZero();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t end = sd.group_end[pos];
    for (std::size_t k = pos; k <= end; ++k) {
      std::size_t i = sd.order[k];
      double r = std::exp(X.row(i).dot(alpha));
      s0 += r;
      if (p > 0) {
        s1 += r * X.row(i).transpose();
        s2 += r * X.row(i).transpose() * X.row(i);
      }
    }
    for (std::size_t k = pos; k <= end; ++k) {
      std::size_t i = sd.order[k];
      if (event[i] == 0.0) continue;
      ll += X.row(i).dot(alpha) - std::log(s0);
      if (score) *score += X.row(i).transpose() - s1 / s0;
      if (info) *info += s2 / s0 - (s1 / s0) * (s1 / s0).transpose();
    }
    pos = end + 1;
  }
  return ll;
}

}  // namespace

double CoxFit::baseline_survival(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  std::size_t idx = static_cast<std::size_t>(it - event_times.begin()) - 1;
  return std::exp(-cum_hazard[idx]);
}

CoxFit fit_cox(const Eigen::MatrixXd& X, const Eigen::VectorXd& time,
               const Eigen::VectorXd& event,
               const std::vector<std::string>& column_names) {
  const Eigen::Index n = time.size();
  const Eigen::Index p = X.cols();
  if (X.rows() != n || event.size() != n) {
    throw Error("fit_cox: dimension mismatch");
  }
  if (n < p) throw SingularDesignError("fit_cox: fewer rows than columns");
  int n_events = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(time[i] > 0.0) || !std::isfinite(time[i])) {
      throw Error("fit_cox: time must be positive and finite, row " + std::to_string(i));
    }
    if (event[i] != 0.0 && event[i] != 1.0) {
      throw Error("fit_cox: event must be 0/1, row " + std::to_string(i));
    }
    n_events += event[i] == 1.0;
  }
  if (n_events == 0) throw NumericalError("fit_cox: no events");
  for (Eigen::Index j = 0; j < p; ++j) {
    double mn = X.col(j).minCoeff(), mx = X.col(j).maxCoeff();
    if (mn == mx) {
      std::string nm = static_cast<std::size_t>(j) < column_names.size()
                           ? "'" + column_names[j] + "'"
                           : "#" + std::to_string(j);
      throw SingularDesignError("fit_cox: column " + nm +
                                " is constant (the model has no intercept)");
    }
  }

  SortedData sd = sort_by_time_desc(time);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd score(p);
  Eigen::MatrixXd info(p, p);
  double score_norm = 0.0;
  bool converged = p == 0;
  int iter = 0;
  if (p > 0) {
    double ll = partial_loglik(X, time, event, sd, alpha, &score, &info);
    for (; iter < kMaxIter; ++iter) {
      score_norm = score.cwiseAbs().maxCoeff() / static_cast<double>(n);
      if (score_norm < kScoreTol && iter > 0) {
        converged = true;
        break;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
      if (ldlt.info() != Eigen::Success) {
        throw SingularDesignError("fit_cox: information matrix is singular");
      }
      Eigen::VectorXd step = ldlt.solve(score);
      double lam = 1.0;
      Eigen::VectorXd cand;
      double ll_new = -std::numeric_limits<double>::infinity();
      for (int h = 0; h < 40; ++h) {
        cand = alpha + lam * step;
        ll_new = partial_loglik(X, time, event, sd, cand, nullptr, nullptr);
        if (ll_new >= ll - 1e-12 * (std::abs(ll) + 1.0)) break;
        lam *= 0.5;
      }
      alpha = cand;
      double ll_prev = ll;
      ll = partial_loglik(X, time, event, sd, alpha, &score, &info);
      score_norm = score.cwiseAbs().maxCoeff() / static_cast<double>(n);
      if (std::abs(ll - ll_prev) < kLikTol * (std::abs(ll) + 0.1) && score_norm < kScoreTol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      if (alpha.cwiseAbs().maxCoeff() > kSeparationBound) {
        throw SeparationError(
            "fit_cox: monotone likelihood (coefficient divergence beyond 30)");
      }
      throw ConvergenceError("fit_cox: no convergence after " +
                             std::to_string(kMaxIter) + " iterations");
    }
  }

  CoxFit fit;
  fit.coefficients = alpha;
  fit.converged = true;
  fit.iterations = iter;
  fit.score_norm = score_norm;
  fit.max_time = time.maxCoeff();

  // Breslow baseline hazard increments at unique event times, descending
  // pass so risk-set sums are running totals.
  const std::size_t nn = static_cast<std::size_t>(n);
  double s0 = 0.0;
  std::vector<double> rev_times, rev_incr;
  std::size_t pos = 0;
  while (pos < nn) {
    std::size_t end = sd.group_end[pos];
    int d = 0;
    for (std::size_t k = pos; k <= end; ++k) {
      std::size_t i = sd.order[k];
      s0 += p > 0 ? std::exp(X.row(i).dot(alpha)) : 1.0;
      d += event[i] == 1.0;
    }
    if (d > 0) {
      rev_times.push_back(time[sd.order[pos]]);
      rev_incr.push_back(static_cast<double>(d) / s0);
    }
    pos = end + 1;
  }
  fit.event_times.assign(rev_times.rbegin(), rev_times.rend());
  std::vector<double> incr(rev_incr.rbegin(), rev_incr.rend());
  fit.cum_hazard.resize(incr.size());
  double h = 0.0;
  for (std::size_t j = 0; j < incr.size(); ++j) {
    h += incr[j];
    fit.cum_hazard[j] = h;
  }
  return fit;
}

double enrollment_weight(const CoxFit& fit, const Eigen::VectorXd& x_row,
                         double horizon) {
  if (!(horizon >= 0.0) || horizon > fit.max_time) {
    throw Error("enrollment_weight: horizon " + std::to_string(horizon) +
                " outside observed time range [0, " + std::to_string(fit.max_time) + "]");
  }
  if (x_row.size() != fit.coefficients.size()) {
    throw Error("enrollment_weight: covariate dimension mismatch");
  }
  double s0 = fit.baseline_survival(horizon);
  if (s0 <= 0.0) {
    throw NumericalError("enrollment_weight: survival estimate is zero at the horizon");
  }
  double surv = std::pow(s0, std::exp(x_row.dot(fit.coefficients)));
  if (surv <= 0.0) {
    throw NumericalError("enrollment_weight: predicted survival underflows to zero");
  }
  return 1.0 / surv;
}

}  // namespace blendsa
