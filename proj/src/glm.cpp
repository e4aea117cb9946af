#include "blendsa/glm.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace blendsa {

namespace {

constexpr double kDevTol = 1e-10;
constexpr double kScoreTol = 1e-9;
constexpr double kSeparationBound = 100.0;
// Imputation models routinely have finite MLEs in the tens when one
// regressor nearly determines the response, so the walk-off bound has to
// sit well above that range and the flat-likelihood iterations need room.
constexpr int kMaxIter = 200;

std::string name_or_index(const std::vector<std::string>& names, std::size_t j) {
  if (j < names.size()) return "'" + names[j] + "'";
  return "#" + std::to_string(j);
}

}  // namespace

double stable_expit(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_full_rank(const Eigen::MatrixXd& X,
                     const std::vector<std::string>& names,
                     const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  Eigen::Index rank = qr.rank();
  if (rank >= X.cols()) return;
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream msg;
  msg << what << " design is rank deficient (rank " << rank << " of " << X.cols()
      << "); dependent columns:";
  for (Eigen::Index k = rank; k < X.cols(); ++k) {
    msg << " " << name_or_index(names, static_cast<std::size_t>(perm[k]));
  }
  throw SingularDesignError(msg.str());
}

namespace {

void check_weights(const Eigen::VectorXd& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw NumericalError("weight " + std::to_string(i) + " is negative or non-finite");
    }
  }
}

}  // namespace

ModelFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w,
                    const std::vector<std::string>& column_names) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n || w.size() != n) {
    throw Error("fit_linear: dimension mismatch");
  }
  if (n < p) throw SingularDesignError("fit_linear: fewer rows than columns");
  check_weights(w);
  check_full_rank(w.cwiseSqrt().asDiagonal() * X, column_names, "fit_linear");

  Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
  Eigen::MatrixXd A = XtW * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd beta = ldlt.solve(XtW * y);

  ModelFit fit;
  fit.link = Link::Identity;
  fit.coefficients = beta;
  fit.p = static_cast<std::size_t>(p);
  Eigen::VectorXd resid = y - X * beta;
  double rss = (w.array() * resid.array().square()).sum();
  fit.df_residual = static_cast<double>(n - p);
  fit.residual_variance = fit.df_residual > 0 ? rss / fit.df_residual : 0.0;
  Eigen::MatrixXd Ainv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = fit.residual_variance * Ainv;
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.score_norm = n > 0 ? (XtW * resid).cwiseAbs().maxCoeff() / static_cast<double>(n) : 0.0;
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

ModelFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w,
                      const std::vector<std::string>& column_names) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n || w.size() != n) {
    throw Error("fit_logistic: dimension mismatch");
  }
  if (n < p) throw SingularDesignError("fit_logistic: fewer rows than columns");
  check_weights(w);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error("fit_logistic: response must be 0/1, row " + std::to_string(i));
    }
  }
  check_full_rank(w.cwiseSqrt().asDiagonal() * X, column_names, "fit_logistic");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd mu(n), s(n);
  double dev_old = std::numeric_limits<double>::infinity();
  double score_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  Eigen::MatrixXd info(p, p);
  for (; iter < kMaxIter; ++iter) {
    Eigen::VectorXd eta = X * beta;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = stable_expit(eta[i]);
      double m = std::min(std::max(mu[i], 1e-12), 1.0 - 1e-12);
      dev -= 2.0 * w[i] * (y[i] * std::log(m) + (1.0 - y[i]) * std::log(1.0 - m));
      s[i] = w[i] * mu[i] * (1.0 - mu[i]);
    }
    Eigen::VectorXd score = X.transpose() * (w.array() * (y - mu).array()).matrix();
    score_norm = n > 0 ? score.cwiseAbs().maxCoeff() / static_cast<double>(n) : 0.0;
    bool dev_done = std::abs(dev - dev_old) < kDevTol * (std::abs(dev) + 0.1);
    if (dev_done && score_norm < kScoreTol) {
      converged = true;
      break;
    }
    dev_old = dev;
    info = X.transpose() * s.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw SingularDesignError("fit_logistic: information matrix is singular");
    }
    Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) {
      throw SingularDesignError("fit_logistic: Newton step is not finite");
    }
    beta += step;
    // Under separation the score also vanishes as beta runs off, so the
    // bound has to be enforced along the path, not only after the loop.
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw SeparationError(
          "fit_logistic: separation detected (|coefficient| > 100 without "
          "convergence)");
    }
  }
  if (!converged) {
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw SeparationError("fit_logistic: separation detected (|coefficient| > 100 without convergence)");
    }
    std::ostringstream msg;
    msg << "fit_logistic: no convergence after " << kMaxIter
        << " iterations; last iterate:";
    for (Eigen::Index j = 0; j < p; ++j) msg << " " << beta[j];
    throw ConvergenceError(msg.str());
  }

  ModelFit fit;
  fit.link = Link::Logit;
  fit.coefficients = beta;
  fit.p = static_cast<std::size_t>(p);
  Eigen::VectorXd eta = X * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = stable_expit(eta[i]);
    s[i] = w[i] * m * (1.0 - m);
  }
  info = X.transpose() * s.asDiagonal() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.converged = true;
  fit.iterations = iter + 1;
  fit.score_norm = score_norm;
  return fit;
}

ModelFit fit_multinomial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, std::size_t n_levels,
                         std::size_t baseline,
                         const std::vector<std::string>& column_names) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const std::size_t J = n_levels;
  if (J < 2) throw Error("fit_multinomial: need at least 2 levels");
  if (baseline >= J) throw Error("fit_multinomial: baseline out of range");
  if (y.size() != n || w.size() != n) {
    throw Error("fit_multinomial: dimension mismatch");
  }
  std::vector<double> level_weight(J, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = y[i];
    if (std::round(v) != v || v < 0 || static_cast<std::size_t>(v) >= J) {
      throw Error("fit_multinomial: level index out of range at row " + std::to_string(i));
    }
    level_weight[static_cast<std::size_t>(v)] += w[i] > 0 ? w[i] : 0.0;
  }
  for (std::size_t l = 0; l < J; ++l) {
    if (level_weight[l] <= 0.0) {
      throw NumericalError("fit_multinomial: level " + std::to_string(l) +
                           " has no training rows");
    }
  }
  check_weights(w);
  check_full_rank(w.cwiseSqrt().asDiagonal() * X, column_names, "fit_multinomial");

  // non-baseline levels in ascending order; block b holds level free_l[b]
  std::vector<std::size_t> free_l;
  for (std::size_t l = 0; l < J; ++l) {
    if (l != baseline) free_l.push_back(l);
  }
  const std::size_t nb = free_l.size();
  const Eigen::Index q = static_cast<Eigen::Index>(nb) * p;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd prob(n, nb);  // level probabilities for non-baseline levels
  auto loglik_at = [&](const Eigen::VectorXd& b, Eigen::MatrixXd* probs) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double maxeta = 0.0;
      std::vector<double> eta(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        eta[k] = X.row(i).dot(b.segment(static_cast<Eigen::Index>(k) * p, p));
        maxeta = std::max(maxeta, eta[k]);
      }
      double denom = std::exp(-maxeta);
      for (std::size_t k = 0; k < nb; ++k) denom += std::exp(eta[k] - maxeta);
      double logdenom = maxeta + std::log(denom);
      std::size_t yi = static_cast<std::size_t>(y[i]);
      double eta_y = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        double pk = std::exp(eta[k] - logdenom);
        if (probs) (*probs)(i, static_cast<Eigen::Index>(k)) = pk;
        if (free_l[k] == yi) eta_y = eta[k];
      }
      ll += w[i] * (eta_y - logdenom);
    }
    return ll;
  };

  double ll = loglik_at(beta, &prob);
  bool converged = false;
  double score_norm = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t a = 0; a < nb; ++a) {
      Eigen::VectorXd ra(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double ind = static_cast<std::size_t>(y[i]) == free_l[a] ? 1.0 : 0.0;
        ra[i] = w[i] * (ind - prob(i, static_cast<Eigen::Index>(a)));
      }
      score.segment(static_cast<Eigen::Index>(a) * p, p) = X.transpose() * ra;
      for (std::size_t b = a; b < nb; ++b) {
        Eigen::VectorXd s(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          double pa = prob(i, static_cast<Eigen::Index>(a));
          double pb = prob(i, static_cast<Eigen::Index>(b));
          s[i] = w[i] * (a == b ? pa * (1.0 - pa) : -pa * pb);
        }
        Eigen::MatrixXd blk = X.transpose() * s.asDiagonal() * X;
        info.block(static_cast<Eigen::Index>(a) * p, static_cast<Eigen::Index>(b) * p, p, p) = blk;
        if (a != b) {
          info.block(static_cast<Eigen::Index>(b) * p, static_cast<Eigen::Index>(a) * p, p, p) =
              blk.transpose();
        }
      }
    }
    score_norm = n > 0 ? score.cwiseAbs().maxCoeff() / static_cast<double>(n) : 0.0;
    if (score_norm < kScoreTol && iter > 0) {
      converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw SingularDesignError("fit_multinomial: information matrix is singular");
    }
    Eigen::VectorXd step = ldlt.solve(score);
    double lam = 1.0;
    Eigen::VectorXd cand;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < 40; ++h) {
      cand = beta + lam * step;
      ll_new = loglik_at(cand, nullptr);
      if (ll_new >= ll - 1e-12 * (std::abs(ll) + 1.0)) break;
      lam *= 0.5;
    }
    beta = cand;
    // Same rationale as fit_logistic: a runaway class boundary drives the
    // score to zero, so the bound is checked on every iterate.
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw SeparationError(
          "fit_multinomial: separation detected (|coefficient| > 100 without "
          "convergence)");
    }
    double ll_prev = ll;
    ll = loglik_at(beta, &prob);
    if (std::abs(ll - ll_prev) < kDevTol * (std::abs(ll) + 0.1) && score_norm < kScoreTol) {
      converged = true;
      break;
    }
  }
  if (!converged && score_norm >= kScoreTol) {
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw SeparationError("fit_multinomial: separation detected (|coefficient| > 100 without convergence)");
    }
    throw ConvergenceError("fit_multinomial: no convergence after " +
                           std::to_string(kMaxIter) + " iterations");
  }

  ModelFit fit;
  fit.link = Link::MultinomialLogit;
  fit.coefficients = beta;
  fit.p = static_cast<std::size_t>(p);
  fit.n_levels = J;
  fit.baseline = baseline;
  // information at the solution for the covariance
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
  loglik_at(beta, &prob);
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t b = a; b < nb; ++b) {
      Eigen::VectorXd s(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double pa = prob(i, static_cast<Eigen::Index>(a));
        double pb = prob(i, static_cast<Eigen::Index>(b));
        s[i] = w[i] * (a == b ? pa * (1.0 - pa) : -pa * pb);
      }
      Eigen::MatrixXd blk = X.transpose() * s.asDiagonal() * X;
      info.block(static_cast<Eigen::Index>(a) * p, static_cast<Eigen::Index>(b) * p, p, p) = blk;
      if (a != b) {
        info.block(static_cast<Eigen::Index>(b) * p, static_cast<Eigen::Index>(a) * p, p, p) =
            blk.transpose();
      }
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.converged = true;
  fit.iterations = iter + 1;
  fit.score_norm = score_norm;
  return fit;
}

ParameterDraw posterior_draw(const ModelFit& fit, Rng& rng) {
  if (!fit.converged) {
    throw Error("posterior_draw: fit did not converge");
  }
  const Eigen::Index q = fit.coefficients.size();
  Eigen::MatrixXd cov = 0.5 * (fit.covariance + fit.covariance.transpose());

  Eigen::MatrixXd L;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-8 * scale) {
      throw NumericalError("posterior_draw: covariance is not positive semidefinite");
    }
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    L = es.eigenvectors() * d.asDiagonal();
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(q);
  for (Eigen::Index j = 0; j < q; ++j) z[j] = normal(rng);

  ParameterDraw draw;
  draw.coefficients = fit.coefficients + L * z;
  if (fit.link == Link::Identity) {
    if (fit.df_residual > 0) {
      std::chi_squared_distribution<double> chi2(fit.df_residual);
      double c = chi2(rng);
      draw.residual_sd = c > 0 ? std::sqrt(fit.residual_variance * fit.df_residual / c)
                               : std::sqrt(fit.residual_variance);
    } else {
      draw.residual_sd = std::sqrt(fit.residual_variance);
    }
  }
  return draw;
}

}  // namespace blendsa
