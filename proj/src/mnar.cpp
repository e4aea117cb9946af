#include "blendsa/mnar.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "blendsa/error.hpp"

namespace blendsa {

namespace {

constexpr double kSelTol = 1e-10;
constexpr int kSelMaxIter = 100;

// Mean-form residual g(psi) = (1/n) sum_i x_i (R_i/pi_i - 1) and its
// Jacobian J = -(1/n) sum_{R=1} x x' (1-pi)/pi. Rows with R=0 contribute
// the constant -x to g and nothing to J.
void selection_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& R,
                        const Eigen::VectorXd& offset,
                        const Eigen::VectorXd& psi, Eigen::VectorXd& g,
                        Eigen::MatrixXd& J, bool want_jacobian) {
  const Eigen::Index n = X.rows(), p = X.cols();
  g.setZero(p);
  if (want_jacobian) J.setZero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (R[i] > 0.5) {
      const double eta = X.row(i).dot(psi) + offset[i];
      const double pi = stable_expit(eta);
      if (pi <= 0.0) throw NumericalError("selection probability underflowed to zero");
      g += X.row(i).transpose() * (1.0 / pi - 1.0);
      if (want_jacobian)
        J -= X.row(i).transpose() * X.row(i) * ((1.0 - pi) / pi);
    } else {
      g -= X.row(i).transpose();
    }
  }
  g /= static_cast<double>(n);
  if (want_jacobian) J /= static_cast<double>(n);
}

}  // namespace

SelectionSolution solve_selection(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& R,
                                  const Eigen::VectorXd& offset,
                                  double pi_floor) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (R.size() != n || offset.size() != n)
    throw NumericalError("selection solver: R/offset length does not match the design");
  double n_obs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (R[i] != 0.0 && R[i] != 1.0)
      throw NumericalError("selection solver: response indicator must be 0 or 1");
    n_obs += R[i];
  }
  if (n_obs == 0.0)
    throw NumericalError("selection solver: no observed rows");

  check_full_rank(X, {}, "selection model");

  SelectionSolution out;
  out.psi = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd g(p), g_new(p);
  Eigen::MatrixXd J(p, p);
  selection_residual(X, R, offset, out.psi, g, J, true);
  double gnorm = g.norm();
  int it = 0;
  for (; it < kSelMaxIter && gnorm > kSelTol; ++it) {
    Eigen::VectorXd step = J.fullPivLu().solve(-g);
    if (!step.allFinite())
      throw NumericalError("selection solver: singular Jacobian");
    // Step-halving on the residual norm.
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      Eigen::VectorXd cand = out.psi + t * step;
      bool ok = true;
      try {
        selection_residual(X, R, offset, cand, g_new, J, false);
      } catch (const NumericalError&) {
        ok = false;
      }
      if (ok && g_new.allFinite() && g_new.norm() < gnorm) {
        out.psi = cand;
        gnorm = g_new.norm();
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw ConvergenceError(
          "selection solver failed to reduce the residual (norm " +
          std::to_string(gnorm) + " after " + std::to_string(it) +
          " iterations)");
    selection_residual(X, R, offset, out.psi, g, J, true);
    gnorm = g.norm();
  }
  if (gnorm > kSelTol)
    throw ConvergenceError("selection solver did not converge in " +
                           std::to_string(kSelMaxIter) +
                           " iterations (residual norm " +
                           std::to_string(gnorm) + ")");
  out.iterations = it;
  out.residual_norm = gnorm;

  out.pi = Eigen::VectorXd::Zero(n);
  out.weights = Eigen::VectorXd::Zero(n);
  out.min_pi = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (R[i] > 0.5) {
      const double pi = stable_expit(X.row(i).dot(out.psi) + offset[i]);
      out.pi[i] = pi;
      out.weights[i] = 1.0 / pi;
      if (pi < out.min_pi) out.min_pi = pi;
    }
  }
  out.extreme_weight_warning = out.min_pi < pi_floor;
  return out;
}

SelectionSolution solve_selection_delta(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& D,
                                        const Eigen::VectorXd& R,
                                        double delta, double scale,
                                        double pi_floor) {
  if (scale <= 0.0)
    throw NumericalError("selection solver: sensitivity scale must be positive");
  const Eigen::Index n = X.rows();
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (R[i] > 0.5) {
      if (!std::isfinite(D[i]))
        throw NumericalError(
            "selection solver: sensitivity variable is not finite on an observed row");
      offset[i] = delta * D[i] / scale;
    }
  }
  return solve_selection(X, R, offset, pi_floor);
}

Eigen::VectorXd impute_continuous(const ParameterDraw& draw,
                                  const Eigen::MatrixXd& X_missing,
                                  double delta, Rng& rng) {
  const Eigen::Index m = X_missing.rows();
  if (X_missing.cols() != draw.coefficients.size())
    throw NumericalError("imputation: design width does not match the parameter draw");
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd out(m);
  // delta added last: under a shared draw and RNG state the delta-shifted
  // value equals the unshifted value plus delta, bit for bit.
  for (Eigen::Index i = 0; i < m; ++i)
    out[i] = (X_missing.row(i).dot(draw.coefficients) +
              draw.residual_sd * norm(rng)) +
             delta;
  return out;
}

Eigen::VectorXd impute_binary(const ParameterDraw& draw,
                              const Eigen::MatrixXd& X_missing, double delta,
                              Rng& rng) {
  const Eigen::Index m = X_missing.rows();
  if (X_missing.cols() != draw.coefficients.size())
    throw NumericalError("imputation: design width does not match the parameter draw");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = stable_expit(X_missing.row(i).dot(draw.coefficients) + delta);
    out[i] = (unif(rng) < p) ? 1.0 : 0.0;
  }
  return out;
}

Eigen::VectorXd impute_categorical(const ParameterDraw& draw,
                                   const Eigen::MatrixXd& X_missing,
                                   std::size_t n_levels, std::size_t baseline,
                                   double delta, Rng& rng) {
  const Eigen::Index m = X_missing.rows();
  if (n_levels < 2) throw NumericalError("imputation: categorical variable needs >=2 levels");
  if (baseline >= n_levels) throw NumericalError("imputation: baseline level out of range");
  const Eigen::Index J1 = static_cast<Eigen::Index>(n_levels) - 1;
  const Eigen::Index p = draw.coefficients.size() / J1;
  if (p * J1 != draw.coefficients.size() || X_missing.cols() != p)
    throw NumericalError("imputation: design width does not match the parameter draw");
  std::vector<std::size_t> free_levels;
  for (std::size_t l = 0; l < n_levels; ++l)
    if (l != baseline) free_levels.push_back(l);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd out(m);
  std::vector<double> prob(free_levels.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    // Stabilised softmax over {baseline: eta=0} U {free levels: eta_j + delta}.
    double max_eta = 0.0;
    for (std::size_t j = 0; j < free_levels.size(); ++j) {
      const double eta =
          X_missing.row(i).dot(draw.coefficients.segment(
              static_cast<Eigen::Index>(j) * p, p)) + delta;
      prob[j] = eta;
      if (eta > max_eta) max_eta = eta;
    }
    double denom = std::exp(-max_eta);  // baseline term
    for (double& e : prob) {
      e = std::exp(e - max_eta);
      denom += e;
    }
    const double u = unif(rng);
    // Walk non-baseline levels first, baseline last: with two levels this
    // reduces to u < p(non-baseline), matching impute_binary.
    double acc = 0.0;
    double pick = static_cast<double>(baseline);
    for (std::size_t j = 0; j < free_levels.size(); ++j) {
      acc += prob[j] / denom;
      if (u < acc) {
        pick = static_cast<double>(free_levels[j]);
        break;
      }
    }
    out[i] = pick;
  }
  return out;
}

}  // namespace blendsa
