#ifndef BLENDSA_GLM_HPP
#define BLENDSA_GLM_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/error.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

enum class Link { Identity, Logit, MultinomialLogit };

// Overflow-safe logistic function.
double stable_expit(double x);

// Throws SingularDesignError naming the dependent columns when X is not of
// full column rank (column-pivoted QR, relative threshold 1e-10).
void check_full_rank(const Eigen::MatrixXd& X,
                     const std::vector<std::string>& names, const char* what);

// A fitted regression model. Scores are reported in mean form (gradient
// divided by the number of rows) so tolerances are size-independent.
struct ModelFit {
  Link link = Link::Identity;
  Eigen::VectorXd coefficients;     // multinomial: (J-1) blocks of p
  Eigen::MatrixXd covariance;       // inverse observed information
  double residual_variance = 0.0;   // linear only
  double df_residual = 0.0;         // linear only: n - p
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;          // max |mean score| at the solution
  std::size_t n_levels = 0;         // multinomial only
  std::size_t baseline = 0;         // multinomial only
  std::size_t p = 0;                // columns of the design
};

// A draw from the approximate normal posterior of a ModelFit.
struct ParameterDraw {
  Eigen::VectorXd coefficients;
  double residual_sd = 0.0;  // linear only
};

// Weighted least squares via the normal equations.
// sigma^2 = weighted RSS / (n - p); covariance = sigma^2 (X'WX)^-1.
ModelFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w,
                    const std::vector<std::string>& column_names = {});

// Weighted logistic regression by iteratively reweighted least squares.
// Stops when the relative deviance change is below 1e-10 and the mean
// score is numerically zero; 50-iteration cap. A coefficient exceeding 30
// in absolute value without convergence is treated as separation.
ModelFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w,
                      const std::vector<std::string>& column_names = {});

// Baseline-category multinomial logit fit by full Newton iteration.
// y holds level indices in [0, n_levels); coefficient blocks are ordered
// by ascending non-baseline level index.
ModelFit fit_multinomial(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, std::size_t n_levels,
                         std::size_t baseline,
                         const std::vector<std::string>& column_names = {});

// Draws coefficients from N(psi_hat, covariance); for linear fits also
// sigma^2* = sigma_hat^2 * df / chi^2_df. Coefficient draw consumes p
// standard normals in order, then the chi-square variate.
ParameterDraw posterior_draw(const ModelFit& fit, Rng& rng);

}  // namespace blendsa

#endif
