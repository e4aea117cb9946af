#ifndef BLENDSA_MNAR_HPP
#define BLENDSA_MNAR_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/glm.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

// Solution of the weighted estimating equation for a selection model with
// a fixed sensitivity offset on the linear predictor.
struct SelectionSolution {
  Eigen::VectorXd psi;
  Eigen::VectorXd pi;        // fitted P(R=1|...) on R=1 rows; 0 elsewhere
  Eigen::VectorXd weights;   // 1/pi on R=1 rows; 0 elsewhere
  double residual_norm = 0.0;
  double min_pi = 1.0;       // over R=1 rows
  bool extreme_weight_warning = false;  // min_pi below the floor
  int iterations = 0;
};

// Probability floor below which a solution is flagged (warning only).
constexpr double kPiFloor = 1e-4;

// Solves (1/n) sum_i x_i (R_i/pi_i - 1) = 0 with
// pi_i = expit(x_i'psi + offset_i) by damped Newton iteration with the
// analytic Jacobian. The equation is solved in mean form so the residual
// tolerance is independent of n. offset is read only on R=1 rows; rows
// with R=0 contribute the constant -x_i.
SelectionSolution solve_selection(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& R,
                                  const Eigen::VectorXd& offset,
                                  double pi_floor = kPiFloor);

// Convenience form: offset_i = delta * D_i / scale on R=1 rows. D is read
// only where R=1, so missing values of D never enter.
SelectionSolution solve_selection_delta(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& D,
                                        const Eigen::VectorXd& R,
                                        double delta, double scale = 1.0,
                                        double pi_floor = kPiFloor);

// Draws imputations for missing rows: x'psi* + delta + N(0, sigma*^2).
// One normal variate per row, in row order.
Eigen::VectorXd impute_continuous(const ParameterDraw& draw,
                                  const Eigen::MatrixXd& X_missing,
                                  double delta, Rng& rng);

// Bernoulli draws at p = expit(x'psi* + delta); one uniform per row.
Eigen::VectorXd impute_binary(const ParameterDraw& draw,
                              const Eigen::MatrixXd& X_missing, double delta,
                              Rng& rng);

// Baseline-category draws with every non-baseline logit shifted by delta.
// Consumes one uniform per row; the cumulative walk visits non-baseline
// levels in ascending level order first and the baseline last, which makes
// the J=2 case reproduce impute_binary draws exactly.
Eigen::VectorXd impute_categorical(const ParameterDraw& draw,
                                   const Eigen::MatrixXd& X_missing,
                                   std::size_t n_levels, std::size_t baseline,
                                   double delta, Rng& rng);

}  // namespace blendsa

#endif
