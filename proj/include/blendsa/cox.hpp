#ifndef BLENDSA_COX_HPP
#define BLENDSA_COX_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/error.hpp"

namespace blendsa {

// Cox proportional-hazards fit with Breslow tie handling and Breslow
// baseline cumulative hazard. With p=0 the baseline reduces to the
// Nelson-Aalen estimator.
struct CoxFit {
  Eigen::VectorXd coefficients;
  std::vector<double> event_times;     // unique, ascending
  std::vector<double> cum_hazard;      // H0 at each event time (cumulative)
  double max_time = 0.0;
  double score_norm = 0.0;             // mean-form partial-likelihood score
  bool converged = false;
  int iterations = 0;

  // Step-function baseline survival S0(t) = exp(-H0(t)); S0(0) = 1.
  double baseline_survival(double t) const;
};

// Fits the Breslow partial likelihood by damped Newton iteration.
// X may have zero columns. Censored rows (event=0) enter risk sets only.
CoxFit fit_cox(const Eigen::MatrixXd& X, const Eigen::VectorXd& time,
               const Eigen::VectorXd& event,
               const std::vector<std::string>& column_names = {});

// Inverse predicted survival at the horizon: S0(h)^{-exp(x'alpha)} >= 1.
// Throws if the horizon is outside [0, max observed time] or the survival
// estimate underflows to zero.
double enrollment_weight(const CoxFit& fit, const Eigen::VectorXd& x_row,
                         double horizon);

}  // namespace blendsa

#endif
