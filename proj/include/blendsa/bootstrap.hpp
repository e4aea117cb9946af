#ifndef BLENDSA_BOOTSTRAP_HPP
#define BLENDSA_BOOTSTRAP_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/engine.hpp"

namespace blendsa {

struct BootstrapResult {
  std::vector<std::string> coef_names;
  Eigen::VectorXd point;                 // estimate on the original table
  Eigen::MatrixXd replicate_estimates;   // surviving replicates x p
  Eigen::VectorXd ci_lower, ci_upper;    // percentile bounds per coefficient
  std::size_t B = 0;                     // requested replicates
  std::size_t n_failed = 0;              // skipped replicates
  std::size_t M = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

// Order-statistic percentile bounds without interpolation: the 1-based
// ranks ceil(B*alpha/2) and ceil(B*(1-alpha/2)) of the sorted values.
std::pair<double, double> percentile_interval(std::vector<double> values,
                                              double alpha);

// Subject-level bootstrap of the raw table (missing cells travel with the
// subject) with the complete blended analysis re-run per replicate, and
// percentile confidence intervals from the replicate estimates. Replicate
// failures are skipped and counted; more than 5% failing is an error
// (usually a sign the deltas are extreme enough to destabilise the fits).
BootstrapResult bootstrap_mi(const ColumnTable& table, const AnalysisPlan& plan,
                             const DeltaMap& delta, std::size_t B,
                             std::size_t M, double alpha, std::uint64_t seed,
                             int threads = 1, double weight_cap = 0.0);

}  // namespace blendsa

#endif
