#ifndef BLENDSA_SIM_HPP
#define BLENDSA_SIM_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/engine.hpp"
#include "blendsa/table.hpp"

namespace blendsa {

// Three-mechanism benchmark generator. Covariates:
//   Z1 ~ Bern(expit(-0.5)), X | Z1 ~ Bern(expit(-0.5 - 0.25 Z1)),
//   Z2 | X,Z1 ~ Bern(expit(-1.15 - 0.35 X + 0.6 Z1 + 0.4 X Z1)),
//   Y  | X,Z2 ~ N(0.45 - 0.45 X + 1.40 Z2 - 1.8 X Z2, 0.3^2),
//   T Weibull with shape exp(1.25 + 0.5 X - 0.55 Z1 - 0.2 X Z1), scale 1.
// R1 = 1{T > 2/3}; Z2 observed iff R1=1 and a Bernoulli with logit
// 1.20 - 0.70 X + 0.65 Z1 - 0.55 X Z1 + delta2 * Z2 succeeds; Y observed
// iff R1=1 and logit 0.45 + 0.35 X - 0.70 Z2 - 0.65 X Z2 + delta3 * Y
// succeeds. delta2/delta3 are the generator's not-at-random strengths.
struct ScenarioConfig {
  std::size_t n = 1000;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::uint64_t seed = 0;
};

// `table` masks Z2 and Y per the missingness draws; `latent` keeps every
// value observed (same draws, same rows) for oracle checks.
struct ScenarioData {
  ColumnTable table;
  ColumnTable latent;
};

ScenarioData generate_scenario(const ScenarioConfig& config);

// Generator strengths used by the two benchmark scenarios:
// scenario 1 -> (0.5, 0), scenario 2 -> (0, 0.5).
std::pair<double, double> scenario_generation_delta(int scenario);

// Mechanism whose sensitivity parameter the scenario varies: "R2" for
// scenario 1, "R3" for scenario 2 (the other stays at 0).
std::string varied_mechanism(int scenario);

// Reference coefficients of the analysis model Y ~ X + Z1 + X:Z1 on
// complete data, derived analytically from the generator's conditional
// means (the four (X, Z1) cells are saturated).
Eigen::VectorXd true_beta();

// Monte Carlo check of true_beta: OLS on n complete rows, streamed.
Eigen::VectorXd approximate_true_beta(std::size_t n, std::uint64_t seed);

// Blended-analysis plan for one assignment string over the scenario
// columns: position 0 is the enrollment mechanism and must be 'I'
// (survival-weighted); positions 1 and 2 pick IPW ('I') or MI ('M') for
// the Z2 and Y mechanisms.
AnalysisPlan scenario_plan(const std::string& assignment);

struct ScenarioRun {
  int scenario = 1;
  std::string assignment = "III";
  std::vector<double> grid;  // sensitivity values for the varied mechanism
  std::size_t n = 1000;
  std::size_t n_reps = 200;
  std::size_t M = 10;
  std::uint64_t seed = 0;
  int threads = 1;
  std::size_t B = 0;  // per-replication bootstrap size; 0 = no coverage
  double alpha = 0.05;
};

struct BiasCell {
  double delta = 0.0;
  Eigen::VectorXd mean_estimate;
  Eigen::VectorXd pct_bias;   // 100 * (mean - true) / |true|
  Eigen::VectorXd mc_se_pct;  // Monte Carlo SE of pct_bias
  Eigen::VectorXd coverage;   // empty when B = 0
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct BiasReport {
  int scenario = 1;
  std::string assignment;
  std::vector<std::string> coef_names;
  Eigen::VectorXd reference;  // true_beta
  std::vector<BiasCell> cells;
  std::size_t n_reps = 0;
};

// Replicated bias study: per replication, generate one dataset under the
// scenario's fixed generator strengths, run the blended analysis at every
// grid value of the varied mechanism's sensitivity parameter (the other
// held at 0), and aggregate relative bias against true_beta. Replication
// r uses data stream derive_stream(seed, r); the engine stream hashes
// that with the delta vector. Failures are counted per cell, not fatal.
BiasReport run_scenario(const ScenarioRun& run);

// Long-format report table: delta, coef, pct_bias, mc_se, coverage
// (masked when not computed), n_ok, n_failed.
ColumnTable bias_report_table(const BiasReport& report);

// Five-mechanism demonstration dataset shaped like a two-arm surgical
// cohort: complete RYGB/AGE/FEMALE; baseline comorbidities CKD0 (binary)
// and CCS0 (3-level) masked together; baseline BMI0 masked separately;
// an enrollment time with horizon 4.5 gating the follow-up visit; CKD5
// and CCS5 masked together post-enrollment; BMI5 masked separately. All
// generator coefficients are fixed in code and documented in the README.
ColumnTable generate_durable_like(std::size_t n, std::uint64_t seed);

// Plans for the two assignment patterns exercised on the durable-like
// data: "IMIIM" (weight, impute, enroll-weight, weight, impute) and
// "MIIMI" (impute, weight, enroll-weight, impute, weight). BMI
// sensitivity parameters are scaled by 5.
AnalysisPlan durable_plan(const std::string& assignment);

}  // namespace blendsa

#endif
