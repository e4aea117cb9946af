#ifndef BLENDSA_ENGINE_HPP
#define BLENDSA_ENGINE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/formula.hpp"
#include "blendsa/glm.hpp"
#include "blendsa/table.hpp"

namespace blendsa {

enum class Method { Ipw, Mi, CoxIpw };

enum class SensitivityKind { None, IpwLinear, MiShift };

// How a mechanism's sensitivity parameter enters its model:
//   IpwLinear — the selection linear predictor gains delta * target / scale
//               on observed rows;
//   MiShift   — the imputed-value distribution of the target shifts by delta.
// None marks a delta-free mechanism (decision mechanisms, or plain MAR).
struct Sensitivity {
  SensitivityKind kind = SensitivityKind::None;
  std::string target;
  double scale = 1.0;
};

// Ordered imputation formulas for one variable. Rows (observed and missing
// alike) are partitioned by the FIRST formula whose covariates are all
// available for that row; each pattern's model is fitted on its own stratum
// of variable-observed rows and imputes its own stratum of missing rows.
struct ImputationModel {
  std::string variable;
  std::vector<std::string> formulas;
};

struct SubMechanism {
  std::string name;
  Method method = Method::Ipw;
  std::string indicator;                    // binary, fully observed
  std::vector<std::string> variables;       // observed iff indicator = 1
  std::string selection_model;              // Ipw: "~ x1 + x2 + x1:x2"
  std::vector<ImputationModel> imputation;  // Mi: one entry per variable
  Sensitivity sensitivity;
  // CoxIpw only:
  std::string time;
  std::string event;
  std::string hazard_model;                 // must exclude the intercept
  double horizon = 0.0;

  // Decision mechanisms gate later observation without carrying variables.
  bool is_decision() const { return variables.empty(); }
  char code() const { return method == Method::Mi ? 'M' : 'I'; }
};

// Ordered sub-mechanisms plus the weighted linear analysis model.
struct AnalysisPlan {
  std::vector<SubMechanism> mechanisms;
  std::string analysis_model;

  // One letter per mechanism: I for weighting methods, M for imputation.
  std::string assignment_code() const;
};

// Sensitivity parameters keyed by mechanism name; absent entries are 0.
using DeltaMap = std::map<std::string, double>;

// Checks the plan against the table: columns exist with the right kinds,
// formulas parse, method-specific fields are coherent, no variable belongs
// to two mechanisms. Throws Error with a specific message.
void validate_plan(const ColumnTable& table, const AnalysisPlan& plan);

// Names of mechanisms that accept a sensitivity parameter, in plan order.
std::vector<std::string> delta_names(const AnalysisPlan& plan);

// Expands a delta map to one value per mechanism, in plan order. Unknown
// names and nonzero entries for delta-free mechanisms are errors.
std::vector<double> delta_vector(const AnalysisPlan& plan,
                                 const DeltaMap& delta);

struct MechanismDiagnostics {
  std::string name;
  Method method = Method::Ipw;
  // Weighting mechanisms:
  double min_pi = 1.0;        // smallest fitted selection/survival probability
  double max_weight = 1.0;    // largest single weight across imputations
  bool extreme_weight_warning = false;
  std::vector<double> ess;    // effective sample size per imputation
  // Imputation mechanisms:
  std::map<std::string, double> mean_imputed;      // across rows and imputations
  std::map<std::string, std::size_t> n_imputed;    // cells per imputation
};

struct BlendedFit {
  std::vector<std::string> coef_names;
  Eigen::MatrixXd theta_per_imputation;  // M x p
  Eigen::VectorXd theta_hat;             // columnwise mean
  std::vector<double> delta;             // per mechanism, plan order
  std::size_t n_analysis = 0;            // rows entering the analysis fit
  std::vector<double> analysis_ess;      // per imputation, final weights
  std::vector<MechanismDiagnostics> diagnostics;
};

// Runs the blended analysis: for each of M replicates, process mechanisms
// in order (weighting methods accumulate inverse-probability or enrollment
// weights and drop indicator-0 rows; imputation methods fill missing
// values with the delta shift and posterior parameter draws), fit the
// weighted linear analysis model on the surviving rows, then average the
// M coefficient vectors. Plans without imputation mechanisms compute once
// and replicate. weight_cap > 0 truncates accumulated analysis weights.
BlendedFit run_blended(const ColumnTable& table, const AnalysisPlan& plan,
                       const DeltaMap& delta, std::size_t M,
                       std::uint64_t seed, double weight_cap = 0.0);

// Weighted least squares of `formula` over `rows`, reading imputed values
// through the view; `weights` aligns with `rows`.
ModelFit fit_analysis(const DataView& view, const Formula& formula,
                      const Eigen::VectorXd& weights,
                      const std::vector<std::size_t>& rows);

// Rows with indicator 1 for every weighting mechanism before index k
// (the set the k-th mechanism operates on; delta- and replicate-free).
std::vector<std::size_t> rows_alive_before(const ColumnTable& table,
                                           const AnalysisPlan& plan,
                                           std::size_t k);

// Adds one binary indicator column per (name, variable group): 1 where
// every group variable is observed. Errors if a name already exists.
ColumnTable derive_indicators(
    const ColumnTable& table,
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        groups);

}  // namespace blendsa

#endif
