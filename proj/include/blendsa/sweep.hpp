#ifndef BLENDSA_SWEEP_HPP
#define BLENDSA_SWEEP_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/bootstrap.hpp"
#include "blendsa/engine.hpp"

namespace blendsa {

struct SweepOptions {
  std::size_t M = 10;
  std::uint64_t seed = 0;
  std::size_t B = 0;        // per-cell bootstrap replicates; 0 = no CIs
  double alpha = 0.05;
  double weight_cap = 0.0;
  int threads = 1;
};

struct SweepAxis {
  std::size_t mechanism_index = 0;
  std::string mechanism;
  std::vector<double> grid;  // strictly increasing, contains 0
};

struct SweepCell {
  std::vector<double> delta;           // one entry per mechanism, plan order
  bool ok = false;
  std::string error;                   // failure message when !ok
  Eigen::VectorXd theta;
  Eigen::VectorXd ci_lower, ci_upper;  // empty without per-cell CIs
  std::size_t n_analysis = 0;
  double analysis_ess_min = 0.0;       // min across imputations
  double min_pi = 1.0;                 // across weighting mechanisms
  double max_weight = 1.0;
  bool extreme_weight_warning = false;
  std::vector<double> connecting;      // per axis; NaN when unavailable
  std::vector<char> connect_clipped;   // per axis (binary estimator clip)
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<std::string> mechanism_names;  // all mechanisms, plan order
  std::vector<std::string> coef_names;
  std::vector<SweepCell> cells;        // row-major, last axis fastest
  std::size_t n_failed = 0;
};

// Runs the blended analysis over the Cartesian product of the axis grids,
// all other sensitivity parameters held at 0. Each cell's RNG stream is a
// hash of (seed, full delta vector), so cells are placement-independent:
// a shared sub-grid yields bit-identical cells and the all-zero cell
// reproduces a direct MAR run under `seed`. Cell failures are recorded in
// the cell and counted, never fatal. Cells evaluate in parallel.
SweepResult sweep_grid(
    const ColumnTable& table, const AnalysisPlan& plan,
    const std::vector<std::pair<std::string, std::vector<double>>>& axes,
    const SweepOptions& opt);

// Single-axis sweep: vary one mechanism's delta, holding the others at 0.
SweepResult conditional_sweep(const ColumnTable& table,
                              const AnalysisPlan& plan,
                              const std::string& mechanism,
                              const std::vector<double>& grid,
                              const SweepOptions& opt);

// Two-axis sweep over distinct mechanisms (heat-map raw material).
SweepResult two_way_sweep(const ColumnTable& table, const AnalysisPlan& plan,
                          const std::string& mechanism_a,
                          const std::vector<double>& grid_a,
                          const std::string& mechanism_b,
                          const std::vector<double>& grid_b,
                          const SweepOptions& opt);

struct ConnectingEstimate {
  double value = 0.0;
  bool clipped = false;  // binary estimator pulled back into [0, 1]
};

// Implied P(V=1 | R=0) of a binary target under the selection model with
// offset delta*V/scale: mean over R=0 rows of
//   exp(-x'psi - delta/scale) * P(R=1, V=1 | x) / P(R=0 | x),
// with the joint and marginal probabilities from auxiliary logistic fits
// of R*V on X and R on X. V is read only where R=1.
ConnectingEstimate connecting_binary(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& R,
                                     const Eigen::VectorXd& V,
                                     const Eigen::VectorXd& psi, double delta,
                                     double scale);

// Implied E(V | R=0) of a continuous target: regress
//   V * exp(-x'psi - delta*V/scale + x'b_R)
// on X over R=1 rows (b_R from the auxiliary logistic of R on X) and
// average the fitted values over R=0 rows.
ConnectingEstimate connecting_continuous(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& R,
                                         const Eigen::VectorXd& V,
                                         const Eigen::VectorXd& psi,
                                         double delta, double scale);

// Convenience driver: solves mechanism k's selection model at this delta
// on its alive-before rows and dispatches on the target's column kind.
// Requires an IPW mechanism with a linear departure whose selection
// covariates and indicator are fully observed on those rows.
ConnectingEstimate connecting_quantity(const ColumnTable& table,
                                       const AnalysisPlan& plan, std::size_t k,
                                       double delta_k);

struct TippingResult {
  bool found = false;
  double delta_star = 0.0;
  bool significant_at_mar = false;
  // Every evaluated (delta, significant) pair, in evaluation order.
  std::vector<std::pair<double, bool>> probes;
};

// Smallest |delta| in [interval_lo, interval_hi] (which must contain 0) at
// which the bootstrap CI of the named coefficient changes significance
// status relative to the MAR fit, located by bisection to resolution 0.05.
// Returns found=false when the endpoint and midpoint probes all agree with
// the MAR status; delta_star=0 when the MAR CI itself touches zero.
TippingResult tipping_point(const ColumnTable& table, const AnalysisPlan& plan,
                            const std::string& mechanism,
                            const std::string& coefficient, double interval_lo,
                            double interval_hi, std::size_t B, std::size_t M,
                            double alpha, std::uint64_t seed, int threads = 1,
                            double weight_cap = 0.0);

// Long-format table: one row per (cell, coefficient) with columns
// delta_<mechanism> for every mechanism, mar_anchor, coef_name, estimate
// (ci_lo/ci_hi when per-cell CIs were computed), status, and the
// cell-level diagnostics repeated on every coefficient row. Failed cells
// keep their delta columns and status; everything else is masked out.
ColumnTable sweep_long_table(const SweepResult& sweep);

// Wide-format table: one row per cell with est_<coef> columns (plus
// lo_<coef>/hi_<coef> when per-cell CIs were computed).
ColumnTable sweep_cell_table(const SweepResult& sweep);

}  // namespace blendsa

#endif
