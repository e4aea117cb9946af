#include "blendsa/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <utility>

#include "blendsa/error.hpp"
#include "blendsa/formula.hpp"
#include "blendsa/glm.hpp"
#include "blendsa/mnar.hpp"
#include "blendsa/parallel.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Selection design, indicator, and target values for one IPW mechanism,
// shared by every evaluation point (all delta-free).
struct IpwConnectContext {
  bool valid = false;
  std::string why;  // reason when invalid
  Eigen::MatrixXd X;
  Eigen::VectorXd R;
  Eigen::VectorXd V;  // target; read only where R = 1
  double scale = 1.0;
  ColumnKind kind = ColumnKind::Continuous;
};

IpwConnectContext build_connect_context(const ColumnTable& table,
                                        const AnalysisPlan& plan,
                                        std::size_t k) {
  IpwConnectContext ctx;
  const SubMechanism& m = plan.mechanisms[k];
  if (m.method != Method::Ipw ||
      m.sensitivity.kind != SensitivityKind::IpwLinear) {
    ctx.why = "mechanism '" + m.name +
              "' is not inverse-probability weighted with a linear departure";
    return ctx;
  }
  const Column& target = table.column(m.sensitivity.target);
  if (target.kind == ColumnKind::Categorical) {
    ctx.why = "no connecting-quantity estimator for categorical target '" +
              m.sensitivity.target + "'";
    return ctx;
  }
  const std::vector<std::size_t> rows = rows_alive_before(table, plan, k);
  if (rows.empty()) {
    ctx.why = "no rows reach mechanism '" + m.name + "'";
    return ctx;
  }
  DataView view(table);
  const Formula f = parse_formula(m.selection_model);
  DesignMatrix d;
  try {
    d = design_matrix(view, f, rows);
  } catch (const Error& e) {
    ctx.why = "selection covariates of mechanism '" + m.name +
              "' are not fully observed: " + std::string(e.what());
    return ctx;
  }
  const Column& ind = table.column(m.indicator);
  const std::size_t n = rows.size();
  ctx.R.resize(static_cast<Eigen::Index>(n));
  ctx.V.resize(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t row = rows[j];
    const auto ji = static_cast<Eigen::Index>(j);
    ctx.R[ji] = ind.values[row];
    if (ctx.R[ji] > 0.5) {
      if (!view.available(m.sensitivity.target, row)) {
        ctx.why = "target '" + m.sensitivity.target +
                  "' is missing on a row with indicator 1";
        return ctx;
      }
      ctx.V[ji] = view.value(m.sensitivity.target, row);
    } else {
      ctx.V[ji] = 0.0;
    }
  }
  ctx.X = std::move(d.X);
  ctx.scale = m.sensitivity.scale;
  ctx.kind = target.kind;
  ctx.valid = true;
  return ctx;
}

ConnectingEstimate connect_at(const IpwConnectContext& ctx, double delta) {
  const SelectionSolution sel =
      solve_selection_delta(ctx.X, ctx.V, ctx.R, delta, ctx.scale);
  if (ctx.kind == ColumnKind::Binary) {
    return connecting_binary(ctx.X, ctx.R, ctx.V, sel.psi, delta, ctx.scale);
  }
  return connecting_continuous(ctx.X, ctx.R, ctx.V, sel.psi, delta,
                               ctx.scale);
}

struct ResolvedAxes {
  std::vector<SweepAxis> axes;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> strides;  // last axis fastest
  std::size_t total = 1;
};

ResolvedAxes resolve_axes(
    const AnalysisPlan& plan,
    const std::vector<std::pair<std::string, std::vector<double>>>& axes_in) {
  if (axes_in.empty()) {
    throw ParseError("sweep needs at least one axis");
  }
  ResolvedAxes r;
  std::set<std::string> seen;
  for (const auto& [name, grid_in] : axes_in) {
    if (!seen.insert(name).second) {
      throw ParseError("mechanism '" + name +
                       "' appears on more than one sweep axis");
    }
    std::size_t k = plan.mechanisms.size();
    for (std::size_t i = 0; i < plan.mechanisms.size(); ++i) {
      if (plan.mechanisms[i].name == name) {
        k = i;
        break;
      }
    }
    if (k == plan.mechanisms.size()) {
      throw ParseError("unknown mechanism '" + name + "'");
    }
    if (plan.mechanisms[k].sensitivity.kind == SensitivityKind::None) {
      throw ParseError("mechanism '" + name +
                       "' has no sensitivity parameter to vary");
    }
    if (grid_in.empty()) {
      throw ParseError("empty grid for mechanism '" + name + "'");
    }
    std::vector<double> grid = grid_in;
    for (double g : grid) {
      if (!std::isfinite(g)) {
        throw ParseError("non-finite grid value for mechanism '" + name +
                         "'");
      }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) {
      throw ParseError("grid for mechanism '" + name +
                       "' must contain 0 (the reference point)");
    }
    SweepAxis ax;
    ax.mechanism_index = k;
    ax.mechanism = name;
    ax.grid = std::move(grid);
    r.axes.push_back(std::move(ax));
  }
  r.sizes.resize(r.axes.size());
  for (std::size_t a = 0; a < r.axes.size(); ++a) {
    r.sizes[a] = r.axes[a].grid.size();
  }
  r.total = 1;
  for (std::size_t s : r.sizes) {
    if (r.total > 10000000 / s) {
      throw ParseError("sweep grid exceeds 10 million cells");
    }
    r.total *= s;
  }
  r.strides.assign(r.axes.size(), 1);
  for (std::size_t a = r.axes.size(); a-- > 1;) {
    r.strides[a - 1] = r.strides[a] * r.sizes[a];
  }
  return r;
}

bool is_mar_anchor(const std::vector<double>& delta) {
  for (double d : delta) {
    if (d != 0.0) return false;
  }
  return true;
}

}  // namespace

SweepResult sweep_grid(
    const ColumnTable& table, const AnalysisPlan& plan,
    const std::vector<std::pair<std::string, std::vector<double>>>& axes_in,
    const SweepOptions& opt) {
  validate_plan(table, plan);
  if (opt.M == 0) {
    throw ParseError("number of imputations must be at least 1");
  }
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
    throw ParseError("alpha must be in (0, 1)");
  }
  const ResolvedAxes r = resolve_axes(plan, axes_in);
  const std::size_t n_axes = r.axes.size();

  // Connecting quantities on an IPW axis depend only on that axis's delta
  // (the selection fit sees nothing else), so compute one per grid point
  // up front. MI axes report the mean imputed target per cell instead.
  std::vector<std::vector<double>> axis_conn(n_axes);
  std::vector<std::vector<char>> axis_clip(n_axes);
  std::vector<char> axis_is_mi(n_axes, 0);
  for (std::size_t a = 0; a < n_axes; ++a) {
    const SubMechanism& m = plan.mechanisms[r.axes[a].mechanism_index];
    axis_is_mi[a] = m.method == Method::Mi ? 1 : 0;
    axis_conn[a].assign(r.sizes[a], kNaN);
    axis_clip[a].assign(r.sizes[a], 0);
    if (m.method != Method::Ipw) continue;
    const IpwConnectContext ctx =
        build_connect_context(table, plan, r.axes[a].mechanism_index);
    if (!ctx.valid) continue;
    for (std::size_t i = 0; i < r.sizes[a]; ++i) {
      try {
        const ConnectingEstimate ce = connect_at(ctx, r.axes[a].grid[i]);
        axis_conn[a][i] = ce.value;
        axis_clip[a][i] = ce.clipped ? 1 : 0;
      } catch (const NumericalError&) {
        // stays NaN
      }
    }
  }

  SweepResult out;
  out.axes = r.axes;
  for (const SubMechanism& m : plan.mechanisms) {
    out.mechanism_names.push_back(m.name);
  }
  out.cells.resize(r.total);
  std::mutex name_mutex;

  parallel_for(r.total, opt.threads, [&](std::size_t c) {
    SweepCell& cell = out.cells[c];
    DeltaMap dmap;
    std::vector<std::size_t> idx(n_axes);
    for (std::size_t a = 0; a < n_axes; ++a) {
      idx[a] = (c / r.strides[a]) % r.sizes[a];
      dmap[r.axes[a].mechanism] = r.axes[a].grid[idx[a]];
    }
    cell.delta = delta_vector(plan, dmap);
    cell.connecting.assign(n_axes, kNaN);
    cell.connect_clipped.assign(n_axes, 0);
    // Seeding by the delta vector makes cells placement-independent: any
    // sweep containing the same delta point reproduces it bit-for-bit,
    // and the all-zero cell equals a direct run under opt.seed.
    const std::uint64_t cell_seed = rng::hash_delta(opt.seed, cell.delta);
    try {
      const BlendedFit fit =
          run_blended(table, plan, dmap, opt.M, cell_seed, opt.weight_cap);
      {
        std::lock_guard<std::mutex> g(name_mutex);
        if (out.coef_names.empty()) out.coef_names = fit.coef_names;
      }
      cell.theta = fit.theta_hat;
      cell.n_analysis = fit.n_analysis;
      cell.analysis_ess_min = *std::min_element(fit.analysis_ess.begin(),
                                                fit.analysis_ess.end());
      for (const MechanismDiagnostics& d : fit.diagnostics) {
        if (d.method == Method::Mi) continue;
        cell.min_pi = std::min(cell.min_pi, d.min_pi);
        cell.max_weight = std::max(cell.max_weight, d.max_weight);
        cell.extreme_weight_warning =
            cell.extreme_weight_warning || d.extreme_weight_warning;
      }
      for (std::size_t a = 0; a < n_axes; ++a) {
        if (axis_is_mi[a]) {
          const std::size_t mk = r.axes[a].mechanism_index;
          const auto& mean_imp = fit.diagnostics[mk].mean_imputed;
          const auto it =
              mean_imp.find(plan.mechanisms[mk].sensitivity.target);
          if (it != mean_imp.end()) cell.connecting[a] = it->second;
        } else {
          cell.connecting[a] = axis_conn[a][idx[a]];
          cell.connect_clipped[a] = axis_clip[a][idx[a]];
        }
      }
      if (opt.B > 0) {
        const BootstrapResult br =
            bootstrap_mi(table, plan, dmap, opt.B, opt.M, opt.alpha,
                         cell_seed, 1, opt.weight_cap);
        cell.ci_lower = br.ci_lower;
        cell.ci_upper = br.ci_upper;
      }
      cell.ok = true;
    } catch (const NumericalError& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.connecting.assign(n_axes, kNaN);
      cell.connect_clipped.assign(n_axes, 0);
    }
  });

  for (const SweepCell& cell : out.cells) {
    if (!cell.ok) ++out.n_failed;
  }
  return out;
}

SweepResult conditional_sweep(const ColumnTable& table,
                              const AnalysisPlan& plan,
                              const std::string& mechanism,
                              const std::vector<double>& grid,
                              const SweepOptions& opt) {
  return sweep_grid(table, plan, {{mechanism, grid}}, opt);
}

SweepResult two_way_sweep(const ColumnTable& table, const AnalysisPlan& plan,
                          const std::string& mechanism_a,
                          const std::vector<double>& grid_a,
                          const std::string& mechanism_b,
                          const std::vector<double>& grid_b,
                          const SweepOptions& opt) {
  if (mechanism_a == mechanism_b) {
    throw ParseError("two-way sweep needs two distinct mechanisms");
  }
  return sweep_grid(table, plan, {{mechanism_a, grid_a}, {mechanism_b, grid_b}},
                    opt);
}

ConnectingEstimate connecting_binary(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& R,
                                     const Eigen::VectorXd& V,
                                     const Eigen::VectorXd& psi, double delta,
                                     double scale) {
  const Eigen::Index n = X.rows();
  if (R.size() != n || V.size() != n || psi.size() != X.cols()) {
    throw ParseError("connecting quantity: dimension mismatch");
  }
  if (!(scale > 0.0)) {
    throw ParseError("connecting quantity: scale must be positive");
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd rv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rv[i] = (R[i] > 0.5 && V[i] > 0.5) ? 1.0 : 0.0;
  }
  const ModelFit f_rv = fit_logistic(X, rv, ones);
  const ModelFit f_r = fit_logistic(X, R, ones);
  double sum = 0.0;
  std::size_t n0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (R[i] > 0.5) continue;
    const double eta_sel = X.row(i).dot(psi);
    const double p_joint = stable_expit(X.row(i).dot(f_rv.coefficients));
    const double p_miss = 1.0 - stable_expit(X.row(i).dot(f_r.coefficients));
    if (!(p_miss > 0.0)) {
      throw NumericalError(
          "connecting quantity: fitted missingness probability underflowed");
    }
    const double term =
        std::exp(-eta_sel - delta / scale) * p_joint / p_miss;
    if (!std::isfinite(term)) {
      throw NumericalError("connecting quantity: odds term overflowed");
    }
    sum += term;
    ++n0;
  }
  if (n0 == 0) {
    throw NumericalError("connecting quantity: no rows with indicator 0");
  }
  ConnectingEstimate out;
  out.value = sum / static_cast<double>(n0);
  if (out.value < 0.0) {
    out.value = 0.0;
    out.clipped = true;
  } else if (out.value > 1.0) {
    out.value = 1.0;
    out.clipped = true;
  }
  return out;
}

ConnectingEstimate connecting_continuous(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& R,
                                         const Eigen::VectorXd& V,
                                         const Eigen::VectorXd& psi,
                                         double delta, double scale) {
  const Eigen::Index n = X.rows();
  if (R.size() != n || V.size() != n || psi.size() != X.cols()) {
    throw ParseError("connecting quantity: dimension mismatch");
  }
  if (!(scale > 0.0)) {
    throw ParseError("connecting quantity: scale must be positive");
  }
  const ModelFit f_r = fit_logistic(X, R, Eigen::VectorXd::Ones(n));
  std::vector<Eigen::Index> obs, mis;
  for (Eigen::Index i = 0; i < n; ++i) {
    (R[i] > 0.5 ? obs : mis).push_back(i);
  }
  if (obs.empty()) {
    throw NumericalError("connecting quantity: no rows with indicator 1");
  }
  if (mis.empty()) {
    throw NumericalError("connecting quantity: no rows with indicator 0");
  }
  Eigen::MatrixXd X1(static_cast<Eigen::Index>(obs.size()), X.cols());
  Eigen::VectorXd w(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const Eigen::Index i = obs[j];
    X1.row(static_cast<Eigen::Index>(j)) = X.row(i);
    const double eta = -X.row(i).dot(psi) - delta * V[i] / scale +
                       X.row(i).dot(f_r.coefficients);
    const double wi = V[i] * std::exp(eta);
    if (!std::isfinite(wi)) {
      throw NumericalError("connecting quantity: odds weight overflowed");
    }
    w[static_cast<Eigen::Index>(j)] = wi;
  }
  const ModelFit f_w =
      fit_linear(X1, w, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(obs.size())));
  double sum = 0.0;
  for (const Eigen::Index i : mis) {
    sum += X.row(i).dot(f_w.coefficients);
  }
  ConnectingEstimate out;
  out.value = sum / static_cast<double>(mis.size());
  return out;
}

ConnectingEstimate connecting_quantity(const ColumnTable& table,
                                       const AnalysisPlan& plan,
                                       std::size_t k, double delta_k) {
  validate_plan(table, plan);
  if (k >= plan.mechanisms.size()) {
    throw ParseError("mechanism index out of range");
  }
  const SubMechanism& m = plan.mechanisms[k];
  if (m.method != Method::Ipw ||
      m.sensitivity.kind != SensitivityKind::IpwLinear) {
    throw ParseError(
        "connecting quantity requires an inverse-probability-weighted "
        "mechanism with a linear departure");
  }
  const IpwConnectContext ctx = build_connect_context(table, plan, k);
  if (!ctx.valid) {
    throw NumericalError("connecting quantity: " + ctx.why);
  }
  return connect_at(ctx, delta_k);
}

TippingResult tipping_point(const ColumnTable& table, const AnalysisPlan& plan,
                            const std::string& mechanism,
                            const std::string& coefficient, double interval_lo,
                            double interval_hi, std::size_t B, std::size_t M,
                            double alpha, std::uint64_t seed, int threads,
                            double weight_cap) {
  validate_plan(table, plan);
  std::size_t k = plan.mechanisms.size();
  for (std::size_t i = 0; i < plan.mechanisms.size(); ++i) {
    if (plan.mechanisms[i].name == mechanism) {
      k = i;
      break;
    }
  }
  if (k == plan.mechanisms.size()) {
    throw ParseError("unknown mechanism '" + mechanism + "'");
  }
  if (plan.mechanisms[k].sensitivity.kind == SensitivityKind::None) {
    throw ParseError("mechanism '" + mechanism +
                     "' has no sensitivity parameter to vary");
  }
  if (!(interval_lo <= 0.0) || !(interval_hi >= 0.0) ||
      !(interval_lo < interval_hi)) {
    throw ParseError(
        "tipping search interval must contain 0 and have positive width");
  }

  TippingResult out;
  std::size_t coef_idx = std::numeric_limits<std::size_t>::max();
  std::map<double, bool> cache;
  double last_lo = 0.0, last_hi = 0.0;

  const auto status = [&](double d) -> bool {
    const auto it = cache.find(d);
    if (it != cache.end()) return it->second;
    DeltaMap dm;
    dm[mechanism] = d;
    const std::vector<double> dvec = delta_vector(plan, dm);
    BootstrapResult br;
    try {
      br = bootstrap_mi(table, plan, dm, B, M, alpha,
                        rng::hash_delta(seed, dvec), threads, weight_cap);
    } catch (const NumericalError& e) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", d);
      throw NumericalError("tipping search failed at delta=" +
                           std::string(buf) + ": " + e.what());
    }
    if (coef_idx == std::numeric_limits<std::size_t>::max()) {
      for (std::size_t i = 0; i < br.coef_names.size(); ++i) {
        if (br.coef_names[i] == coefficient) {
          coef_idx = i;
          break;
        }
      }
      if (coef_idx == std::numeric_limits<std::size_t>::max()) {
        std::string have;
        for (const std::string& nm : br.coef_names) {
          if (!have.empty()) have += ", ";
          have += nm;
        }
        throw ParseError("unknown coefficient '" + coefficient +
                         "'; the analysis model has: " + have);
      }
    }
    last_lo = br.ci_lower[static_cast<Eigen::Index>(coef_idx)];
    last_hi = br.ci_upper[static_cast<Eigen::Index>(coef_idx)];
    const bool sig = last_lo > 0.0 || last_hi < 0.0;
    cache[d] = sig;
    out.probes.emplace_back(d, sig);
    return sig;
  };

  const bool mar_sig = status(0.0);
  out.significant_at_mar = mar_sig;
  if (last_lo == 0.0 || last_hi == 0.0) {
    out.found = true;
    out.delta_star = 0.0;
    return out;
  }

  // Probe the endpoint and its midpoint; if either flips, bisect the
  // innermost flip bracket down to resolution 0.05 and report the flipped
  // end (the smallest delta known to change the conclusion).
  const auto search_side = [&](double endpoint) -> std::pair<bool, double> {
    const double e = endpoint;
    const double h = endpoint / 2.0;
    const bool flip_e = status(e) != mar_sig;
    const bool flip_h = status(h) != mar_sig;
    double flipped = 0.0, base = 0.0;
    if (flip_h) {
      flipped = h;
      base = 0.0;
    } else if (flip_e) {
      flipped = e;
      base = h;
    } else {
      return {false, 0.0};
    }
    while (std::abs(flipped - base) > 0.05) {
      const double mid = 0.5 * (flipped + base);
      if (status(mid) != mar_sig) {
        flipped = mid;
      } else {
        base = mid;
      }
    }
    return {true, flipped};
  };

  std::pair<bool, double> left{false, 0.0}, right{false, 0.0};
  if (interval_lo < 0.0) left = search_side(interval_lo);
  if (interval_hi > 0.0) right = search_side(interval_hi);
  if (left.first && right.first) {
    out.found = true;
    out.delta_star = std::abs(left.second) <= std::abs(right.second)
                         ? left.second
                         : right.second;
  } else if (left.first) {
    out.found = true;
    out.delta_star = left.second;
  } else if (right.first) {
    out.found = true;
    out.delta_star = right.second;
  }
  return out;
}

namespace {

Column continuous_column(std::vector<double> values,
                         std::vector<std::uint8_t> mask) {
  Column c;
  c.kind = ColumnKind::Continuous;
  c.values = std::move(values);
  c.mask = std::move(mask);
  return c;
}

Column binary_column(std::vector<double> values,
                     std::vector<std::uint8_t> mask) {
  Column c;
  c.kind = ColumnKind::Binary;
  c.values = std::move(values);
  c.mask = std::move(mask);
  return c;
}

Column categorical_column(std::vector<double> values,
                          std::vector<std::uint8_t> mask,
                          std::vector<std::string> levels) {
  Column c;
  c.kind = ColumnKind::Categorical;
  c.values = std::move(values);
  c.mask = std::move(mask);
  c.levels = std::move(levels);
  c.baseline = 0;
  return c;
}

bool any_cell_ci(const SweepResult& s) {
  for (const SweepCell& cell : s.cells) {
    if (cell.ci_lower.size() > 0) return true;
  }
  return false;
}

// Names for the per-mechanism delta columns; falls back to the axis
// mechanisms when the full plan-order list is absent.
std::vector<std::string> delta_column_mechanisms(const SweepResult& s) {
  if (!s.mechanism_names.empty()) return s.mechanism_names;
  std::vector<std::string> out;
  for (const SweepAxis& ax : s.axes) out.push_back(ax.mechanism);
  return out;
}

double cell_delta_for(const SweepResult& s, const SweepCell& cell,
                      std::size_t col, const std::vector<std::string>& mechs) {
  if (!s.mechanism_names.empty()) {
    return col < cell.delta.size() ? cell.delta[col] : 0.0;
  }
  const std::size_t k = s.axes[col].mechanism_index;
  (void)mechs;
  return k < cell.delta.size() ? cell.delta[k] : 0.0;
}

}  // namespace

ColumnTable sweep_long_table(const SweepResult& sweep) {
  const std::size_t n_axes = sweep.axes.size();
  const std::size_t n_coef = sweep.coef_names.size();
  const std::size_t per_cell = std::max<std::size_t>(n_coef, 1);
  const std::size_t n = sweep.cells.size() * per_cell;
  const bool with_ci = any_cell_ci(sweep);
  const std::vector<std::string> mechs = delta_column_mechanisms(sweep);
  const std::size_t n_mech = mechs.size();

  std::vector<std::vector<double>> dv(n_mech, std::vector<double>(n, 0.0));
  std::vector<double> anchor(n, 0.0), coef(n, 0.0), est(n, 0.0);
  std::vector<double> lo(n, 0.0), hi(n, 0.0), stat(n, 0.0);
  std::vector<double> n_an(n, 0.0), ess(n, 0.0), mpi(n, 0.0), mw(n, 0.0);
  std::vector<double> warn(n, 0.0);
  std::vector<std::vector<double>> conn(n_axes, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> clip(n_axes, std::vector<double>(n, 0.0));
  std::vector<std::uint8_t> m_full(n, 1), m_coef(n, 1), m_est(n, 1);
  std::vector<std::uint8_t> m_ci(n, 1), m_diag(n, 1);
  std::vector<std::vector<std::uint8_t>> m_conn(
      n_axes, std::vector<std::uint8_t>(n, 1));

  std::size_t rix = 0;
  for (const SweepCell& cell : sweep.cells) {
    const bool at_anchor = is_mar_anchor(cell.delta);
    for (std::size_t j = 0; j < per_cell; ++j, ++rix) {
      for (std::size_t a = 0; a < n_mech; ++a) {
        dv[a][rix] = cell_delta_for(sweep, cell, a, mechs);
      }
      anchor[rix] = at_anchor ? 1.0 : 0.0;
      stat[rix] = cell.ok ? 0.0 : 1.0;
      if (n_coef == 0) {
        m_coef[rix] = 0;
      } else {
        coef[rix] = static_cast<double>(j);
      }
      const bool have_est =
          cell.ok && cell.theta.size() == static_cast<Eigen::Index>(n_coef) &&
          n_coef > 0;
      if (have_est) {
        est[rix] = cell.theta[static_cast<Eigen::Index>(j)];
      } else {
        m_est[rix] = 0;
      }
      if (have_est && cell.ci_lower.size() ==
                          static_cast<Eigen::Index>(n_coef)) {
        lo[rix] = cell.ci_lower[static_cast<Eigen::Index>(j)];
        hi[rix] = cell.ci_upper[static_cast<Eigen::Index>(j)];
      } else {
        m_ci[rix] = 0;
      }
      if (cell.ok) {
        n_an[rix] = static_cast<double>(cell.n_analysis);
        ess[rix] = cell.analysis_ess_min;
        mpi[rix] = cell.min_pi;
        mw[rix] = cell.max_weight;
        warn[rix] = cell.extreme_weight_warning ? 1.0 : 0.0;
      } else {
        m_diag[rix] = 0;
      }
      for (std::size_t a = 0; a < n_axes; ++a) {
        const double cv =
            a < cell.connecting.size() ? cell.connecting[a] : kNaN;
        if (std::isfinite(cv)) {
          conn[a][rix] = cv;
          clip[a][rix] =
              (a < cell.connect_clipped.size() && cell.connect_clipped[a])
                  ? 1.0
                  : 0.0;
        } else {
          m_conn[a][rix] = 0;
        }
      }
    }
  }

  ColumnTable t(n);
  for (std::size_t a = 0; a < n_mech; ++a) {
    t.add_column("delta_" + mechs[a], continuous_column(std::move(dv[a]), m_full));
  }
  t.add_column("mar_anchor", binary_column(std::move(anchor), m_full));
  std::vector<std::string> coef_levels = sweep.coef_names;
  if (coef_levels.empty()) coef_levels.push_back("(none)");
  t.add_column("coef_name",
               categorical_column(std::move(coef), std::move(m_coef),
                                  std::move(coef_levels)));
  t.add_column("estimate", continuous_column(std::move(est), m_est));
  if (with_ci) {
    t.add_column("ci_lo", continuous_column(std::move(lo), m_ci));
    t.add_column("ci_hi", continuous_column(std::move(hi), std::move(m_ci)));
  }
  t.add_column("status",
               categorical_column(std::move(stat), m_full, {"ok", "failed"}));
  t.add_column("n_analysis", continuous_column(std::move(n_an), m_diag));
  t.add_column("ess_min", continuous_column(std::move(ess), m_diag));
  t.add_column("min_pi", continuous_column(std::move(mpi), m_diag));
  t.add_column("max_weight", continuous_column(std::move(mw), m_diag));
  t.add_column("extreme_weights",
               binary_column(std::move(warn), std::move(m_diag)));
  for (std::size_t a = 0; a < n_axes; ++a) {
    t.add_column("connect_" + sweep.axes[a].mechanism,
                 continuous_column(std::move(conn[a]), m_conn[a]));
    t.add_column("connect_clipped_" + sweep.axes[a].mechanism,
                 binary_column(std::move(clip[a]), std::move(m_conn[a])));
  }
  return t;
}

ColumnTable sweep_cell_table(const SweepResult& sweep) {
  const std::size_t n_axes = sweep.axes.size();
  const std::size_t n_coef = sweep.coef_names.size();
  const std::size_t n = sweep.cells.size();
  const bool with_ci = any_cell_ci(sweep);

  ColumnTable t(n);
  std::vector<std::uint8_t> m_full(n, 1);
  const std::vector<std::string> mechs = delta_column_mechanisms(sweep);
  for (std::size_t a = 0; a < mechs.size(); ++a) {
    std::vector<double> v(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      v[c] = cell_delta_for(sweep, sweep.cells[c], a, mechs);
    }
    t.add_column("delta_" + mechs[a], continuous_column(std::move(v), m_full));
  }
  {
    std::vector<double> v(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      v[c] = is_mar_anchor(sweep.cells[c].delta) ? 1.0 : 0.0;
    }
    t.add_column("mar_anchor", binary_column(std::move(v), m_full));
  }
  {
    std::vector<double> v(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      v[c] = sweep.cells[c].ok ? 0.0 : 1.0;
    }
    t.add_column("status",
                 categorical_column(std::move(v), m_full, {"ok", "failed"}));
  }
  for (std::size_t j = 0; j < n_coef; ++j) {
    std::vector<double> v(n, 0.0);
    std::vector<std::uint8_t> m(n, 1);
    for (std::size_t c = 0; c < n; ++c) {
      const SweepCell& cell = sweep.cells[c];
      if (cell.ok &&
          cell.theta.size() == static_cast<Eigen::Index>(n_coef)) {
        v[c] = cell.theta[static_cast<Eigen::Index>(j)];
      } else {
        m[c] = 0;
      }
    }
    t.add_column("est_" + sweep.coef_names[j],
                 continuous_column(std::move(v), std::move(m)));
  }
  if (with_ci) {
    for (std::size_t j = 0; j < n_coef; ++j) {
      std::vector<double> vl(n, 0.0), vh(n, 0.0);
      std::vector<std::uint8_t> m(n, 1);
      for (std::size_t c = 0; c < n; ++c) {
        const SweepCell& cell = sweep.cells[c];
        if (cell.ok &&
            cell.ci_lower.size() == static_cast<Eigen::Index>(n_coef)) {
          vl[c] = cell.ci_lower[static_cast<Eigen::Index>(j)];
          vh[c] = cell.ci_upper[static_cast<Eigen::Index>(j)];
        } else {
          m[c] = 0;
        }
      }
      t.add_column("lo_" + sweep.coef_names[j],
                   continuous_column(std::move(vl), m));
      t.add_column("hi_" + sweep.coef_names[j],
                   continuous_column(std::move(vh), std::move(m)));
    }
  }
  {
    std::vector<double> na(n, 0.0), ess(n, 0.0), mpi(n, 0.0), mw(n, 0.0),
        warn(n, 0.0);
    std::vector<std::uint8_t> m(n, 1);
    for (std::size_t c = 0; c < n; ++c) {
      const SweepCell& cell = sweep.cells[c];
      if (cell.ok) {
        na[c] = static_cast<double>(cell.n_analysis);
        ess[c] = cell.analysis_ess_min;
        mpi[c] = cell.min_pi;
        mw[c] = cell.max_weight;
        warn[c] = cell.extreme_weight_warning ? 1.0 : 0.0;
      } else {
        m[c] = 0;
      }
    }
    t.add_column("n_analysis", continuous_column(std::move(na), m));
    t.add_column("ess_min", continuous_column(std::move(ess), m));
    t.add_column("min_pi", continuous_column(std::move(mpi), m));
    t.add_column("max_weight", continuous_column(std::move(mw), m));
    t.add_column("extreme_weights",
                 binary_column(std::move(warn), std::move(m)));
  }
  for (std::size_t a = 0; a < n_axes; ++a) {
    std::vector<double> cv(n, 0.0), cl(n, 0.0);
    std::vector<std::uint8_t> m(n, 1);
    for (std::size_t c = 0; c < n; ++c) {
      const SweepCell& cell = sweep.cells[c];
      const double v = a < cell.connecting.size() ? cell.connecting[a] : kNaN;
      if (std::isfinite(v)) {
        cv[c] = v;
        cl[c] = (a < cell.connect_clipped.size() && cell.connect_clipped[a])
                    ? 1.0
                    : 0.0;
      } else {
        m[c] = 0;
      }
    }
    t.add_column("connect_" + sweep.axes[a].mechanism,
                 continuous_column(std::move(cv), m));
    t.add_column("connect_clipped_" + sweep.axes[a].mechanism,
                 binary_column(std::move(cl), std::move(m)));
  }
  return t;
}

}  // namespace blendsa
