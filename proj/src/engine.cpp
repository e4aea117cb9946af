#include "blendsa/engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "blendsa/cox.hpp"
#include "blendsa/error.hpp"
#include "blendsa/mnar.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

namespace {

void validate_formula_columns(const ColumnTable& table, const Formula& f,
                              const std::string& what) {
  for (const auto& c : f.term_columns())
    if (!table.has_column(c))
      throw ParseError(what + " references unknown column '" + c + "'");
}

void check_indicator(const ColumnTable& table, const SubMechanism& m) {
  const std::string ctx = "mechanism '" + m.name + "'";
  if (m.indicator.empty())
    throw ParseError(ctx + ": indicator column name is empty");
  if (!table.has_column(m.indicator))
    throw ParseError(ctx + ": indicator column '" + m.indicator + "' not found");
  const Column& c = table.column(m.indicator);
  if (c.kind != ColumnKind::Binary)
    throw ParseError(ctx + ": indicator column '" + m.indicator + "' must be binary");
  for (std::size_t i = 0; i < c.mask.size(); ++i)
    if (!c.mask[i])
      throw ParseError(ctx + ": indicator column '" + m.indicator +
                       "' is missing for subject " + std::to_string(i + 1));
}

double ess_of(const std::vector<double>& w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

// Pre-parsed formulas for one mechanism.
struct MechContext {
  Formula selection;                                   // Ipw
  Formula hazard;                                      // CoxIpw
  std::vector<std::vector<Formula>> patterns;          // Mi: per variable
  std::vector<std::vector<std::vector<std::string>>> pattern_cols;
};

}  // namespace

std::string AnalysisPlan::assignment_code() const {
  std::string s;
  for (const auto& m : mechanisms) s.push_back(m.code());
  return s;
}

void validate_plan(const ColumnTable& table, const AnalysisPlan& plan) {
  std::unordered_set<std::string> names;
  std::unordered_set<std::string> owned;
  for (const auto& m : plan.mechanisms) {
    const std::string ctx = "mechanism '" + m.name + "'";
    if (m.name.empty()) throw ParseError("every mechanism needs a nonempty name");
    if (!names.insert(m.name).second)
      throw ParseError("duplicate mechanism name '" + m.name + "'");
    check_indicator(table, m);
    for (const auto& v : m.variables) {
      if (!table.has_column(v))
        throw ParseError(ctx + ": variable column '" + v + "' not found");
      if (v == m.indicator)
        throw ParseError(ctx + ": variable '" + v + "' is its own indicator");
      if (!owned.insert(v).second)
        throw ParseError("variable '" + v + "' belongs to more than one mechanism");
    }
    const bool has_survival =
        !m.time.empty() || !m.event.empty() || !m.hazard_model.empty();
    switch (m.method) {
      case Method::Ipw: {
        if (m.selection_model.empty())
          throw ParseError(ctx + ": a weighting mechanism needs a selection model");
        Formula f = parse_formula(m.selection_model);
        if (!f.response.empty())
          throw ParseError(ctx +
                           ": the selection model must not declare a response "
                           "(the indicator column is the response)");
        validate_formula_columns(table, f, ctx + " selection model");
        if (!m.imputation.empty())
          throw ParseError(ctx + ": imputation models belong to imputation mechanisms");
        if (has_survival)
          throw ParseError(ctx + ": survival fields belong to Cox-weighted mechanisms");
        if (m.sensitivity.kind == SensitivityKind::MiShift)
          throw ParseError(ctx + ": a shift departure applies only to imputation mechanisms");
        break;
      }
      case Method::Mi: {
        if (m.variables.empty())
          throw ParseError(ctx + ": an imputation mechanism must name at least one variable");
        if (!m.selection_model.empty())
          throw ParseError(ctx + ": selection models belong to weighting mechanisms");
        if (has_survival)
          throw ParseError(ctx + ": survival fields belong to Cox-weighted mechanisms");
        if (m.sensitivity.kind == SensitivityKind::IpwLinear)
          throw ParseError(ctx + ": an offset departure applies only to weighting mechanisms");
        std::unordered_set<std::string> seen;
        for (const auto& im : m.imputation) {
          if (std::find(m.variables.begin(), m.variables.end(), im.variable) ==
              m.variables.end())
            throw ParseError(ctx + ": imputation model for '" + im.variable +
                             "', which is not one of its variables");
          if (!seen.insert(im.variable).second)
            throw ParseError(ctx + ": duplicate imputation entry for '" + im.variable + "'");
          if (im.formulas.empty())
            throw ParseError(ctx + ": no imputation formulas for '" + im.variable + "'");
          for (const auto& s : im.formulas) {
            Formula f = parse_formula(s);
            if (f.response != im.variable)
              throw ParseError(ctx + ": imputation formula '" + s +
                               "' must have response '" + im.variable + "'");
            validate_formula_columns(table, f,
                                     ctx + " imputation model for '" + im.variable + "'");
          }
        }
        for (const auto& v : m.variables)
          if (!seen.count(v))
            throw ParseError(ctx + ": variable '" + v + "' has no imputation model");
        break;
      }
      case Method::CoxIpw: {
        if (m.time.empty() || m.event.empty())
          throw ParseError(ctx + ": Cox weighting needs time and event columns");
        for (const auto& c : {m.time, m.event})
          if (!table.has_column(c))
            throw ParseError(ctx + ": column '" + c + "' not found");
        if (table.column(m.time).kind != ColumnKind::Continuous)
          throw ParseError(ctx + ": time column '" + m.time + "' must be continuous");
        if (table.column(m.event).kind != ColumnKind::Binary)
          throw ParseError(ctx + ": event column '" + m.event + "' must be binary");
        if (m.hazard_model.empty())
          throw ParseError(ctx + ": Cox weighting needs a hazard model");
        Formula f = parse_formula(m.hazard_model);
        if (!f.response.empty())
          throw ParseError(ctx + ": the hazard model must not declare a response");
        if (f.intercept)
          throw ParseError(ctx +
                           ": the hazard model must exclude the intercept "
                           "(write '~ 0 + ...')");
        validate_formula_columns(table, f, ctx + " hazard model");
        if (!(m.horizon >= 0.0))
          throw ParseError(ctx + ": horizon must be nonnegative");
        if (!m.selection_model.empty())
          throw ParseError(ctx + ": selection models belong to plain weighting mechanisms");
        if (!m.imputation.empty())
          throw ParseError(ctx + ": imputation models belong to imputation mechanisms");
        if (m.sensitivity.kind != SensitivityKind::None)
          throw ParseError(ctx + ": Cox-weighted mechanisms are delta-free");
        break;
      }
    }
    if (m.sensitivity.kind != SensitivityKind::None) {
      if (std::find(m.variables.begin(), m.variables.end(),
                    m.sensitivity.target) == m.variables.end())
        throw ParseError(ctx + ": sensitivity target '" + m.sensitivity.target +
                         "' is not one of its variables");
      if (m.sensitivity.kind == SensitivityKind::IpwLinear &&
          !(m.sensitivity.scale > 0.0))
        throw ParseError(ctx + ": sensitivity scale must be positive");
    }
  }
  if (plan.analysis_model.empty())
    throw ParseError("the plan needs an analysis model");
  Formula af = parse_formula(plan.analysis_model);
  if (af.response.empty())
    throw ParseError("the analysis model needs a response");
  if (!table.has_column(af.response))
    throw ParseError("analysis response column '" + af.response + "' not found");
  validate_formula_columns(table, af, "analysis model");
}

std::vector<std::string> delta_names(const AnalysisPlan& plan) {
  std::vector<std::string> out;
  for (const auto& m : plan.mechanisms)
    if (m.sensitivity.kind != SensitivityKind::None) out.push_back(m.name);
  return out;
}

std::vector<double> delta_vector(const AnalysisPlan& plan,
                                 const DeltaMap& delta) {
  for (const auto& [name, value] : delta) {
    auto it = std::find_if(plan.mechanisms.begin(), plan.mechanisms.end(),
                           [&](const SubMechanism& m) { return m.name == name; });
    if (it == plan.mechanisms.end())
      throw ParseError("delta entry for unknown mechanism '" + name + "'");
    if (it->sensitivity.kind == SensitivityKind::None && value != 0.0)
      throw ParseError("mechanism '" + name +
                       "' does not accept a sensitivity parameter");
  }
  std::vector<double> out;
  out.reserve(plan.mechanisms.size());
  for (const auto& m : plan.mechanisms) {
    auto it = delta.find(m.name);
    out.push_back(it == delta.end() ? 0.0 : it->second);
  }
  return out;
}

ModelFit fit_analysis(const DataView& view, const Formula& formula,
                      const Eigen::VectorXd& weights,
                      const std::vector<std::size_t>& rows) {
  DesignMatrix d = design_matrix(view, formula, rows);
  Eigen::VectorXd y = response_vector(view, formula, rows);
  return fit_linear(d.X, y, weights, d.column_names);
}

std::vector<std::size_t> rows_alive_before(const ColumnTable& table,
                                           const AnalysisPlan& plan,
                                           std::size_t k) {
  if (k > plan.mechanisms.size())
    throw Error("mechanism index out of range");
  const std::size_t n = table.n_rows();
  std::vector<char> alive(n, 1);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& m = plan.mechanisms[j];
    if (m.method == Method::Mi) continue;
    const Column& c = table.column(m.indicator);
    for (std::size_t i = 0; i < n; ++i)
      if (c.values[i] < 0.5) alive[i] = 0;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.push_back(i);
  return out;
}

ColumnTable derive_indicators(
    const ColumnTable& table,
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        groups) {
  ColumnTable out = table;
  const std::size_t n = table.n_rows();
  for (const auto& [name, vars] : groups) {
    if (out.has_column(name))
      throw Error("indicator column '" + name + "' already exists");
    if (vars.empty())
      throw Error("indicator '" + name + "' has an empty variable group");
    Column ind;
    ind.kind = ColumnKind::Binary;
    ind.values.assign(n, 1.0);
    ind.mask.assign(n, 1);
    for (const auto& v : vars) {
      const Column& c = out.column(v);
      for (std::size_t i = 0; i < n; ++i)
        if (!c.mask[i]) ind.values[i] = 0.0;
    }
    out.add_column(name, std::move(ind));
  }
  return out;
}

namespace {

// Shared mutable state of one imputation replicate.
struct RunState {
  DataView view;
  std::vector<char> alive;
  std::vector<double> weight;
  Rng rng;

  explicit RunState(const ColumnTable& table, std::uint64_t stream)
      : view(table),
        alive(table.n_rows(), 1),
        weight(table.n_rows(), 1.0),
        rng(stream) {}

  std::vector<std::size_t> alive_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < alive.size(); ++i)
      if (alive[i]) out.push_back(i);
    return out;
  }
};

void process_ipw(const ColumnTable& table, const SubMechanism& mech,
                 const MechContext& ctx, double delta_k, RunState& st,
                 MechanismDiagnostics& diag) {
  const std::vector<std::size_t> rows = st.alive_rows();
  const Column& rcol = table.column(mech.indicator);
  Eigen::VectorXd R(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) R[j] = rcol.values[rows[j]];
  DesignMatrix d = design_matrix(st.view, ctx.selection, rows);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(rows.size());
  if (mech.sensitivity.kind == SensitivityKind::IpwLinear && delta_k != 0.0) {
    for (std::size_t j = 0; j < rows.size(); ++j)
      if (R[j] > 0.5)
        offset[j] = delta_k * st.view.value(mech.sensitivity.target, rows[j]) /
                    mech.sensitivity.scale;
  }
  SelectionSolution sol = solve_selection(d.X, R, offset);
  std::vector<double> mech_w;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (R[j] > 0.5) {
      st.weight[rows[j]] *= sol.weights[j];
      mech_w.push_back(sol.weights[j]);
      if (sol.weights[j] > diag.max_weight) diag.max_weight = sol.weights[j];
    } else {
      st.alive[rows[j]] = 0;
    }
  }
  if (sol.min_pi < diag.min_pi) diag.min_pi = sol.min_pi;
  diag.extreme_weight_warning =
      diag.extreme_weight_warning || sol.extreme_weight_warning;
  diag.ess.push_back(ess_of(mech_w));
}

void process_cox(const ColumnTable& table, const SubMechanism& mech,
                 const MechContext& ctx, RunState& st,
                 MechanismDiagnostics& diag) {
  const std::vector<std::size_t> rows = st.alive_rows();
  Eigen::VectorXd t(rows.size()), e(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    t[j] = st.view.value(mech.time, rows[j]);
    e[j] = st.view.value(mech.event, rows[j]);
  }
  DesignMatrix d = design_matrix(st.view, ctx.hazard, rows);
  CoxFit fit = fit_cox(d.X, t, e, d.column_names);
  const Column& rcol = table.column(mech.indicator);
  std::vector<double> mech_w;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rcol.values[rows[j]] > 0.5) {
      Eigen::VectorXd x = d.X.row(j).transpose();
      const double w = enrollment_weight(fit, x, mech.horizon);
      st.weight[rows[j]] *= w;
      mech_w.push_back(w);
      if (w > diag.max_weight) diag.max_weight = w;
      if (1.0 / w < diag.min_pi) diag.min_pi = 1.0 / w;
    } else {
      st.alive[rows[j]] = 0;
    }
  }
  diag.extreme_weight_warning =
      diag.extreme_weight_warning || diag.min_pi < kPiFloor;
  diag.ess.push_back(ess_of(mech_w));
}

void process_mi(const ColumnTable& table, const SubMechanism& mech,
                const MechContext& ctx, double delta_k, RunState& st,
                bool first_replicate, MechanismDiagnostics& diag,
                std::map<std::string, double>& imp_sum,
                std::map<std::string, std::size_t>& imp_count) {
  for (std::size_t vi = 0; vi < mech.imputation.size(); ++vi) {
    const ImputationModel& im = mech.imputation[vi];
    const Column& vcol = table.column(im.variable);
    const std::vector<Formula>& pats = ctx.patterns[vi];
    const auto& pat_cols = ctx.pattern_cols[vi];
    const double shift = (mech.sensitivity.kind == SensitivityKind::MiShift &&
                          mech.sensitivity.target == im.variable)
                             ? delta_k
                             : 0.0;

    // Partition alive rows by the first pattern whose covariates are all
    // available; each pattern fits on its own observed stratum.
    std::vector<std::vector<std::size_t>> fit_rows(pats.size());
    std::vector<std::vector<std::size_t>> imp_rows(pats.size());
    for (std::size_t i = 0; i < st.alive.size(); ++i) {
      if (!st.alive[i]) continue;
      int pat = -1;
      for (std::size_t p = 0; p < pats.size(); ++p) {
        bool ok = true;
        for (const auto& c : pat_cols[p]) {
          if (!st.view.available(c, i)) {
            ok = false;
            break;
          }
        }
        if (ok) {
          pat = static_cast<int>(p);
          break;
        }
      }
      const bool observed = st.view.available(im.variable, i);
      if (pat < 0) {
        if (!observed)
          throw MissingValueError("no imputation pattern for variable '" +
                                  im.variable + "' covers subject " +
                                  std::to_string(i + 1));
        continue;  // observed row outside all patterns: unused for fitting
      }
      if (observed)
        fit_rows[pat].push_back(i);
      else
        imp_rows[pat].push_back(i);
    }

    std::size_t total_imputed = 0;
    for (std::size_t p = 0; p < pats.size(); ++p) {
      if (imp_rows[p].empty()) continue;
      if (fit_rows[p].empty())
        throw NumericalError("imputation pattern " + std::to_string(p + 1) +
                             " for variable '" + im.variable +
                             "' has rows to impute but none to fit");
      DesignMatrix dfit = design_matrix(st.view, pats[p], fit_rows[p]);
      Eigen::VectorXd yfit = response_vector(st.view, pats[p], fit_rows[p]);
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(dfit.X.rows());
      ModelFit mf;
      switch (vcol.kind) {
        case ColumnKind::Continuous:
          mf = fit_linear(dfit.X, yfit, ones, dfit.column_names);
          break;
        case ColumnKind::Binary:
          mf = fit_logistic(dfit.X, yfit, ones, dfit.column_names);
          break;
        case ColumnKind::Categorical:
          mf = fit_multinomial(dfit.X, yfit, ones, vcol.n_levels(),
                               vcol.baseline, dfit.column_names);
          break;
      }
      ParameterDraw draw = posterior_draw(mf, st.rng);
      DesignMatrix dimp = design_matrix(st.view, pats[p], imp_rows[p]);
      Eigen::VectorXd vals;
      switch (vcol.kind) {
        case ColumnKind::Continuous:
          vals = impute_continuous(draw, dimp.X, shift, st.rng);
          break;
        case ColumnKind::Binary:
          vals = impute_binary(draw, dimp.X, shift, st.rng);
          break;
        case ColumnKind::Categorical:
          vals = impute_categorical(draw, dimp.X, vcol.n_levels(),
                                    vcol.baseline, shift, st.rng);
          break;
      }
      for (std::size_t j = 0; j < imp_rows[p].size(); ++j)
        st.view.write_imputed(im.variable, imp_rows[p][j], vals[j]);
      imp_sum[im.variable] += vals.sum();
      imp_count[im.variable] += static_cast<std::size_t>(vals.size());
      total_imputed += imp_rows[p].size();
    }
    if (first_replicate) diag.n_imputed[im.variable] = total_imputed;
  }
}

}  // namespace

BlendedFit run_blended(const ColumnTable& table, const AnalysisPlan& plan,
                       const DeltaMap& delta, std::size_t M,
                       std::uint64_t seed, double weight_cap) {
  validate_plan(table, plan);
  if (M < 1) throw ParseError("the number of imputations M must be at least 1");
  if (weight_cap < 0.0) throw ParseError("weight cap must be nonnegative");
  const std::vector<double> dvec = delta_vector(plan, delta);
  const std::size_t K = plan.mechanisms.size();

  std::vector<MechContext> ctx(K);
  bool any_mi = false;
  for (std::size_t k = 0; k < K; ++k) {
    const SubMechanism& m = plan.mechanisms[k];
    switch (m.method) {
      case Method::Ipw:
        ctx[k].selection = parse_formula(m.selection_model);
        break;
      case Method::CoxIpw:
        ctx[k].hazard = parse_formula(m.hazard_model);
        break;
      case Method::Mi: {
        any_mi = true;
        for (const auto& im : m.imputation) {
          std::vector<Formula> fs;
          std::vector<std::vector<std::string>> cols;
          for (const auto& s : im.formulas) {
            fs.push_back(parse_formula(s));
            cols.push_back(fs.back().term_columns());
          }
          ctx[k].patterns.push_back(std::move(fs));
          ctx[k].pattern_cols.push_back(std::move(cols));
        }
        break;
      }
    }
  }
  const Formula analysis = parse_formula(plan.analysis_model);

  // Without imputation mechanisms every replicate is identical: compute one.
  const std::size_t M_run = any_mi ? M : 1;

  BlendedFit out;
  out.delta = dvec;
  out.diagnostics.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    out.diagnostics[k].name = plan.mechanisms[k].name;
    out.diagnostics[k].method = plan.mechanisms[k].method;
  }
  std::map<std::string, double> imp_sum;
  std::map<std::string, std::size_t> imp_count;

  Eigen::MatrixXd thetas;
  for (std::size_t l = 0; l < M_run; ++l) {
    RunState st(table, rng::derive_stream(seed, l));
    for (std::size_t k = 0; k < K; ++k) {
      const SubMechanism& mech = plan.mechanisms[k];
      try {
        switch (mech.method) {
          case Method::Ipw:
            process_ipw(table, mech, ctx[k], dvec[k], st, out.diagnostics[k]);
            break;
          case Method::CoxIpw:
            process_cox(table, mech, ctx[k], st, out.diagnostics[k]);
            break;
          case Method::Mi:
            process_mi(table, mech, ctx[k], dvec[k], st, l == 0,
                       out.diagnostics[k], imp_sum, imp_count);
            break;
        }
      } catch (const Error& e) {
        throw NumericalError("replicate " + std::to_string(l + 1) +
                             ", mechanism '" + mech.name + "': " + e.what());
      }
    }

    const std::vector<std::size_t> rows = st.alive_rows();
    if (rows.empty())
      throw NumericalError("no rows remain for the analysis fit");
    Eigen::VectorXd w(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      double v = st.weight[rows[j]];
      if (weight_cap > 0.0 && v > weight_cap) v = weight_cap;
      w[j] = v;
    }
    ModelFit afit;
    DesignMatrix d = design_matrix(st.view, analysis, rows);
    try {
      Eigen::VectorXd y = response_vector(st.view, analysis, rows);
      afit = fit_linear(d.X, y, w, d.column_names);
    } catch (const Error& e) {
      throw NumericalError("replicate " + std::to_string(l + 1) +
                           ", analysis fit: " + e.what());
    }
    if (l == 0) {
      out.coef_names = d.column_names;
      out.n_analysis = rows.size();
      thetas.resize(static_cast<Eigen::Index>(M_run), afit.coefficients.size());
    }
    thetas.row(static_cast<Eigen::Index>(l)) = afit.coefficients.transpose();
    std::vector<double> wv(w.data(), w.data() + w.size());
    out.analysis_ess.push_back(ess_of(wv));
  }

  // Expand the single computed replicate to the requested M.
  out.theta_per_imputation.resize(static_cast<Eigen::Index>(M), thetas.cols());
  for (std::size_t l = 0; l < M; ++l)
    out.theta_per_imputation.row(static_cast<Eigen::Index>(l)) =
        thetas.row(static_cast<Eigen::Index>(std::min(l, M_run - 1)));
  if (M_run == 1 && M > 1) {
    out.analysis_ess.assign(M, out.analysis_ess[0]);
    for (auto& diag : out.diagnostics)
      if (!diag.ess.empty()) diag.ess.assign(M, diag.ess[0]);
  }
  out.theta_hat = out.theta_per_imputation.colwise().mean();
  for (std::size_t k = 0; k < K; ++k) {
    for (const auto& im : plan.mechanisms[k].imputation) {
      auto it = imp_count.find(im.variable);
      if (it != imp_count.end() && it->second > 0)
        out.diagnostics[k].mean_imputed[im.variable] =
            imp_sum[im.variable] / static_cast<double>(it->second);
    }
  }
  return out;
}

}  // namespace blendsa
