#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/cox.hpp"
#include "blendsa/engine.hpp"
#include "blendsa/error.hpp"
#include "blendsa/formula.hpp"
#include "blendsa/glm.hpp"
#include "blendsa/mnar.hpp"
#include "blendsa/rng.hpp"
#include "util.hpp"

using namespace blendsa;
using testutil::col_bin;
using testutil::col_cont;
using testutil::rnorm;
using testutil::runif;

namespace {

std::vector<std::size_t> all_rows(const ColumnTable& t) {
  std::vector<std::size_t> r(t.n_rows());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Fully observed table: y ~ x with two binary response indicators.
ColumnTable two_stage_table(Rng& rng, std::size_t n) {
  std::vector<double> y(n), x(n), r1(n), r2(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rnorm(rng);
    y[i] = 1.0 + 0.5 * x[i] + 0.3 * rnorm(rng);
    r1[i] = runif(rng) < 0.8 ? 1.0 : 0.0;
    r2[i] = runif(rng) < 0.75 ? 1.0 : 0.0;
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y));
  t.add_column("x", col_cont(x));
  t.add_column("R1", col_bin(r1));
  t.add_column("R2", col_bin(r2));
  return t;
}

SubMechanism ipw_decision(const std::string& name, const std::string& ind,
                          const std::string& model) {
  SubMechanism m;
  m.name = name;
  m.method = Method::Ipw;
  m.indicator = ind;
  m.selection_model = model;
  return m;
}

SubMechanism mi_mech(const std::string& name, const std::string& ind,
                     const std::string& var,
                     const std::vector<std::string>& formulas) {
  SubMechanism m;
  m.name = name;
  m.method = Method::Mi;
  m.indicator = ind;
  m.variables = {var};
  m.imputation = {{var, formulas}};
  return m;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("plan validation rejects incoherent plans with clear messages") {
  Rng rng(3);
  ColumnTable t = two_stage_table(rng, 40);
  AnalysisPlan p;
  p.analysis_model = "y ~ x";

  SUBCASE("unknown indicator") {
    p.mechanisms = {ipw_decision("A", "nope", "~ x")};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("'nope' not found"), ParseError);
  }
  SUBCASE("non-binary indicator") {
    p.mechanisms = {ipw_decision("A", "x", "~ 1")};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("must be binary"), ParseError);
  }
  SUBCASE("indicator with a missing cell") {
    ColumnTable t2 = t;
    std::vector<double> v(40, 1.0);
    std::vector<unsigned char> mask(40, 1);
    mask[7] = 0;
    t2.add_column("Rbad", col_bin(v, mask));
    p.mechanisms = {ipw_decision("A", "Rbad", "~ x")};
    CHECK_THROWS_WITH_AS(validate_plan(t2, p),
                         doctest::Contains("missing for subject 8"), ParseError);
  }
  SUBCASE("duplicate mechanism names") {
    p.mechanisms = {ipw_decision("A", "R1", "~ x"),
                    ipw_decision("A", "R2", "~ x")};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("duplicate mechanism name"),
                         ParseError);
  }
  SUBCASE("variable owned twice") {
    SubMechanism a = mi_mech("A", "R1", "y", {"y ~ x"});
    SubMechanism b = mi_mech("B", "R2", "y", {"y ~ x"});
    p.mechanisms = {a, b};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("more than one mechanism"),
                         ParseError);
  }
  SUBCASE("weighting without a selection model") {
    p.mechanisms = {ipw_decision("A", "R1", "")};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("needs a selection model"),
                         ParseError);
  }
  SUBCASE("selection model with a response") {
    p.mechanisms = {ipw_decision("A", "R1", "R1 ~ x")};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("must not declare a response"),
                         ParseError);
  }
  SUBCASE("imputation formula with the wrong response") {
    p.mechanisms = {mi_mech("A", "R1", "y", {"x ~ 1"})};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("must have response 'y'"),
                         ParseError);
  }
  SUBCASE("imputation variable without a model") {
    SubMechanism m = mi_mech("A", "R1", "y", {"y ~ x"});
    m.variables = {"y", "x"};
    p.mechanisms = {m};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("'x' has no imputation model"),
                         ParseError);
  }
  SUBCASE("hazard model with an intercept") {
    SubMechanism m;
    m.name = "A";
    m.method = Method::CoxIpw;
    m.indicator = "R1";
    m.time = "x";
    m.event = "R2";
    m.hazard_model = "~ x";
    m.horizon = 0.5;
    p.mechanisms = {m};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("exclude the intercept"), ParseError);
  }
  SUBCASE("sensitivity target outside the mechanism") {
    SubMechanism m = ipw_decision("A", "R1", "~ x");
    m.sensitivity = {SensitivityKind::IpwLinear, "y", 1.0};
    p.mechanisms = {m};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("not one of its variables"),
                         ParseError);
  }
  SUBCASE("shift departures only apply to imputation mechanisms") {
    SubMechanism m = ipw_decision("A", "R1", "~ x");
    m.variables = {"y"};
    m.sensitivity = {SensitivityKind::MiShift, "y", 1.0};
    p.mechanisms = {m};
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("only to imputation mechanisms"),
                         ParseError);
  }
  SUBCASE("analysis model needs a response") {
    p.mechanisms = {ipw_decision("A", "R1", "~ x")};
    p.analysis_model = "~ x";
    CHECK_THROWS_WITH_AS(validate_plan(t, p),
                         doctest::Contains("needs a response"), ParseError);
  }
}

TEST_CASE("delta maps expand in plan order with absent entries as zero") {
  SubMechanism a = ipw_decision("A", "R1", "~ x");
  a.variables = {"v"};
  a.sensitivity = {SensitivityKind::IpwLinear, "v", 2.0};
  SubMechanism b = ipw_decision("B", "R2", "~ x");  // delta-free decision
  SubMechanism c = mi_mech("C", "R1", "y", {"y ~ x"});
  c.sensitivity = {SensitivityKind::MiShift, "y", 1.0};
  AnalysisPlan p;
  p.mechanisms = {a, b, c};
  p.analysis_model = "y ~ x";

  CHECK(p.assignment_code() == "IIM");
  CHECK(delta_names(p) == std::vector<std::string>{"A", "C"});
  CHECK(delta_vector(p, {}) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(delta_vector(p, {{"A", 1.5}, {"C", -2.0}}) ==
        std::vector<double>{1.5, 0.0, -2.0});
  CHECK(delta_vector(p, {{"B", 0.0}}) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_WITH_AS(delta_vector(p, {{"Z", 0.1}}),
                       doctest::Contains("unknown mechanism 'Z'"), ParseError);
  CHECK_THROWS_WITH_AS(delta_vector(p, {{"B", 0.5}}),
                       doctest::Contains("does not accept"), ParseError);
}

TEST_CASE("derived indicators flag complete variable groups") {
  ColumnTable t(5);
  std::vector<unsigned char> my = {1, 0, 1, 1, 0};
  std::vector<unsigned char> mz = {1, 1, 0, 1, 1};
  t.add_column("y", col_cont({1, 2, 3, 4, 5}, my));
  t.add_column("z", col_cont({5, 4, 3, 2, 1}, mz));
  ColumnTable out = derive_indicators(t, {{"Ry", {"y"}}, {"Ryz", {"y", "z"}}});
  const Column& ry = out.column("Ry");
  const Column& ryz = out.column("Ryz");
  CHECK(ry.kind == ColumnKind::Binary);
  CHECK(ry.values == std::vector<double>{1, 0, 1, 1, 0});
  CHECK(ryz.values == std::vector<double>{1, 0, 0, 1, 0});
  CHECK_THROWS_WITH_AS(derive_indicators(t, {{"y", {"z"}}}),
                       doctest::Contains("already exists"), Error);
  CHECK_THROWS_WITH_AS(derive_indicators(t, {{"G", {}}}),
                       doctest::Contains("empty variable group"), Error);
}

TEST_CASE("rows_alive_before gates on weighting indicators only") {
  Rng rng(5);
  ColumnTable t = two_stage_table(rng, 30);
  AnalysisPlan p;
  p.mechanisms = {mi_mech("M0", "R1", "y", {"y ~ x"}),
                  ipw_decision("A", "R1", "~ x"),
                  ipw_decision("B", "R2", "~ x")};
  p.mechanisms[0].variables = {};  // reuse y without claiming it twice
  p.mechanisms[0].imputation.clear();
  p.mechanisms[0].method = Method::Ipw;
  p.mechanisms[0].selection_model = "~ 1";

  CHECK(rows_alive_before(t, p, 0).size() == 30);
  // An imputation mechanism never drops rows.
  AnalysisPlan q;
  q.mechanisms = {mi_mech("M", "R1", "y", {"y ~ x"}),
                  ipw_decision("B", "R2", "~ x")};
  q.analysis_model = "y ~ x";
  CHECK(rows_alive_before(t, q, 1).size() == 30);
  const auto after_b = rows_alive_before(t, q, 2);
  for (std::size_t i : after_b) CHECK(t.column("R2").values[i] == 1.0);
  std::size_t n2 = 0;
  for (double v : t.column("R2").values) n2 += v == 1.0;
  CHECK(after_b.size() == n2);
  CHECK_THROWS_AS(rows_alive_before(t, q, 3), Error);
}

TEST_CASE("complete data reduces to ordinary least squares") {
  Rng rng(7);
  ColumnTable t = two_stage_table(rng, 60);
  AnalysisPlan p;
  p.mechanisms = {mi_mech("M", "R1", "y", {"y ~ x"})};
  p.mechanisms[0].variables = {};
  p.mechanisms[0].imputation.clear();
  p.mechanisms[0].method = Method::Mi;
  // y is fully observed, so the single imputation model never fires.
  p.mechanisms[0].variables = {"y"};
  p.mechanisms[0].imputation = {{"y", {"y ~ x"}}};
  p.analysis_model = "y ~ x";

  BlendedFit fit = run_blended(t, p, {}, 4, 99);

  DataView view(t);
  DesignMatrix d = design_matrix(view, parse_formula("y ~ x"), all_rows(t));
  Eigen::VectorXd y = response_vector(view, parse_formula("y ~ x"), all_rows(t));
  ModelFit ols = fit_linear(d.X, y, Eigen::VectorXd::Ones(60), d.column_names);

  CHECK(fit.coef_names == d.column_names);
  CHECK(fit.theta_hat == ols.coefficients);
  CHECK(fit.n_analysis == 60);
  for (int m = 0; m < 4; ++m)
    CHECK(fit.theta_per_imputation.row(m) == ols.coefficients.transpose());
  CHECK(fit.diagnostics[0].n_imputed.at("y") == 0);
  CHECK(fit.diagnostics[0].mean_imputed.empty());
}

TEST_CASE("sequential weighting multiplies stage weights") {
  Rng rng(11);
  ColumnTable t = two_stage_table(rng, 200);
  AnalysisPlan p;
  p.mechanisms = {ipw_decision("A", "R1", "~ x"),
                  ipw_decision("B", "R2", "~ x")};
  p.analysis_model = "y ~ x";
  BlendedFit fit = run_blended(t, p, {}, 3, 123);

  // Replay the chain by hand with the public pieces.
  DataView view(t);
  const Formula sel = parse_formula("~ x");
  const auto rows0 = all_rows(t);
  DesignMatrix d1 = design_matrix(view, sel, rows0);
  Eigen::VectorXd r1(200);
  for (int i = 0; i < 200; ++i) r1[i] = t.column("R1").values[i];
  SelectionSolution s1 =
      solve_selection(d1.X, r1, Eigen::VectorXd::Zero(200));

  std::vector<std::size_t> rows1;
  std::vector<double> w;
  for (int i = 0; i < 200; ++i) {
    if (r1[i] == 1.0) {
      rows1.push_back(i);
      w.push_back(s1.weights[i]);
    }
  }
  DesignMatrix d2 = design_matrix(view, sel, rows1);
  Eigen::VectorXd r2(rows1.size());
  for (std::size_t j = 0; j < rows1.size(); ++j)
    r2[j] = t.column("R2").values[rows1[j]];
  SelectionSolution s2 = solve_selection(
      d2.X, r2, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows1.size())));

  std::vector<std::size_t> rows2;
  std::vector<double> w2;
  for (std::size_t j = 0; j < rows1.size(); ++j) {
    if (r2[j] == 1.0) {
      rows2.push_back(rows1[j]);
      w2.push_back(w[j] * s2.weights[j]);
    }
  }
  DesignMatrix da = design_matrix(view, parse_formula("y ~ x"), rows2);
  Eigen::VectorXd ya = response_vector(view, parse_formula("y ~ x"), rows2);
  Eigen::VectorXd wv =
      Eigen::Map<Eigen::VectorXd>(w2.data(), static_cast<Eigen::Index>(w2.size()));
  ModelFit manual = fit_linear(da.X, ya, wv, da.column_names);

  CHECK(fit.theta_hat == manual.coefficients);
  CHECK(fit.n_analysis == rows2.size());
  CHECK(fit.diagnostics[0].min_pi == doctest::Approx(s1.min_pi));
  CHECK(fit.diagnostics[1].min_pi == doctest::Approx(s2.min_pi));
  double s = 0.0, ss = 0.0;
  for (double v : w2) s += v, ss += v * v;
  CHECK(fit.analysis_ess[0] == doctest::Approx(s * s / ss));
  CHECK(fit.analysis_ess.size() == 3);  // replicated to M
}

TEST_CASE("weight-only plans compute one replicate and copy it") {
  Rng rng(13);
  ColumnTable t = two_stage_table(rng, 150);
  AnalysisPlan p;
  p.mechanisms = {ipw_decision("A", "R1", "~ x")};
  p.analysis_model = "y ~ x";
  BlendedFit fit = run_blended(t, p, {}, 7, 55);
  CHECK(fit.theta_per_imputation.rows() == 7);
  for (int m = 1; m < 7; ++m)
    CHECK(fit.theta_per_imputation.row(m) == fit.theta_per_imputation.row(0));
  CHECK(fit.analysis_ess == std::vector<double>(7, fit.analysis_ess[0]));
  CHECK(fit.diagnostics[0].ess.size() == 7);
  // Averaging seven copies only costs rounding, not value.
  CHECK((fit.theta_hat - fit.theta_per_imputation.row(0).transpose())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("an empty delta map and explicit zeros are bit-identical") {
  Rng rng(17);
  const std::size_t n = 150;
  std::vector<double> y(n), x(n), v(n), r1(n);
  std::vector<unsigned char> mv(n, 1), my(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rnorm(rng);
    v[i] = 0.4 * x[i] + rnorm(rng);
    y[i] = 1.0 + 0.5 * x[i] + 0.3 * rnorm(rng);
    r1[i] = runif(rng) < 0.75 ? 1.0 : 0.0;
    if (r1[i] == 0.0) mv[i] = 0;      // v observed iff R1
    if (runif(rng) < 0.3) my[i] = 0;  // y missing at random
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y, my));
  t.add_column("x", col_cont(x));
  t.add_column("v", col_cont(v, mv));
  t.add_column("R1", col_bin(r1));
  t.add_column("Ry", col_bin([&] {
                 std::vector<double> d(n);
                 for (std::size_t i = 0; i < n; ++i) d[i] = my[i];
                 return d;
               }()));

  SubMechanism a = ipw_decision("A", "R1", "~ x");
  a.variables = {"v"};
  a.sensitivity = {SensitivityKind::IpwLinear, "v", 1.0};
  SubMechanism m = mi_mech("M", "Ry", "y", {"y ~ x"});
  m.sensitivity = {SensitivityKind::MiShift, "y", 1.0};
  AnalysisPlan p;
  p.mechanisms = {a, m};
  p.analysis_model = "y ~ x";

  BlendedFit f0 = run_blended(t, p, {}, 5, 77);
  BlendedFit fz = run_blended(t, p, {{"A", 0.0}, {"M", 0.0}}, 5, 77);
  CHECK(f0.theta_per_imputation == fz.theta_per_imputation);
  CHECK(f0.theta_hat == fz.theta_hat);

  // A nonzero offset departure changes the weighting fit.
  BlendedFit fd = run_blended(t, p, {{"A", 1.0}}, 5, 77);
  CHECK(fd.theta_hat != f0.theta_hat);

  // And the offset path matches a hand-built selection solve.
  DataView view(t);
  const auto rows0 = all_rows(t);
  DesignMatrix d1 = design_matrix(view, parse_formula("~ x"), rows0);
  Eigen::VectorXd r(n), offset = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = r1[i];
    if (r1[i] == 1.0) offset[i] = 1.0 * v[i] / 1.0;
  }
  SelectionSolution sol = solve_selection(d1.X, r, offset);
  CHECK(fd.diagnostics[0].min_pi == doctest::Approx(sol.min_pi).epsilon(1e-12));
}

TEST_CASE("imputation shift moves continuous imputed means by exactly delta") {
  Rng rng(23);
  const std::size_t n = 250;
  std::vector<double> y(n), x(n);
  std::vector<unsigned char> my(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rnorm(rng);
    y[i] = 2.0 - x[i] + 0.5 * rnorm(rng);
    if (runif(rng) < 0.4) my[i] = 0;
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y, my));
  t.add_column("x", col_cont(x));
  t.add_column("Ry", col_bin([&] {
                 std::vector<double> d(n);
                 for (std::size_t i = 0; i < n; ++i) d[i] = my[i];
                 return d;
               }()));
  SubMechanism m = mi_mech("M", "Ry", "y", {"y ~ x"});
  m.sensitivity = {SensitivityKind::MiShift, "y", 1.0};
  AnalysisPlan p;
  p.mechanisms = {m};
  p.analysis_model = "y ~ x";

  BlendedFit f0 = run_blended(t, p, {}, 6, 31);
  BlendedFit f1 = run_blended(t, p, {{"M", 0.8}}, 6, 31);
  // Same seed consumes the same draws; the shift lands after the noise.
  CHECK(f1.diagnostics[0].mean_imputed.at("y") ==
        doctest::Approx(f0.diagnostics[0].mean_imputed.at("y") + 0.8)
            .epsilon(1e-14));
  std::size_t n_missing = 0;
  for (char c : my) n_missing += c == 0;
  CHECK(f0.diagnostics[0].n_imputed.at("y") == n_missing);
  CHECK(f0.n_analysis == n);  // imputation keeps every row
}

TEST_CASE("pattern lists route rows to the first available formula") {
  Rng rng(29);
  const std::size_t n = 150;
  // z observed on the first 90 rows only; y tracks the stratum so a pooled
  // or single-pattern fit would impute visibly wrong values.
  std::vector<double> y(n), z(n), x(n);
  std::vector<unsigned char> my(n, 1), mz(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rnorm(rng);
    z[i] = rnorm(rng);
    if (i < 90) {
      y[i] = 10.0 + 0.01 * rnorm(rng);
    } else {
      mz[i] = 0;
      y[i] = -10.0 + 0.01 * rnorm(rng);
      if (i >= 130) my[i] = 0;  // imputed rows all live in the z-missing stratum
    }
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y, my));
  t.add_column("z", col_cont(z, mz));
  t.add_column("x", col_cont(x));
  t.add_column("Ry", col_bin([&] {
                 std::vector<double> d(n);
                 for (std::size_t i = 0; i < n; ++i) d[i] = my[i];
                 return d;
               }()));

  AnalysisPlan p;
  p.mechanisms = {mi_mech("M", "Ry", "y", {"y ~ x + z", "y ~ x"})};
  p.analysis_model = "y ~ x";
  BlendedFit fit = run_blended(t, p, {}, 4, 404);
  // All 20 imputed rows sit in the fallback stratum, whose observed mean
  // is -10; the first pattern's stratum sits at +10.
  CHECK(fit.diagnostics[0].mean_imputed.at("y") ==
        doctest::Approx(-10.0).epsilon(0.05));
  CHECK(fit.diagnostics[0].n_imputed.at("y") == 20);

  // Without the fallback formula the z-missing rows are uncovered.
  AnalysisPlan bad = p;
  bad.mechanisms[0].imputation = {{"y", {"y ~ x + z"}}};
  CHECK_THROWS_WITH_AS(run_blended(t, bad, {}, 2, 404),
                       doctest::Contains("no imputation pattern"),
                       NumericalError);
}

TEST_CASE("Cox weighting reproduces hand-computed enrollment weights") {
  Rng rng(31);
  const std::size_t n = 160;
  std::vector<double> y(n), x(n), tt(n), ev(n), enr(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = runif(rng) < 0.5 ? 0.0 : 1.0;
    y[i] = 1.0 + x[i] + 0.4 * rnorm(rng);
    const double rate = std::exp(0.5 * x[i]);
    tt[i] = std::max(-std::log(1.0 - runif(rng)) / rate, 1e-3);
    ev[i] = runif(rng) < 0.8 ? 1.0 : 0.0;
    enr[i] = tt[i] > 0.4 ? 1.0 : 0.0;
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y));
  t.add_column("x", col_cont(x));
  t.add_column("time", col_cont(tt));
  t.add_column("event", col_bin(ev));
  t.add_column("E", col_bin(enr));

  SubMechanism m;
  m.name = "C";
  m.method = Method::CoxIpw;
  m.indicator = "E";
  m.time = "time";
  m.event = "event";
  m.hazard_model = "~ 0 + x";
  m.horizon = 0.4;
  AnalysisPlan p;
  p.mechanisms = {m};
  p.analysis_model = "y ~ x";
  BlendedFit fit = run_blended(t, p, {}, 2, 8);

  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd tv(n), evv(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = x[i];
    tv[i] = tt[i];
    evv[i] = ev[i];
  }
  CoxFit cf = fit_cox(X, tv, evv, {"x"});
  std::vector<std::size_t> rows;
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    if (enr[i] == 1.0) {
      rows.push_back(i);
      Eigen::VectorXd xi(1);
      xi << x[i];
      w.push_back(enrollment_weight(cf, xi, 0.4));
    }
  }
  DataView view(t);
  DesignMatrix da = design_matrix(view, parse_formula("y ~ x"), rows);
  Eigen::VectorXd ya = response_vector(view, parse_formula("y ~ x"), rows);
  Eigen::VectorXd wv =
      Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  ModelFit manual = fit_linear(da.X, ya, wv, da.column_names);
  CHECK(fit.theta_hat == manual.coefficients);
  CHECK(fit.n_analysis == rows.size());
  CHECK(fit.diagnostics[0].max_weight ==
        doctest::Approx(*std::max_element(w.begin(), w.end())).epsilon(1e-12));
}

TEST_CASE("weight caps truncate the accumulated analysis weights") {
  Rng rng(37);
  ColumnTable t = two_stage_table(rng, 200);
  AnalysisPlan p;
  p.mechanisms = {ipw_decision("A", "R1", "~ x")};
  p.analysis_model = "y ~ x";
  BlendedFit uncapped = run_blended(t, p, {}, 1, 9);
  const double cap = 1.05;  // below the typical 1/pi here
  BlendedFit capped = run_blended(t, p, {}, 1, 9, cap);
  CHECK(capped.theta_hat != uncapped.theta_hat);

  DataView view(t);
  const auto rows0 = all_rows(t);
  DesignMatrix d1 = design_matrix(view, parse_formula("~ x"), rows0);
  Eigen::VectorXd r1(200);
  for (int i = 0; i < 200; ++i) r1[i] = t.column("R1").values[i];
  SelectionSolution s1 = solve_selection(d1.X, r1, Eigen::VectorXd::Zero(200));
  std::vector<std::size_t> rows;
  std::vector<double> w;
  for (int i = 0; i < 200; ++i) {
    if (r1[i] == 1.0) {
      rows.push_back(i);
      w.push_back(std::min(s1.weights[i], cap));
    }
  }
  DesignMatrix da = design_matrix(view, parse_formula("y ~ x"), rows);
  Eigen::VectorXd ya = response_vector(view, parse_formula("y ~ x"), rows);
  Eigen::VectorXd wv =
      Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  ModelFit manual = fit_linear(da.X, ya, wv, da.column_names);
  CHECK(capped.theta_hat == manual.coefficients);
}

TEST_CASE("runs are reproducible by seed and vary across seeds") {
  Rng rng(41);
  const std::size_t n = 120;
  std::vector<double> y(n), x(n);
  std::vector<unsigned char> my(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rnorm(rng);
    y[i] = x[i] + rnorm(rng);
    if (runif(rng) < 0.35) my[i] = 0;
  }
  ColumnTable t(n);
  t.add_column("y", col_cont(y, my));
  t.add_column("x", col_cont(x));
  t.add_column("Ry", col_bin([&] {
                 std::vector<double> d(n);
                 for (std::size_t i = 0; i < n; ++i) d[i] = my[i];
                 return d;
               }()));
  AnalysisPlan p;
  p.mechanisms = {mi_mech("M", "Ry", "y", {"y ~ x"})};
  p.analysis_model = "y ~ x";

  BlendedFit a = run_blended(t, p, {}, 5, 1001);
  BlendedFit b = run_blended(t, p, {}, 5, 1001);
  BlendedFit c = run_blended(t, p, {}, 5, 1002);
  CHECK(a.theta_per_imputation == b.theta_per_imputation);
  CHECK(a.theta_per_imputation != c.theta_per_imputation);
  // Replicates differ among themselves: real posterior noise.
  CHECK(a.theta_per_imputation.row(0) != a.theta_per_imputation.row(1));
}

TEST_CASE("degenerate runs raise numerical errors") {
  Rng rng(43);
  ColumnTable t = two_stage_table(rng, 50);
  AnalysisPlan p;
  p.analysis_model = "y ~ x";

  SUBCASE("M must be positive") {
    p.mechanisms = {ipw_decision("A", "R1", "~ x")};
    CHECK_THROWS_AS(run_blended(t, p, {}, 0, 1), ParseError);
  }
  SUBCASE("negative weight cap") {
    p.mechanisms = {ipw_decision("A", "R1", "~ x")};
    CHECK_THROWS_AS(run_blended(t, p, {}, 2, 1, -1.0), ParseError);
  }
  SUBCASE("no rows left for the analysis") {
    // A survival mechanism whose indicator never fires drops everyone.
    ColumnTable t2 = t;
    t2.add_column("Z", col_bin(std::vector<double>(50, 0.0)));
    std::vector<double> tim(50);
    for (int i = 0; i < 50; ++i) tim[i] = 0.1 + runif(rng);
    t2.add_column("time", col_cont(tim));
    SubMechanism m;
    m.name = "C";
    m.method = Method::CoxIpw;
    m.indicator = "Z";
    m.time = "time";
    m.event = "R1";
    m.hazard_model = "~ 0 + x";
    m.horizon = 0.2;
    p.mechanisms = {m};
    CHECK_THROWS_WITH_AS(run_blended(t2, p, {}, 1, 1),
                         doctest::Contains("no rows remain"), NumericalError);
  }
  SUBCASE("mechanism failures carry the mechanism name") {
    // A constant column makes the selection design singular.
    ColumnTable t2 = t;
    t2.add_column("k", col_cont(std::vector<double>(50, 1.0)));
    p.mechanisms = {ipw_decision("A", "R1", "~ k")};
    CHECK_THROWS_WITH_AS(run_blended(t2, p, {}, 1, 1),
                         doctest::Contains("mechanism 'A'"), NumericalError);
  }
}

}  // TEST_SUITE
